#pragma once

// Downlink communication model: statistical per-subcarrier channels and the
// noncoherent coordinated-multipoint SINR, in expectation (the design metric)
// and per symbol realization (Monte-Carlo validation).
//
// Useful and interference powers accumulate across nodes without cross-node
// phase terms — each node's contribution enters as a power. The instantaneous
// evaluator mirrors that structure term by term: data symbols are unit-modulus
// (QPSK), radar symbols are circularly-symmetric Gaussian with identity
// covariance, and each (node, source) term contributes its realized power.

#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "covariance.hpp"
#include "scenario.hpp"

namespace disac {

/// Rayleigh-fading channels h(n, u, l) in C^{M_t} with i.i.d. CN(0, 1)
/// entries (normalized per-element gain, so E‖h‖² = M_t and transmit
/// beamforming gain grows with the array size).
class ChannelSet {
public:
    ChannelSet(int n_nodes, int n_users, int subcarriers, int tx_antennas, std::uint64_t seed)
        : nodes_(n_nodes), users_(n_users), subc_(subcarriers), mt_(tx_antennas), seed_(seed) {
        if (n_nodes < 1 || n_users < 0 || subcarriers < 1 || tx_antennas < 1)
            throw std::invalid_argument("ChannelSet: dimensions must be positive");
        h_.resize(static_cast<std::size_t>(n_nodes) * n_users * subcarriers);
        const double scale = 1.0 / std::sqrt(2.0);
        for (int n = 0; n < n_nodes; ++n)
            for (int u = 0; u < n_users; ++u)
                for (int l = 0; l < subcarriers; ++l) {
                    std::mt19937_64 gen(split_seed(
                        seed, (static_cast<std::uint64_t>(n) * n_users + u) * subcarriers + l));
                    std::normal_distribution<double> nd(0.0, 1.0);
                    VectorXcd v(tx_antennas);
                    for (int m = 0; m < tx_antennas; ++m)
                        v[m] = cxd(nd(gen), nd(gen)) * scale;
                    h_[index(n, u, l)] = std::move(v);
                }
    }

    int nodes() const { return nodes_; }
    int users() const { return users_; }
    int subcarriers() const { return subc_; }
    int tx_antennas() const { return mt_; }
    std::uint64_t seed() const { return seed_; }

    const VectorXcd& operator()(int n, int u, int l) const { return h_[index(n, u, l)]; }
    VectorXcd& operator()(int n, int u, int l) { return h_[index(n, u, l)]; }

private:
    std::size_t index(int n, int u, int l) const {
        if (n < 0 || n >= nodes_ || u < 0 || u >= users_ || l < 0 || l >= subc_)
            throw std::out_of_range("ChannelSet: index out of range");
        return (static_cast<std::size_t>(n) * users_ + u) * subc_ + l;
    }
    int nodes_, users_, subc_, mt_;
    std::uint64_t seed_;
    std::vector<VectorXcd> h_;
};

/// Beamformer that realizes a rank-relaxed communication covariance toward
/// channel h: w = (h^H R h)^{-1/2} R h. It preserves the quadratic form
/// h^H R h exactly while w w^H never exceeds R in the PSD order. Returns an
/// empty vector when R carries numerically no power toward h.
inline VectorXcd comm_beamformer(const MatrixXcd& cov, const VectorXcd& h) {
    const double quad = std::real(h.dot(cov * h));
    const double floor = 1e-12 * std::abs(cov.trace().real()) * h.squaredNorm();
    if (quad <= floor || !(quad > 0.0)) return VectorXcd();
    return cov * h / std::sqrt(quad);
}

/// Extracted transmit precoders: one communication beamformer per
/// (node, user, subcarrier) and one sensing factor (M_t x rank) per
/// (node, subcarrier). Inactive entries are empty/zero columns.
struct PrecoderSet {
    int nodes = 0, users = 0, subcarriers = 0, tx_antennas = 0;
    std::vector<VectorXcd> comm;   ///< (n*U + u)*L + l
    std::vector<MatrixXcd> sense;  ///< n*L + l

    PrecoderSet() = default;
    PrecoderSet(int n_nodes, int n_users, int n_subc, int n_tx)
        : nodes(n_nodes), users(n_users), subcarriers(n_subc), tx_antennas(n_tx),
          comm(static_cast<std::size_t>(n_nodes) * n_users * n_subc,
               VectorXcd::Zero(n_tx)),
          sense(static_cast<std::size_t>(n_nodes) * n_subc, MatrixXcd::Zero(n_tx, 0)) {}

    const VectorXcd& w_comm(int n, int u, int l) const {
        return comm.at((static_cast<std::size_t>(n) * users + u) * subcarriers + l);
    }
    VectorXcd& w_comm(int n, int u, int l) {
        return comm.at((static_cast<std::size_t>(n) * users + u) * subcarriers + l);
    }
    const MatrixXcd& w_sense(int n, int l) const {
        return sense.at(static_cast<std::size_t>(n) * subcarriers + l);
    }
    MatrixXcd& w_sense(int n, int l) {
        return sense.at(static_cast<std::size_t>(n) * subcarriers + l);
    }

    /// Node-block transmit covariance implied by the precoders on subcarrier
    /// l: sum of comm rank-one terms plus the sensing gram.
    MatrixXcd node_covariance(int n, int l) const {
        MatrixXcd R = MatrixXcd::Zero(tx_antennas, tx_antennas);
        for (int u = 0; u < users; ++u) {
            const VectorXcd& w = w_comm(n, u, l);
            R += w * w.adjoint();
        }
        const MatrixXcd& Ws = w_sense(n, l);
        if (Ws.cols() > 0) R += Ws * Ws.adjoint();
        return R;
    }

    /// Full covariance set implied by the precoders. Data symbols are
    /// scrambled per node (noncoherent combining), so they contribute only to
    /// the diagonal node blocks; radar symbols come from one shared pool per
    /// subcarrier of which node n consumes the first rank_n streams, giving
    /// cross-node blocks over the common leading columns.
    CovarianceSet to_covariances() const {
        CovarianceSet cov(nodes, tx_antennas, subcarriers, users);
        for (int l = 0; l < subcarriers; ++l)
            for (int n = 0; n < nodes; ++n) {
                cov.set_node_block(l, n, n, node_covariance(n, l));
                for (int u = 0; u < users; ++u) {
                    const VectorXcd& w = w_comm(n, u, l);
                    cov.comm(n, u, l) = w * w.adjoint();
                }
                for (int j = n + 1; j < nodes; ++j) {
                    const MatrixXcd& wi = w_sense(n, l);
                    const MatrixXcd& wj = w_sense(j, l);
                    const int shared = static_cast<int>(std::min(wi.cols(), wj.cols()));
                    if (shared > 0)
                        cov.set_node_block(
                            l, n, j, MatrixXcd(wi.leftCols(shared) * wj.leftCols(shared).adjoint()));
                }
            }
        return cov;
    }
};

/// Expected SINR of user u on subcarrier l under covariances R:
///   gamma = sum_n h^H Rc(n,u,l) h / (sum_n h^H (R_nn(l) - Rc(n,u,l)) h + sigma_c^2/L).
/// Only diagonal node blocks enter. A numerically negative denominator is
/// clipped at the noise floor; `clipped` reports whether that happened.
inline double average_sinr(const CovarianceSet& cov, const ChannelSet& ch, int u, int l,
                           double comm_noise, bool* clipped = nullptr) {
    if (cov.nodes() != ch.nodes() || cov.tx_antennas() != ch.tx_antennas() ||
        cov.subcarriers() != ch.subcarriers())
        throw std::invalid_argument("average_sinr: channel/covariance shape mismatch");
    double num = 0.0, den = 0.0;
    const double floor = comm_noise / cov.subcarriers();
    for (int n = 0; n < cov.nodes(); ++n) {
        const VectorXcd& h = ch(n, u, l);
        const MatrixXcd Rc = cov.comm(n, u, l);
        const MatrixXcd Rn = cov.node_block(l, n, n);
        num += std::real((h.adjoint() * Rc * h).value());
        den += std::real((h.adjoint() * (Rn - Rc) * h).value());
    }
    if (clipped) *clipped = den < 0.0;
    if (den < 0.0) den = 0.0;
    return num / (den + floor);
}

/// One Monte-Carlo realization of the transmitted symbols, mirroring the
/// second-moment model of PrecoderSet::to_covariances: unit-modulus QPSK
/// data per (node, user, subcarrier) — each node scrambles its copy of the
/// user data, so data streams are independent across nodes — and one CN(0, I)
/// radar stream pool per subcarrier of which node n consumes the first
/// rank_n entries.
struct SymbolDraw {
    std::vector<cxd> data;         ///< (n*users + u)*L + l
    std::vector<VectorXcd> radar;  ///< l, length = max sense rank over nodes

    static SymbolDraw make(const PrecoderSet& p, std::uint64_t seed) {
        SymbolDraw d;
        d.data.resize(static_cast<std::size_t>(p.nodes) * p.users * p.subcarriers);
        d.radar.resize(p.subcarriers);
        std::mt19937_64 gen(seed);
        std::uniform_int_distribution<int> qpsk(0, 3);
        std::normal_distribution<double> nd(0.0, 1.0);
        const double isq2 = 1.0 / std::sqrt(2.0);
        for (auto& s : d.data) {
            const int q = qpsk(gen);
            s = cxd((q & 1) ? -isq2 : isq2, (q & 2) ? -isq2 : isq2);
        }
        for (int l = 0; l < p.subcarriers; ++l) {
            int pool = 0;
            for (int n = 0; n < p.nodes; ++n)
                pool = std::max(pool, static_cast<int>(p.w_sense(n, l).cols()));
            VectorXcd v(pool);
            for (int i = 0; i < pool; ++i) v[i] = cxd(nd(gen), nd(gen)) * isq2;
            d.radar[l] = std::move(v);
        }
        return d;
    }
};

/// SINR of one realized symbol for user u on subcarrier l. Powers accumulate
/// per (node, source) term: the useful and each interference contribution
/// enter as realized powers, matching the expectation structure of
/// average_sinr (so the sample mean tracks the average SINR).
inline double instantaneous_sinr(const PrecoderSet& p, const ChannelSet& ch,
                                 const SymbolDraw& draw, int u, int l, double comm_noise) {
    double useful = 0.0, interf = 0.0;
    for (int n = 0; n < p.nodes; ++n) {
        const VectorXcd& h = ch(n, u, l);
        for (int up = 0; up < p.users; ++up) {
            const cxd s =
                draw.data[(static_cast<std::size_t>(n) * p.users + up) * p.subcarriers + l];
            const double pw = std::norm((h.adjoint() * p.w_comm(n, up, l)).value() * s);
            if (up == u)
                useful += pw;
            else
                interf += pw;
        }
        const MatrixXcd& Ws = p.w_sense(n, l);
        if (Ws.cols() > 0)
            interf += std::norm((h.adjoint() * (Ws * draw.radar[l].head(Ws.cols()))).value());
    }
    return useful / (interf + comm_noise / p.subcarriers);
}

}  // namespace disac
