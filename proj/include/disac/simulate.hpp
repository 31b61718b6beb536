#pragma once
// Monte-Carlo realization layer for the sensing side: realized transmit
// symbol matrices from a PrecoderSet, received snapshots through the
// monostatic/bistatic target returns, empirical transmit-covariance
// accumulation and instantaneous-SINR sampling. Everything is deterministic
// in (precoders, scenario, seed); sub-streams are split per symbol so batch
// size does not change earlier draws.

#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "disac/common.hpp"
#include "disac/comms.hpp"
#include "disac/covariance.hpp"
#include "disac/scenario.hpp"

namespace disac {

/// Realized transmit symbol matrix X_m (M_t x L) of node m for one symbol
/// draw: data beams scaled by the node's QPSK symbols plus the sensing
/// factor applied to the node's slice of the shared radar stream pool.
inline MatrixXcd transmit_symbol(const PrecoderSet& p, const SymbolDraw& draw, int m) {
    MatrixXcd x = MatrixXcd::Zero(p.tx_antennas, p.subcarriers);
    for (int l = 0; l < p.subcarriers; ++l) {
        for (int u = 0; u < p.users; ++u)
            x.col(l) += p.w_comm(m, u, l) *
                        draw.data[(static_cast<std::size_t>(m) * p.users + u) * p.subcarriers + l];
        const MatrixXcd& ws = p.w_sense(m, l);
        if (ws.cols() > 0) x.col(l) += ws * draw.radar[l].head(ws.cols());
    }
    return x;
}

/// A batch of received sensing snapshots: for each symbol t, the transmit
/// matrices X_m, the additive noise, and the noisy receptions Y_n. Fully
/// reproducible from (precoders, scenario, seed).
struct ReceptionBatch {
    int nodes = 0, rx_antennas = 0, tx_antennas = 0, subcarriers = 0, symbols = 0;
    std::uint64_t seed = 0;
    std::vector<MatrixXcd> x;      ///< t*nodes + m, M_t x L
    std::vector<MatrixXcd> y;      ///< t*nodes + n, M_r x L
    std::vector<MatrixXcd> noise;  ///< t*nodes + n, M_r x L

    const MatrixXcd& transmit(int m, int t) const {
        return x.at(static_cast<std::size_t>(t) * nodes + m);
    }
    const MatrixXcd& received(int n, int t) const {
        return y.at(static_cast<std::size_t>(t) * nodes + n);
    }
    const MatrixXcd& noise_at(int n, int t) const {
        return noise.at(static_cast<std::size_t>(t) * nodes + n);
    }
};

/// Synthesizes the noiseless reception of node n for a given set of transmit
/// matrices: Y_n = sum_m sum_k b(n,m,k) a_r(theta_{n,k}) (a_t(theta_{m,k})^T
/// X_m elementwise-times d(tau_n + tau_m)^T). Exposed separately because the
/// localization likelihood reuses it with candidate geometries.
inline MatrixXcd mean_reception(const Scenario& scen, const std::vector<MatrixXcd>& x_all,
                                int n) {
    const int mr = scen.ofdm.rx_antennas, subc = scen.ofdm.subcarriers;
    const double lam = scen.ofdm.wavelength_m, d0 = scen.ofdm.spacing();
    MatrixXcd y = MatrixXcd::Zero(mr, subc);
    for (int m = 0; m < scen.nodes(); ++m)
        for (int k = 0; k < scen.targets(); ++k) {
            const VectorXcd ar = steering_vector(scen.angle(n, k), mr, lam, d0);
            const VectorXcd at = steering_vector(scen.angle(m, k), scen.ofdm.tx_antennas, lam, d0);
            const VectorXcd d = delay_vector(scen.tof(n, k) + scen.tof(m, k), subc,
                                             scen.ofdm.bandwidth_hz);
            const Eigen::RowVectorXcd row =
                (at.transpose() * x_all[m]).cwiseProduct(d.transpose());
            y += scen.amplitude(n, m, k) * ar * row;
        }
    return y;
}

/// Draws `symbols` transmit realizations from the precoders and propagates
/// them through every monostatic and bistatic target return, adding
/// receiver noise with per-entry variance sigma_s^2 / L.
inline ReceptionBatch simulate_reception(const PrecoderSet& p, const Scenario& scen,
                                         std::uint64_t seed, int symbols = -1) {
    if (symbols < 0) symbols = scen.ofdm.symbols;
    if (symbols < 1) throw std::invalid_argument("simulate_reception: symbols must be >= 1");
    if (p.nodes != scen.nodes() || p.tx_antennas != scen.ofdm.tx_antennas ||
        p.subcarriers != scen.ofdm.subcarriers)
        throw std::invalid_argument("simulate_reception: precoder shape does not match scenario");

    ReceptionBatch batch;
    batch.nodes = p.nodes;
    batch.rx_antennas = scen.ofdm.rx_antennas;
    batch.tx_antennas = p.tx_antennas;
    batch.subcarriers = p.subcarriers;
    batch.symbols = symbols;
    batch.seed = seed;
    batch.x.reserve(static_cast<std::size_t>(symbols) * p.nodes);
    batch.y.reserve(static_cast<std::size_t>(symbols) * p.nodes);
    batch.noise.reserve(static_cast<std::size_t>(symbols) * p.nodes);

    std::mt19937_64 noise_gen(split_seed(seed, 0x6e6f697365ULL));
    std::normal_distribution<double> nd(
        0.0, std::sqrt(scen.power.sense_noise / scen.ofdm.subcarriers / 2.0));

    std::vector<MatrixXcd> x_t(p.nodes);
    for (int t = 0; t < symbols; ++t) {
        const SymbolDraw draw = SymbolDraw::make(p, split_seed(seed, t));
        for (int m = 0; m < p.nodes; ++m) {
            x_t[m] = transmit_symbol(p, draw, m);
            batch.x.push_back(x_t[m]);
        }
        for (int n = 0; n < p.nodes; ++n) {
            MatrixXcd z(batch.rx_antennas, p.subcarriers);
            for (Eigen::Index i = 0; i < z.size(); ++i)
                z.data()[i] = cxd(nd(noise_gen), nd(noise_gen));
            batch.y.push_back(mean_reception(scen, x_t, n) + z);
            batch.noise.push_back(std::move(z));
        }
    }
    return batch;
}

/// Sample second moment of the stacked transmit vector over `draws` symbol
/// realizations, as a covariance set (node blocks only; the per-user
/// communication slots stay zero). Converges to
/// PrecoderSet::to_covariances() as draws grow.
inline CovarianceSet empirical_covariance(const PrecoderSet& p, int draws, std::uint64_t seed) {
    if (draws < 1) throw std::invalid_argument("empirical_covariance: draws must be >= 1");
    const int d = p.nodes * p.tx_antennas;
    std::vector<MatrixXcd> acc(p.subcarriers, MatrixXcd::Zero(d, d));
    VectorXcd stacked(d);
    for (int t = 0; t < draws; ++t) {
        const SymbolDraw draw = SymbolDraw::make(p, split_seed(seed, t));
        for (int l = 0; l < p.subcarriers; ++l) {
            for (int m = 0; m < p.nodes; ++m) {
                stacked.segment(m * p.tx_antennas, p.tx_antennas) =
                    VectorXcd::Zero(p.tx_antennas);
                for (int u = 0; u < p.users; ++u)
                    stacked.segment(m * p.tx_antennas, p.tx_antennas) +=
                        p.w_comm(m, u, l) *
                        draw.data[(static_cast<std::size_t>(m) * p.users + u) * p.subcarriers +
                                  l];
                const MatrixXcd& ws = p.w_sense(m, l);
                if (ws.cols() > 0)
                    stacked.segment(m * p.tx_antennas, p.tx_antennas) +=
                        ws * draw.radar[l].head(ws.cols());
            }
            acc[l] += stacked * stacked.adjoint();
        }
    }
    CovarianceSet cov(p.nodes, p.tx_antennas, p.subcarriers, p.users);
    for (int l = 0; l < p.subcarriers; ++l) {
        acc[l] /= static_cast<double>(draws);
        for (int i = 0; i < p.nodes; ++i)
            for (int j = i; j < p.nodes; ++j)
                cov.set_node_block(l, i, j,
                                   MatrixXcd(acc[l].block(i * p.tx_antennas, j * p.tx_antennas,
                                                          p.tx_antennas, p.tx_antennas)));
    }
    return cov;
}

/// Instantaneous-SINR samples in dB, pooled over users and subcarriers:
/// draws * users * subcarriers values, draw-major. Samples whose realized
/// SINR is exactly zero (no served power) are recorded as -infinity.
inline std::vector<double> sinr_samples(const PrecoderSet& p, const ChannelSet& ch,
                                        double comm_noise, int draws, std::uint64_t seed) {
    if (draws < 1) throw std::invalid_argument("sinr_samples: draws must be >= 1");
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(draws) * p.users * p.subcarriers);
    for (int t = 0; t < draws; ++t) {
        const SymbolDraw draw = SymbolDraw::make(p, split_seed(seed, t));
        for (int u = 0; u < p.users; ++u)
            for (int l = 0; l < p.subcarriers; ++l) {
                const double s = instantaneous_sinr(p, ch, draw, u, l, comm_noise);
                out.push_back(s > 0.0 ? linear_to_db(s)
                                      : -std::numeric_limits<double>::infinity());
            }
    }
    return out;
}

}  // namespace disac
