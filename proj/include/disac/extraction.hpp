#pragma once
// Turns a relaxed covariance-domain design into transmit precoders: one
// rank-one communication beamformer per (node, user, subcarrier) plus a
// sensing factor per node (shared across owned subcarriers in the averaged
// family). The orthogonal and averaged families factor exactly; the joint
// family subtracts the communication outer product from the full augmented
// covariance, projects the remainder onto the PSD cone, and then walks back
// any SINR or power slack the projection consumed.

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "disac/common.hpp"
#include "disac/comms.hpp"
#include "disac/covariance.hpp"
#include "disac/designs.hpp"
#include "disac/fim.hpp"
#include "disac/scenario.hpp"

namespace disac {

struct ExtractionOptions {
    /// Factor columns whose eigenvalue falls below eig_floor * trace are
    /// dropped from the sensing factor.
    double eig_floor = 1e-10;
    /// Exact families (orthogonal, averaged): relative magnitude of negative
    /// eigenvalue mass beyond which the input is rejected as internally
    /// inconsistent instead of silently projected.
    double psd_slack = 1e-7;
    /// Joint family: band-aggregate projection distance beyond which the
    /// extraction is flagged degraded.
    double degraded_limit = 0.05;
    /// Information mode used when re-evaluating the CRB on the realized
    /// covariances; must match the mode the design was solved under.
    LocalizationMode mode = LocalizationMode::hybrid;
};

struct ExtractionResult {
    DesignFamily family = DesignFamily::joint;
    PrecoderSet precoders;

    /// Covariances realized by the precoders. The joint family fills the
    /// cross-node blocks implied by the shared radar streams; the other
    /// families are block-diagonal by construction.
    CovarianceSet realized;

    /// Position CRB evaluated at the realized covariances.
    double crb = std::numeric_limits<double>::quiet_NaN();
    double rcrb = std::numeric_limits<double>::quiet_NaN();

    /// Negative eigenvalue mass clipped by the PSD projection, relative to
    /// the Frobenius norm of the covariance it was carved from; indexed per
    /// subcarrier for the joint and orthogonal families and per node for the
    /// averaged family (the latter two stay at roundoff level).
    std::vector<double> projection_distance;
    double max_projection_distance = 0.0;
    /// Band-level aggregate (total clipped mass over total covariance mass).
    /// Drives the degraded flag, so a lightly loaded subcarrier whose
    /// remainder is pure roundoff cannot trip it on its own.
    double band_projection_distance = 0.0;
    bool degraded = false;

    /// Per-subcarrier scale applied to the sensing factors to restore the
    /// SINR targets after projection, and per-node scale restoring the
    /// per-antenna power caps. 1.0 means untouched.
    std::vector<double> sinr_scale;
    std::vector<double> power_scale;
};

namespace extraction_detail {

/// Eigenvalue factorization A ~= W W^H keeping eigenvalues above
/// eig_floor * trace. Returns the clipped negative mass (Frobenius norm of
/// the discarded negative part) through neg_mass.
inline MatrixXcd factor_psd(const MatrixXcd& a, double eig_floor, double& neg_mass) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(a);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("factor_psd: eigendecomposition failed");
    const VectorXd& ev = eig.eigenvalues();
    neg_mass = std::sqrt(ev.cwiseMin(0.0).squaredNorm());
    const double cut = eig_floor * std::max(a.trace().real(), 0.0);
    int rank = 0;
    for (int i = 0; i < ev.size(); ++i)
        if (ev[i] > cut) ++rank;
    MatrixXcd w(a.rows(), rank);
    int c = 0;
    for (int i = 0; i < ev.size(); ++i)
        if (ev[i] > cut) w.col(c++) = eig.eigenvectors().col(i) * std::sqrt(ev[i]);
    return w;
}

inline double rel_to(double dist, double ref) { return (ref > 0.0) ? dist / ref : 0.0; }

}  // namespace extraction_detail

/// Extracts transmit precoders from an optimal design result. Deterministic
/// up to the unit phase of each beamformer and factor column. Throws
/// std::invalid_argument on shape or status mismatches and
/// std::runtime_error when an exact family's sensing part fails its PSD
/// guarantee beyond ExtractionOptions::psd_slack.
inline ExtractionResult extract_precoders(const Scenario& scen, const DesignResult& res,
                                          const ChannelSet& channels,
                                          const ExtractionOptions& opt = {}) {
    if (res.status != SolveStatus::optimal)
        throw std::invalid_argument(std::string("extract_precoders: design status is ") +
                                    to_string(res.status));
    const int n_nodes = scen.nodes(), n_users = scen.users();
    const int mt = scen.ofdm.tx_antennas, subc = scen.ofdm.subcarriers;
    if (channels.nodes() != n_nodes || channels.users() != n_users ||
        channels.subcarriers() != subc || channels.tx_antennas() != mt)
        throw std::invalid_argument("extract_precoders: channel shape does not match scenario");
    if (res.covariances.nodes() != n_nodes || res.covariances.tx_antennas() != mt ||
        res.covariances.subcarriers() != subc)
        throw std::invalid_argument("extract_precoders: covariance shape does not match scenario");

    std::vector<int> owner = res.owner;
    if (res.family != DesignFamily::joint && static_cast<int>(owner.size()) != subc)
        owner = subcarrier_owner(n_nodes, subc);
    if (res.family == DesignFamily::averaged &&
        static_cast<int>(res.node_average.size()) != n_nodes)
        throw std::invalid_argument("extract_precoders: averaged result lacks node averages");

    ExtractionResult out;
    out.family = res.family;
    PrecoderSet& p = out.precoders;
    p.nodes = n_nodes;
    p.users = n_users;
    p.subcarriers = subc;
    p.tx_antennas = mt;
    p.comm.assign(static_cast<std::size_t>(n_nodes) * n_users * subc, VectorXcd::Zero(mt));
    p.sense.assign(static_cast<std::size_t>(n_nodes) * subc, MatrixXcd::Zero(mt, 0));

    // Communication beamformers (rank-one collapse preserving each user's
    // quadratic form). Inactive node/subcarrier pairs keep the zero vector.
    for (int n = 0; n < n_nodes; ++n)
        for (int u = 0; u < n_users; ++u)
            for (int l = 0; l < subc; ++l) {
                const MatrixXcd& rc = res.covariances.comm(n, u, l);
                if (rc.trace().real() <= 0.0) continue;
                VectorXcd w = comm_beamformer(rc, channels(n, u, l));
                if (w.size() > 0) p.w_comm(n, u, l) = std::move(w);
            }

    out.sinr_scale.assign(subc, 1.0);
    out.power_scale.assign(n_nodes, 1.0);

    // Sensing factors per family. In the joint family each user's data
    // streams are scrambled independently per node (noncoherent combining),
    // so the communication part contributes only block-diagonal covariance;
    // cross-node correlation is carried entirely by the shared radar streams.
    double neg2_sum = 0.0, ref2_sum = 0.0;
    if (res.family == DesignFamily::joint) {
        out.projection_distance.assign(subc, 0.0);
        for (int l = 0; l < subc; ++l) {
            MatrixXcd sense = res.covariances.augmented(l);
            const double ref = sense.norm();
            for (int n = 0; n < n_nodes; ++n)
                for (int u = 0; u < n_users; ++u) {
                    const VectorXcd& w = p.w_comm(n, u, l);
                    sense.block(n * mt, n * mt, mt, mt) -= w * w.adjoint();
                }
            double neg = 0.0;
            const MatrixXcd ws = extraction_detail::factor_psd(sense, opt.eig_floor, neg);
            out.projection_distance[l] = extraction_detail::rel_to(neg, ref);
            neg2_sum += neg * neg;
            ref2_sum += ref * ref;
            for (int n = 0; n < n_nodes; ++n)
                p.w_sense(n, l) = ws.middleRows(n * mt, mt);
        }
    } else if (res.family == DesignFamily::orthogonal) {
        out.projection_distance.assign(subc, 0.0);
        for (int l = 0; l < subc; ++l) {
            const int n = owner[l];
            MatrixXcd sense = res.covariances.node_block(l, n, n);
            const double ref = sense.norm();
            for (int u = 0; u < n_users; ++u) {
                const VectorXcd& w = p.w_comm(n, u, l);
                sense -= w * w.adjoint();
            }
            double neg = 0.0;
            const MatrixXcd ws = extraction_detail::factor_psd(sense, opt.eig_floor, neg);
            const double rel = extraction_detail::rel_to(neg, ref);
            if (rel > opt.psd_slack)
                throw std::runtime_error(
                    "extract_precoders: orthogonal sensing part is not PSD (relative "
                    "negative mass " + std::to_string(rel) + " at subcarrier " +
                    std::to_string(l) + ")");
            out.projection_distance[l] = rel;
            neg2_sum += neg * neg;
            ref2_sum += ref * ref;
            p.w_sense(n, l) = ws;
        }
    } else {
        out.projection_distance.assign(n_nodes, 0.0);
        const double fac = static_cast<double>(n_nodes) / subc;
        for (int n = 0; n < n_nodes; ++n) {
            MatrixXcd spread = res.node_average[n];
            const double ref = fac * spread.norm();
            for (int l = 0; l < subc; ++l) {
                if (owner[l] != n) continue;
                for (int u = 0; u < n_users; ++u) {
                    const VectorXcd& w = p.w_comm(n, u, l);
                    spread -= w * w.adjoint();
                }
            }
            spread *= fac;
            double neg = 0.0;
            const MatrixXcd ws = extraction_detail::factor_psd(spread, opt.eig_floor, neg);
            const double rel = extraction_detail::rel_to(neg, ref);
            if (rel > opt.psd_slack)
                throw std::runtime_error(
                    "extract_precoders: averaged sensing part is not PSD (relative "
                    "negative mass " + std::to_string(rel) + " at node " +
                    std::to_string(n) + ")");
            out.projection_distance[n] = rel;
            neg2_sum += neg * neg;
            ref2_sum += ref * ref;
            for (int l = 0; l < subc; ++l)
                if (owner[l] == n) p.w_sense(n, l) = ws;
        }
    }
    out.max_projection_distance =
        out.projection_distance.empty()
            ? 0.0
            : *std::max_element(out.projection_distance.begin(), out.projection_distance.end());
    out.band_projection_distance =
        extraction_detail::rel_to(std::sqrt(neg2_sum), std::sqrt(ref2_sum));
    out.degraded = out.band_projection_distance > opt.degraded_limit;

    // SINR restoration: the PSD projection can only add sensing power, so
    // shrink the sensing factors per subcarrier until every user meets the
    // target again. Exact families compute a scale of 1 up to roundoff.
    const double gamma = db_to_linear(scen.power.sinr_threshold_db);
    const double floor = scen.power.comm_noise / subc;
    for (int l = 0; l < subc; ++l) {
        double beta2 = 1.0;
        for (int u = 0; u < n_users; ++u) {
            double useful = 0.0, mui = 0.0, radar = 0.0;
            for (int n = 0; n < n_nodes; ++n) {
                const VectorXcd& h = channels(n, u, l);
                useful += std::norm(h.dot(p.w_comm(n, u, l)));
                for (int up = 0; up < n_users; ++up)
                    if (up != u) mui += std::norm(h.dot(p.w_comm(n, up, l)));
                const MatrixXcd& ws = p.w_sense(n, l);
                if (ws.cols() > 0) radar += (ws.adjoint() * h).squaredNorm();
            }
            // Dead zone: when the sensing leakage is this small against the
            // other denominator terms, rescaling it moves the SINR by under
            // a millidecibel while solver-tolerance noise in `allowed` would
            // make the computed scale arbitrary.
            if (radar <= 2e-4 * (mui + floor)) continue;
            const double allowed = useful / gamma - mui - floor;
            beta2 = std::min(beta2, std::max(allowed, 0.0) / radar);
        }
        const double beta = std::sqrt(beta2);
        out.sinr_scale[l] = beta;
        if (beta < 1.0)
            for (int n = 0; n < n_nodes; ++n) p.w_sense(n, l) *= beta;
    }

    // Power restoration: projection can also add diagonal mass, so shrink
    // each node's sensing factors uniformly back under the per-antenna cap.
    const double pt = scen.power.per_antenna_power;
    for (int n = 0; n < n_nodes; ++n) {
        VectorXd comm_power = VectorXd::Zero(mt);
        VectorXd sense_power = VectorXd::Zero(mt);
        for (int l = 0; l < subc; ++l) {
            for (int u = 0; u < n_users; ++u)
                comm_power += p.w_comm(n, u, l).cwiseAbs2();
            const MatrixXcd& ws = p.w_sense(n, l);
            if (ws.cols() > 0) sense_power += ws.cwiseAbs2().rowwise().sum();
        }
        double rho2 = 1.0;
        for (int m = 0; m < mt; ++m) {
            if (comm_power[m] + sense_power[m] <= pt || sense_power[m] <= 0.0) continue;
            rho2 = std::min(rho2, std::max(pt - comm_power[m], 0.0) / sense_power[m]);
        }
        const double rho = std::sqrt(rho2);
        out.power_scale[n] = rho;
        if (rho < 1.0)
            for (int l = 0; l < subc; ++l) p.w_sense(n, l) *= rho;
    }

    // Realized covariances, including the joint family's cross-node blocks
    // from the shared radar streams.
    out.realized = p.to_covariances();

    const CrbReport rep = FimCalculator(scen, opt.mode).crb_position(out.realized);
    out.crb = rep.crb_position;
    out.rcrb = rep.rcrb;
    return out;
}

}  // namespace disac
