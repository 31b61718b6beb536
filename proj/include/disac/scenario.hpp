#pragma once

// Scenario description for a distributed ISAC deployment: OFDM numerology,
// node/target/user geometry, power budgets and target amplitudes, plus the
// array/delay response primitives and the position-parameter Jacobian.
//
// Conventions (used consistently by every downstream module):
//  * 2-D coordinates [x, y] in metres; angles are absolute (measured from the
//    +x axis, atan2 convention) in radians; times in seconds.
//  * Uniform linear arrays with element index m = 0..M-1; element m of the
//    response toward angle theta is exp(+j 2pi/lambda * m * d0 * sin(theta)).
//  * Delay response over subcarrier l = 0..L-1 for a time-of-flight tau is
//    exp(-j 2pi (B/L) * l * tau).
//  * Per-link amplitudes b(n, m, k): receiving node n, transmitting node m,
//    target k. Monostatic links are n == m.

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"

namespace disac {

struct OfdmConfig {
    int tx_antennas = 6;        ///< M_t per node
    int rx_antennas = 6;        ///< M_r per node
    int subcarriers = 16;       ///< L
    int symbols = 16;           ///< T, used only by Monte-Carlo evaluation
    double bandwidth_hz = 20e6; ///< B
    double wavelength_m = 0.1;  ///< carrier wavelength
    double antenna_spacing_m = -1.0;  ///< d0; negative means lambda/2

    double spacing() const {
        return antenna_spacing_m > 0.0 ? antenna_spacing_m : 0.5 * wavelength_m;
    }
};

struct PowerConfig {
    double per_antenna_power = 100.0;  ///< P_T, cap on sum over subcarriers
    double comm_noise = 1.0;           ///< sigma_c^2 (total over the band)
    double sense_noise = 1.0;          ///< sigma_s^2 (total over the band)
    double sinr_threshold_db = 10.0;   ///< Gamma_c
};

struct Geometry {
    std::vector<Eigen::Vector2d> nodes;
    std::vector<Eigen::Vector2d> targets;
    std::vector<Eigen::Vector2d> users;
    std::vector<double> node_orientations_rad;  ///< informational only
};

/// Which sensitivity channels contribute to the Fisher information.
enum class LocalizationMode { hybrid, tof_only, aoa_only };

inline const char* to_string(LocalizationMode m) {
    switch (m) {
        case LocalizationMode::hybrid: return "hybrid";
        case LocalizationMode::tof_only: return "tof_only";
        case LocalizationMode::aoa_only: return "aoa_only";
    }
    return "?";
}

inline LocalizationMode mode_from_string(const std::string& s) {
    if (s == "hybrid") return LocalizationMode::hybrid;
    if (s == "tof_only") return LocalizationMode::tof_only;
    if (s == "aoa_only") return LocalizationMode::aoa_only;
    throw std::invalid_argument("unknown localization mode '" + s +
                                "' (expected hybrid|tof_only|aoa_only)");
}

struct TofAngle {
    double tof;    ///< one-way propagation time [s]
    double angle;  ///< absolute angle from node to point [rad]
};

/// One-way time of flight and absolute angle from a node to a point.
inline TofAngle tof_and_angle(const Eigen::Vector2d& node, const Eigen::Vector2d& point) {
    const double dx = point.x() - node.x();
    const double dy = point.y() - node.y();
    const double range = std::hypot(dx, dy);
    if (range <= 0.0)
        throw std::invalid_argument("tof_and_angle: node and point coincide");
    return {range / speed_of_light, std::atan2(dy, dx)};
}

/// ULA response a(theta), entries exp(j 2pi/lambda m d0 sin theta), m=0..M-1.
inline VectorXcd steering_vector(double theta, int antennas, double wavelength,
                                 double spacing) {
    if (antennas < 1) throw std::invalid_argument("steering_vector: antennas < 1");
    VectorXcd a(antennas);
    const double phase = 2.0 * M_PI / wavelength * spacing * std::sin(theta);
    for (int m = 0; m < antennas; ++m) a[m] = std::polar(1.0, phase * m);
    return a;
}

/// d a(theta) / d theta.
inline VectorXcd steering_derivative(double theta, int antennas, double wavelength,
                                     double spacing) {
    VectorXcd a = steering_vector(theta, antennas, wavelength, spacing);
    const double factor = 2.0 * M_PI / wavelength * spacing * std::cos(theta);
    for (int m = 0; m < antennas; ++m) a[m] *= cxd(0.0, factor * m);
    return a;
}

/// Delay response d(tau), entries exp(-j 2pi (B/L) l tau), l=0..L-1.
inline VectorXcd delay_vector(double tau, int subcarriers, double bandwidth) {
    if (subcarriers < 1) throw std::invalid_argument("delay_vector: subcarriers < 1");
    VectorXcd d(subcarriers);
    const double step = 2.0 * M_PI * bandwidth / subcarriers * tau;
    for (int l = 0; l < subcarriers; ++l) d[l] = std::polar(1.0, -step * l);
    return d;
}

/// d d(tau) / d tau.
inline VectorXcd delay_derivative(double tau, int subcarriers, double bandwidth) {
    VectorXcd d = delay_vector(tau, subcarriers, bandwidth);
    const double factor = 2.0 * M_PI * bandwidth / subcarriers;
    for (int l = 0; l < subcarriers; ++l) d[l] *= cxd(0.0, -factor * l);
    return d;
}

class Scenario {
public:
    OfdmConfig ofdm;
    Geometry geometry;
    PowerConfig power;
    /// amplitudes[n](m, k): path gain of link (rx n, tx m, target k)
    std::vector<MatrixXcd> amplitudes;

    int nodes() const { return static_cast<int>(geometry.nodes.size()); }
    int targets() const { return static_cast<int>(geometry.targets.size()); }
    int users() const { return static_cast<int>(geometry.users.size()); }

    /// One-way TOF [s] from node n to target k.
    double tof(int n, int k) const { return link(n, k).tof; }
    /// Absolute angle [rad] from node n to target k.
    double angle(int n, int k) const { return link(n, k).angle; }

    cxd amplitude(int rx, int tx, int k) const { return amplitudes[rx](tx, k); }

    /// Validates dimensions, positivity and geometric non-degeneracy;
    /// throws std::invalid_argument with a specific message on failure.
    void validate() const {
        if (geometry.nodes.empty()) throw std::invalid_argument("scenario: no nodes");
        if (geometry.targets.empty()) throw std::invalid_argument("scenario: no targets");
        if (ofdm.tx_antennas < 1 || ofdm.rx_antennas < 1)
            throw std::invalid_argument("scenario: antenna counts must be >= 1");
        if (ofdm.subcarriers < 1) throw std::invalid_argument("scenario: subcarriers must be >= 1");
        if (ofdm.symbols < 1) throw std::invalid_argument("scenario: symbols must be >= 1");
        if (ofdm.bandwidth_hz <= 0) throw std::invalid_argument("scenario: bandwidth must be > 0");
        if (ofdm.wavelength_m <= 0) throw std::invalid_argument("scenario: wavelength must be > 0");
        if (power.per_antenna_power <= 0)
            throw std::invalid_argument("scenario: per-antenna power must be > 0");
        if (power.comm_noise <= 0 || power.sense_noise <= 0)
            throw std::invalid_argument("scenario: noise powers must be > 0");
        const int n_nodes = nodes();
        const int n_tgt = targets();
        if (static_cast<int>(amplitudes.size()) != n_nodes)
            throw std::invalid_argument("scenario: amplitude tensor must have one matrix per rx node");
        for (const auto& a : amplitudes)
            if (a.rows() != n_nodes || a.cols() != n_tgt)
                throw std::invalid_argument("scenario: amplitude matrix must be nodes x targets");
        for (int n = 0; n < n_nodes; ++n)
            for (int k = 0; k < n_tgt; ++k)
                (void)tof_and_angle(geometry.nodes[n], geometry.targets[k]);
        if (!geometry.node_orientations_rad.empty() &&
            static_cast<int>(geometry.node_orientations_rad.size()) != n_nodes)
            throw std::invalid_argument("scenario: orientation list length must match node count");
    }

private:
    TofAngle link(int n, int k) const {
        return tof_and_angle(geometry.nodes.at(n), geometry.targets.at(k));
    }
};

/// Draws i.i.d. circularly-symmetric Gaussian link amplitudes and rescales
/// them so the average per-link power equals average_power_db. Deterministic
/// for a given seed.
inline std::vector<MatrixXcd> random_amplitudes(int n_nodes, int n_targets,
                                                double average_power_db,
                                                std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss(0.0, 1.0 / std::sqrt(2.0));
    std::vector<MatrixXcd> b(n_nodes, MatrixXcd(n_nodes, n_targets));
    double total = 0.0;
    for (auto& m : b)
        for (Eigen::Index i = 0; i < m.size(); ++i) {
            cxd v(gauss(rng), gauss(rng));
            m.data()[i] = v;
            total += std::norm(v);
        }
    const double count = static_cast<double>(n_nodes) * n_nodes * n_targets;
    const double scale = std::sqrt(db_to_linear(average_power_db) / (total / count));
    for (auto& m : b) m *= scale;
    return b;
}

/// Benchmark deployment used by tests and as the CLI default: nodes on a
/// 50 m arc below the surveillance area, targets around the origin, users in
/// between, Rayleigh link amplitudes with the given average power. OFDM and
/// power settings keep their struct defaults; adjust fields afterwards.
inline Scenario reference_scenario(int n_nodes = 2, int n_targets = 1, int n_users = 1,
                                   double average_amplitude_db = 10.0,
                                   std::uint64_t amplitude_seed = 1) {
    if (n_nodes < 1 || n_targets < 1 || n_users < 0)
        throw std::invalid_argument("reference_scenario: bad dimension");
    Scenario s;
    if (n_nodes == 2) {
        s.geometry.nodes = {{35.35, -35.35}, {-35.35, -35.35}};
    } else if (n_nodes == 4) {
        s.geometry.nodes = {{-46.19, -19.13}, {46.19, -19.13}, {-19.13, -46.19}, {19.13, -46.19}};
    } else {
        for (int n = 0; n < n_nodes; ++n) {
            const double ang = M_PI * (1.125 + 0.75 * (n + 0.5) / n_nodes);
            s.geometry.nodes.push_back({50.0 * std::cos(ang), 50.0 * std::sin(ang)});
        }
    }
    for (int k = 0; k < n_targets; ++k)
        s.geometry.targets.push_back(
            {n_targets == 1 ? 0.0 : -30.0 + 60.0 * k / (n_targets - 1), 0.0});
    for (int u = 0; u < n_users; ++u)
        s.geometry.users.push_back(
            {0.0, n_users == 1 ? -20.0 : -20.0 + 40.0 * u / (n_users - 1)});
    s.amplitudes = random_amplitudes(n_nodes, n_targets, average_amplitude_db, amplitude_seed);
    s.validate();
    return s;
}

/// Parameter-vector index maps. The estimation parameter vector is
///   psi = [theta(n,k); tau(n,k); Re b(n,m,k); Im b(n,m,k)]
/// with node-major ordering (n outer, k inner; amplitudes rx-n outer, tx-m
/// middle, k inner). The position parameter vector is
///   pos = [x(k); y(k); Re b; Im b].
struct IndexMaps {
    int n_nodes, n_targets;
    int theta(int n, int k) const { return n * n_targets + k; }
    int tau(int n, int k) const { return n_nodes * n_targets + n * n_targets + k; }
    int amp(int n, int m, int k) const { return (n * n_nodes + m) * n_targets + k; }
    int psi_dim() const { return 2 * n_nodes * n_targets + 2 * n_nodes * n_nodes * n_targets; }
    int pos_dim() const { return 2 * n_targets + 2 * n_nodes * n_nodes * n_targets; }
    int amp_count() const { return n_nodes * n_nodes * n_targets; }
};

/// Jacobian d psi / d pos mapping per-link angle/TOF parameters to target
/// coordinates: d theta/dx = (y_n - y_k)/rho^2, d theta/dy = (x_k - x_n)/rho^2,
/// d tau/dx = (x_k - x_n)/(c rho), d tau/dy = (y_k - y_n)/(c rho); identity on
/// the amplitude block.
inline MatrixXd geometry_jacobian(const Scenario& s) {
    const int N = s.nodes(), K = s.targets();
    IndexMaps im{N, K};
    MatrixXd J = MatrixXd::Zero(im.pos_dim(), im.psi_dim());
    for (int k = 0; k < K; ++k) {
        for (int n = 0; n < N; ++n) {
            const double dx = s.geometry.targets[k].x() - s.geometry.nodes[n].x();
            const double dy = s.geometry.targets[k].y() - s.geometry.nodes[n].y();
            const double rho2 = dx * dx + dy * dy;
            const double rho = std::sqrt(rho2);
            J(k, im.theta(n, k)) = -dy / rho2;
            J(K + k, im.theta(n, k)) = dx / rho2;
            J(k, im.tau(n, k)) = dx / (speed_of_light * rho);
            J(K + k, im.tau(n, k)) = dy / (speed_of_light * rho);
        }
    }
    const int na = 2 * im.amp_count();
    J.bottomRightCorner(na, na).setIdentity();
    return J;
}

}  // namespace disac
