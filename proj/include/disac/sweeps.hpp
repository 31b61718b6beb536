#pragma once
// Trade-off and parameter sweeps: solve each design family over a grid,
// extract precoders, re-evaluate the bound and the served SINRs, and emit
// plot-ready CSV rows. Points are independent and may run on worker threads.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "disac/designs.hpp"
#include "disac/extraction.hpp"

namespace disac {

enum class SweepAxis { gamma, bandwidth, antennas, node_count, subcarriers };

inline const char* to_string(SweepAxis a) {
    switch (a) {
        case SweepAxis::gamma: return "gamma";
        case SweepAxis::bandwidth: return "bandwidth";
        case SweepAxis::antennas: return "antennas";
        case SweepAxis::node_count: return "node_count";
        case SweepAxis::subcarriers: return "subcarriers";
    }
    return "?";
}

inline SweepAxis sweep_axis_from_string(const std::string& s) {
    if (s == "gamma") return SweepAxis::gamma;
    if (s == "bandwidth") return SweepAxis::bandwidth;
    if (s == "antennas") return SweepAxis::antennas;
    if (s == "node_count") return SweepAxis::node_count;
    if (s == "subcarriers") return SweepAxis::subcarriers;
    throw std::invalid_argument("unknown sweep axis '" + s +
                                "' (expected gamma|bandwidth|antennas|node_count|subcarriers)");
}

/// CSV column name for the axis value, unit-suffixed where the value has one.
inline const char* axis_column(SweepAxis a) {
    switch (a) {
        case SweepAxis::gamma: return "gamma_db";
        case SweepAxis::bandwidth: return "bandwidth_hz";
        case SweepAxis::antennas: return "antennas";
        case SweepAxis::node_count: return "nodes";
        case SweepAxis::subcarriers: return "subcarriers";
    }
    return "?";
}

struct SweepPoint {
    double axis_value = std::numeric_limits<double>::quiet_NaN();
    DesignFamily family = DesignFamily::joint;
    LocalizationMode mode = LocalizationMode::hybrid;
    /// Communication SINR threshold in force at this point [dB].
    double gamma_db = std::numeric_limits<double>::quiet_NaN();
    SolveStatus status = SolveStatus::numerical_failure;

    /// Relaxed-bound metrics (NaN unless the solve reached optimal).
    double rcrb_m = std::numeric_limits<double>::quiet_NaN();
    double sinr_db = std::numeric_limits<double>::quiet_NaN();
    /// Metrics re-evaluated on the extracted precoders (NaN when extraction
    /// is disabled or the solve failed).
    double extracted_rcrb_m = std::numeric_limits<double>::quiet_NaN();
    double extracted_sinr_db = std::numeric_limits<double>::quiet_NaN();

    /// Design-solve wall time. Measured, so excluded from byte-identity
    /// comparisons between repeated runs.
    double wall_ms = std::numeric_limits<double>::quiet_NaN();
};

struct SweepResult {
    SweepAxis axis = SweepAxis::gamma;
    std::vector<double> axis_values;  ///< strictly increasing
    std::vector<SweepPoint> points;   ///< axis-major, then family order
};

struct SweepOptions {
    std::vector<DesignFamily> families{DesignFamily::joint, DesignFamily::orthogonal,
                                       DesignFamily::averaged};
    LocalizationMode mode = LocalizationMode::hybrid;
    /// Also factor precoders at every optimal point and re-evaluate on them.
    bool extract = true;
    /// Worker threads across sweep points; 0 means one per logical core.
    int jobs = 1;
    DesignOptions design;
    ExtractionOptions extraction;
    /// Antenna axis: when positive, per-antenna power is set to
    /// total_power / antennas so the array total stays constant.
    double total_power = -1.0;
    /// Node-count axis rebuilds the scenario, redrawing amplitudes at this
    /// average power [dB] with this seed.
    double amplitude_avg_db = 10.0;
    std::uint64_t amplitude_seed = 1;
};

namespace sweep_detail {

inline void require_increasing(const std::vector<double>& v, const char* who) {
    if (v.empty()) throw std::invalid_argument(std::string(who) + ": empty axis grid");
    for (std::size_t i = 1; i < v.size(); ++i)
        if (!(v[i] > v[i - 1]))
            throw std::invalid_argument(std::string(who) + ": axis grid must strictly increase");
}

/// Smallest average SINR over users and subcarriers, in dB.
inline double worst_sinr_db(const CovarianceSet& cov, const ChannelSet& ch, double comm_noise) {
    double worst = std::numeric_limits<double>::infinity();
    for (int u = 0; u < ch.users(); ++u)
        for (int l = 0; l < ch.subcarriers(); ++l)
            worst = std::min(worst, average_sinr(cov, ch, u, l, comm_noise));
    if (!std::isfinite(worst)) return std::numeric_limits<double>::quiet_NaN();
    return linear_to_db(worst);
}

/// Solve one point and fill its metrics. Failures of any kind are recorded
/// on the point rather than thrown, so a sweep survives infeasible or
/// ill-posed corners of its grid.
inline void run_point(const Scenario& scen, const ChannelSet& ch, SweepPoint& pt,
                      const SweepOptions& opt) {
    try {
        DesignOptions dopt = opt.design;
        dopt.mode = opt.mode;
        const DesignResult res = solve_design(scen, ch, pt.family, dopt);
        pt.status = res.status;
        pt.wall_ms = 1e3 * res.wall_seconds;
        if (res.status != SolveStatus::optimal) return;
        pt.rcrb_m = res.rcrb;
        pt.sinr_db = worst_sinr_db(res.covariances, ch, scen.power.comm_noise);
        if (opt.extract) {
            ExtractionOptions eopt = opt.extraction;
            eopt.mode = opt.mode;
            const ExtractionResult ex = extract_precoders(scen, res, ch, eopt);
            pt.extracted_rcrb_m = ex.rcrb;
            pt.extracted_sinr_db = worst_sinr_db(ex.realized, ch, scen.power.comm_noise);
        }
    } catch (const std::exception&) {
        pt.status = SolveStatus::numerical_failure;
    }
}

/// Run fn(i) for i in [0, n) on `jobs` workers (0 = logical cores).
template <typename Fn>
inline void for_each_index(int n, int jobs, Fn&& fn) {
    if (jobs == 0) jobs = static_cast<int>(std::thread::hardware_concurrency());
    jobs = std::max(1, std::min(jobs, n));
    if (jobs == 1) {
        for (int i = 0; i < n; ++i) fn(i);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(jobs);
    for (int w = 0; w < jobs; ++w)
        pool.emplace_back([&] {
            for (int i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
        });
    for (auto& t : pool) t.join();
}

}  // namespace sweep_detail

/// True when the family's design is solvable to optimality at the given
/// communication threshold.
inline bool design_feasible(const Scenario& scen, const ChannelSet& channels, DesignFamily family,
                            double gamma_db, const DesignOptions& opt = {}) {
    Scenario s = scen;
    s.power.sinr_threshold_db = gamma_db;
    try {
        return solve_design(s, channels, family, opt).status == SolveStatus::optimal;
    } catch (const std::exception&) {
        return false;
    }
}

/// Largest feasible communication threshold in [lo_db, hi_db], located by
/// bisection against solver feasibility; NaN when even lo_db fails.
inline double probe_max_gamma(const Scenario& scen, const ChannelSet& channels,
                              DesignFamily family, double lo_db, double hi_db,
                              double tol_db = 0.25, const DesignOptions& opt = {}) {
    if (!(hi_db >= lo_db) || !(tol_db > 0))
        throw std::invalid_argument("probe_max_gamma: bad bracket");
    if (!design_feasible(scen, channels, family, lo_db, opt))
        return std::numeric_limits<double>::quiet_NaN();
    if (design_feasible(scen, channels, family, hi_db, opt)) return hi_db;
    double lo = lo_db, hi = hi_db;
    while (hi - lo > tol_db) {
        const double mid = 0.5 * (lo + hi);
        (design_feasible(scen, channels, family, mid, opt) ? lo : hi) = mid;
    }
    return lo;
}

/// Bound-vs-threshold trade-off: one solve (and optional extraction) per
/// (threshold, family) pair. Infeasible points carry their status and NaN
/// metrics; the sweep itself never fails on them.
inline SweepResult tradeoff_sweep(const Scenario& scen, const ChannelSet& channels,
                                  const std::vector<double>& gamma_grid_db,
                                  const SweepOptions& opt = {}) {
    sweep_detail::require_increasing(gamma_grid_db, "tradeoff_sweep");
    if (opt.families.empty()) throw std::invalid_argument("tradeoff_sweep: no families");

    SweepResult out;
    out.axis = SweepAxis::gamma;
    out.axis_values = gamma_grid_db;
    const int nf = static_cast<int>(opt.families.size());
    out.points.resize(gamma_grid_db.size() * nf);
    sweep_detail::for_each_index(
        static_cast<int>(out.points.size()), opt.jobs, [&](int i) {
            SweepPoint& pt = out.points[i];
            pt.axis_value = pt.gamma_db = gamma_grid_db[i / nf];
            pt.family = opt.families[i % nf];
            pt.mode = opt.mode;
            Scenario s = scen;
            s.power.sinr_threshold_db = pt.gamma_db;
            sweep_detail::run_point(s, channels, pt, opt);
        });
    return out;
}

/// Physical-parameter sweep. The base scenario supplies everything the axis
/// does not override; channels are drawn from `seed` per point (their shape
/// follows the axis), so a fixed seed reproduces the sweep exactly.
inline SweepResult parameter_sweep(const Scenario& base, SweepAxis axis,
                                   const std::vector<double>& values, std::uint64_t seed,
                                   const SweepOptions& opt = {}) {
    if (axis == SweepAxis::gamma)
        throw std::invalid_argument("parameter_sweep: use tradeoff_sweep for the gamma axis");
    sweep_detail::require_increasing(values, "parameter_sweep");
    if (opt.families.empty()) throw std::invalid_argument("parameter_sweep: no families");

    SweepResult out;
    out.axis = axis;
    out.axis_values = values;
    const int nf = static_cast<int>(opt.families.size());
    out.points.resize(values.size() * nf);
    sweep_detail::for_each_index(
        static_cast<int>(out.points.size()), opt.jobs, [&](int i) {
            SweepPoint& pt = out.points[i];
            pt.axis_value = values[i / nf];
            pt.family = opt.families[i % nf];
            pt.mode = opt.mode;

            Scenario s = base;
            switch (axis) {
                case SweepAxis::bandwidth:
                    s.ofdm.bandwidth_hz = pt.axis_value;
                    break;
                case SweepAxis::antennas: {
                    const int m = static_cast<int>(pt.axis_value);
                    s.ofdm.tx_antennas = s.ofdm.rx_antennas = m;
                    if (opt.total_power > 0) s.power.per_antenna_power = opt.total_power / m;
                    break;
                }
                case SweepAxis::node_count: {
                    const int n = static_cast<int>(pt.axis_value);
                    Scenario r = reference_scenario(n, base.targets(), base.users(),
                                                    opt.amplitude_avg_db, opt.amplitude_seed);
                    r.ofdm = base.ofdm;
                    r.power = base.power;
                    s = r;
                    break;
                }
                case SweepAxis::subcarriers:
                    s.ofdm.subcarriers = static_cast<int>(pt.axis_value);
                    break;
                case SweepAxis::gamma:
                    break;  // excluded above
            }
            pt.gamma_db = s.power.sinr_threshold_db;
            try {
                const ChannelSet ch(s.nodes(), s.users(), s.ofdm.subcarriers,
                                    s.ofdm.tx_antennas, seed);
                sweep_detail::run_point(s, ch, pt, opt);
            } catch (const std::exception&) {
                pt.status = SolveStatus::numerical_failure;
            }
        });
    return out;
}

namespace sweep_detail {

inline void append_number(std::string& s, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    s += buf;
}

}  // namespace sweep_detail

/// One header row plus one row per point. Numeric formatting is fixed
/// ("%.10g") so identical results serialize to identical bytes; the wall_ms
/// column is measured time and is the one run-to-run nondeterminism.
inline std::string to_csv(const SweepResult& r) {
    std::string s = "family,mode,gamma_db";
    const bool extra_axis = r.axis != SweepAxis::gamma;
    if (extra_axis) s += std::string(",") + axis_column(r.axis);
    s += ",rcrb_m,extracted_rcrb_m,sinr_db,extracted_sinr_db,wall_ms,status\n";
    for (const SweepPoint& p : r.points) {
        s += to_string(p.family);
        s += ',';
        s += to_string(p.mode);
        s += ',';
        sweep_detail::append_number(s, p.gamma_db);
        if (extra_axis) {
            s += ',';
            sweep_detail::append_number(s, p.axis_value);
        }
        for (double v : {p.rcrb_m, p.extracted_rcrb_m, p.sinr_db, p.extracted_sinr_db, p.wall_ms}) {
            s += ',';
            sweep_detail::append_number(s, v);
        }
        s += ',';
        s += to_string(p.status);
        s += '\n';
    }
    return s;
}

}  // namespace disac
