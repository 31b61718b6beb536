#pragma once
// Self-check suites: each suite re-derives a handful of quantities through an
// independent route (Monte-Carlo moments, estimator trials, closed-form
// bounds) and reports measured values against allowed bands. The CLI's
// validate command prints one line per check and fails on any miss.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

#include "disac/designs.hpp"
#include "disac/extraction.hpp"
#include "disac/fim.hpp"
#include "disac/mle.hpp"
#include "disac/simulate.hpp"

namespace disac {

enum class ValidationSuite { fim, extraction, sinr, mle };

inline const char* to_string(ValidationSuite s) {
    switch (s) {
        case ValidationSuite::fim: return "fim";
        case ValidationSuite::extraction: return "extraction";
        case ValidationSuite::sinr: return "sinr";
        case ValidationSuite::mle: return "mle";
    }
    return "?";
}

inline ValidationSuite validation_suite_from_string(const std::string& s) {
    if (s == "fim") return ValidationSuite::fim;
    if (s == "extraction") return ValidationSuite::extraction;
    if (s == "sinr") return ValidationSuite::sinr;
    if (s == "mle") return ValidationSuite::mle;
    throw std::invalid_argument("unknown validation suite '" + s +
                                "' (expected fim|extraction|sinr|mle)");
}

struct ValidationCheck {
    std::string name;
    double measured = std::numeric_limits<double>::quiet_NaN();
    double lo = -std::numeric_limits<double>::infinity();
    double hi = std::numeric_limits<double>::infinity();
    bool pass = false;
};

struct ValidationReport {
    ValidationSuite suite = ValidationSuite::fim;
    std::vector<ValidationCheck> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return !checks.empty();
    }
};

namespace validate_detail {

inline void add(ValidationReport& rep, std::string name, double measured, double lo, double hi) {
    ValidationCheck c;
    c.name = std::move(name);
    c.measured = measured;
    c.lo = lo;
    c.hi = hi;
    c.pass = std::isfinite(measured) && measured >= lo && measured <= hi;
    rep.checks.push_back(std::move(c));
}

/// Random full-band precoders scaled to the per-antenna power cap: `rank`
/// sensing streams plus one communication beam per user on every subcarrier.
inline PrecoderSet random_precoders(int nodes, int users, int subc, int mt, int rank,
                                    std::uint64_t seed, double per_antenna_power) {
    PrecoderSet p(nodes, users, subc, mt);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> nd(0.0, 1.0);
    auto rv = [&](int n) {
        VectorXcd v(n);
        for (int i = 0; i < n; ++i) v[i] = cxd(nd(gen), nd(gen));
        return v;
    };
    for (int n = 0; n < nodes; ++n)
        for (int l = 0; l < subc; ++l) {
            for (int u = 0; u < users; ++u) p.w_comm(n, u, l) = rv(mt);
            MatrixXcd ws(mt, rank);
            for (int c = 0; c < rank; ++c) ws.col(c) = rv(mt);
            p.w_sense(n, l) = ws;
        }
    for (int n = 0; n < nodes; ++n) {
        VectorXd pw = VectorXd::Zero(mt);
        for (int l = 0; l < subc; ++l) {
            for (int u = 0; u < users; ++u) pw += p.w_comm(n, u, l).cwiseAbs2();
            pw += p.w_sense(n, l).cwiseAbs2().rowwise().sum();
        }
        const double sc = std::sqrt(per_antenna_power / pw.maxCoeff());
        for (int l = 0; l < subc; ++l) {
            for (int u = 0; u < users; ++u) p.w_comm(n, u, l) *= sc;
            p.w_sense(n, l) *= sc;
        }
    }
    return p;
}

inline ValidationReport suite_fim(std::uint64_t seed) {
    ValidationReport rep;
    rep.suite = ValidationSuite::fim;

    Scenario s = reference_scenario(2, 1, 0, 10.0);
    s.ofdm.tx_antennas = 2;
    s.ofdm.rx_antennas = 2;
    s.ofdm.subcarriers = 4;
    const PrecoderSet p = random_precoders(2, 0, 4, 2, 2, split_seed(seed, 1),
                                           s.power.per_antenna_power);

    // Expected information against the empirical second moment of 1e4
    // independently drawn symbol vectors.
    const CovarianceSet expected = p.to_covariances();
    const CovarianceSet empirical = empirical_covariance(p, 10000, split_seed(seed, 2));
    const FimCalculator calc(s);
    const MatrixXd f_exp = calc.assemble_fim_theta(expected);
    const MatrixXd f_emp = calc.assemble_fim_theta(empirical);
    add(rep, "fim.mc_vs_expected_rel_frobenius", (f_emp - f_exp).norm() / f_exp.norm(), 0.0,
        0.02);

    // Information-mode dominance, expressed on the bound it implies.
    const double crb_h = calc.crb_position(expected).crb_position;
    const double crb_t =
        FimCalculator(s, LocalizationMode::tof_only).crb_position(expected).crb_position;
    const double crb_a =
        FimCalculator(s, LocalizationMode::aoa_only).crb_position(expected).crb_position;
    add(rep, "fim.hybrid_over_tof_crb", crb_h / crb_t, 0.0, 1.0 + 1e-9);
    add(rep, "fim.hybrid_over_aoa_crb", crb_h / crb_a, 0.0, 1.0 + 1e-9);
    return rep;
}

inline ValidationReport suite_extraction(std::uint64_t seed) {
    ValidationReport rep;
    rep.suite = ValidationSuite::extraction;

    Scenario s = reference_scenario(2, 1, 2, 10.0);
    s.ofdm.tx_antennas = 4;
    s.ofdm.rx_antennas = 4;
    s.ofdm.subcarriers = 8;
    s.power.sinr_threshold_db = 20.0;
    const ChannelSet ch(2, 2, 8, 4, split_seed(seed, 1));

    for (DesignFamily family : {DesignFamily::orthogonal, DesignFamily::averaged}) {
        const std::string tag = std::string("extraction.") + to_string(family);
        const DesignResult res = solve_design(s, ch, family);
        if (res.status != SolveStatus::optimal) {
            add(rep, tag + ".solve_optimal", 0.0, 1.0, 1.0);
            continue;
        }
        const ExtractionResult ex = extract_precoders(s, res, ch);
        // Against the conic optimum itself for the subcarrier-orthogonal
        // family (its factorization is exact); the averaged family's
        // rank-one collapse may move the re-evaluated bound slightly, so it
        // is compared to the design's own re-evaluation.
        const double ref = family == DesignFamily::orthogonal ? res.objective : res.crb;
        add(rep, tag + ".crb_rel_gap", std::abs(ex.crb - ref) / ref, 0.0, 1e-4);

        double worst_eig_ratio = 0.0;
        for (int n = 0; n < 2; ++n)
            for (int u = 0; u < 2; ++u)
                for (int l = 0; l < 8; ++l) {
                    Eigen::SelfAdjointEigenSolver<MatrixXcd> es(res.covariances.comm(n, u, l));
                    const auto& ev = es.eigenvalues();
                    const double top = ev(ev.size() - 1);
                    if (top > 0)
                        worst_eig_ratio =
                            std::max(worst_eig_ratio, std::abs(ev(ev.size() - 2)) / top);
                }
        add(rep, tag + ".comm_second_eig_ratio", worst_eig_ratio, 0.0, 1e-6);
    }
    return rep;
}

inline ValidationReport suite_sinr(std::uint64_t seed) {
    ValidationReport rep;
    rep.suite = ValidationSuite::sinr;

    // 30 dB link budget with two users and two targets: thresholds this high
    // need the lower communication noise to be feasible.
    Scenario s = reference_scenario(2, 2, 2, 10.0);
    s.power.comm_noise = 0.1;
    s.power.sinr_threshold_db = 30.0;
    const ChannelSet ch(2, 2, s.ofdm.subcarriers, s.ofdm.tx_antennas, split_seed(seed, 1));

    const DesignResult res = solve_design(s, ch, DesignFamily::orthogonal);
    if (res.status != SolveStatus::optimal) {
        add(rep, "sinr.solve_optimal", 0.0, 1.0, 1.0);
        return rep;
    }
    const ExtractionResult ex = extract_precoders(s, res, ch);

    double worst = std::numeric_limits<double>::infinity();
    for (int u = 0; u < 2; ++u)
        for (int l = 0; l < s.ofdm.subcarriers; ++l)
            worst = std::min(worst,
                             linear_to_db(average_sinr(ex.realized, ch, u, l, s.power.comm_noise)));
    add(rep, "sinr.extracted_min_avg_db", worst, 29.9, std::numeric_limits<double>::infinity());

    const std::vector<double> samples =
        sinr_samples(ex.precoders, ch, s.power.comm_noise, 1000, split_seed(seed, 2));
    double mean = 0.0;
    std::size_t inside = 0;
    for (double v : samples) {
        mean += v;
        inside += (v >= 27.0 && v <= 33.0);
    }
    mean /= static_cast<double>(samples.size());
    add(rep, "sinr.instantaneous_mean_db", mean, 29.0, 31.0);
    add(rep, "sinr.fraction_within_3db",
        static_cast<double>(inside) / static_cast<double>(samples.size()), 0.9, 1.0);
    return rep;
}

inline ValidationReport suite_mle(std::uint64_t seed) {
    ValidationReport rep;
    rep.suite = ValidationSuite::mle;

    Scenario s = reference_scenario(2, 1, 1, 20.0);
    s.ofdm.tx_antennas = 2;
    s.ofdm.rx_antennas = 2;
    s.ofdm.subcarriers = 4;
    s.ofdm.symbols = 16;
    const ChannelSet ch(2, 1, 4, 2, split_seed(seed, 1));
    const DesignResult res = solve_design(s, ch, DesignFamily::joint);
    if (res.status != SolveStatus::optimal) {
        add(rep, "mle.solve_optimal", 0.0, 1.0, 1.0);
        return rep;
    }
    const ExtractionResult ex = extract_precoders(s, res, ch);

    // Noiseless on-grid recovery.
    Scenario s0 = s;
    s0.power.sense_noise = 1e-12;
    const ReceptionBatch b0 = simulate_reception(ex.precoders, s0, split_seed(seed, 2), 4);
    const MleResult r0 = mle_localize(b0, s0);
    add(rep, "mle.noiseless_error_m", (r0.positions[0] - s.geometry.targets[0]).norm(), 0.0,
        1e-3);

    // Estimator efficiency: total 2-D RMSE against the batch bound. 100
    // trials keep the suite quick; the band allows the matching statistical
    // spread (the acceptance gate runs the full-depth version).
    const double bound = std::sqrt(ex.crb / s.ofdm.symbols);
    const int trials = 100;
    double se = 0.0;
    for (int t = 0; t < trials; ++t) {
        const ReceptionBatch b = simulate_reception(ex.precoders, s, split_seed(seed, 100 + t));
        const MleResult r = mle_localize(b, s);
        se += (r.positions[0] - s.geometry.targets[0]).squaredNorm();
    }
    add(rep, "mle.rmse_over_bound", std::sqrt(se / trials) / bound, 0.8, 1.5);

    // The searched minimum should sit at or below the truth's objective.
    const ReceptionBatch b = simulate_reception(ex.precoders, s, split_seed(seed, 3));
    const MleResult r = mle_localize(b, s);
    add(rep, "mle.nll_truth_minus_min", concentrated_nll(b, s, s.geometry.targets) - r.nll,
        -0.1, 10.0);
    return rep;
}

}  // namespace validate_detail

inline ValidationReport run_validation_suite(ValidationSuite suite, std::uint64_t seed) {
    switch (suite) {
        case ValidationSuite::fim: return validate_detail::suite_fim(seed);
        case ValidationSuite::extraction: return validate_detail::suite_extraction(seed);
        case ValidationSuite::sinr: return validate_detail::suite_sinr(seed);
        case ValidationSuite::mle: return validate_detail::suite_mle(seed);
    }
    throw std::invalid_argument("run_validation_suite: bad suite");
}

}  // namespace disac
