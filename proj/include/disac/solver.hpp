#pragma once

// Primal-dual interior-point solver for ConeProblem instances via the
// homogeneous self-dual embedding: Nesterov-Todd scaling, Mehrotra
// predictor-corrector, dense Schur complement with Cholesky. Sized for the
// problems the design builders emit — a few thousand scalar variables and
// PSD blocks of dimension up to a few tens.
//
// Conic form solved: with S_j(y) = C_j + sum_k y_k A_jk and rows g_i.y >= r_i,
// the embedding carries (y, S, Z, sl, zl, tau, kappa) with
//   S_j = tau C_j + sum_k y_k A_jk,     sl_i = g_i.y - tau r_i,
//   tau c_k = sum_j <A_jk, Z_j> + sum_i g_ik zl_i,
//   kappa  = -c.y - sum_j <C_j, Z_j> + sum_i r_i zl_i,
// complementarity S_j Z_j = mu I, sl.zl = mu, tau kappa = mu. tau > 0 at
// convergence recovers the solution y/tau; kappa > 0 yields an infeasibility
// certificate.

#include <cmath>
#include <cstdio>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "conic.hpp"

namespace disac {

enum class SolveStatus {
    optimal,
    primal_infeasible,
    dual_infeasible,
    iteration_limit,
    numerical_failure,
};

inline const char* to_string(SolveStatus s) {
    switch (s) {
        case SolveStatus::optimal: return "optimal";
        case SolveStatus::primal_infeasible: return "primal_infeasible";
        case SolveStatus::dual_infeasible: return "dual_infeasible";
        case SolveStatus::iteration_limit: return "iteration_limit";
        case SolveStatus::numerical_failure: return "numerical_failure";
    }
    return "unknown";
}

struct SolverOptions {
    double tol = 1e-7;           ///< relative primal/dual residual and gap target
    double infeas_tol = 1e-8;    ///< certificate residual for infeasibility claims
    int max_iterations = 500;
    double step_fraction = 0.99;
    double init_scale = 1.0;     ///< scales the identity initialization (restart knob)
    bool verbose = false;
};

struct SolveResult {
    SolveStatus status = SolveStatus::numerical_failure;
    VectorXd y;
    double objective = std::numeric_limits<double>::quiet_NaN();
    int iterations = 0;
    double primal_residual = std::numeric_limits<double>::infinity();
    double dual_residual = std::numeric_limits<double>::infinity();
    double relative_gap = std::numeric_limits<double>::infinity();
};

namespace conic_detail {

using RowMajorXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline int svec_dim(int d) { return d * (d + 1) / 2; }

inline void svec_into(const MatrixXd& M, double* out) {
    const int d = static_cast<int>(M.rows());
    static const double rt2 = std::sqrt(2.0);
    int idx = 0;
    for (int c = 0; c < d; ++c) {
        out[idx++] = M(c, c);
        for (int r = c + 1; r < d; ++r) out[idx++] = rt2 * M(r, c);
    }
}

/// Solves (Lambda X + X Lambda)/2 = D for X, Lambda = diag(lam) > 0.
inline MatrixXd lyap_diag(const VectorXd& lam, const MatrixXd& D) {
    const int d = static_cast<int>(lam.size());
    MatrixXd X(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) X(i, j) = 2.0 * D(i, j) / (lam[i] + lam[j]);
    return X;
}

/// Largest step a in [0, cap] keeping lam + a * diag-scaled(Dbar) PSD, i.e.
/// a <= 1/max(0, -lambda_min(Lam^-1/2 Dbar Lam^-1/2)).
inline double max_psd_step(const VectorXd& lam, const MatrixXd& Dbar, double cap) {
    const int d = static_cast<int>(lam.size());
    VectorXd is = lam.cwiseSqrt().cwiseInverse();
    MatrixXd T = is.asDiagonal() * Dbar * is.asDiagonal();
    Eigen::SelfAdjointEigenSolver<MatrixXd> eig(0.5 * (T + T.transpose()),
                                                Eigen::EigenvaluesOnly);
    const double wmin = eig.eigenvalues().minCoeff();
    if (wmin >= 0.0) return cap;
    return std::min(cap, 1.0 / (-wmin));
}

}  // namespace conic_detail

inline SolveResult solve_cone_problem(const ConeProblem& prob, const SolverOptions& opt = {}) {
    using namespace conic_detail;
    const int n = prob.num_vars;
    const int nb = static_cast<int>(prob.psd.size());
    const int p = static_cast<int>(prob.rows.size());
    if (n == 0) throw std::invalid_argument("solve_cone_problem: no variables");

    const VectorXd c = Eigen::Map<const VectorXd>(prob.objective.data(), n);

    // Dense per-block data: constants, per-variable coefficient matrices.
    std::vector<int> bdim(nb), bsv(nb);
    std::vector<MatrixXd> C(nb);
    std::vector<std::vector<int>> bvars(nb);
    std::vector<std::vector<MatrixXd>> A(nb);
    for (int j = 0; j < nb; ++j) {
        const auto& blk = prob.psd[j];
        bdim[j] = blk.dim;
        bsv[j] = svec_dim(blk.dim);
        C[j] = MatrixXd::Zero(blk.dim, blk.dim);
        for (const auto& e : blk.constant) C[j](e.row, e.col) += e.value;
        C[j] = 0.5 * (C[j] + C[j].transpose().eval());
        bvars[j].reserve(blk.vars.size());
        A[j].reserve(blk.vars.size());
        for (const auto& ve : blk.vars) {
            MatrixXd Ak = MatrixXd::Zero(blk.dim, blk.dim);
            for (const auto& e : ve.entries) Ak(e.row, e.col) += e.value;
            Ak = 0.5 * (Ak + Ak.transpose().eval());
            bvars[j].push_back(ve.var);
            A[j].push_back(std::move(Ak));
        }
    }

    double hnorm2 = 0.0;
    for (int j = 0; j < nb; ++j) hnorm2 += C[j].squaredNorm();
    for (int i = 0; i < p; ++i) hnorm2 += prob.rows[i].bound * prob.rows[i].bound;
    const double norm_h = std::max(1.0, std::sqrt(hnorm2));
    const double norm_c = std::max(1.0, c.norm());

    // Cone order (barrier degree) for mu.
    int order = 1;  // tau * kappa pair
    for (int j = 0; j < nb; ++j) order += bdim[j];
    order += p;

    // State.
    VectorXd x = VectorXd::Zero(n);
    std::vector<MatrixXd> S(nb), Z(nb);
    for (int j = 0; j < nb; ++j) {
        S[j] = opt.init_scale * MatrixXd::Identity(bdim[j], bdim[j]);
        Z[j] = opt.init_scale * MatrixXd::Identity(bdim[j], bdim[j]);
    }
    VectorXd sl = VectorXd::Constant(p, opt.init_scale);
    VectorXd zl = VectorXd::Constant(p, opt.init_scale);
    double tau = 1.0, kappa = 1.0;

    auto apply_G = [&](int j, const VectorXd& v) {
        MatrixXd R = MatrixXd::Zero(bdim[j], bdim[j]);
        for (std::size_t a = 0; a < bvars[j].size(); ++a) R += v[bvars[j][a]] * A[j][a];
        return R;
    };
    auto row_dot = [&](int i, const VectorXd& v) {
        double s = 0.0;
        for (const auto& [k, cf] : prob.rows[i].coef) s += cf * v[k];
        return s;
    };

    SolveResult res;
    res.y = VectorXd::Zero(n);

    // Per-iteration workspaces.
    std::vector<MatrixXd> Rfac(nb), Rinv(nb);
    std::vector<VectorXd> lam(nb);
    std::vector<RowMajorXd> stack(nb);  // row-major: svec_into writes rows contiguously
    VectorXd wlin(p), lamlin(p);
    MatrixXd M(n, n);
    Eigen::LLT<MatrixXd> Mllt;
    VectorXd vvec(n);
    double a_tt = 0.0;

    // Residual storage.
    std::vector<MatrixXd> Rp(nb);
    VectorXd rpl(p), rd(n);
    double rg = 0.0;

    struct Direction {
        VectorXd dx;
        std::vector<MatrixXd> dS, dZ, dSbar, dZbar;
        VectorXd dsl, dzl;
        double dtau = 0.0, dkappa = 0.0;
    };
    Direction aff, comb;
    aff.dS.resize(nb); aff.dZ.resize(nb); aff.dSbar.resize(nb); aff.dZbar.resize(nb);
    comb = aff;

    VectorXd dx1;  // tau-column solve, reused by both passes

    // Best iterate seen so far: late iterations can lose dual accuracy to
    // round-off, in which case the best point is what gets reported.
    double best_metric = std::numeric_limits<double>::infinity();
    VectorXd best_y;
    double best_obj = 0.0, best_pres = 0.0, best_dres = 0.0, best_gap = 0.0;
    int best_it = 0;
    auto finish = [&](SolveStatus st) {
        res.status = st;
        if (best_y.size() > 0) {
            res.y = best_y;
            res.objective = best_obj;
            res.primal_residual = best_pres;
            res.dual_residual = best_dres;
            res.relative_gap = best_gap;
            res.iterations = best_it;
        }
        return res;
    };

    // One step of iterative refinement keeps the reduced-system solves
    // accurate once the scaling matrices become ill-conditioned near the
    // optimum.
    auto msolve = [&](const VectorXd& b) {
        VectorXd x0 = Mllt.solve(b);
        x0 += Mllt.solve(b - M.selfadjointView<Eigen::Lower>() * x0);
        return x0;
    };

    auto solve_reduced = [&](double eta, const std::vector<MatrixXd>& D, const VectorXd& dl,
                             double dkap, Direction& out) -> bool {
        VectorXd u = VectorXd::Zero(n);
        double e0 = 0.0;
        std::vector<MatrixXd> Q(nb), BQ(nb);
        for (int j = 0; j < nb; ++j) {
            Q[j] = -eta * Rp[j] - Rfac[j] * lyap_diag(lam[j], D[j]) * Rfac[j].transpose();
            BQ[j] = Rinv[j] * Q[j] * Rinv[j].transpose();
            VectorXd sv(bsv[j]);
            svec_into(BQ[j], sv.data());
            VectorXd contrib = stack[j] * sv;
            for (std::size_t a = 0; a < bvars[j].size(); ++a) u[bvars[j][a]] += contrib[a];
            e0 -= contrib[bvars[j].size()];  // -<W^-1 C W^-1, Q>
        }
        VectorXd ql(p);
        for (int i = 0; i < p; ++i) {
            ql[i] = -eta * rpl[i] - wlin[i] * dl[i] / lamlin[i];
            const double scaled = ql[i] / (wlin[i] * wlin[i]);
            for (const auto& [k, cf] : prob.rows[i].coef) u[k] += cf * scaled;
            e0 += prob.rows[i].bound * scaled;
        }
        const VectorXd dx2 = msolve(-eta * rd - u);
        const VectorXd cmv = c - vvec;
        const double denom = cmv.dot(dx1) - a_tt - kappa / tau;
        if (!std::isfinite(denom) || std::abs(denom) < 1e-300) return false;
        const double dtau = (-eta * rg - dkap / tau - cmv.dot(dx2) - e0) / denom;
        out.dx = dx2 + dtau * dx1;
        out.dtau = dtau;
        out.dkappa = (dkap - kappa * dtau) / tau;
        for (int j = 0; j < nb; ++j) {
            const MatrixXd Gdx = apply_G(j, out.dx);
            out.dS[j] = dtau * C[j] + Gdx - eta * Rp[j];
            MatrixXd inner = BQ[j] + Rinv[j] * (Gdx + dtau * C[j]) * Rinv[j].transpose();
            out.dZbar[j] = -inner;
            out.dZ[j] = -(Rinv[j].transpose() * inner * Rinv[j]);
            out.dSbar[j] = Rinv[j] * out.dS[j] * Rinv[j].transpose();
        }
        out.dsl.resize(p);
        out.dzl.resize(p);
        for (int i = 0; i < p; ++i) {
            out.dsl[i] = row_dot(i, out.dx) - dtau * prob.rows[i].bound - eta * rpl[i];
            out.dzl[i] = -(ql[i] + row_dot(i, out.dx) - dtau * prob.rows[i].bound) /
                         (wlin[i] * wlin[i]);
        }
        return true;
    };

    auto max_step = [&](const Direction& d, double cap) {
        double a = cap;
        for (int j = 0; j < nb; ++j) {
            a = max_psd_step(lam[j], d.dSbar[j], a);
            a = max_psd_step(lam[j], d.dZbar[j], a);
        }
        for (int i = 0; i < p; ++i) {
            if (d.dsl[i] < 0.0) a = std::min(a, -sl[i] / d.dsl[i]);
            if (d.dzl[i] < 0.0) a = std::min(a, -zl[i] / d.dzl[i]);
        }
        if (d.dtau < 0.0) a = std::min(a, -tau / d.dtau);
        if (d.dkappa < 0.0) a = std::min(a, -kappa / d.dkappa);
        return a;
    };

    for (int it = 0; it < opt.max_iterations; ++it) {
        // Residuals at the current point.
        for (int j = 0; j < nb; ++j) Rp[j] = S[j] - tau * C[j] - apply_G(j, x);
        for (int i = 0; i < p; ++i) rpl[i] = sl[i] - row_dot(i, x) + tau * prob.rows[i].bound;
        VectorXd atz = VectorXd::Zero(n);  // sum_j <A_jk, Z_j> + sum_i g_ik zl_i
        for (int j = 0; j < nb; ++j)
            for (std::size_t a = 0; a < bvars[j].size(); ++a)
                atz[bvars[j][a]] += (A[j][a].cwiseProduct(Z[j])).sum();
        for (int i = 0; i < p; ++i)
            for (const auto& [k, cf] : prob.rows[i].coef) atz[k] += cf * zl[i];
        rd = tau * c - atz;
        double hz = 0.0;  // <h, z> = sum <C_j, Z_j> - sum r_i zl_i
        for (int j = 0; j < nb; ++j) hz += (C[j].cwiseProduct(Z[j])).sum();
        for (int i = 0; i < p; ++i) hz -= prob.rows[i].bound * zl[i];
        rg = kappa + c.dot(x) + hz;

        double gap = 0.0;
        for (int j = 0; j < nb; ++j) gap += (S[j].cwiseProduct(Z[j])).sum();
        gap += sl.dot(zl);
        const double mu = (gap + tau * kappa) / order;

        // Relative convergence metrics of the de-homogenized candidate.
        double prn2 = 0.0;
        for (int j = 0; j < nb; ++j) prn2 += Rp[j].squaredNorm();
        prn2 += rpl.squaredNorm();
        const double pres = std::sqrt(prn2) / (tau * (1.0 + norm_h));
        const double dres = rd.norm() / (tau * (1.0 + norm_c));
        const double pobj = c.dot(x) / tau;
        const double relgap = (gap / (tau * tau)) / std::max(1.0, std::abs(pobj));
        if (opt.verbose)
            std::fprintf(stderr,
                         "iter %3d  pres %8.2e dres %8.2e relgap %8.2e pobj %11.4e "
                         "tau %8.2e kappa %8.2e mu %8.2e\n",
                         it, pres, dres, relgap, pobj, tau, kappa, mu);
        res.iterations = it;
        res.primal_residual = pres;
        res.dual_residual = dres;
        res.relative_gap = relgap;
        if (pres <= opt.tol && dres <= opt.tol && relgap <= opt.tol) {
            res.status = SolveStatus::optimal;
            res.y = x / tau;
            res.objective = pobj;
            return res;
        }
        const double metric = std::max({pres, dres, relgap});
        if (metric < best_metric) {
            best_metric = metric;
            best_y = x / tau;
            best_obj = pobj;
            best_pres = pres;
            best_dres = dres;
            best_gap = relgap;
            best_it = it;
        } else if (metric > 1e3 * best_metric) {
            // Round-off has taken over; no further progress is possible.
            return finish(SolveStatus::numerical_failure);
        }
        // Infeasibility certificates (only once kappa dominates tau).
        if (kappa > tau) {
            if (hz < 0.0 && atz.norm() / (-hz) <= opt.infeas_tol * norm_c) {
                res.status = SolveStatus::primal_infeasible;
                return res;
            }
            const double cx = c.dot(x);
            double hp2 = 0.0;
            for (int j = 0; j < nb; ++j) hp2 += (S[j] - apply_G(j, x)).squaredNorm();
            for (int i = 0; i < p; ++i) {
                const double t = sl[i] - row_dot(i, x);
                hp2 += t * t;
            }
            if (cx < 0.0 && std::sqrt(hp2) / (-cx) <= opt.infeas_tol * norm_h) {
                res.status = SolveStatus::dual_infeasible;
                return res;
            }
        }

        // Nesterov-Todd scalings.
        bool scale_ok = true;
        for (int j = 0; j < nb && scale_ok; ++j) {
            Eigen::LLT<MatrixXd> ls(S[j]), lz(Z[j]);
            if (ls.info() != Eigen::Success || lz.info() != Eigen::Success) {
                scale_ok = false;
                break;
            }
            const MatrixXd Ls = ls.matrixL();
            const MatrixXd Lz = lz.matrixL();
            Eigen::JacobiSVD<MatrixXd> svd(Lz.transpose() * Ls,
                                           Eigen::ComputeFullU | Eigen::ComputeFullV);
            lam[j] = svd.singularValues().cwiseMax(1e-150);
            const VectorXd li = lam[j].cwiseSqrt().cwiseInverse();
            Rfac[j] = Ls * svd.matrixV() * li.asDiagonal();
            // R^-1 = Lambda^1/2 V^T Ls^-1
            Rinv[j] = lam[j].cwiseSqrt().asDiagonal() * svd.matrixV().transpose() *
                      Ls.triangularView<Eigen::Lower>().solve(
                          MatrixXd::Identity(bdim[j], bdim[j]));
        }
        if (!scale_ok) return finish(SolveStatus::numerical_failure);
        for (int i = 0; i < p; ++i) {
            wlin[i] = std::sqrt(sl[i] / zl[i]);
            lamlin[i] = std::sqrt(sl[i] * zl[i]);
        }

        // Schur complement M, tau-column vector v, and a_tt = <h, W^-1 h>.
        M.setZero();
        vvec.setZero();
        a_tt = 0.0;
        for (int j = 0; j < nb; ++j) {
            const int nj = static_cast<int>(bvars[j].size());
            stack[j].resize(nj + 1, bsv[j]);
            MatrixXd B(bdim[j], bdim[j]);
            for (int a = 0; a <= nj; ++a) {
                const MatrixXd& Aa = (a < nj) ? A[j][a] : C[j];
                B.noalias() = Rinv[j] * Aa * Rinv[j].transpose();
                svec_into(B, stack[j].row(a).data());
            }
            const MatrixXd gram = stack[j] * stack[j].transpose();
            for (int a = 0; a < nj; ++a) {
                const int ka = bvars[j][a];
                for (int b2 = 0; b2 < nj; ++b2) M(ka, bvars[j][b2]) += gram(a, b2);
                vvec[ka] += gram(a, nj);
            }
            a_tt += gram(nj, nj);
        }
        for (int i = 0; i < p; ++i) {
            const double iw2 = 1.0 / (wlin[i] * wlin[i]);
            const auto& cf = prob.rows[i].coef;
            for (const auto& [k1, c1] : cf) {
                for (const auto& [k2, c2] : cf) M(k1, k2) += c1 * c2 * iw2;
                vvec[k1] -= c1 * prob.rows[i].bound * iw2;
            }
            a_tt += prob.rows[i].bound * prob.rows[i].bound * iw2;
        }

        // Factor with escalating ridge regularization on failure.
        double ridge = 0.0;
        for (int attempt = 0;; ++attempt) {
            if (ridge > 0.0) M.diagonal().array() += ridge;
            Mllt.compute(M);
            if (Mllt.info() == Eigen::Success) break;
            if (attempt >= 6) return finish(SolveStatus::numerical_failure);
            ridge = (ridge == 0.0) ? 1e-12 * (1.0 + M.diagonal().maxCoeff()) : ridge * 100.0;
        }
        dx1 = msolve(-(c + vvec));

        // Predictor (affine) direction: full residuals, target 0 centrality.
        std::vector<MatrixXd> D(nb);
        for (int j = 0; j < nb; ++j)
            D[j] = -MatrixXd(lam[j].cwiseAbs2().asDiagonal());
        VectorXd dl = -lamlin.cwiseAbs2();
        if (!solve_reduced(1.0, D, dl, -tau * kappa, aff))
            return finish(SolveStatus::numerical_failure);
        const double alpha_aff = max_step(aff, 1.0);

        // Centering weight from the affine gap reduction.
        double gap_aff = 0.0;
        for (int j = 0; j < nb; ++j)
            gap_aff += ((S[j] + alpha_aff * aff.dS[j]).cwiseProduct(Z[j] + alpha_aff * aff.dZ[j]))
                           .sum();
        gap_aff += (sl + alpha_aff * aff.dsl).dot(zl + alpha_aff * aff.dzl);
        gap_aff += (tau + alpha_aff * aff.dtau) * (kappa + alpha_aff * aff.dkappa);
        double sigma = std::pow(std::max(0.0, gap_aff / (mu * order)), 3.0);
        sigma = std::min(1.0, std::max(0.0, sigma));

        // Corrector (combined) direction.
        for (int j = 0; j < nb; ++j) {
            const MatrixXd prod = aff.dSbar[j] * aff.dZbar[j];
            D[j] = -MatrixXd(lam[j].cwiseAbs2().asDiagonal()) -
                   0.5 * (prod + prod.transpose()) +
                   sigma * mu * MatrixXd::Identity(bdim[j], bdim[j]);
        }
        for (int i = 0; i < p; ++i)
            dl[i] = -lamlin[i] * lamlin[i] - (aff.dsl[i] / wlin[i]) * (wlin[i] * aff.dzl[i]) +
                    sigma * mu;
        const double dkap_c = -tau * kappa - aff.dtau * aff.dkappa + sigma * mu;
        if (!solve_reduced(1.0 - sigma, D, dl, dkap_c, comb))
            return finish(SolveStatus::numerical_failure);
        double alpha = opt.step_fraction * max_step(comb, 1.0 / opt.step_fraction);
        alpha = std::min(1.0, alpha);
        if (!(alpha > 1e-9)) return finish(SolveStatus::numerical_failure);

        x += alpha * comb.dx;
        for (int j = 0; j < nb; ++j) {
            S[j] += alpha * comb.dS[j];
            Z[j] += alpha * comb.dZ[j];
            S[j] = 0.5 * (S[j] + S[j].transpose().eval());
            Z[j] = 0.5 * (Z[j] + Z[j].transpose().eval());
        }
        sl += alpha * comb.dsl;
        zl += alpha * comb.dzl;
        tau += alpha * comb.dtau;
        kappa += alpha * comb.dkappa;
    }
    return finish(SolveStatus::iteration_limit);
}

}  // namespace disac
