#pragma once

// Transmit-covariance design for distributed ISAC. Three problem families
// trade the position CRB against per-user downlink SINR:
//
//   joint       full cross-node covariance, every node on every subcarrier
//   orthogonal  round-robin subcarrier ownership, one node per subcarrier
//   averaged    one covariance per node, spread over its owned subcarriers
//
// Each family is posed as a semidefinite program: epigraph variables bound
// the diagonal of the inverse information matrix through Schur-complement
// blocks, communication covariances are rank-relaxed, and per-antenna power
// plus per-user SINR enter as linear constraints. After the solve the
// communication covariances are collapsed to rank-one beamformers (which
// leaves every constraint value at the returned point unchanged) and the
// CRB is re-evaluated at the covariances actually returned.

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "comms.hpp"
#include "conic.hpp"
#include "covariance.hpp"
#include "fim.hpp"
#include "scenario.hpp"
#include "solver.hpp"

namespace disac {

enum class DesignFamily { joint, orthogonal, averaged };

inline std::string to_string(DesignFamily f) {
    switch (f) {
        case DesignFamily::joint: return "joint";
        case DesignFamily::orthogonal: return "orthogonal";
        case DesignFamily::averaged: return "averaged";
    }
    return "?";
}

inline DesignFamily design_family_from_string(const std::string& s) {
    if (s == "joint") return DesignFamily::joint;
    if (s == "orthogonal") return DesignFamily::orthogonal;
    if (s == "averaged") return DesignFamily::averaged;
    throw std::invalid_argument("unknown design family '" + s +
                                "' (expected joint, orthogonal or averaged)");
}

/// Number of real scalars parameterizing the covariance variables of a
/// family (epigraph variables excluded). An M x M Hermitian block costs M^2
/// reals.
inline int design_variable_count(DesignFamily f, int tx_antennas, int nodes, int subcarriers,
                                 int users) {
    const int m2 = tx_antennas * tx_antennas;
    switch (f) {
        case DesignFamily::joint:
            return m2 * nodes * nodes * subcarriers + m2 * nodes * users * subcarriers;
        case DesignFamily::orthogonal:
            return m2 * subcarriers + m2 * users * subcarriers;
        case DesignFamily::averaged:
            return m2 * nodes + m2 * users * subcarriers;
    }
    return 0;
}

/// Round-robin subcarrier ownership used by the orthogonal and averaged
/// families: subcarrier l is transmitted by node l mod N.
inline std::vector<int> subcarrier_owner(int nodes, int subcarriers) {
    std::vector<int> owner(subcarriers);
    for (int l = 0; l < subcarriers; ++l) owner[l] = l % nodes;
    return owner;
}

/// Solver defaults for the design problems. The epigraph objective is
/// rescaled to order one before the cone program is assembled, so the
/// tolerance below is a relative accuracy on the optimal value; 3e-7 leaves
/// a wide margin over anything the downstream consumers resolve while
/// tolerating the mildly ill-conditioned final iterations of tightly
/// constrained instances.
inline SolverOptions design_solver_defaults() {
    SolverOptions opt;
    opt.tol = 3e-7;
    return opt;
}

struct DesignOptions {
    SolverOptions solver = design_solver_defaults();
    /// Information mode the design optimizes (and the CRB is reported in).
    LocalizationMode mode = LocalizationMode::hybrid;
    /// Hard cap on covariance scalars; larger problems are refused rather
    /// than ground through the dense interior-point solver.
    int max_scalars = 5000;
    /// Scaled information-coefficient matrices with no entry above this are
    /// dropped from the epigraph blocks.
    double coefficient_drop = 1e-18;
};

struct DesignResult {
    DesignFamily family = DesignFamily::joint;
    SolveStatus status = SolveStatus::numerical_failure;

    /// Position CRB re-evaluated at the returned covariances [m^2], and its
    /// root form [m]. NaN unless status is optimal.
    double crb = std::numeric_limits<double>::quiet_NaN();
    double rcrb = std::numeric_limits<double>::quiet_NaN();
    /// Objective value reported by the conic solver (equals crb up to solver
    /// tolerance for the joint/orthogonal families; for the averaged family
    /// the rank-one collapse of the communication covariances can move the
    /// re-evaluated crb slightly off the relaxed optimum).
    double objective = std::numeric_limits<double>::quiet_NaN();

    /// Per-subcarrier totals plus rank-one communication covariances. For
    /// the orthogonal family the owner's diagonal block holds that
    /// subcarrier's covariance; for the averaged family it holds the
    /// realized per-subcarrier covariance implied by the node average.
    CovarianceSet covariances;
    /// Averaged family only: the per-node covariance averaged over owned
    /// subcarriers (the actual design variable).
    std::vector<MatrixXcd> node_average;
    /// Subcarrier ownership map (empty for the joint family).
    std::vector<int> owner;

    int covariance_scalars = 0;
    int iterations = 0;
    double wall_seconds = 0.0;
};

namespace design_detail {

/// Index bookkeeping for an M x M Hermitian matrix variable stored as M^2
/// real solver scalars: the real part of each upper-triangle entry plus the
/// imaginary part of each strictly-upper entry.
class HermVarBlock {
public:
    HermVarBlock() = default;

    HermVarBlock(ConeProblem& prob, int dim) : dim_(dim), re_(dim * dim, -1), im_(dim * dim, -1) {
        for (int p = 0; p < dim; ++p)
            for (int q = p; q < dim; ++q) {
                re_[p * dim + q] = prob.add_var();
                if (q > p) im_[p * dim + q] = prob.add_var();
            }
    }

    int dim() const { return dim_; }
    int var_re(int p, int q) const { return re_[p * dim_ + q]; }
    int var_im(int p, int q) const { return im_[p * dim_ + q]; }

    /// Adds scale * (this matrix) to a realified Hermitian PSD block.
    void add_to(HermitianBlockAdder& adder, cxd scale) const {
        for (int p = 0; p < dim_; ++p)
            for (int q = p; q < dim_; ++q) {
                adder.add(var_re(p, q), p, q, scale);
                if (q > p) adder.add(var_im(p, q), p, q, scale * cxd(0.0, 1.0));
            }
    }

    /// Accumulates scale * h^H (this matrix) h into a linear-row coefficient
    /// vector indexed by solver variable.
    void accumulate_quadratic_form(std::vector<double>& coef, const VectorXcd& h,
                                   double scale) const {
        for (int p = 0; p < dim_; ++p)
            for (int q = p; q < dim_; ++q) {
                if (p == q) {
                    coef[var_re(p, p)] += scale * std::norm(h[p]);
                } else {
                    const cxd z = std::conj(h[p]) * h[q];
                    coef[var_re(p, q)] += scale * 2.0 * z.real();
                    coef[var_im(p, q)] += scale * -2.0 * z.imag();
                }
            }
    }

    MatrixXcd value(const VectorXd& y) const {
        MatrixXcd R(dim_, dim_);
        for (int p = 0; p < dim_; ++p)
            for (int q = p; q < dim_; ++q) {
                if (p == q) {
                    R(p, p) = y[var_re(p, p)];
                } else {
                    R(p, q) = cxd(y[var_re(p, q)], y[var_im(p, q)]);
                    R(q, p) = std::conj(R(p, q));
                }
            }
        return R;
    }

private:
    int dim_ = 0;
    std::vector<int> re_, im_;
};

/// Like HermVarBlock but a view on the (node, node) diagonal sub-block of a
/// larger Hermitian variable: used where a constraint touches only one
/// node's slice of the full augmented covariance.
class DiagSubBlock {
public:
    DiagSubBlock(const HermVarBlock& full, int node, int mt) : full_(full), off_(node * mt), mt_(mt) {}

    void add_to(HermitianBlockAdder& adder, cxd scale) const {
        for (int p = 0; p < mt_; ++p)
            for (int q = p; q < mt_; ++q) {
                adder.add(full_.var_re(off_ + p, off_ + q), p, q, scale);
                if (q > p) adder.add(full_.var_im(off_ + p, off_ + q), p, q, scale * cxd(0.0, 1.0));
            }
    }

    void accumulate_quadratic_form(std::vector<double>& coef, const VectorXcd& h,
                                   double scale) const {
        for (int p = 0; p < mt_; ++p)
            for (int q = p; q < mt_; ++q) {
                if (p == q) {
                    coef[full_.var_re(off_ + p, off_ + p)] += scale * std::norm(h[p]);
                } else {
                    const cxd z = std::conj(h[p]) * h[q];
                    coef[full_.var_re(off_ + p, off_ + q)] += scale * 2.0 * z.real();
                    coef[full_.var_im(off_ + p, off_ + q)] += scale * -2.0 * z.imag();
                }
            }
    }

private:
    const HermVarBlock& full_;
    int off_, mt_;
};

/// Diagonal scaling that makes the information matrix of a uniform,
/// full-power reference design have a unit diagonal. The epigraph blocks are
/// written in the scaled space so the solver sees O(1) data.
inline VectorXd information_scaling(const FimCalculator& fim, const Scenario& scen) {
    const int d = scen.nodes() * scen.ofdm.tx_antennas;
    CovarianceSet ref(scen.nodes(), scen.ofdm.tx_antennas, scen.ofdm.subcarriers, 0);
    for (int l = 0; l < scen.ofdm.subcarriers; ++l)
        ref.augmented(l) =
            MatrixXcd::Identity(d, d) * (scen.power.per_antenna_power / scen.ofdm.subcarriers);
    const MatrixXd fref = fim.assemble_fim_theta(ref);
    return fref.diagonal().cwiseMax(1e-12).cwiseSqrt().cwiseInverse();
}

/// Shared epigraph machinery: one (pos_dim + 1) Schur block per bounded
/// diagonal entry of the inverse information matrix.
struct EpigraphBlocks {
    std::vector<int> block;    ///< conic block index per position coordinate
    std::vector<int> t_var;    ///< epigraph variable per position coordinate
    MatrixXd scale;            ///< diag(d) with F_tilde = D F D
    double objective_scale;    ///< divides the costs so the optimum is O(1)
    int pos_dim = 0;
    double drop = 1e-18;

    EpigraphBlocks(ConeProblem& prob, const VectorXd& dscale, int n_pos, int n_bound) {
        pos_dim = n_pos;
        scale = dscale.asDiagonal();
        objective_scale = dscale.head(n_bound).squaredNorm();
        for (int i = 0; i < n_bound; ++i) {
            t_var.push_back(prob.add_var(dscale[i] * dscale[i] / objective_scale));
            const int b = prob.add_psd_block(n_pos + 1, "crb_epigraph[" + std::to_string(i) + "]");
            block.push_back(b);
            prob.add_sym_const(b, i, n_pos, 1.0);
            prob.add_sym(b, t_var[i], n_pos, n_pos, 1.0);
        }
    }

    /// Adds the scaled information contribution of one covariance scalar to
    /// every epigraph block.
    void add_coefficient(ConeProblem& prob, int var, const MatrixXd& coeff) {
        const MatrixXd scaled = scale * coeff * scale;
        if (scaled.cwiseAbs().maxCoeff() <= drop) return;
        for (int b : block)
            for (int r = 0; r < pos_dim; ++r)
                for (int c = r; c < pos_dim; ++c)
                    if (scaled(r, c) != 0.0) prob.add_sym(b, var, r, c, scaled(r, c));
    }
};

/// Builds w w^H with w the beamformer that preserves the quadratic form
/// h^H R h of a PSD covariance; returns a zero matrix when the covariance
/// carries (numerically) no power toward h.
inline MatrixXcd rank_one_comm(const MatrixXcd& R, const VectorXcd& h) {
    const VectorXcd w = comm_beamformer(R, h);
    if (w.size() == 0) return MatrixXcd::Zero(R.rows(), R.cols());
    return w * w.adjoint();
}

}  // namespace design_detail

/// Solves one design family for the given scenario and channel realization.
/// The SINR threshold, power budget and noise levels come from
/// scen.power; channels must match the scenario dimensions.
inline DesignResult solve_design(const Scenario& scen, const ChannelSet& channels, DesignFamily family,
                                 const DesignOptions& opt = {}) {
    using design_detail::DiagSubBlock;
    using design_detail::EpigraphBlocks;
    using design_detail::HermVarBlock;

    const auto t_start = std::chrono::steady_clock::now();
    const int N = scen.nodes(), Mt = scen.ofdm.tx_antennas, L = scen.ofdm.subcarriers;
    const int U = scen.users(), K = scen.targets();
    const int D = N * Mt;
    if (channels.nodes() != N || channels.users() != U || channels.subcarriers() != L ||
        channels.tx_antennas() != Mt)
        throw std::invalid_argument("solve_design: channel set does not match scenario dimensions");
    if (family == DesignFamily::orthogonal && L < N)
        throw std::invalid_argument("orthogonal design needs at least one subcarrier per node (L >= N)");
    if (family == DesignFamily::averaged && L % N != 0)
        throw std::invalid_argument("averaged design needs subcarriers divisible by node count");

    const int n_scal = design_variable_count(family, Mt, N, L, U);
    if (n_scal > opt.max_scalars)
        throw std::invalid_argument("solve_design: " + std::to_string(n_scal) +
                                    " covariance scalars exceed the limit of " +
                                    std::to_string(opt.max_scalars));

    const double gamma = db_to_linear(scen.power.sinr_threshold_db);
    const double pt = scen.power.per_antenna_power;
    const double noise_floor = scen.power.comm_noise / L;
    const FimCalculator fim(scen, opt.mode);
    const int pos_dim = IndexMaps{N, K}.pos_dim();
    const VectorXd dscale = design_detail::information_scaling(fim, scen);
    const std::vector<int> owner = subcarrier_owner(N, L);
    std::vector<std::vector<int>> owned(N);
    for (int l = 0; l < L; ++l) owned[owner[l]].push_back(l);

    ConeProblem prob;

    // Covariance variables, then epigraph variables.
    std::vector<HermVarBlock> rt;                            // joint: full D x D per subcarrier
    std::vector<HermVarBlock> rsub;                          // orthogonal: Mt x Mt per subcarrier
    std::vector<HermVarBlock> rbar;                          // averaged: Mt x Mt per node
    std::vector<std::vector<std::vector<HermVarBlock>>> rc;  // [n][u][l]; owner-only families use n=0
    auto comm_block = [&](int n, int u, int l) -> HermVarBlock& {
        return family == DesignFamily::joint ? rc[n][u][l] : rc[0][u][l];
    };

    if (family == DesignFamily::joint) {
        for (int l = 0; l < L; ++l) rt.emplace_back(prob, D);
        rc.assign(N, std::vector<std::vector<HermVarBlock>>(U, std::vector<HermVarBlock>(L)));
        for (int n = 0; n < N; ++n)
            for (int u = 0; u < U; ++u)
                for (int l = 0; l < L; ++l) rc[n][u][l] = HermVarBlock(prob, Mt);
    } else {
        if (family == DesignFamily::orthogonal)
            for (int l = 0; l < L; ++l) rsub.emplace_back(prob, Mt);
        else
            for (int n = 0; n < N; ++n) rbar.emplace_back(prob, Mt);
        rc.assign(1, std::vector<std::vector<HermVarBlock>>(U, std::vector<HermVarBlock>(L)));
        for (int l = 0; l < L; ++l)
            for (int u = 0; u < U; ++u) rc[0][u][l] = HermVarBlock(prob, Mt);
    }
    if (prob.num_vars != n_scal)
        throw std::logic_error("solve_design: builder produced " + std::to_string(prob.num_vars) +
                               " scalars, expected " + std::to_string(n_scal));

    EpigraphBlocks epi(prob, dscale, pos_dim, 2 * K);
    epi.drop = opt.coefficient_drop;

    // Information coefficients: the position-domain information matrix is
    // affine in every covariance scalar, so each scalar contributes one
    // constant matrix to the epigraph blocks.
    auto basis_coeff = [&](int l, int node_i, int node_j, int p, int q, bool imag) {
        return fim.assemble_fim_theta(fim.basis_cov(l, node_i, node_j, p, q, imag), l);
    };
    if (family == DesignFamily::joint) {
        for (int l = 0; l < L; ++l)
            for (int gp = 0; gp < D; ++gp)
                for (int gq = gp; gq < D; ++gq) {
                    const int bi = gp / Mt, bj = gq / Mt, p = gp % Mt, q = gq % Mt;
                    epi.add_coefficient(prob, rt[l].var_re(gp, gq), basis_coeff(l, bi, bj, p, q, false));
                    if (gq > gp)
                        epi.add_coefficient(prob, rt[l].var_im(gp, gq), basis_coeff(l, bi, bj, p, q, true));
                }
    } else if (family == DesignFamily::orthogonal) {
        for (int l = 0; l < L; ++l) {
            const int n = owner[l];
            for (int p = 0; p < Mt; ++p)
                for (int q = p; q < Mt; ++q) {
                    epi.add_coefficient(prob, rsub[l].var_re(p, q), basis_coeff(l, n, n, p, q, false));
                    if (q > p)
                        epi.add_coefficient(prob, rsub[l].var_im(p, q), basis_coeff(l, n, n, p, q, true));
                }
        }
    } else {
        // The realized covariance on an owned subcarrier is
        //   U_l = (N/L) (Rbar - sum_{l' owned} sum_u Rc_{u,l'}) + sum_u Rc_{u,l},
        // so the node average contributes through the owned-sum coefficient
        // and each communication covariance both subtracts from the spread
        // average and adds back on its own subcarrier.
        const double w = static_cast<double>(N) / L;
        for (int n = 0; n < N; ++n)
            for (int p = 0; p < Mt; ++p)
                for (int q = p; q < Mt; ++q)
                    for (int part = 0; part < (q > p ? 2 : 1); ++part) {
                        const bool imag = part == 1;
                        std::vector<MatrixXd> per_l;
                        MatrixXd sum = MatrixXd::Zero(pos_dim, pos_dim);
                        for (int l : owned[n]) {
                            per_l.push_back(basis_coeff(l, n, n, p, q, imag));
                            sum += per_l.back();
                        }
                        const int vr = imag ? rbar[n].var_im(p, q) : rbar[n].var_re(p, q);
                        epi.add_coefficient(prob, vr, w * sum);
                        for (std::size_t k = 0; k < owned[n].size(); ++k) {
                            const int l = owned[n][k];
                            const MatrixXd cc = per_l[k] - w * sum;
                            for (int u = 0; u < U; ++u) {
                                const auto& blk = comm_block(n, u, l);
                                epi.add_coefficient(prob, imag ? blk.var_im(p, q) : blk.var_re(p, q), cc);
                            }
                        }
                    }
    }

    // Covariance cones. Totals of the orthogonal/averaged families stay
    // implicit: they are sums of the interference and communication cones.
    if (family == DesignFamily::joint) {
        for (int l = 0; l < L; ++l) {
            HermitianBlockAdder full(prob, D, "cov_psd[" + std::to_string(l) + "]");
            rt[l].add_to(full, 1.0);
            for (int n = 0; n < N; ++n) {
                HermitianBlockAdder inter(prob, Mt, "interference[" + std::to_string(n) + "," +
                                                       std::to_string(l) + "]");
                DiagSubBlock(rt[l], n, Mt).add_to(inter, 1.0);
                for (int u = 0; u < U; ++u) rc[n][u][l].add_to(inter, -1.0);
                for (int u = 0; u < U; ++u) {
                    HermitianBlockAdder cpsd(prob, Mt, "comm_psd[" + std::to_string(n) + "," +
                                                          std::to_string(u) + "," + std::to_string(l) +
                                                          "]");
                    rc[n][u][l].add_to(cpsd, 1.0);
                }
            }
        }
    } else if (family == DesignFamily::orthogonal) {
        for (int l = 0; l < L; ++l) {
            HermitianBlockAdder inter(prob, Mt, "interference[" + std::to_string(l) + "]");
            rsub[l].add_to(inter, 1.0);
            for (int u = 0; u < U; ++u) rc[0][u][l].add_to(inter, -1.0);
        }
    } else {
        for (int n = 0; n < N; ++n) {
            HermitianBlockAdder inter(prob, Mt, "interference[" + std::to_string(n) + "]");
            rbar[n].add_to(inter, 1.0);
            for (int l : owned[n])
                for (int u = 0; u < U; ++u) rc[0][u][l].add_to(inter, -1.0);
        }
    }
    if (family != DesignFamily::joint)
        for (int l = 0; l < L; ++l)
            for (int u = 0; u < U; ++u) {
                HermitianBlockAdder cpsd(
                    prob, Mt, "comm_psd[" + std::to_string(u) + "," + std::to_string(l) + "]");
                rc[0][u][l].add_to(cpsd, 1.0);
            }

    // Per-antenna power, written as -(total) >= -P_T.
    auto add_power_row = [&](const std::vector<std::pair<int, double>>& coef, const std::string& lbl) {
        std::vector<std::pair<int, double>> neg(coef);
        for (auto& [v, c] : neg) c = -c;
        prob.add_row(std::move(neg), -pt, lbl);
    };
    if (family == DesignFamily::joint) {
        for (int m = 0; m < D; ++m) {
            std::vector<std::pair<int, double>> coef;
            for (int l = 0; l < L; ++l) coef.emplace_back(rt[l].var_re(m, m), 1.0);
            add_power_row(coef, "power[" + std::to_string(m) + "]");
        }
    } else if (family == DesignFamily::orthogonal) {
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < Mt; ++m) {
                std::vector<std::pair<int, double>> coef;
                for (int l : owned[n]) coef.emplace_back(rsub[l].var_re(m, m), 1.0);
                add_power_row(coef, "power[" + std::to_string(n) + "," + std::to_string(m) + "]");
            }
    } else {
        for (int n = 0; n < N; ++n)
            for (int m = 0; m < Mt; ++m)
                add_power_row({{rbar[n].var_re(m, m), 1.0}},
                              "power[" + std::to_string(n) + "," + std::to_string(m) + "]");
    }

    // SINR rows, scaled by 1/Gamma for conditioning:
    //   (1 + 1/Gamma) h^H Rc h - h^H (node total) h >= noise_floor.
    for (int u = 0; u < U; ++u)
        for (int l = 0; l < L; ++l) {
            std::vector<double> coef(static_cast<std::size_t>(prob.num_vars), 0.0);
            if (family == DesignFamily::joint) {
                for (int n = 0; n < N; ++n) {
                    const VectorXcd h = channels(n, u, l);
                    rc[n][u][l].accumulate_quadratic_form(coef, h, 1.0 + 1.0 / gamma);
                    DiagSubBlock(rt[l], n, Mt).accumulate_quadratic_form(coef, h, -1.0);
                }
            } else {
                const int n = owner[l];
                const VectorXcd h = channels(n, u, l);
                rc[0][u][l].accumulate_quadratic_form(coef, h, 1.0 + 1.0 / gamma);
                if (family == DesignFamily::orthogonal) {
                    rsub[l].accumulate_quadratic_form(coef, h, -1.0);
                } else {
                    const double w = static_cast<double>(N) / L;
                    rbar[n].accumulate_quadratic_form(coef, h, -w);
                    for (int lp : owned[n])
                        for (int up = 0; up < U; ++up)
                            rc[0][up][lp].accumulate_quadratic_form(coef, h, w);
                    for (int up = 0; up < U; ++up)
                        rc[0][up][l].accumulate_quadratic_form(coef, h, -1.0);
                }
            }
            std::vector<std::pair<int, double>> row;
            for (int v = 0; v < prob.num_vars; ++v)
                if (coef[v] != 0.0) row.emplace_back(v, coef[v]);
            prob.add_row(std::move(row), noise_floor,
                         "sinr[" + std::to_string(u) + "," + std::to_string(l) + "]");
        }

    DesignResult res;
    res.family = family;
    res.covariance_scalars = n_scal;
    if (family != DesignFamily::joint) res.owner = owner;

    SolveResult sol = solve_cone_problem(prob, opt.solver);
    res.status = sol.status == SolveStatus::dual_infeasible ? SolveStatus::numerical_failure : sol.status;
    res.iterations = sol.iterations;
    if (res.status != SolveStatus::optimal) {
        res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
        return res;
    }
    res.objective = sol.objective * epi.objective_scale;

    // Reconstruct covariances; communication parts collapse to rank one.
    res.covariances = CovarianceSet(N, Mt, L, U);
    auto canon = [&](int n, int u, int l, const HermVarBlock& blk) {
        res.covariances.comm(n, u, l) =
            design_detail::rank_one_comm(blk.value(sol.y), channels(n, u, l));
    };
    if (family == DesignFamily::joint) {
        for (int l = 0; l < L; ++l) res.covariances.augmented(l) = rt[l].value(sol.y);
        for (int n = 0; n < N; ++n)
            for (int u = 0; u < U; ++u)
                for (int l = 0; l < L; ++l) canon(n, u, l, rc[n][u][l]);
    } else if (family == DesignFamily::orthogonal) {
        for (int l = 0; l < L; ++l) {
            res.covariances.set_node_block(l, owner[l], owner[l], rsub[l].value(sol.y));
            for (int u = 0; u < U; ++u) canon(owner[l], u, l, rc[0][u][l]);
        }
    } else {
        for (int n = 0; n < N; ++n) res.node_average.push_back(rbar[n].value(sol.y));
        for (int l = 0; l < L; ++l)
            for (int u = 0; u < U; ++u) canon(owner[l], u, l, rc[0][u][l]);
        for (int n = 0; n < N; ++n) {
            MatrixXcd spread = res.node_average[n];
            for (int l : owned[n])
                for (int u = 0; u < U; ++u) spread -= res.covariances.comm(n, u, l);
            spread *= static_cast<double>(N) / L;
            for (int l : owned[n]) {
                MatrixXcd ul = spread;
                for (int u = 0; u < U; ++u) ul += res.covariances.comm(n, u, l);
                res.covariances.set_node_block(l, n, n, ul);
            }
        }
    }
    res.covariances.enforce_hermitian_all();

    const CrbReport rep = fim.crb_position(res.covariances);
    res.crb = rep.crb_position;
    res.rcrb = rep.rcrb;
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
    return res;
}

}  // namespace disac
