#pragma once

// Fisher information for noncoherent multistatic target localization with
// known transmit covariances.
//
// The estimation parameters are per-link angles theta(n,k), one-way TOFs
// tau(n,k) and complex link amplitudes b(n,m,k); the position-domain matrix
// re-parameterizes angles/TOFs into target coordinates through the geometry
// Jacobian while keeping the amplitudes as nuisance parameters. All blocks
// are exactly affine in the entries of the per-subcarrier augmented transmit
// covariances, which is what the design layer exploits: `affine_map_*`
// tabulates the constant coefficient matrix of every real covariance degree
// of freedom.
//
// Derivative channels per link factor into a receive-side steering part and a
// transmit-side part (steering x delay response); expectations over symbols
// reduce every pairing to weighted sums of terms
//   u_left^H conj(R_block) u_right * conj(g_left[l]) g_right[l]
// over subcarriers, with u a (derivative) transmit steering vector and g a
// (derivative) delay response evaluated at the summed two-way TOF.

#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "covariance.hpp"
#include "scenario.hpp"

namespace disac {

/// Which derivative of a link's transmit-side response a gram factor uses.
enum class DerivKind { plain, dtheta, dtau };

/// One real scalar degree of freedom of a covariance model: entry (p, q) of
/// augmented node block (node_i, node_j) on subcarrier l, real or imaginary
/// part. For averaged scopes l is the representative: all owned subcarriers
/// of node_i contribute with weight nodes/subcarriers.
struct CovVarKey {
    int l;
    int node_i, node_j;
    int p, q;
    bool imag_part;
};

/// Coefficient table of the position-domain information matrix: for each key,
/// the constant symmetric matrix multiplying that covariance scalar. The
/// constant term of the affine map is zero.
struct FimAffineMap {
    std::vector<CovVarKey> keys;
    std::vector<MatrixXd> coeffs;
    int dim = 0;
};

struct CrbReport {
    double crb_position;  ///< trace of the position block of the inverse [m^2]
    double rcrb;          ///< sqrt(crb_position) [m]: the root bound on total position RMSE
    double condition;     ///< spectral condition number of the full matrix
};

/// Condition-number limit beyond which the geometry is reported as
/// unidentifiable rather than silently inverting noise.
inline constexpr double identifiability_condition_limit = 1e12;

class FimCalculator {
public:
    FimCalculator(const Scenario& s, LocalizationMode mode = LocalizationMode::hybrid)
        : scen_(s), mode_(mode), im_{s.nodes(), s.targets()} {
        s.validate();
        const int N = s.nodes(), K = s.targets();
        const int Mt = s.ofdm.tx_antennas, Mr = s.ofdm.rx_antennas;
        const int L = s.ofdm.subcarriers;
        const double lam = s.ofdm.wavelength_m, d0 = s.ofdm.spacing();
        at_.resize(N); dat_.resize(N); ar_.resize(N); dar_.resize(N);
        for (int n = 0; n < N; ++n) {
            at_[n].resize(K); dat_[n].resize(K); ar_[n].resize(K); dar_[n].resize(K);
            for (int k = 0; k < K; ++k) {
                const double th = s.angle(n, k);
                at_[n][k] = steering_vector(th, Mt, lam, d0);
                ar_[n][k] = steering_vector(th, Mr, lam, d0);
                if (mode == LocalizationMode::tof_only) {
                    dat_[n][k] = VectorXcd::Zero(Mt);
                    dar_[n][k] = VectorXcd::Zero(Mr);
                } else {
                    dat_[n][k] = steering_derivative(th, Mt, lam, d0);
                    dar_[n][k] = steering_derivative(th, Mr, lam, d0);
                }
            }
        }
        dv_.resize(N); ddv_.resize(N);
        for (int n = 0; n < N; ++n) {
            dv_[n].resize(N); ddv_[n].resize(N);
            for (int m = 0; m < N; ++m) {
                dv_[n][m].resize(K); ddv_[n][m].resize(K);
                for (int k = 0; k < K; ++k) {
                    const double t2 = s.tof(n, k) + s.tof(m, k);
                    dv_[n][m][k] = delay_vector(t2, L, s.ofdm.bandwidth_hz);
                    ddv_[n][m][k] = (mode == LocalizationMode::aoa_only)
                                        ? VectorXcd::Zero(L)
                                        : delay_derivative(t2, L, s.ofdm.bandwidth_hz);
                }
            }
        }
        aa_.resize(N); da_a_.resize(N); dada_.resize(N);
        for (int n = 0; n < N; ++n) {
            MatrixXcd A(Mr, K), dA(Mr, K);
            for (int k = 0; k < K; ++k) {
                A.col(k) = ar_[n][k];
                dA.col(k) = dar_[n][k];
            }
            aa_[n] = A.adjoint() * A;
            da_a_[n] = dA.adjoint() * A;
            dada_[n] = dA.adjoint() * dA;
        }
    }

    const Scenario& scenario() const { return scen_; }
    LocalizationMode mode() const { return mode_; }

    /// Expected gram between derivative columns of links (rx, tx_left) and
    /// (rx, tx_right): entry (k, k') pairs target k of the left link with
    /// target k' of the right link. only_l >= 0 restricts the subcarrier sum
    /// to a single term (used by the affine-map tabulation).
    MatrixXcd expected_link_gram(const CovarianceSet& cov, int rx, int tx_left, int tx_right,
                                 DerivKind left, DerivKind right, int only_l = -1) const {
        check_cov(cov);
        const int K = scen_.targets(), Mt = scen_.ofdm.tx_antennas;
        const int L = scen_.ofdm.subcarriers;
        MatrixXcd out = MatrixXcd::Zero(K, K);
        const int l0 = only_l < 0 ? 0 : only_l;
        const int l1 = only_l < 0 ? L : only_l + 1;
        for (int l = l0; l < l1; ++l) {
            const MatrixXcd R = cov.augmented(l)
                                    .block(tx_left * Mt, tx_right * Mt, Mt, Mt)
                                    .conjugate();
            for (int k = 0; k < K; ++k) {
                const VectorXcd& uL = uvec(tx_left, k, left);
                const cxd gL = gvec(rx, tx_left, k, left)[l];
                const Eigen::RowVectorXcd rowL = uL.adjoint() * R;
                for (int kp = 0; kp < K; ++kp) {
                    const VectorXcd& uR = uvec(tx_right, kp, right);
                    const cxd gR = gvec(rx, tx_right, kp, right)[l];
                    out(k, kp) += (rowL * uR).value() * std::conj(gL) * gR;
                }
            }
        }
        return out;
    }

    /// Information matrix over [theta; tau; Re b; Im b] (see IndexMaps).
    MatrixXd assemble_fim_psi(const CovarianceSet& cov, int only_l = -1) const {
        check_cov(cov);
        const int N = scen_.nodes(), K = scen_.targets();
        const int d = N * K, db = N * N * K;
        MatrixXcd f_thth = MatrixXcd::Zero(d, d);
        MatrixXcd f_thta = MatrixXcd::Zero(d, d);
        MatrixXcd f_tata = MatrixXcd::Zero(d, d);
        MatrixXcd f_thb = MatrixXcd::Zero(d, db);
        MatrixXcd f_tab = MatrixXcd::Zero(d, db);
        MatrixXcd f_bb = MatrixXcd::Zero(db, db);
        const VectorXcd ones = VectorXcd::Ones(K);
        auto b = [&](int rx, int tx) { return scen_.amplitudes[rx].row(tx).transpose().eval(); };
        auto X = [&](int rx, const Family& fl, const Family& fr) {
            return family_gram(cov, rx, fl, fr, only_l);
        };
        for (int n = 0; n < N; ++n) {
            const Family Pn = fam_p(n), Pdn = fam_pdot(n);
            for (int m = 0; m < N; ++m) {
                const Family Pm = fam_p(m), Pdm = fam_pdot(m);
                MatrixXcd th = MatrixXcd::Zero(K, K), tt = th, ta = th;
                if (n == m) {
                    th += dada_[n].cwiseProduct(X(n, Pn, Pn));
                    tt += da_a_[n].cwiseProduct(X(n, Pn, Pdn));
                    ta += aa_[n].cwiseProduct(X(n, Pdn, Pdn));
                }
                th += da_a_[n].cwiseProduct(X(n, Pn, {{m, DerivKind::dtheta, b(n, m)}}));
                th += da_a_[m].adjoint().cwiseProduct(X(m, {{n, DerivKind::dtheta, b(m, n)}}, Pm));
                tt += da_a_[n].cwiseProduct(X(n, Pn, {{m, DerivKind::dtau, b(n, m)}}));
                tt += aa_[m].cwiseProduct(X(m, {{n, DerivKind::dtheta, b(m, n)}}, Pdm));
                ta += aa_[n].cwiseProduct(X(n, Pdn, {{m, DerivKind::dtau, b(n, m)}}));
                ta += aa_[m].cwiseProduct(X(m, {{n, DerivKind::dtau, b(m, n)}}, Pdm));
                for (int i = 0; i < N; ++i) {
                    th += aa_[i].cwiseProduct(X(i, {{n, DerivKind::dtheta, b(i, n)}},
                                                {{m, DerivKind::dtheta, b(i, m)}}));
                    tt += aa_[i].cwiseProduct(X(i, {{n, DerivKind::dtheta, b(i, n)}},
                                                {{m, DerivKind::dtau, b(i, m)}}));
                    ta += aa_[i].cwiseProduct(X(i, {{n, DerivKind::dtau, b(i, n)}},
                                                {{m, DerivKind::dtau, b(i, m)}}));
                }
                f_thth.block(n * K, m * K, K, K) = th;
                f_thta.block(n * K, m * K, K, K) = tt;
                f_tata.block(n * K, m * K, K, K) = ta;
            }
        }
        for (int n = 0; n < N; ++n) {
            const Family Pn = fam_p(n), Pdn = fam_pdot(n);
            for (int m = 0; m < N; ++m) {
                for (int i = 0; i < N; ++i) {
                    const Family Vi = {{i, DerivKind::plain, ones}};
                    MatrixXcd bth = aa_[m].cwiseProduct(X(m, {{n, DerivKind::dtheta, b(m, n)}}, Vi));
                    MatrixXcd bta = aa_[m].cwiseProduct(X(m, {{n, DerivKind::dtau, b(m, n)}}, Vi));
                    if (n == m) {
                        bth += da_a_[n].cwiseProduct(X(n, Pn, Vi));
                        bta += aa_[n].cwiseProduct(X(n, Pdn, Vi));
                    }
                    const int col = (m * N + i) * K;
                    f_thb.block(n * K, col, K, K) = bth;
                    f_tab.block(n * K, col, K, K) = bta;
                }
            }
        }
        for (int n = 0; n < N; ++n)
            for (int i = 0; i < N; ++i)
                for (int j = 0; j < N; ++j)
                    f_bb.block((n * N + i) * K, (n * N + j) * K, K, K) =
                        aa_[n].cwiseProduct(X(n, {{i, DerivKind::plain, ones}},
                                              {{j, DerivKind::plain, ones}}));
        // Realify: parameters [theta; tau] keep the real part of the complex
        // information; amplitude blocks expand into Re/Im with the standard
        // Hermitian-to-real-symmetric pattern.
        MatrixXcd T(2 * d, 2 * d);
        T << f_thth, f_thta, f_thta.adjoint(), f_tata;
        MatrixXcd E(2 * d, db);
        E << f_thb, f_tab;
        const double pref = 2.0 * scen_.ofdm.subcarriers / scen_.power.sense_noise;
        const int dim = 2 * d + 2 * db;
        MatrixXd F(dim, dim);
        F.topLeftCorner(2 * d, 2 * d) = T.real();
        F.block(0, 2 * d, 2 * d, db) = E.real();
        F.block(0, 2 * d + db, 2 * d, db) = -E.imag();
        F.block(2 * d, 2 * d, db, db) = f_bb.real();
        F.block(2 * d, 2 * d + db, db, db) = -f_bb.imag();
        F.block(2 * d + db, 2 * d + db, db, db) = f_bb.real();
        F.block(2 * d, 0, db, 2 * d) = E.real().transpose();
        F.block(2 * d + db, 0, db, 2 * d) = -E.imag().transpose();
        F.block(2 * d + db, 2 * d, db, db) = f_bb.imag();
        F *= pref;
        return 0.5 * (F + F.transpose().eval());
    }

    /// Information matrix over [x; y; Re b; Im b] via the geometry Jacobian.
    MatrixXd assemble_fim_theta(const CovarianceSet& cov, int only_l = -1) const {
        const MatrixXd J = geometry_jacobian(scen_);
        return J * assemble_fim_psi(cov, only_l) * J.transpose();
    }

    /// Position CRB with amplitudes as nuisance parameters. Throws
    /// std::runtime_error when the geometry is unidentifiable (condition
    /// number beyond identifiability_condition_limit or a non-positive
    /// eigenvalue).
    CrbReport crb_position(const CovarianceSet& cov) const {
        return crb_from_theta(assemble_fim_theta(cov));
    }

    CrbReport crb_from_theta(const MatrixXd& F) const {
        const int K = scen_.targets();
        Eigen::SelfAdjointEigenSolver<MatrixXd> eig(F);
        const double wmin = eig.eigenvalues().minCoeff();
        const double wmax = eig.eigenvalues().maxCoeff();
        const double cond = (wmin <= 0.0) ? std::numeric_limits<double>::infinity()
                                          : wmax / wmin;
        if (cond > identifiability_condition_limit)
            throw std::runtime_error(
                "crb_position: unidentifiable geometry (information-matrix condition " +
                std::to_string(cond) + ")");
        // Diagonal equilibration before inversion for accuracy.
        VectorXd dsc = F.diagonal().cwiseMax(1e-300).cwiseSqrt().cwiseInverse();
        MatrixXd Fs = dsc.asDiagonal() * F * dsc.asDiagonal();
        MatrixXd Fi = Fs.llt().solve(MatrixXd::Identity(F.rows(), F.cols()));
        Fi = dsc.asDiagonal() * Fi * dsc.asDiagonal();
        CrbReport rep;
        rep.crb_position = Fi.topLeftCorner(2 * K, 2 * K).trace();
        rep.rcrb = std::sqrt(rep.crb_position);
        rep.condition = cond;
        return rep;
    }

    /// Affine map of the position-domain information matrix over all entries
    /// of every augmented covariance block (full multi-node design space).
    FimAffineMap affine_map_full() const {
        FimAffineMap map;
        const int N = scen_.nodes(), Mt = scen_.ofdm.tx_antennas;
        for (int l = 0; l < scen_.ofdm.subcarriers; ++l)
            for (int bi = 0; bi < N; ++bi)
                for (int bj = bi; bj < N; ++bj)
                    for (int p = 0; p < Mt; ++p)
                        for (int q = (bi == bj ? p : 0); q < Mt; ++q) {
                            const bool diag = (bi == bj && p == q);
                            map.keys.push_back({l, bi, bj, p, q, false});
                            if (!diag) map.keys.push_back({l, bi, bj, p, q, true});
                        }
        tabulate(map);
        return map;
    }

    /// Affine map restricted to the owner node's diagonal block per
    /// subcarrier (orthogonal design space). owner[l] is the transmitting
    /// node of subcarrier l.
    FimAffineMap affine_map_orthogonal(const std::vector<int>& owner) const {
        check_owner(owner);
        FimAffineMap map;
        const int Mt = scen_.ofdm.tx_antennas;
        for (int l = 0; l < scen_.ofdm.subcarriers; ++l) {
            const int n = owner[l];
            for (int p = 0; p < Mt; ++p)
                for (int q = p; q < Mt; ++q) {
                    map.keys.push_back({l, n, n, p, q, false});
                    if (p != q) map.keys.push_back({l, n, n, p, q, true});
                }
        }
        tabulate(map);
        return map;
    }

    /// Affine map for per-node subcarrier-averaged covariances: key l holds
    /// the node's first owned subcarrier as representative; the coefficient
    /// sums all owned subcarriers with weight nodes/subcarriers.
    FimAffineMap affine_map_averaged(const std::vector<int>& owner) const {
        check_owner(owner);
        FimAffineMap map;
        const int N = scen_.nodes(), Mt = scen_.ofdm.tx_antennas;
        const int L = scen_.ofdm.subcarriers;
        const double w = static_cast<double>(N) / L;
        const int dim = im_.pos_dim();
        for (int n = 0; n < N; ++n) {
            int rep = -1;
            for (int l = 0; l < L; ++l)
                if (owner[l] == n) { rep = l; break; }
            if (rep < 0)
                throw std::invalid_argument("affine_map_averaged: node " + std::to_string(n) +
                                            " owns no subcarrier");
            for (int p = 0; p < Mt; ++p)
                for (int q = p; q < Mt; ++q)
                    for (int part = 0; part < (p == q ? 1 : 2); ++part) {
                        map.keys.push_back({rep, n, n, p, q, part == 1});
                        MatrixXd C = MatrixXd::Zero(dim, dim);
                        for (int l = 0; l < L; ++l)
                            if (owner[l] == n)
                                C += assemble_fim_theta(basis_cov(l, n, n, p, q, part == 1), l);
                        map.coeffs.push_back(w * C);
                    }
        }
        map.dim = dim;
        return map;
    }

    /// Rebuilds the position-domain information matrix from an affine map and
    /// a covariance set (used by tests to confirm map/assembly agreement).
    MatrixXd evaluate_affine(const FimAffineMap& map, const CovarianceSet& cov) const {
        MatrixXd F = MatrixXd::Zero(map.dim, map.dim);
        const int Mt = scen_.ofdm.tx_antennas;
        for (std::size_t i = 0; i < map.keys.size(); ++i) {
            const CovVarKey& k = map.keys[i];
            const cxd v = cov.augmented(k.l)(k.node_i * Mt + k.p, k.node_j * Mt + k.q);
            F += (k.imag_part ? v.imag() : v.real()) * map.coeffs[i];
        }
        return F;
    }

    /// Unit Hermitian basis element of the design space: a covariance set
    /// that is zero everywhere except entry (bi*Mt+p, bj*Mt+q) of subcarrier
    /// l (mirrored Hermitian; imag_part selects the +/- i pair). The design
    /// layer evaluates the information matrix on these to get per-scalar
    /// coefficient matrices.
    CovarianceSet basis_cov(int l, int bi, int bj, int p, int q, bool imag_part) const {
        CovarianceSet cov(scen_.nodes(), scen_.ofdm.tx_antennas, scen_.ofdm.subcarriers, 0);
        const int Mt = scen_.ofdm.tx_antennas;
        const int P = bi * Mt + p, Q = bj * Mt + q;
        if (P == Q) {
            cov.augmented(l)(P, P) = 1.0;
        } else if (imag_part) {
            cov.augmented(l)(P, Q) = cxd(0, 1);
            cov.augmented(l)(Q, P) = cxd(0, -1);
        } else {
            cov.augmented(l)(P, Q) = 1.0;
            cov.augmented(l)(Q, P) = 1.0;
        }
        return cov;
    }

    const IndexMaps& index_maps() const { return im_; }

private:
    using Weight = VectorXcd;
    struct Member {
        int tx;
        DerivKind kind;
        Weight weight;
    };
    using Family = std::vector<Member>;

    Family fam_p(int n) const {
        Family f;
        for (int m = 0; m < scen_.nodes(); ++m)
            f.push_back({m, DerivKind::plain, scen_.amplitudes[n].row(m).transpose()});
        return f;
    }
    Family fam_pdot(int n) const {
        Family f;
        for (int m = 0; m < scen_.nodes(); ++m)
            f.push_back({m, DerivKind::dtau, scen_.amplitudes[n].row(m).transpose()});
        return f;
    }

    MatrixXcd family_gram(const CovarianceSet& cov, int rx, const Family& fl, const Family& fr,
                          int only_l) const {
        const int K = scen_.targets();
        MatrixXcd out = MatrixXcd::Zero(K, K);
        for (const auto& a : fl)
            for (const auto& c : fr) {
                const MatrixXcd eg =
                    expected_link_gram(cov, rx, a.tx, c.tx, a.kind, c.kind, only_l);
                out += (a.weight.conjugate() * c.weight.transpose()).cwiseProduct(eg);
            }
        return out;
    }

    const VectorXcd& uvec(int t, int k, DerivKind kind) const {
        return kind == DerivKind::dtheta ? dat_[t][k] : at_[t][k];
    }
    const VectorXcd& gvec(int rx, int t, int k, DerivKind kind) const {
        return kind == DerivKind::dtau ? ddv_[rx][t][k] : dv_[rx][t][k];
    }

    void tabulate(FimAffineMap& map) const {
        map.dim = im_.pos_dim();
        map.coeffs.reserve(map.keys.size());
        for (const CovVarKey& k : map.keys)
            map.coeffs.push_back(
                assemble_fim_theta(basis_cov(k.l, k.node_i, k.node_j, k.p, k.q, k.imag_part), k.l));
    }

    void check_cov(const CovarianceSet& cov) const {
        if (cov.nodes() != scen_.nodes() || cov.tx_antennas() != scen_.ofdm.tx_antennas ||
            cov.subcarriers() != scen_.ofdm.subcarriers)
            throw std::invalid_argument("fim: covariance dimensions do not match scenario");
    }

    void check_owner(const std::vector<int>& owner) const {
        if (static_cast<int>(owner.size()) != scen_.ofdm.subcarriers)
            throw std::invalid_argument("fim: owner map length must equal subcarriers");
        for (int n : owner)
            if (n < 0 || n >= scen_.nodes())
                throw std::invalid_argument("fim: owner map entry out of range");
    }

    Scenario scen_;
    LocalizationMode mode_;
    IndexMaps im_;
    std::vector<std::vector<VectorXcd>> at_, dat_, ar_, dar_;
    std::vector<std::vector<std::vector<VectorXcd>>> dv_, ddv_;
    std::vector<MatrixXcd> aa_, da_a_, dada_;
};

}  // namespace disac
