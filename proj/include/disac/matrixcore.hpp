#pragma once

// Hermitian / PSD primitives shared by the estimation-theory and design
// layers: symmetry enforcement, PSD cone projection, rank-revealing
// factorization and the real-symmetric embedding of Hermitian matrices.

#include <algorithm>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

#include "common.hpp"

namespace disac {

/// Relative asymmetry tolerance accepted by enforce_hermitian.
inline constexpr double hermitian_tol = 1e-8;

/// Default relative eigenvalue threshold that decides numerical rank.
inline constexpr double default_rank_tol = 1e-9;

/// Frobenius norm of the anti-Hermitian part relative to the matrix norm.
inline double hermitian_asymmetry(const MatrixXcd& h) {
    const double n = h.norm();
    if (n == 0.0) return 0.0;
    return (h - h.adjoint().eval()).norm() / (2.0 * n);
}

/// Returns the Hermitian part (h + h^H)/2 after checking that the input is
/// Hermitian up to `tol` (relative); throws otherwise. Square input required.
inline MatrixXcd enforce_hermitian(const MatrixXcd& h, double tol = hermitian_tol) {
    if (h.rows() != h.cols())
        throw std::invalid_argument("enforce_hermitian: matrix is " + std::to_string(h.rows()) +
                                    "x" + std::to_string(h.cols()) + ", expected square");
    const double asym = hermitian_asymmetry(h);
    if (asym > tol)
        throw std::invalid_argument("enforce_hermitian: relative asymmetry " +
                                    std::to_string(asym) + " exceeds tolerance " +
                                    std::to_string(tol));
    return 0.5 * (h + h.adjoint().eval());
}

struct PsdProjection {
    MatrixXcd matrix;   ///< nearest (Frobenius) PSD matrix
    double distance;    ///< Frobenius distance to the input's Hermitian part
};

/// Projects a Hermitian matrix onto the PSD cone by clamping negative
/// eigenvalues at exactly zero. The reported distance equals
/// sqrt(sum of squared clamped eigenvalues).
inline PsdProjection psd_project(const MatrixXcd& h, double tol = hermitian_tol) {
    const MatrixXcd hs = enforce_hermitian(h, tol);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(hs);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("psd_project: eigendecomposition failed");
    VectorXd w = eig.eigenvalues();
    double dist2 = 0.0;
    for (Eigen::Index i = 0; i < w.size(); ++i) {
        if (w[i] < 0.0) {
            dist2 += w[i] * w[i];
            w[i] = 0.0;
        }
    }
    PsdProjection out;
    out.matrix = eig.eigenvectors() * w.asDiagonal() * eig.eigenvectors().adjoint();
    out.matrix = 0.5 * (out.matrix + out.matrix.adjoint().eval());
    out.distance = std::sqrt(dist2);
    return out;
}

/// Rank-revealing factor W (n x r) with W W^H ~= h for PSD h. Eigenvalues
/// below rank_tol * lambda_max are treated as zero; eigenvalues below
/// -rank_tol * lambda_max (i.e. genuinely negative) raise an error.
inline MatrixXcd factorize_psd(const MatrixXcd& h, double rank_tol = default_rank_tol,
                               double tol = hermitian_tol) {
    const MatrixXcd hs = enforce_hermitian(h, tol);
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(hs);
    if (eig.info() != Eigen::Success)
        throw std::runtime_error("factorize_psd: eigendecomposition failed");
    const VectorXd& w = eig.eigenvalues();
    const double wmax = std::max(w.maxCoeff(), 0.0);
    const double cut = rank_tol * std::max(wmax, 1e-300);
    if (w.minCoeff() < -cut)
        throw std::invalid_argument("factorize_psd: matrix is not PSD (min eigenvalue " +
                                    std::to_string(w.minCoeff()) + " < -" + std::to_string(cut) + ")");
    int r = 0;
    for (Eigen::Index i = 0; i < w.size(); ++i)
        if (w[i] > cut) ++r;
    MatrixXcd out(h.rows(), std::max(r, 1));
    out.setZero();
    int c = 0;
    // eigenvalues ascend; emit strongest components first
    for (Eigen::Index i = w.size() - 1; i >= 0 && c < r; --i) {
        if (w[i] > cut) out.col(c++) = eig.eigenvectors().col(i) * std::sqrt(w[i]);
    }
    return out;
}

/// Real-symmetric embedding [[Re, -Im], [Im, Re]] of a Hermitian matrix.
/// The embedding is linear, doubles the trace, and is PSD iff the input is.
inline MatrixXd realify_hermitian(const MatrixXcd& h) {
    const Eigen::Index n = h.rows();
    if (n != h.cols())
        throw std::invalid_argument("realify_hermitian: matrix must be square");
    MatrixXd out(2 * n, 2 * n);
    out.topLeftCorner(n, n) = h.real();
    out.bottomRightCorner(n, n) = h.real();
    out.topRightCorner(n, n) = -h.imag();
    out.bottomLeftCorner(n, n) = h.imag();
    return out;
}

/// Smallest eigenvalue of the Hermitian part; convenience for PSD checks.
inline double min_eigenvalue(const MatrixXcd& h) {
    Eigen::SelfAdjointEigenSolver<MatrixXcd> eig(0.5 * (h + h.adjoint().eval()));
    return eig.eigenvalues().minCoeff();
}

}  // namespace disac
