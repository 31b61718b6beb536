#pragma once

// Transmit covariance container shared by the information, design and
// evaluation layers. Holds the per-subcarrier augmented covariance of the
// stacked multi-node transmit vector plus the per-(node, user, subcarrier)
// communication covariances carved out of it.

#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"
#include "matrixcore.hpp"

namespace disac {

class CovarianceSet {
public:
    CovarianceSet() = default;

    /// All-zero set for the given dimensions.
    CovarianceSet(int n_nodes, int tx_antennas, int subcarriers, int n_users)
        : n_nodes_(n_nodes), mt_(tx_antennas), l_(subcarriers), u_(n_users) {
        if (n_nodes < 1 || tx_antennas < 1 || subcarriers < 1 || n_users < 0)
            throw std::invalid_argument("CovarianceSet: non-positive dimension");
        aug_.assign(l_, MatrixXcd::Zero(n_nodes_ * mt_, n_nodes_ * mt_));
        comm_.assign(static_cast<std::size_t>(n_nodes_) * u_ * l_, MatrixXcd::Zero(mt_, mt_));
    }

    int nodes() const { return n_nodes_; }
    int tx_antennas() const { return mt_; }
    int subcarriers() const { return l_; }
    int users() const { return u_; }

    /// Augmented covariance of the stacked transmit vector on subcarrier l.
    MatrixXcd& augmented(int l) { return aug_.at(l); }
    const MatrixXcd& augmented(int l) const { return aug_.at(l); }

    /// (i, j) node block of the augmented covariance on subcarrier l.
    MatrixXcd node_block(int l, int i, int j) const {
        return aug_.at(l).block(i * mt_, j * mt_, mt_, mt_);
    }

    void set_node_block(int l, int i, int j, const MatrixXcd& b) {
        if (b.rows() != mt_ || b.cols() != mt_)
            throw std::invalid_argument("set_node_block: block must be tx_antennas square");
        aug_.at(l).block(i * mt_, j * mt_, mt_, mt_) = b;
        if (i != j) aug_.at(l).block(j * mt_, i * mt_, mt_, mt_) = b.adjoint();
    }

    /// Communication covariance of user u served by node n on subcarrier l.
    MatrixXcd& comm(int n, int u, int l) { return comm_.at(comm_index(n, u, l)); }
    const MatrixXcd& comm(int n, int u, int l) const { return comm_.at(comm_index(n, u, l)); }

    /// Per-antenna transmit power totals (sum over subcarriers of the
    /// augmented-covariance diagonal), length nodes * tx_antennas.
    VectorXd per_antenna_power() const {
        VectorXd p = VectorXd::Zero(n_nodes_ * mt_);
        for (const auto& r : aug_) p += r.diagonal().real();
        return p;
    }

    /// Enforces Hermitian symmetry on every stored block (throws if any block
    /// is asymmetric beyond tolerance).
    void enforce_hermitian_all(double tol = hermitian_tol) {
        for (auto& r : aug_) r = enforce_hermitian(r, tol);
        for (auto& r : comm_) r = enforce_hermitian(r, tol);
    }

private:
    std::size_t comm_index(int n, int u, int l) const {
        if (n < 0 || n >= n_nodes_ || u < 0 || u >= u_ || l < 0 || l >= l_)
            throw std::out_of_range("CovarianceSet::comm: index (" + std::to_string(n) + "," +
                                    std::to_string(u) + "," + std::to_string(l) + ") out of range");
        return (static_cast<std::size_t>(n) * u_ + u) * l_ + l;
    }

    int n_nodes_ = 0, mt_ = 0, l_ = 0, u_ = 0;
    std::vector<MatrixXcd> aug_;
    std::vector<MatrixXcd> comm_;
};

}  // namespace disac
