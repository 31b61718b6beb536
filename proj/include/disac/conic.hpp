#pragma once

// Solver-agnostic container for linear conic problems:
//
//   minimize    objective . y
//   subject to  S_j(y) = C_j + sum_k y_k A_jk  is PSD   (real symmetric blocks)
//               row_i . y >= bound_i                    (scalar inequalities)
//
// Complex Hermitian constraints enter through HermitianBlockAdder, which
// realifies a d x d Hermitian form into the equivalent 2d x 2d real
// symmetric block [[Re, -Im], [Im, Re]].

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "common.hpp"

namespace disac {

struct ConeProblem {
    /// Literal (row, col, value) entry of a block's symmetric matrix.
    struct Entry {
        int row, col;
        double value;
    };
    struct VarEntries {
        int var;
        std::vector<Entry> entries;
    };
    struct PsdBlock {
        int dim = 0;
        std::string label;
        std::vector<Entry> constant;
        std::vector<VarEntries> vars;  ///< kept sorted by var index

        std::vector<Entry>& entries_for(int var) {
            for (auto& v : vars)
                if (v.var == var) return v.entries;
            auto it = vars.begin();
            while (it != vars.end() && it->var < var) ++it;
            return vars.insert(it, {var, {}})->entries;
        }
    };
    struct LinRow {
        std::vector<std::pair<int, double>> coef;
        double bound = 0.0;
        std::string label;
    };

    int num_vars = 0;
    std::vector<double> objective;
    std::vector<PsdBlock> psd;
    std::vector<LinRow> rows;

    int add_var(double cost = 0.0) {
        objective.push_back(cost);
        return num_vars++;
    }

    int add_psd_block(int dim, std::string label) {
        if (dim < 1) throw std::invalid_argument("add_psd_block: dim must be positive");
        psd.push_back({dim, std::move(label), {}, {}});
        return static_cast<int>(psd.size()) - 1;
    }

    /// Adds value at (r, c) and, when off-diagonal, its mirror at (c, r).
    void add_sym(int block, int var, int r, int c, double v) {
        check(block, var, r, c);
        auto& e = psd[block].entries_for(var);
        e.push_back({r, c, v});
        if (r != c) e.push_back({c, r, v});
    }
    void add_sym_const(int block, int r, int c, double v) {
        check(block, -1, r, c);
        psd[block].constant.push_back({r, c, v});
        if (r != c) psd[block].constant.push_back({c, r, v});
    }

    int add_row(std::vector<std::pair<int, double>> coef, double bound, std::string label) {
        for (auto& [k, v] : coef)
            if (k < 0 || k >= num_vars)
                throw std::out_of_range("add_row: variable index out of range");
        rows.push_back({std::move(coef), bound, std::move(label)});
        return static_cast<int>(rows.size()) - 1;
    }

    /// Dense symmetric matrix of one block at a given point.
    MatrixXd block_value(int block, const VectorXd& y) const {
        const PsdBlock& b = psd.at(block);
        MatrixXd S = MatrixXd::Zero(b.dim, b.dim);
        for (const Entry& e : b.constant) S(e.row, e.col) += e.value;
        for (const VarEntries& ve : b.vars)
            for (const Entry& e : ve.entries) S(e.row, e.col) += y[ve.var] * e.value;
        return S;
    }

    double row_value(int i, const VectorXd& y) const {
        double v = 0.0;
        for (const auto& [k, c] : rows.at(i).coef) v += c * y[k];
        return v;
    }

private:
    void check(int block, int var, int r, int c) const {
        if (block < 0 || block >= static_cast<int>(psd.size()))
            throw std::out_of_range("conic: block index out of range");
        const int d = psd[block].dim;
        if (r < 0 || r >= d || c < 0 || c >= d)
            throw std::out_of_range("conic: entry position out of range");
        if (var >= num_vars)
            throw std::out_of_range("conic: variable index out of range");
    }
};

/// Writes a d x d complex Hermitian affine constraint into a 2d x 2d real
/// symmetric block. Entry semantics: add(var, r, c, v) contributes v to
/// S(r, c) and conj(v) to S(c, r); diagonal contributions must be real.
class HermitianBlockAdder {
public:
    HermitianBlockAdder(ConeProblem& p, int cdim, std::string label)
        : p_(p), d_(cdim), block_(p.add_psd_block(2 * cdim, std::move(label))) {}

    int block_index() const { return block_; }
    int complex_dim() const { return d_; }

    void add(int var, int r, int c, cxd v) { put(var, r, c, v); }
    void add_const(int r, int c, cxd v) { put(-1, r, c, v); }

private:
    void put(int var, int r, int c, cxd v) {
        const double a = v.real(), b = v.imag();
        if (r == c && std::abs(b) > 1e-14 * (1.0 + std::abs(a)))
            throw std::invalid_argument("HermitianBlockAdder: diagonal entry must be real");
        // Realified pattern for v at (r,c) plus conj(v) at (c,r):
        //   Re part a goes to (r,c), (r+d,c+d) and mirrors;
        //   Im part b goes to (r+d,c) as +b and (r,c+d) as -b, with the
        //   Hermitian mirror (c,r)=conj supplying the symmetric partners.
        if (var < 0) {
            p_.add_sym_const(block_, r, c, a);
            p_.add_sym_const(block_, r + d_, c + d_, a);
            if (r != c) {
                p_.add_sym_const(block_, r + d_, c, b);
                p_.add_sym_const(block_, c + d_, r, -b);
            }
        } else {
            p_.add_sym(block_, var, r, c, a);
            p_.add_sym(block_, var, r + d_, c + d_, a);
            if (r != c) {
                p_.add_sym(block_, var, r + d_, c, b);
                p_.add_sym(block_, var, c + d_, r, -b);
            }
        }
    }

    ConeProblem& p_;
    int d_;
    int block_;
};

}  // namespace disac
