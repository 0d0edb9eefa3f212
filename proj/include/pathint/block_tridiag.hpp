#ifndef PATHINT_BLOCK_TRIDIAG_HPP
#define PATHINT_BLOCK_TRIDIAG_HPP

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <cmath>
#include <vector>

#include "pathint/errors.hpp"

namespace pathint {

// Symmetric block tridiagonal matrix with square blocks of equal size.
// sub(k) holds the coupling block at (k+1, k); the (k, k+1) block is its
// transpose.
class BlockTridiag {
public:
    BlockTridiag() = default;
    BlockTridiag(int nblocks, int bsize)
        : bsize_(bsize),
          diag_(nblocks, Eigen::MatrixXd::Zero(bsize, bsize)),
          sub_(nblocks > 0 ? nblocks - 1 : 0, Eigen::MatrixXd::Zero(bsize, bsize)) {}

    int blocks() const { return static_cast<int>(diag_.size()); }
    int block_size() const { return bsize_; }
    int dim() const { return blocks() * bsize_; }

    Eigen::MatrixXd& diag(int k) { return diag_[k]; }
    const Eigen::MatrixXd& diag(int k) const { return diag_[k]; }
    Eigen::MatrixXd& sub(int k) { return sub_[k]; }
    const Eigen::MatrixXd& sub(int k) const { return sub_[k]; }

    Eigen::MatrixXd to_dense() const {
        Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim(), dim());
        for (int k = 0; k < blocks(); ++k) {
            m.block(k * bsize_, k * bsize_, bsize_, bsize_) = diag_[k];
            if (k + 1 < blocks()) {
                m.block((k + 1) * bsize_, k * bsize_, bsize_, bsize_) = sub_[k];
                m.block(k * bsize_, (k + 1) * bsize_, bsize_, bsize_) = sub_[k].transpose();
            }
        }
        return m;
    }

private:
    int bsize_ = 0;
    std::vector<Eigen::MatrixXd> diag_;
    std::vector<Eigen::MatrixXd> sub_;
};

// Cholesky factorization H = L L' of a block tridiagonal SPD matrix.
// L is lower block bidiagonal, so solves cost O(blocks * bsize^2) per
// right-hand side.
class BlockTridiagCholesky {
public:
    // Returns false if a pivot block is not positive definite.
    bool compute(const BlockTridiag& h) {
        const int m = h.blocks();
        const int b = h.block_size();
        ld_.assign(m, Eigen::MatrixXd());
        ls_.assign(m > 0 ? m - 1 : 0, Eigen::MatrixXd());
        Eigen::MatrixXd pivot;
        for (int k = 0; k < m; ++k) {
            pivot = h.diag(k);
            if (k > 0) pivot.noalias() -= ls_[k - 1] * ls_[k - 1].transpose();
            Eigen::LLT<Eigen::MatrixXd> llt(pivot);
            if (llt.info() != Eigen::Success) return false;
            ld_[k] = llt.matrixL();
            if (ld_[k].diagonal().minCoeff() <= 0.0) return false;
            if (k + 1 < m) {
                // ls = sub * ld^-T
                ls_[k] = ld_[k]
                             .triangularView<Eigen::Lower>()
                             .solve(h.sub(k).transpose())
                             .transpose();
            }
        }
        bsize_ = b;
        return true;
    }

    int blocks() const { return static_cast<int>(ld_.size()); }
    int dim() const { return blocks() * bsize_; }

    double log_det_l() const {
        double s = 0.0;
        for (const auto& ld : ld_) s += ld.diagonal().array().log().sum();
        return s;
    }

    // Solves H z = rhs.
    Eigen::VectorXd solve(const Eigen::VectorXd& rhs) const {
        const int m = blocks();
        Eigen::VectorXd w(rhs.size());
        for (int k = 0; k < m; ++k) {
            Eigen::VectorXd t = rhs.segment(k * bsize_, bsize_);
            if (k > 0) t.noalias() -= ls_[k - 1] * w.segment((k - 1) * bsize_, bsize_);
            w.segment(k * bsize_, bsize_) = ld_[k].triangularView<Eigen::Lower>().solve(t);
        }
        Eigen::VectorXd z(rhs.size());
        for (int k = m - 1; k >= 0; --k) {
            Eigen::VectorXd t = w.segment(k * bsize_, bsize_);
            if (k + 1 < m)
                t.noalias() -= ls_[k].transpose() * z.segment((k + 1) * bsize_, bsize_);
            z.segment(k * bsize_, bsize_) =
                ld_[k].transpose().triangularView<Eigen::Upper>().solve(t);
        }
        return z;
    }

    // Solves L' X = B in place, column-wise; B has dim() rows.
    void solve_transposed_in_place(Eigen::Ref<Eigen::MatrixXd> x) const {
        const int m = blocks();
        for (int k = m - 1; k >= 0; --k) {
            auto rows = x.middleRows(k * bsize_, bsize_);
            if (k + 1 < m)
                rows.noalias() -= ls_[k].transpose() * x.middleRows((k + 1) * bsize_, bsize_);
            ld_[k].transpose().triangularView<Eigen::Upper>().solveInPlace(rows);
        }
    }

    Eigen::MatrixXd factor_dense() const {
        Eigen::MatrixXd l = Eigen::MatrixXd::Zero(dim(), dim());
        for (int k = 0; k < blocks(); ++k) {
            l.block(k * bsize_, k * bsize_, bsize_, bsize_) = ld_[k];
            if (k + 1 < blocks()) l.block((k + 1) * bsize_, k * bsize_, bsize_, bsize_) = ls_[k];
        }
        return l;
    }

private:
    int bsize_ = 0;
    std::vector<Eigen::MatrixXd> ld_;  // diagonal factor blocks, lower triangular
    std::vector<Eigen::MatrixXd> ls_;  // subdiagonal factor blocks
};

}  // namespace pathint

#endif
