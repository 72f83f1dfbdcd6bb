#pragma once
#include <algorithm>
#include <cmath>
#include <memory>
#include <mutex>
#include <Eigen/Dense>
#include <glinfer/errors.hpp>

namespace glinfer {

using Index = Eigen::Index;
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Relative singular value cutoff shared by rank, pseudoinverse and nullity.
inline constexpr double svd_tol = 1e-10;

/**
 * Thin SVD of an r x n matrix A with a numerical rank.
 *
 * Everything the path algorithm needs from a row subset of D is a function of
 * this factorization: (AA^T)^+ A x, the projector onto null(A), and nullity.
 */
class SubspaceFactor {
public:
    SubspaceFactor() = default;

    explicit SubspaceFactor(const Mat& A, double tol = svd_tol) : rows_(A.rows()), cols_(A.cols())
    {
        if (A.rows() == 0 || A.cols() == 0) {
            U_.resize(A.rows(), 0);
            V_.resize(A.cols(), 0);
            return;
        }
        Eigen::BDCSVD<Mat> bdc(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
        // Eigen 3.4.0 BDCSVD can return a wrong factorization (e.g. block-difference
        // matrices); verify and fall back to one-sided Jacobi.
        const double err = (bdc.matrixU() * bdc.singularValues().asDiagonal() * bdc.matrixV().transpose() - A)
                               .cwiseAbs()
                               .maxCoeff();
        if (bdc.info() == Eigen::Success && err <= 1e-11 * std::max(1.0, A.cwiseAbs().maxCoeff()))
            assign(bdc.matrixU(), bdc.singularValues(), bdc.matrixV(), tol);
        else {
            Eigen::JacobiSVD<Mat> jac(A, Eigen::ComputeThinU | Eigen::ComputeThinV);
            assign(jac.matrixU(), jac.singularValues(), jac.matrixV(), tol);
        }
    }

    SubspaceFactor(const SubspaceFactor& o) : rows_(o.rows_), cols_(o.cols_), U_(o.U_), V_(o.V_), s_(o.s_) {}
    SubspaceFactor& operator=(const SubspaceFactor& o)
    {
        if (this != &o) *this = SubspaceFactor(o);
        return *this;
    }
    SubspaceFactor(SubspaceFactor&&) = default;
    SubspaceFactor& operator=(SubspaceFactor&&) = default;

    Index rows() const { return rows_; }
    Index cols() const { return cols_; }
    Index rank() const { return s_.size(); }
    Index nullity() const { return cols_ - rank(); }

    const Mat& U() const { return U_; }
    const Mat& V() const { return V_; }
    const Vec& singular_values() const { return s_; }

    /// (A A^T)^+ A x  ==  (A^T)^+ x, for x of length cols().
    Vec pinv_transpose_apply(const Vec& x) const
    {
        if (rank() == 0) return Vec::Zero(rows_);
        return U_ * (V_.transpose() * x).cwiseQuotient(s_);
    }

    /// The matrix (A A^T)^+ A, rows() x cols(); computed once and kept.
    const Mat& pinv_transpose() const
    {
        std::call_once(*pinvT_once_, [this] {
            if (rank() == 0) pinvT_ = Mat::Zero(rows_, cols_);
            else pinvT_ = U_ * s_.cwiseInverse().asDiagonal() * V_.transpose();
        });
        return pinvT_;
    }

    /// A^+ x, for x of length rows().
    Vec pinv_apply(const Vec& x) const
    {
        if (rank() == 0) return Vec::Zero(cols_);
        return V_ * (U_.transpose() * x).cwiseQuotient(s_);
    }

    Vec project_null(const Vec& x) const
    {
        if (rank() == 0) return x;
        return x - V_ * (V_.transpose() * x);
    }

    Mat null_projector() const
    {
        Mat P = Mat::Identity(cols_, cols_);
        if (rank() > 0) P.noalias() -= V_ * V_.transpose();
        return P;
    }

private:
    void assign(const Mat& U, const Vec& s, const Mat& V, double tol)
    {
        const double smax = s.size() ? s(0) : 0.0;
        Index r = 0;
        while (r < s.size() && smax > 0 && s(r) > tol * smax) ++r;
        U_ = U.leftCols(r);
        V_ = V.leftCols(r);
        s_ = s.head(r);
    }

    Index rows_ = 0;
    Index cols_ = 0;
    Mat U_;
    Mat V_;
    Vec s_;
    mutable Mat pinvT_;
    std::shared_ptr<std::once_flag> pinvT_once_ = std::make_shared<std::once_flag>();
};

/// Orthogonal projector onto a subspace of R^n.
struct Projector {
    Mat matrix;
    Index subspace_dim = 0;
};

/// A^+ B via SVD, singular values below tol * sigma_max treated as zero.
inline Mat pinv_apply(const Mat& A, const Mat& B, double tol = svd_tol)
{
    if (A.rows() != B.rows())
        throw DimensionError("pinv_apply: A has " + std::to_string(A.rows()) + " rows but B has " +
                             std::to_string(B.rows()));
    SubspaceFactor f(A, tol);
    if (f.rank() == 0) return Mat::Zero(A.cols(), B.cols());
    return f.V() * f.singular_values().cwiseInverse().asDiagonal() * (f.U().transpose() * B);
}

inline Vec pinv_apply(const Mat& A, const Vec& b, double tol = svd_tol)
{
    Mat B = b;
    return pinv_apply(A, B, tol).col(0);
}

inline Projector null_projector(const Mat& Dsub, Index n)
{
    if (Dsub.rows() > 0 && Dsub.cols() != n) throw DimensionError("null_projector: column mismatch");
    if (Dsub.rows() == 0) return {Mat::Identity(n, n), n};
    SubspaceFactor f(Dsub);
    return {f.null_projector(), f.nullity()};
}

inline Projector null_projector(const Mat& Dsub) { return null_projector(Dsub, Dsub.cols()); }

inline Index nullity(const Mat& Dsub, Index n)
{
    if (Dsub.rows() == 0) return n;
    return SubspaceFactor(Dsub).nullity();
}

inline Index nullity(const Mat& Dsub) { return nullity(Dsub, Dsub.cols()); }

/**
 * Unit vector spanning the rank-one difference P_big - P_small of two nested
 * projectors (range(P_small) a codimension-one subspace of range(P_big)).
 * Throws if the difference is not a rank-one projector.
 */
inline Vec rank1_projector_difference(const Mat& P_big, const Mat& P_small, double tol = 1e-8)
{
    Mat E = P_big - P_small;
    E = 0.5 * (E + E.transpose()).eval();
    const double tr = E.trace();
    if (std::abs(tr - 1.0) > 1e-6)
        throw NumericalError("rank1_projector_difference: subspaces differ by dimension " +
                             std::to_string(tr) + ", expected 1");
    Eigen::SelfAdjointEigenSolver<Mat> eig(E);
    const Vec& ev = eig.eigenvalues();
    const Index top = ev.size() - 1;
    if (std::abs(ev(top) - 1.0) > tol || (top > 0 && std::abs(ev(top - 1)) > tol))
        throw NumericalError("rank1_projector_difference: difference is not a rank-one projector");
    return eig.eigenvectors().col(top);
}

/**
 * Unit w spanning null(D_minusB_drop)^perp  intersected with null(D_minusB), where
 * D_minusB_drop is D_minusB with one extra row restored. Sign is unspecified.
 */
inline Vec rank1_null_basis(const Mat& D_minusB, const Mat& D_minusB_drop, Index n)
{
    const Projector big = null_projector(D_minusB, n);
    const Projector small = null_projector(D_minusB_drop, n);
    if (big.subspace_dim - small.subspace_dim != 1)
        throw NumericalError("rank1_null_basis: null spaces differ by dimension " +
                             std::to_string(big.subspace_dim - small.subspace_dim) + ", expected 1");
    return rank1_projector_difference(big.matrix, small.matrix);
}

} // namespace glinfer
