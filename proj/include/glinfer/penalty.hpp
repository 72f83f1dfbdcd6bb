#pragma once
#include <algorithm>
#include <cmath>
#include <set>
#include <string>
#include <utility>
#include <vector>
#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <glinfer/errors.hpp>
#include <glinfer/linalg.hpp>

namespace glinfer {

using SpMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

enum class PenaltyKind { diff1, diff2, graph, sparse_augmented, regression_transformed, custom };

inline const char* to_string(PenaltyKind k)
{
    switch (k) {
        case PenaltyKind::diff1: return "diff1";
        case PenaltyKind::diff2: return "diff2";
        case PenaltyKind::graph: return "graph";
        case PenaltyKind::sparse_augmented: return "sparse_augmented";
        case PenaltyKind::regression_transformed: return "regression_transformed";
        case PenaltyKind::custom: return "custom";
    }
    return "custom";
}

inline PenaltyKind penalty_kind_from_string(const std::string& s)
{
    if (s == "diff1" || s == "d1") return PenaltyKind::diff1;
    if (s == "diff2" || s == "d2") return PenaltyKind::diff2;
    if (s == "graph") return PenaltyKind::graph;
    if (s == "sparse_augmented") return PenaltyKind::sparse_augmented;
    if (s == "regression_transformed") return PenaltyKind::regression_transformed;
    if (s == "custom") return PenaltyKind::custom;
    throw InputError("unknown penalty kind '" + s + "'");
}

/// Graph edge with 0-based endpoints, i < j.
struct Edge {
    Index i = 0;
    Index j = 0;
    friend bool operator==(const Edge&, const Edge&) = default;
};

struct PenaltyMeta {
    std::vector<Edge> edges;           // graph (and graph-based augmented) penalties
    double alpha = 0.0;                // sparse_augmented weight
    double ridge = 0.0;                // regression_transformed ridge
    PenaltyKind base_kind = PenaltyKind::custom; // kind before augmentation
};

/// Sparse m x n penalty operator D plus the structure it was built from.
class PenaltyMatrix {
public:
    PenaltyMatrix() = default;
    PenaltyMatrix(SpMat entries, PenaltyKind kind, PenaltyMeta meta = {})
        : entries_(std::move(entries)), kind_(kind), meta_(std::move(meta))
    {
        entries_.makeCompressed();
        dense_ = Mat(entries_);
    }

    Index rows() const { return entries_.rows(); }
    Index cols() const { return entries_.cols(); }
    PenaltyKind kind() const { return kind_; }
    const PenaltyMeta& meta() const { return meta_; }
    const SpMat& sparse() const { return entries_; }
    const Mat& dense() const { return dense_; }

    Vec apply(const Vec& beta) const
    {
        if (beta.size() != cols()) throw DimensionError("PenaltyMatrix::apply: length mismatch");
        return entries_ * beta;
    }

    /// Dense submatrix of the given rows, in the given order.
    Mat rows_dense(const std::vector<Index>& idx) const
    {
        Mat out(static_cast<Index>(idx.size()), cols());
        for (std::size_t r = 0; r < idx.size(); ++r) out.row(static_cast<Index>(r)) = dense_.row(idx[r]);
        return out;
    }

    /// Rows not in `excluded` (ascending order) and their indices.
    std::vector<Index> complement_rows(const std::vector<Index>& excluded) const
    {
        std::vector<char> mark(static_cast<std::size_t>(rows()), 0);
        for (Index i : excluded) mark[static_cast<std::size_t>(i)] = 1;
        std::vector<Index> out;
        out.reserve(static_cast<std::size_t>(rows()));
        for (Index i = 0; i < rows(); ++i)
            if (!mark[static_cast<std::size_t>(i)]) out.push_back(i);
        return out;
    }

    /// The 1d kind the penalty acts like (diff1/diff2 possibly under augmentation).
    PenaltyKind structural_kind() const
    {
        return kind_ == PenaltyKind::sparse_augmented ? meta_.base_kind : kind_;
    }

private:
    SpMat entries_;
    Mat dense_;
    PenaltyKind kind_ = PenaltyKind::custom;
    PenaltyMeta meta_;
};

/// First (order 1) or second (order 2) discrete difference operator on n points.
inline PenaltyMatrix difference_matrix(Index n, int order)
{
    if (order != 1 && order != 2) throw DimensionError("difference_matrix: order must be 1 or 2");
    if (n < order + 1)
        throw DimensionError("difference_matrix: need n >= " + std::to_string(order + 1) + ", got " +
                             std::to_string(n));
    const Index m = n - order;
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(m * (order + 1)));
    for (Index r = 0; r < m; ++r) {
        if (order == 1) {
            trip.emplace_back(r, r, -1.0);
            trip.emplace_back(r, r + 1, 1.0);
        } else {
            trip.emplace_back(r, r, 1.0);
            trip.emplace_back(r, r + 1, -2.0);
            trip.emplace_back(r, r + 2, 1.0);
        }
    }
    SpMat D(m, n);
    D.setFromTriplets(trip.begin(), trip.end());
    return {std::move(D), order == 1 ? PenaltyKind::diff1 : PenaltyKind::diff2};
}

/// Edge incidence matrix; row l is -1 at edges[l].i and +1 at edges[l].j.
inline PenaltyMatrix graph_incidence(Index n, const std::vector<Edge>& edges)
{
    if (n < 1) throw DimensionError("graph_incidence: need at least one node");
    if (edges.empty()) throw DimensionError("graph_incidence: empty edge list");
    std::set<std::pair<Index, Index>> seen;
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t l = 0; l < edges.size(); ++l) {
        const auto [i, j] = edges[l];
        if (i < 0 || j < 0 || i >= n || j >= n)
            throw DimensionError("graph_incidence: edge " + std::to_string(l + 1) + " has a node out of range");
        if (i >= j)
            throw DimensionError("graph_incidence: edge " + std::to_string(l + 1) + " must satisfy i < j");
        if (!seen.emplace(i, j).second)
            throw DimensionError("graph_incidence: duplicate edge (" + std::to_string(i + 1) + "," +
                                 std::to_string(j + 1) + ")");
        trip.emplace_back(static_cast<Index>(l), i, -1.0);
        trip.emplace_back(static_cast<Index>(l), j, 1.0);
    }
    SpMat D(static_cast<Index>(edges.size()), n);
    D.setFromTriplets(trip.begin(), trip.end());
    PenaltyMeta meta;
    meta.edges = edges;
    return {std::move(D), PenaltyKind::graph, std::move(meta)};
}

/// Row-binds D on top of alpha * I.
inline PenaltyMatrix sparse_augment(const PenaltyMatrix& D, double alpha)
{
    if (!(alpha > 0)) throw DimensionError("sparse_augment: alpha must be positive");
    const Index m = D.rows(), n = D.cols();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(D.sparse().nonZeros() + n));
    for (Index r = 0; r < m; ++r)
        for (SpMat::InnerIterator it(D.sparse(), r); it; ++it) trip.emplace_back(r, it.col(), it.value());
    for (Index c = 0; c < n; ++c) trip.emplace_back(m + c, c, alpha);
    SpMat A(m + n, n);
    A.setFromTriplets(trip.begin(), trip.end());
    PenaltyMeta meta = D.meta();
    meta.alpha = alpha;
    meta.base_kind = D.kind() == PenaltyKind::sparse_augmented ? D.meta().base_kind : D.kind();
    return {std::move(A), PenaltyKind::sparse_augmented, std::move(meta)};
}

/// Wraps an arbitrary dense matrix. Zero rows are rejected.
inline PenaltyMatrix custom_penalty(const Mat& D)
{
    for (Index r = 0; r < D.rows(); ++r)
        if (D.row(r).cwiseAbs().maxCoeff() == 0.0)
            throw DimensionError("custom_penalty: row " + std::to_string(r + 1) + " is zero");
    SpMat S = D.sparseView();
    return {std::move(S), PenaltyKind::custom};
}

/**
 * Generalized lasso regression mapped to a signal approximation problem:
 * y_tilde = X X^+ y, D_tilde = D X^+, theta = X beta. With ridge > 0 the
 * design is augmented to [X; sqrt(2 ridge) I] and y padded with zeros, so
 * y_tilde and theta live in R^(n+p).
 */
struct RegressionTransform {
    Vec y_tilde;
    PenaltyMatrix D_tilde;
    Mat X_pinv;      // p x n_eff
    Mat design;      // n_eff x p, the (possibly augmented) design
    Mat pullback;    // n_eff x n: y_tilde = pullback * y
    double ridge = 0.0;
    Index n_obs = 0;

    Vec coefficients(const Vec& theta) const { return X_pinv * theta; }
    Vec fitted(const Vec& beta) const { return design * beta; }
};

inline RegressionTransform regression_transform(const Mat& X, const Vec& y, const PenaltyMatrix& D, double ridge)
{
    const Index n = X.rows(), p = X.cols();
    if (y.size() != n) throw DimensionError("regression_transform: y length does not match X rows");
    if (D.cols() != p) throw DimensionError("regression_transform: D columns do not match X columns");
    if (ridge < 0) throw DimensionError("regression_transform: ridge must be nonnegative");

    Mat Xe = X;
    if (ridge > 0) {
        Xe.resize(n + p, p);
        Xe.topRows(n) = X;
        Xe.bottomRows(p) = std::sqrt(2.0 * ridge) * Mat::Identity(p, p);
    }
    SubspaceFactor f(Xe);
    if (f.rank() < p)
        throw InputError("regression_transform: design has rank " + std::to_string(f.rank()) + " < " +
                         std::to_string(p) + "; supply a positive ridge");

    RegressionTransform out;
    out.ridge = ridge;
    out.n_obs = n;
    out.design = Xe;
    out.X_pinv = f.V() * f.singular_values().cwiseInverse().asDiagonal() * f.U().transpose();
    const Mat hat = f.U() * f.U().transpose();
    out.pullback = hat.leftCols(n);
    out.y_tilde = out.pullback * y;
    Mat Dt = D.dense() * out.X_pinv;
    for (Index r = 0; r < Dt.rows(); ++r)
        if (Dt.row(r).cwiseAbs().maxCoeff() == 0.0)
            throw NumericalError("regression_transform: transformed penalty has a zero row");
    PenaltyMeta meta = D.meta();
    meta.ridge = ridge;
    meta.base_kind = D.kind();
    SpMat S = Dt.sparseView();
    out.D_tilde = PenaltyMatrix(std::move(S), PenaltyKind::regression_transformed, std::move(meta));
    return out;
}

/// Block-diagonal stack of diff1 operators, one per coefficient block.
inline PenaltyMatrix block_difference_matrix(Index blocks, Index block_len)
{
    if (blocks < 1 || block_len < 2) throw DimensionError("block_difference_matrix: need blocks >= 1, len >= 2");
    const Index m = blocks * (block_len - 1);
    std::vector<Eigen::Triplet<double>> trip;
    for (Index b = 0; b < blocks; ++b)
        for (Index r = 0; r < block_len - 1; ++r) {
            const Index row = b * (block_len - 1) + r;
            trip.emplace_back(row, b * block_len + r, -1.0);
            trip.emplace_back(row, b * block_len + r + 1, 1.0);
        }
    SpMat D(m, blocks * block_len);
    D.setFromTriplets(trip.begin(), trip.end());
    return {std::move(D), PenaltyKind::custom};
}

/// [diag(Z_1) ... diag(Z_q)] for predictors Z (n x q): varying-coefficient design.
inline Mat varying_coefficient_design(const Mat& Z)
{
    const Index n = Z.rows(), q = Z.cols();
    Mat X = Mat::Zero(n, n * q);
    for (Index b = 0; b < q; ++b)
        for (Index t = 0; t < n; ++t) X(t, b * n + t) = Z(t, b);
    return X;
}

} // namespace glinfer
