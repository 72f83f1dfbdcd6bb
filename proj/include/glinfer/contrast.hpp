#pragma once
#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <string>
#include <utility>
#include <vector>
#include <glinfer/errors.hpp>
#include <glinfer/linalg.hpp>
#include <glinfer/path.hpp>
#include <glinfer/penalty.hpp>
#include <glinfer/tg.hpp>

namespace glinfer {

/// Sorted changepoints I_1 < ... < I_k (1-based, I_j in [1, n-1]) with jump signs.
struct SelectedModel1D {
    Index n = 0;
    std::vector<Index> changepoints;
    std::vector<int> signs;

    std::size_t size() const { return changepoints.size(); }

    Index position(Index location) const
    {
        auto it = std::find(changepoints.begin(), changepoints.end(), location);
        if (it == changepoints.end()) return -1;
        return static_cast<Index>(it - changepoints.begin()) + 1;
    }
};

/// Number of leading rows of D that are difference rows (the rest are sparsity rows).
inline Index difference_rows(const PenaltyMatrix& D)
{
    if (D.kind() == PenaltyKind::sparse_augmented) return D.rows() - D.cols();
    return D.rows();
}

/// Changepoint model of step k of a diff1 / diff2 path (possibly sparsity augmented).
/// Boundary row i (0-based) maps to location i + 1.
inline SelectedModel1D selected_model(const PathTrace& trace, std::size_t k)
{
    const PenaltyKind sk = trace.D.structural_kind();
    if (sk != PenaltyKind::diff1 && sk != PenaltyKind::diff2)
        throw InputError("selected_model: penalty kind '" + std::string(to_string(trace.D.kind())) +
                         "' has no 1d changepoint structure");
    SelectedModel1D m;
    m.n = trace.D.cols();
    if (k == 0) return m;
    const auto pairs = trace.step(k).sorted_boundary();
    const Index rows = difference_rows(trace.D);
    for (const auto& [row, s] : pairs) {
        if (row >= rows) continue;
        m.changepoints.push_back(row + 1);
        m.signs.push_back(s);
    }
    return m;
}

namespace detail {
inline void check_j(const SelectedModel1D& model, Index j, const char* who)
{
    if (j < 1 || j > static_cast<Index>(model.size()))
        throw DimensionError(std::string(who) + ": j = " + std::to_string(j) + " outside 1.." +
                             std::to_string(model.size()));
}
} // namespace detail

/// s (e_{I+1} - e_I).
inline Contrast fl_spike(const SelectedModel1D& model, Index j)
{
    detail::check_j(model, j, "fl_spike");
    const Index I = model.changepoints[static_cast<std::size_t>(j - 1)];
    const int s = model.signs[static_cast<std::size_t>(j - 1)];
    if (I < 1 || I >= model.n) throw DimensionError("fl_spike: changepoint out of range");
    Contrast c;
    c.v = Vec::Zero(model.n);
    c.v(I - 1) = -s;
    c.v(I) = s;
    c.kind = ContrastKind::spike;
    c.location = I;
    c.sign = s;
    return c;
}

/// s (mean over (I_j, I_{j+1}] - mean over (I_{j-1}, I_j]).
inline Contrast fl_segment(const SelectedModel1D& model, Index j)
{
    detail::check_j(model, j, "fl_segment");
    const std::size_t t = static_cast<std::size_t>(j - 1);
    const Index I = model.changepoints[t];
    const Index left = t == 0 ? 0 : model.changepoints[t - 1];
    const Index right = t + 1 < model.size() ? model.changepoints[t + 1] : model.n;
    if (!(left < I && I < right && right <= model.n)) throw DimensionError("fl_segment: changepoints not sorted");
    const int s = model.signs[t];
    Contrast c;
    c.v = Vec::Zero(model.n);
    c.v.segment(left, I - left).setConstant(-static_cast<double>(s) / static_cast<double>(I - left));
    c.v.segment(I, right - I).setConstant(static_cast<double>(s) / static_cast<double>(right - I));
    c.kind = ContrastKind::segment;
    c.location = I;
    c.sign = s;
    return c;
}

/// s (e_I - 2 e_{I+1} + e_{I+2}).
inline Contrast tf_spike(const SelectedModel1D& model, Index j)
{
    detail::check_j(model, j, "tf_spike");
    const Index I = model.changepoints[static_cast<std::size_t>(j - 1)];
    const int s = model.signs[static_cast<std::size_t>(j - 1)];
    if (I < 1 || I + 2 > model.n) throw DimensionError("tf_spike: knot needs I + 2 <= n");
    Contrast c;
    c.v = Vec::Zero(model.n);
    c.v(I - 1) = s;
    c.v(I) = -2.0 * s;
    c.v(I + 1) = s;
    c.kind = ContrastKind::spike;
    c.location = I;
    c.sign = s;
    return c;
}

/**
 * Rank-one basis of null(D_{-B}) orthogonal to null(D_{-(B \ {I_j})}), oriented so
 * its second difference at the knot has the sign of the knot.
 */
inline Contrast tf_segment(const SelectedModel1D& model, Index j, const PenaltyMatrix& D,
                           const std::vector<Index>& boundary_rows)
{
    detail::check_j(model, j, "tf_segment");
    const Index I = model.changepoints[static_cast<std::size_t>(j - 1)];
    const int s = model.signs[static_cast<std::size_t>(j - 1)];
    const Index row = I - 1;
    if (std::find(boundary_rows.begin(), boundary_rows.end(), row) == boundary_rows.end())
        throw DimensionError("tf_segment: knot row is not in the boundary set");
    if (I + 2 > D.cols()) throw DimensionError("tf_segment: knot needs I + 2 <= n");
    const std::vector<Index> rest = D.complement_rows(boundary_rows);
    std::vector<Index> rest_drop = rest;
    rest_drop.insert(std::upper_bound(rest_drop.begin(), rest_drop.end(), row), row);
    const Vec w = rank1_null_basis(D.rows_dense(rest), D.rows_dense(rest_drop), D.cols());
    const double second = w(I - 1) - 2.0 * w(I) + w(I + 1);
    if (std::abs(second) < 1e-12) throw NumericalError("tf_segment: second difference of the basis vanishes at the knot");
    Contrast c;
    c.v = (second > 0 ? 1.0 : -1.0) * s * w;
    c.kind = ContrastKind::segment;
    c.location = I;
    c.sign = s;
    return c;
}

/// Connected components after removing boundary edges, labelled by smallest node.
struct GraphPartition {
    Index n = 0;
    std::vector<Index> label;                      // node -> component (0-based)
    std::vector<std::vector<Index>> components;    // ascending nodes
    std::vector<Edge> edges;                       // all graph edges
    std::vector<std::pair<Index, int>> boundary;   // (edge row, sign), ascending

    Index component_of(Index node) const { return label.at(static_cast<std::size_t>(node)); }
};

namespace detail {
struct UnionFind {
    std::vector<Index> parent;
    explicit UnionFind(Index n) : parent(static_cast<std::size_t>(n)) { std::iota(parent.begin(), parent.end(), 0); }
    Index find(Index x)
    {
        while (parent[static_cast<std::size_t>(x)] != x) {
            parent[static_cast<std::size_t>(x)] = parent[static_cast<std::size_t>(parent[static_cast<std::size_t>(x)])];
            x = parent[static_cast<std::size_t>(x)];
        }
        return x;
    }
    void unite(Index a, Index b)
    {
        a = find(a);
        b = find(b);
        if (a != b) parent[static_cast<std::size_t>(std::max(a, b))] = std::min(a, b);
    }
};
} // namespace detail

/// Edges recovered from an incidence-type penalty: each row must be (-1 at i, +1 at j).
inline std::vector<Edge> incidence_edges(const PenaltyMatrix& D, Index rows)
{
    std::vector<Edge> out;
    for (Index r = 0; r < rows; ++r) {
        Index lo = -1, hi = -1;
        int nnz = 0;
        for (SpMat::InnerIterator it(D.sparse(), r); it; ++it) {
            if (it.value() == 0.0) continue;
            ++nnz;
            if (it.value() == -1.0) lo = it.col();
            else if (it.value() == 1.0) hi = it.col();
        }
        if (nnz != 2 || lo < 0 || hi < 0) throw InputError("incidence_edges: row " + std::to_string(r + 1) + " is not an edge row");
        out.push_back({lo, hi});
    }
    return out;
}

inline GraphPartition graph_partition(const PenaltyMatrix& D, const ModelStep& step)
{
    GraphPartition g;
    g.n = D.cols();
    const Index rows = difference_rows(D);
    g.edges = D.meta().edges.empty() ? incidence_edges(D, rows) : D.meta().edges;
    std::vector<char> in_b(static_cast<std::size_t>(D.rows()), 0);
    for (const auto& [row, s] : step.sorted_boundary())
        if (row < rows) {
            in_b[static_cast<std::size_t>(row)] = 1;
            g.boundary.emplace_back(row, s);
        }
    detail::UnionFind uf(g.n);
    for (Index r = 0; r < rows; ++r)
        if (!in_b[static_cast<std::size_t>(r)]) uf.unite(g.edges[static_cast<std::size_t>(r)].i, g.edges[static_cast<std::size_t>(r)].j);
    std::map<Index, Index> root_to_label;
    g.label.resize(static_cast<std::size_t>(g.n));
    for (Index v = 0; v < g.n; ++v) {
        const Index root = uf.find(v);
        auto [it, fresh] = root_to_label.emplace(root, static_cast<Index>(root_to_label.size()));
        if (fresh) g.components.emplace_back();
        g.label[static_cast<std::size_t>(v)] = it->second;
        g.components[static_cast<std::size_t>(it->second)].push_back(v);
    }
    return g;
}

/// s_ab (mean over C_b - mean over C_a); components are 0-based labels.
inline Contrast gfl_segment(const GraphPartition& part, Index a, Index b)
{
    const Index p = static_cast<Index>(part.components.size());
    if (a < 0 || b < 0 || a >= p || b >= p || a == b) throw DimensionError("gfl_segment: invalid component pair");
    bool neighbors = false;
    for (const Edge& e : part.edges) {
        const Index ca = part.component_of(e.i), cb = part.component_of(e.j);
        if ((ca == a && cb == b) || (ca == b && cb == a)) neighbors = true;
    }
    if (!neighbors) throw InputError("gfl_segment: components are not neighbors");
    int s_ab = 0;
    for (const auto& [row, s] : part.boundary) {
        const Edge& e = part.edges[static_cast<std::size_t>(row)];
        const Index ci = part.component_of(e.i), cj = part.component_of(e.j);
        int here = 0;
        if (ci == a && cj == b) here = s;
        else if (ci == b && cj == a) here = -s;
        else continue;
        if (s_ab != 0 && here != s_ab)
            throw InputError("gfl_segment: boundary edges between the components have conflicting signs; "
                             "use a two-sided custom contrast");
        s_ab = here;
    }
    if (s_ab == 0) throw InputError("gfl_segment: no boundary edge joins the components");
    const auto& Ca = part.components[static_cast<std::size_t>(a)];
    const auto& Cb = part.components[static_cast<std::size_t>(b)];
    Contrast c;
    c.v = Vec::Zero(part.n);
    for (Index v : Ca) c.v(v) = -static_cast<double>(s_ab) / static_cast<double>(Ca.size());
    for (Index v : Cb) c.v(v) = static_cast<double>(s_ab) / static_cast<double>(Cb.size());
    c.kind = ContrastKind::graph_segment;
    c.sign = s_ab;
    return c;
}

/// Whether boundary edge `row` separates two components joined only by consistently signed boundary edges.
inline bool gfl_testable(const GraphPartition& part, Index row)
{
    if (row < 0 || row >= static_cast<Index>(part.edges.size())) return false;
    const Edge& e = part.edges[static_cast<std::size_t>(row)];
    const Index a = part.component_of(e.i), b = part.component_of(e.j);
    if (a == b) return false;
    int s_ab = 0;
    for (const auto& [r, s] : part.boundary) {
        const Edge& f = part.edges[static_cast<std::size_t>(r)];
        const Index ci = part.component_of(f.i), cj = part.component_of(f.j);
        const int here = (ci == a && cj == b) ? s : ((ci == b && cj == a) ? -s : 0);
        if (here == 0) continue;
        if (s_ab != 0 && here != s_ab) return false;
        s_ab = here;
    }
    return s_ab != 0;
}

/// Contrast for boundary edge `row` (0-based): the components on either side of it.
inline Contrast gfl_segment_at_edge(const GraphPartition& part, Index row)
{
    if (row < 0 || row >= static_cast<Index>(part.edges.size())) throw DimensionError("gfl_segment_at_edge: edge out of range");
    const Edge& e = part.edges[static_cast<std::size_t>(row)];
    Contrast c = gfl_segment(part, part.component_of(e.i), part.component_of(e.j));
    c.location = row + 1;
    return c;
}

/// Segment-indicator basis N_B (p x components) of an incidence-type D with boundary rows removed.
inline Mat segment_basis(const PenaltyMatrix& D, const std::vector<Index>& boundary_rows, std::vector<Index>* label = nullptr)
{
    const std::vector<Edge> edges = incidence_edges(D, D.rows());
    std::vector<char> in_b(static_cast<std::size_t>(D.rows()), 0);
    for (Index r : boundary_rows) in_b.at(static_cast<std::size_t>(r)) = 1;
    detail::UnionFind uf(D.cols());
    for (Index r = 0; r < D.rows(); ++r)
        if (!in_b[static_cast<std::size_t>(r)]) uf.unite(edges[static_cast<std::size_t>(r)].i, edges[static_cast<std::size_t>(r)].j);
    std::map<Index, Index> root_to_label;
    std::vector<Index> lab(static_cast<std::size_t>(D.cols()));
    for (Index v = 0; v < D.cols(); ++v) {
        auto [it, fresh] = root_to_label.emplace(uf.find(v), static_cast<Index>(root_to_label.size()));
        lab[static_cast<std::size_t>(v)] = it->second;
    }
    Mat N = Mat::Zero(D.cols(), static_cast<Index>(root_to_label.size()));
    for (Index v = 0; v < D.cols(); ++v) N(v, lab[static_cast<std::size_t>(v)]) = 1.0;
    if (label) *label = std::move(lab);
    return N;
}

/**
 * s (X_B^+)^T e with X_B = X N_B the effective design of the piecewise constant
 * coefficient model, e = +1 on the segment after boundary row `row` and -1 on the one before.
 */
inline Contrast reg_segment(const Mat& X, const PenaltyMatrix& D, const std::vector<Index>& boundary_rows, Index row,
                            int sign)
{
    if (X.cols() != D.cols()) throw DimensionError("reg_segment: X columns do not match D");
    if (std::find(boundary_rows.begin(), boundary_rows.end(), row) == boundary_rows.end())
        throw DimensionError("reg_segment: row is not in the boundary set");
    std::vector<Index> label;
    const Mat N = segment_basis(D, boundary_rows, &label);
    const Edge e = incidence_edges(D, D.rows())[static_cast<std::size_t>(row)];
    const Mat XB = X * N;
    SubspaceFactor f(XB);
    if (f.rank() < XB.cols())
        throw NumericalError("reg_segment: effective design has rank " + std::to_string(f.rank()) + " < " +
                             std::to_string(XB.cols()));
    Vec ev = Vec::Zero(XB.cols());
    ev(label[static_cast<std::size_t>(e.i)]) -= 1.0;
    ev(label[static_cast<std::size_t>(e.j)]) += 1.0;
    Contrast c;
    c.v = sign * f.pinv_transpose_apply(ev);
    c.kind = ContrastKind::reg_segment;
    c.location = row + 1;
    c.sign = sign;
    return c;
}

/// Drops changepoints closer than min_gap to the last kept one, scanning left to right.
inline SelectedModel1D declutter(const SelectedModel1D& model, Index min_gap)
{
    if (min_gap < 1) throw DimensionError("declutter: min_gap must be >= 1");
    SelectedModel1D out;
    out.n = model.n;
    for (std::size_t t = 0; t < model.size(); ++t) {
        if (!out.changepoints.empty() && model.changepoints[t] - out.changepoints.back() < min_gap) continue;
        out.changepoints.push_back(model.changepoints[t]);
        out.signs.push_back(model.signs[t]);
    }
    return out;
}

/// Locations (1-based) and signs only.
struct StepSignModel {
    Index n = 0;
    std::vector<Index> locations;
    std::vector<int> signs;
    friend bool operator==(const StepSignModel&, const StepSignModel&) = default;
};

inline StepSignModel step_sign_model(const PathTrace& trace, std::size_t k)
{
    StepSignModel out;
    out.n = trace.D.cols();
    if (k == 0 || trace.steps.empty()) return out;
    const Index rows = difference_rows(trace.D);
    for (const auto& [row, s] : trace.step(k).sorted_boundary()) {
        if (row >= rows) continue;
        out.locations.push_back(row + 1);
        out.signs.push_back(s);
    }
    return out;
}

/// Segment or spike contrast at a changepoint location for a 1d trace.
inline Contrast contrast_at(const PathTrace& trace, std::size_t k, ContrastKind kind, Index location,
                            Index min_gap = 1)
{
    SelectedModel1D model = selected_model(trace, k);
    if (model.position(location) < 0)
        throw InputError("contrast_at: location " + std::to_string(location) + " is not in the model at step " +
                         std::to_string(k));
    if (min_gap > 1) {
        model = declutter(model, min_gap);
        if (model.position(location) < 0)
            throw InputError("contrast_at: location " + std::to_string(location) + " was removed by decluttering");
    }
    const Index j = model.position(location);
    const bool tf = trace.D.structural_kind() == PenaltyKind::diff2;
    if (kind == ContrastKind::spike) return tf ? tf_spike(model, j) : fl_spike(model, j);
    if (kind == ContrastKind::segment) {
        if (!tf) return fl_segment(model, j);
        if (min_gap > 1) throw InputError("contrast_at: decluttering is not supported for trend filtering segments");
        return tf_segment(model, j, trace.D, trace.step(k).boundary);
    }
    throw InputError("contrast_at: unsupported contrast kind");
}

} // namespace glinfer
