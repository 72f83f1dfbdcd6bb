#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>
#include <glinfer/errors.hpp>
#include <glinfer/linalg.hpp>
#include <glinfer/path.hpp>
#include <glinfer/penalty.hpp>

namespace glinfer {

enum class RowFamily {
    first_hit,
    hit_sign,
    hit_argmax,
    leave_sign_neg,
    leave_sign_pos,
    leave_argmax,
    hit_vs_leave,
    ic_pair
};

inline const char* to_string(RowFamily f)
{
    switch (f) {
        case RowFamily::first_hit: return "first_hit";
        case RowFamily::hit_sign: return "hit_sign";
        case RowFamily::hit_argmax: return "hit_argmax";
        case RowFamily::leave_sign_neg: return "leave_sign_neg";
        case RowFamily::leave_sign_pos: return "leave_sign_pos";
        case RowFamily::leave_argmax: return "leave_argmax";
        case RowFamily::hit_vs_leave: return "hit_vs_leave";
        case RowFamily::ic_pair: return "ic_pair";
    }
    return "ic_pair";
}

inline RowFamily row_family_from_string(const std::string& s)
{
    for (RowFamily f : {RowFamily::first_hit, RowFamily::hit_sign, RowFamily::hit_argmax, RowFamily::leave_sign_neg,
                        RowFamily::leave_sign_pos, RowFamily::leave_argmax, RowFamily::hit_vs_leave,
                        RowFamily::ic_pair})
        if (s == to_string(f)) return f;
    throw InputError("unknown row family '" + s + "'");
}

struct RowTag {
    int step = 0; // 1-based path step the row encodes (IC rows: comparison index)
    RowFamily family = RowFamily::first_hit;
};

/**
 * {y : gamma * y >= offset}. Rows are stored with unit Euclidean norm;
 * row_scale keeps the norm each row had before normalization.
 */
struct Polyhedron {
    Mat gamma;
    Vec offset;
    std::vector<RowTag> tags;
    Vec row_scale;
    Index dim = 0;
    bool degenerate_warning = false;

    Index rows() const { return gamma.rows(); }

    Vec slack(const Vec& y) const
    {
        if (y.size() != dim) throw DimensionError("Polyhedron: vector length does not match dimension");
        if (rows() == 0) return Vec();
        return gamma * y - offset;
    }

    std::size_t count(int step, RowFamily family) const
    {
        return static_cast<std::size_t>(std::count_if(tags.begin(), tags.end(), [&](const RowTag& t) {
            return t.step == step && t.family == family;
        }));
    }
};

/// Accumulates rows, normalizing each; rows with negligible norm are dropped.
class RowSink {
public:
    explicit RowSink(Index n) : n_(n) {}

    void add(const Vec& row, double offset, int step, RowFamily family)
    {
        const double nrm = row.norm();
        if (!(nrm > 1e-13)) return;
        rows_.push_back(row / nrm);
        offsets_.push_back(offset / nrm);
        scales_.push_back(nrm);
        tags_.push_back({step, family});
    }

    void append_to(Polyhedron& P) const
    {
        const Index old = P.rows();
        const Index add = static_cast<Index>(rows_.size());
        if (P.dim == 0 && old == 0) P.dim = n_;
        if (P.dim != n_) throw DimensionError("Polyhedron: appended rows have a different dimension");
        Mat g(old + add, n_);
        Vec w(old + add), sc(old + add);
        if (old) {
            g.topRows(old) = P.gamma;
            w.head(old) = P.offset;
            sc.head(old) = P.row_scale;
        }
        for (Index r = 0; r < add; ++r) {
            g.row(old + r) = rows_[static_cast<std::size_t>(r)].transpose();
            w(old + r) = offsets_[static_cast<std::size_t>(r)];
            sc(old + r) = scales_[static_cast<std::size_t>(r)];
        }
        P.gamma = std::move(g);
        P.offset = std::move(w);
        P.row_scale = std::move(sc);
        P.tags.insert(P.tags.end(), tags_.begin(), tags_.end());
    }

private:
    Index n_;
    std::vector<Vec> rows_;
    std::vector<double> offsets_;
    std::vector<double> scales_;
    std::vector<RowTag> tags_;
};

inline Polyhedron empty_polyhedron(Index n)
{
    Polyhedron P;
    P.dim = n;
    P.gamma.resize(0, n);
    P.offset.resize(0);
    P.row_scale.resize(0);
    return P;
}

/// Rows r1*M_{i1} -+ M_i for every i != i1, M = (DD^T)^+ D.
inline Polyhedron gamma_first_step(const ModelStep& M1, const PenaltyMatrix& D, FactorCache* cache = nullptr)
{
    if (M1.boundary.size() != 1 || M1.signs.size() != 1)
        throw DimensionError("gamma_first_step: first model must have a single boundary coordinate");
    const Index n = D.cols();
    const Index i1 = M1.boundary[0];
    if (i1 < 0 || i1 >= D.rows()) throw DimensionError("gamma_first_step: boundary row out of range");
    const Mat M = factor_for(D, {}, cache)->pinv_transpose();
    const Vec lead = M1.signs[0] * M.row(i1).transpose();
    RowSink sink(n);
    for (Index i = 0; i < D.rows(); ++i) {
        if (i == i1) continue;
        sink.add(lead - M.row(i).transpose(), 0.0, 1, RowFamily::first_hit);
        sink.add(lead + M.row(i).transpose(), 0.0, 1, RowFamily::first_hit);
    }
    Polyhedron P = empty_polyhedron(n);
    sink.append_to(P);
    return P;
}

/**
 * Appends the rows for the transition prev -> next (step index `step` of next).
 *
 * With A = D_{-B}, a = (AA^T)^+ A y and c = diag(s) D_B P_null(A) y are linear in y
 * while b and d depend on (B, s, D) only, so every hitting and leaving time is a
 * fixed linear functional of y once the sign rows pin down the viable sets.
 */
inline void gamma_extend(Polyhedron& P, const ModelStep& prev, const ModelStep& next, int step, const PenaltyMatrix& D,
                         FactorCache* cache = nullptr)
{
    const Index n = D.cols();
    if (P.dim != n) throw DimensionError("gamma_extend: polyhedron dimension does not match D");

    auto prev_rows = prev.sorted_rows();
    auto next_rows = next.sorted_rows();
    const bool one_diff =
        (next.action == Action::hit && next_rows.size() == prev_rows.size() + 1) ||
        (next.action == Action::leave && next_rows.size() + 1 == prev_rows.size());
    std::vector<Index> diff;
    std::set_symmetric_difference(prev_rows.begin(), prev_rows.end(), next_rows.begin(), next_rows.end(),
                                  std::back_inserter(diff));
    if (!one_diff || diff.size() != 1 || diff[0] != next.changed)
        throw DimensionError("gamma_extend: step " + std::to_string(step) +
                             " does not differ from its predecessor by exactly one coordinate");

    const std::vector<Index> rest = D.complement_rows(prev.boundary);
    const auto f = factor_for(D, prev.boundary, cache);
    const Mat A = f->pinv_transpose();
    const Mat DB = D.rows_dense(prev.boundary);
    Vec s(static_cast<Index>(prev.signs.size()));
    for (std::size_t t = 0; t < prev.signs.size(); ++t) s(static_cast<Index>(t)) = prev.signs[t];
    const Vec DBts = DB.transpose() * s;
    const Vec b = f->pinv_transpose_apply(DBts);

    if (next.hit_signs.size() != rest.size())
        throw DimensionError("gamma_extend: hitting signs do not cover the coordinates off the boundary");

    RowSink sink(n);

    // Hitting candidates: sign rows, then the time functional g_i = A_i / (r_i + b_i).
    std::vector<Index> valid;      // positions in rest
    std::vector<Vec> hit_coef;     // aligned with rest positions
    hit_coef.resize(rest.size());
    Index hit_winner = -1;
    for (std::size_t t = 0; t < rest.size(); ++t) {
        const Index ti = static_cast<Index>(t);
        if (next.hit_signs[t].first != rest[t])
            throw DimensionError("gamma_extend: hitting sign rows are not aligned with D_{-B}");
        const int r = next.hit_signs[t].second;
        sink.add(r * A.row(ti).transpose(), 0.0, step, RowFamily::hit_sign);
        const double den = r + b(ti);
        if (std::abs(den) < hit_denominator_tol) continue;
        hit_coef[t] = A.row(ti).transpose() / den;
        valid.push_back(ti);
        if (next.action == Action::hit && rest[t] == next.changed) hit_winner = ti;
    }
    if (next.action == Action::hit && hit_winner < 0)
        throw DimensionError("gamma_extend: hitting coordinate is not a valid candidate");

    // Leaving candidates.
    std::vector<std::size_t> viable_pos; // positions in prev.boundary
    std::vector<Vec> leave_coef;
    Index leave_winner = -1;
    if (next.leave_checked && !prev.boundary.empty()) {
        const Mat C = s.asDiagonal() * (DB * f->null_projector());
        const Vec d = s.cwiseProduct(DB * f->project_null(DBts));
        const double dtol = leave_denominator_tol(D);
        std::vector<std::pair<Index, std::size_t>> order;
        for (std::size_t t = 0; t < prev.boundary.size(); ++t) order.emplace_back(prev.boundary[t], t);
        std::sort(order.begin(), order.end());
        for (const auto& [row, pos] : order) {
            const Index p = static_cast<Index>(pos);
            if (!(d(p) < -dtol)) continue;
            const bool viable = std::binary_search(next.leave_viable.begin(), next.leave_viable.end(), row);
            if (viable) {
                sink.add(-C.row(p).transpose(), 0.0, step, RowFamily::leave_sign_neg);
                viable_pos.push_back(pos);
                leave_coef.push_back(C.row(p).transpose() / d(p));
                if (next.action == Action::leave && row == next.changed)
                    leave_winner = static_cast<Index>(leave_coef.size()) - 1;
            } else {
                sink.add(C.row(p).transpose(), 0.0, step, RowFamily::leave_sign_pos);
            }
        }
    }
    if (next.action == Action::leave && leave_winner < 0)
        throw DimensionError("gamma_extend: leaving coordinate is not viable");

    if (next.action == Action::hit) {
        const Vec& gw = hit_coef[static_cast<std::size_t>(hit_winner)];
        for (Index t : valid)
            if (t != hit_winner) sink.add(gw - hit_coef[static_cast<std::size_t>(t)], 0.0, step, RowFamily::hit_argmax);
        for (const Vec& h : leave_coef) sink.add(gw - h, 0.0, step, RowFamily::hit_vs_leave);
    } else {
        const Vec& hw = leave_coef[static_cast<std::size_t>(leave_winner)];
        for (std::size_t t = 0; t < leave_coef.size(); ++t)
            if (static_cast<Index>(t) != leave_winner) sink.add(hw - leave_coef[t], 0.0, step, RowFamily::leave_argmax);
        for (Index t : valid) sink.add(hw - hit_coef[static_cast<std::size_t>(t)], 0.0, step, RowFamily::hit_vs_leave);
    }
    sink.append_to(P);
}

/// Selection event of the first k model steps, from the models and D alone.
inline Polyhedron build_selection_polyhedron(const std::vector<ModelStep>& steps, const PenaltyMatrix& D,
                                             std::size_t k, FactorCache* cache = nullptr)
{
    if (k < 1 || k > steps.size())
        throw DimensionError("build_selection_polyhedron: k = " + std::to_string(k) + " outside 1.." +
                             std::to_string(steps.size()));
    Polyhedron P = gamma_first_step(steps[0], D, cache);
    for (std::size_t t = 1; t < k; ++t) {
        gamma_extend(P, steps[t - 1], steps[t], static_cast<int>(t + 1), D, cache);
        const double k0 = steps[t - 1].knot, k1 = steps[t].knot;
        if (std::abs(k0 - k1) <= tie_tol * std::max(std::abs(k0), 1e-300)) P.degenerate_warning = true;
    }
    return P;
}

inline Polyhedron build_selection_polyhedron(const PathTrace& trace, std::size_t k, FactorCache* cache = nullptr)
{
    return build_selection_polyhedron(trace.steps, trace.D, k, cache);
}

/// Stacks the rows of Q under P.
inline Polyhedron intersect(Polyhedron P, const Polyhedron& Q)
{
    if (P.dim != Q.dim) throw DimensionError("intersect: dimension mismatch");
    const Index a = P.rows(), b = Q.rows();
    Mat g(a + b, P.dim);
    Vec w(a + b), sc(a + b);
    g << P.gamma, Q.gamma;
    w << P.offset, Q.offset;
    sc << P.row_scale, Q.row_scale;
    P.gamma = std::move(g);
    P.offset = std::move(w);
    P.row_scale = std::move(sc);
    P.tags.insert(P.tags.end(), Q.tags.begin(), Q.tags.end());
    P.degenerate_warning = P.degenerate_warning || Q.degenerate_warning;
    return P;
}

/// Smallest normalized slack min_j (gamma_j y - w_j); +inf with no rows.
inline double min_slack(const Polyhedron& P, const Vec& y)
{
    if (P.rows() == 0) {
        if (y.size() != P.dim) throw DimensionError("Polyhedron: vector length does not match dimension");
        return std::numeric_limits<double>::infinity();
    }
    return P.slack(y).minCoeff();
}

inline bool membership(const Polyhedron& P, const Vec& y, double tol = 1e-8)
{
    if (std::isinf(tol) && tol > 0) return true;
    return min_slack(P, y) >= -tol;
}

} // namespace glinfer
