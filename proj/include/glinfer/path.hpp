#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <memory>
#include <optional>
#include <utility>
#include <vector>
#include <glinfer/errors.hpp>
#include <glinfer/linalg.hpp>
#include <glinfer/penalty.hpp>

namespace glinfer {

enum class Action { hit, leave };

inline const char* to_string(Action a) { return a == Action::hit ? "hit" : "leave"; }

/**
 * The generalized lasso model after one step of the dual path:
 * boundary set and signs, the viable hitting signs (one per coordinate off the
 * previous boundary) and the viable leaving coordinates. Indices are 0-based
 * rows of D.
 */
struct ModelStep {
    std::vector<Index> boundary;                  // insertion order
    std::vector<int> signs;                       // aligned with boundary
    std::vector<std::pair<Index, int>> hit_signs; // ascending row index
    std::vector<Index> leave_viable;              // ascending row index
    Action action = Action::hit;
    Index changed = -1;                           // row added or removed
    double knot = 0.0;
    bool leave_checked = true;

    /// (row, sign) pairs sorted by row.
    std::vector<std::pair<Index, int>> sorted_boundary() const
    {
        std::vector<std::pair<Index, int>> out;
        out.reserve(boundary.size());
        for (std::size_t t = 0; t < boundary.size(); ++t) out.emplace_back(boundary[t], signs[t]);
        std::sort(out.begin(), out.end());
        return out;
    }

    std::vector<Index> sorted_rows() const
    {
        std::vector<Index> b = boundary;
        std::sort(b.begin(), b.end());
        return b;
    }
};

/// Equality of the selection-relevant content (knot values are ignored).
inline bool same_model(const ModelStep& a, const ModelStep& b)
{
    return a.action == b.action && a.changed == b.changed && a.sorted_boundary() == b.sorted_boundary() &&
           a.hit_signs == b.hit_signs && a.leave_viable == b.leave_viable;
}

inline bool same_model_sequence(const std::vector<ModelStep>& a, const std::vector<ModelStep>& b, std::size_t k)
{
    if (a.size() < k || b.size() < k) return false;
    for (std::size_t t = 0; t < k; ++t)
        if (!same_model(a[t], b[t])) return false;
    return true;
}

/// u(lambda) = a - lambda * b on [lambda_lo, lambda_hi]; full length m.
struct DualSegment {
    Vec a;
    Vec b;
    double lambda_hi = 0.0;
    double lambda_lo = 0.0;
};

enum class Termination { zero_knot, degenerate, max_steps };

inline const char* to_string(Termination t)
{
    switch (t) {
        case Termination::zero_knot: return "zero_knot";
        case Termination::degenerate: return "degenerate";
        case Termination::max_steps: return "max_steps";
    }
    return "max_steps";
}

struct PathTrace {
    std::vector<ModelStep> steps;
    std::vector<DualSegment> segments; // segments[0]: [lambda_1, inf); segments[k]: after step k
    Vec y;
    PenaltyMatrix D;
    Termination termination = Termination::max_steps;

    std::size_t size() const { return steps.size(); }

    /// lambda_1 >= lambda_2 >= ...; includes the terminal 0 when the path reached it.
    std::vector<double> knots() const
    {
        std::vector<double> out;
        for (const auto& s : steps) out.push_back(s.knot);
        if (termination == Termination::zero_knot && !steps.empty()) out.push_back(0.0);
        return out;
    }

    const ModelStep& step(std::size_t k) const
    {
        if (k < 1 || k > steps.size())
            throw DimensionError("PathTrace::step: step " + std::to_string(k) + " out of range 1.." +
                                 std::to_string(steps.size()));
        return steps[k - 1];
    }
};

struct PathOptions {
    Index max_steps = -1; ///< -1: min(m, 5n)
    /// Skip leave computations when D D^T is (verified) diagonally dominant.
    bool skip_leave_if_diagonally_dominant = false;
};

inline bool diagonally_dominant_gram(const PenaltyMatrix& D)
{
    const Mat G = D.dense() * D.dense().transpose();
    for (Index i = 0; i < G.rows(); ++i) {
        const double off = G.row(i).cwiseAbs().sum() - std::abs(G(i, i));
        if (off > std::abs(G(i, i)) * (1 + 1e-12)) return false;
    }
    return true;
}

/// Threshold below which d_i counts as nonnegative when screening leave candidates.
inline double leave_denominator_tol(const PenaltyMatrix& D)
{
    double scale = 0.0;
    for (Index r = 0; r < D.rows(); ++r) scale = std::max(scale, D.dense().row(r).squaredNorm());
    return 1e-10 * std::max(scale, 1.0);
}

/// Hitting candidates with |sign + b_i| below this are skipped.
inline constexpr double hit_denominator_tol = 1e-12;
inline constexpr double tie_tol = 1e-12;
inline constexpr double zero_knot_tol = 1e-12;

/// Memoizes SVDs of D_{-B} keyed by the sorted boundary set. Not thread-safe.
class FactorCache {
public:
    explicit FactorCache(std::size_t max_entries = 4096) : max_entries_(max_entries) {}

    std::shared_ptr<const SubspaceFactor> get(const PenaltyMatrix& D, std::vector<Index> boundary)
    {
        std::sort(boundary.begin(), boundary.end());
        if (!same_entries(D.sparse())) {
            cache_.clear();
            D_ = D.sparse();
        }
        if (auto it = cache_.find(boundary); it != cache_.end()) return it->second;
        auto f = std::make_shared<const SubspaceFactor>(D.rows_dense(D.complement_rows(boundary)));
        if (cache_.size() >= max_entries_) cache_.clear();
        cache_.emplace(std::move(boundary), f);
        return f;
    }

private:
    bool same_entries(const SpMat& D) const
    {
        if (D.rows() != D_.rows() || D.cols() != D_.cols() || D.nonZeros() != D_.nonZeros()) return false;
        const auto nnz = static_cast<std::size_t>(D.nonZeros());
        return std::equal(D.valuePtr(), D.valuePtr() + nnz, D_.valuePtr()) &&
               std::equal(D.innerIndexPtr(), D.innerIndexPtr() + nnz, D_.innerIndexPtr()) &&
               std::equal(D.outerIndexPtr(), D.outerIndexPtr() + D.outerSize() + 1, D_.outerIndexPtr());
    }

    std::size_t max_entries_;
    SpMat D_;
    std::map<std::vector<Index>, std::shared_ptr<const SubspaceFactor>> cache_;
};

inline std::shared_ptr<const SubspaceFactor> factor_for(const PenaltyMatrix& D, const std::vector<Index>& boundary,
                                                        FactorCache* cache)
{
    if (cache) return cache->get(D, boundary);
    std::vector<Index> b = boundary;
    std::sort(b.begin(), b.end());
    return std::make_shared<const SubspaceFactor>(D.rows_dense(D.complement_rows(b)));
}

namespace detail {
inline bool beats(double candidate, double best)
{
    return candidate > best + tie_tol * std::max(std::abs(candidate), std::abs(best));
}
inline int sign_of(double x) { return x >= 0 ? 1 : -1; }
} // namespace detail

/// Mutable state of the dual path between steps.
struct PathState {
    const PenaltyMatrix* D = nullptr;
    Vec y;
    std::vector<Index> boundary;
    std::vector<int> signs;
    double lambda = 0.0;   // current knot lambda_k
    double lambda1 = 0.0;
    bool terminated = false;
    bool check_leave = true;
    FactorCache* cache = nullptr;
};

/// Next-knot computation from the current boundary set, before it is applied.
struct Transition {
    DualSegment segment;           // valid on [lambda_next, lambda_k]
    std::optional<ModelStep> next; // empty when the next knot is zero
};

/// First hitting time: u = (DD^T)^+ D y, lambda_1 = max |u_i|.
inline std::pair<std::optional<ModelStep>, PathState> initial_step(const Vec& y, const PenaltyMatrix& D,
                                                                   const PathOptions& opts = {},
                                                                   FactorCache* cache = nullptr)
{
    if (y.size() != D.cols()) throw DimensionError("initial_step: y length does not match D columns");
    if (D.rows() == 0) throw DimensionError("initial_step: D has no rows");
    PathState st;
    st.D = &D;
    st.y = y;
    st.cache = cache;
    st.check_leave = !(opts.skip_leave_if_diagonally_dominant && diagonally_dominant_gram(D));

    const auto f = factor_for(D, {}, cache);
    const Vec u = f->pinv_transpose_apply(y);
    Index best = -1;
    double best_val = 0.0;
    for (Index i = 0; i < u.size(); ++i) {
        const double v = std::abs(u(i));
        if (best < 0 ? v > 0 : detail::beats(v, best_val)) {
            best = i;
            best_val = v;
        }
    }
    const double scale = std::max(1.0, y.cwiseAbs().maxCoeff());
    if (best < 0 || best_val <= zero_knot_tol * scale) {
        st.terminated = true;
        return {std::nullopt, std::move(st)};
    }
    ModelStep m;
    m.boundary = {best};
    m.signs = {detail::sign_of(u(best))};
    m.action = Action::hit;
    m.changed = best;
    m.knot = best_val;
    m.leave_checked = st.check_leave;
    st.boundary = m.boundary;
    st.signs = m.signs;
    st.lambda = best_val;
    st.lambda1 = best_val;
    return {std::move(m), std::move(st)};
}

/// Compute hitting/leaving times from the current boundary without changing state.
inline Transition compute_transition(const PathState& st)
{
    const PenaltyMatrix& D = *st.D;
    const Index m = D.rows();
    const std::vector<Index> rest = D.complement_rows(st.boundary);
    const auto f = factor_for(D, st.boundary, st.cache);

    const Mat DB = D.rows_dense(st.boundary);
    Vec s(static_cast<Index>(st.signs.size()));
    for (std::size_t t = 0; t < st.signs.size(); ++t) s(static_cast<Index>(t)) = st.signs[t];
    const Vec DBts = DB.transpose() * s;

    const Vec a = f->pinv_transpose_apply(st.y);
    const Vec b = f->pinv_transpose_apply(DBts);

    Transition tr;
    tr.segment.a = Vec::Zero(m);
    tr.segment.b = Vec::Zero(m);
    for (std::size_t t = 0; t < rest.size(); ++t) {
        tr.segment.a(rest[t]) = a(static_cast<Index>(t));
        tr.segment.b(rest[t]) = b(static_cast<Index>(t));
    }
    for (std::size_t t = 0; t < st.boundary.size(); ++t) tr.segment.b(st.boundary[t]) = -st.signs[t];
    tr.segment.lambda_hi = st.lambda;

    const double cap = st.lambda * (1 + 1e-9);

    // Hitting time via lambda_hit = max a_i / (sign(a_i) + b_i).
    ModelStep next;
    next.leave_checked = st.check_leave;
    Index hit_row = -1;
    int hit_sign = 0;
    double hit_time = 0.0;
    for (std::size_t t = 0; t < rest.size(); ++t) {
        const Index ti = static_cast<Index>(t);
        const int r = detail::sign_of(a(ti));
        next.hit_signs.emplace_back(rest[t], r);
        const double den = r + b(ti);
        if (std::abs(den) < hit_denominator_tol) continue;
        const double time = std::max(0.0, a(ti) / den);
        if (time > cap) continue;
        if (time > 0 && (hit_row < 0 || detail::beats(time, hit_time))) {
            hit_row = rest[t];
            hit_sign = r;
            hit_time = std::min(time, st.lambda);
        }
    }

    // Leaving time over viable coordinates {c_i <= 0, d_i < 0}.
    Index leave_pos = -1;
    double leave_time = 0.0;
    if (st.check_leave && !st.boundary.empty()) {
        const Vec c = s.cwiseProduct(DB * f->project_null(st.y));
        const Vec d = s.cwiseProduct(DB * f->project_null(DBts));
        const double dtol = leave_denominator_tol(D);
        std::vector<std::pair<Index, std::size_t>> order; // row, position
        for (std::size_t t = 0; t < st.boundary.size(); ++t) order.emplace_back(st.boundary[t], t);
        std::sort(order.begin(), order.end());
        for (const auto& [row, pos] : order) {
            const Index p = static_cast<Index>(pos);
            if (!(d(p) < -dtol && c(p) <= 0)) continue;
            next.leave_viable.push_back(row);
            const double time = c(p) / d(p);
            if (time > cap) continue;
            if (time > 0 && (leave_pos < 0 || detail::beats(time, leave_time))) {
                leave_pos = static_cast<Index>(pos);
                leave_time = std::min(time, st.lambda);
            }
        }
    }

    const double knot = std::max(hit_time, leave_time);
    if (knot <= zero_knot_tol * st.lambda1 || (hit_row < 0 && leave_pos < 0)) {
        tr.segment.lambda_lo = 0.0;
        return tr;
    }
    tr.segment.lambda_lo = knot;

    next.boundary = st.boundary;
    next.signs = st.signs;
    next.knot = knot;
    if (hit_row >= 0 && hit_time >= leave_time) {
        next.action = Action::hit;
        next.changed = hit_row;
        next.boundary.push_back(hit_row);
        next.signs.push_back(hit_sign);
    } else {
        next.action = Action::leave;
        next.changed = st.boundary[static_cast<std::size_t>(leave_pos)];
        next.boundary.erase(next.boundary.begin() + leave_pos);
        next.signs.erase(next.signs.begin() + leave_pos);
    }
    tr.next = std::move(next);
    return tr;
}

/// One step of the dual path. Returns the new model, or nothing when the next knot is zero.
inline std::optional<ModelStep> advance(PathState& st, DualSegment* segment_out = nullptr)
{
    if (st.terminated) return std::nullopt;
    Transition tr = compute_transition(st);
    if (segment_out) *segment_out = tr.segment;
    if (!tr.next) {
        st.terminated = true;
        return std::nullopt;
    }
    st.boundary = tr.next->boundary;
    st.signs = tr.next->signs;
    st.lambda = tr.next->knot;
    return tr.next;
}

/// Runs the dual path algorithm until lambda = 0, degeneracy, or max_steps.
inline PathTrace run_path(const Vec& y, const PenaltyMatrix& D, const PathOptions& opts = {},
                          FactorCache* cache = nullptr)
{
    PathTrace trace;
    trace.y = y;
    trace.D = D;
    const Index max_steps = opts.max_steps > 0 ? opts.max_steps : std::min(D.rows(), 5 * D.cols());

    auto [first, st] = initial_step(y, D, opts, cache);
    const auto f0 = factor_for(D, {}, cache);
    DualSegment seg0;
    seg0.a = f0->pinv_transpose_apply(y);
    seg0.b = Vec::Zero(D.rows());
    seg0.lambda_hi = std::numeric_limits<double>::infinity();
    if (!first) {
        seg0.lambda_lo = 0.0;
        trace.segments.push_back(std::move(seg0));
        trace.termination = Termination::degenerate;
        return trace;
    }
    seg0.lambda_lo = first->knot;
    trace.segments.push_back(std::move(seg0));
    trace.steps.push_back(std::move(*first));

    while (true) {
        Transition tr = compute_transition(st);
        trace.segments.push_back(tr.segment);
        if (!tr.next) {
            trace.termination = Termination::zero_knot;
            break;
        }
        if (static_cast<Index>(trace.steps.size()) >= max_steps) {
            trace.termination = Termination::max_steps;
            break;
        }
        st.boundary = tr.next->boundary;
        st.signs = tr.next->signs;
        st.lambda = tr.next->knot;
        trace.steps.push_back(std::move(*tr.next));
    }
    return trace;
}

/// Dual solution u(lambda) from the recorded segments.
inline Vec dual_at(const PathTrace& trace, double lambda)
{
    if (lambda < 0) throw DimensionError("dual_at: negative lambda");
    for (const auto& seg : trace.segments)
        if (lambda >= seg.lambda_lo) return seg.a - lambda * seg.b;
    throw DimensionError("dual_at: lambda below the computed part of the path");
}

/// beta(lambda) = y - D^T u(lambda).
inline Vec primal_at(const PathTrace& trace, double lambda)
{
    const Vec u = dual_at(trace, lambda);
    return trace.y - trace.D.sparse().transpose() * u;
}

/// Index k of the step whose segment [lambda_{k+1}, lambda_k] contains lambda (0: lambda >= lambda_1).
inline std::size_t segment_index(const PathTrace& trace, double lambda)
{
    for (std::size_t k = 0; k < trace.segments.size(); ++k)
        if (lambda >= trace.segments[k].lambda_lo) return k;
    throw DimensionError("segment_index: lambda below the computed part of the path");
}

/// Projection form: P_null(D_{-B})(y - lambda D_B^T s_B), for lambda inside the segment of step k >= 1.
inline Vec primal_projection_form(const PathTrace& trace, std::size_t k, double lambda)
{
    const ModelStep& m = trace.step(k);
    const Mat DB = trace.D.rows_dense(m.boundary);
    Vec s(static_cast<Index>(m.signs.size()));
    for (std::size_t t = 0; t < m.signs.size(); ++t) s(static_cast<Index>(t)) = m.signs[t];
    const SubspaceFactor f(trace.D.rows_dense(trace.D.complement_rows(m.boundary)));
    return f.project_null(trace.y - lambda * (DB.transpose() * s));
}

/**
 * Max violation of the optimality conditions: beta = y - D^T u, |u_i| <= lambda,
 * and u_i = lambda * sign((D beta)_i) wherever |(D beta)_i| > tol.
 */
inline double kkt_check(const Vec& y, const PenaltyMatrix& D, double lambda, const Vec& beta, const Vec& u,
                        double tol = 1e-9)
{
    double worst = (beta - (y - D.sparse().transpose() * u)).cwiseAbs().maxCoeff();
    const Vec Db = D.apply(beta);
    for (Index i = 0; i < u.size(); ++i) {
        worst = std::max(worst, std::abs(u(i)) - lambda);
        if (std::abs(Db(i)) > tol) worst = std::max(worst, std::abs(u(i) - lambda * (Db(i) > 0 ? 1.0 : -1.0)));
    }
    return std::max(worst, 0.0);
}

} // namespace glinfer
