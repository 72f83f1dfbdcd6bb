#pragma once
#include <cmath>
#include <optional>
#include <string>
#include <vector>
#include <glinfer/errors.hpp>
#include <glinfer/linalg.hpp>
#include <glinfer/path.hpp>
#include <glinfer/polytope.hpp>

namespace glinfer {

enum class ICPenalty { aic, bic, ebic };

inline const char* to_string(ICPenalty p)
{
    switch (p) {
        case ICPenalty::aic: return "aic";
        case ICPenalty::bic: return "bic";
        case ICPenalty::ebic: return "ebic";
    }
    return "bic";
}

inline ICPenalty ic_penalty_from_string(const std::string& s)
{
    if (s == "aic") return ICPenalty::aic;
    if (s == "bic") return ICPenalty::bic;
    if (s == "ebic") return ICPenalty::ebic;
    throw InputError("unknown information criterion '" + s + "'");
}

struct ICConfig {
    ICPenalty penalty = ICPenalty::bic;
    int q = 2;
    double sigma2 = 1.0;
    double gamma = 0.5; // ebic only

    void validate() const
    {
        if (q < 1) throw InputError("ICConfig: q must be >= 1");
        if (sigma2 < 0) throw InputError("ICConfig: sigma^2 must be nonnegative");
        if (penalty == ICPenalty::ebic && !(gamma > 0 && gamma < 1)) throw InputError("ICConfig: ebic gamma must lie in (0,1)");
    }
};

inline double log_binomial(double n, double d) { return std::lgamma(n + 1) - std::lgamma(d + 1) - std::lgamma(n - d + 1); }

/// P_n(d) for n observations and d degrees of freedom.
inline double ic_penalty_value(const ICConfig& cfg, Index n, Index d)
{
    const double nn = static_cast<double>(n), dd = static_cast<double>(d);
    switch (cfg.penalty) {
        case ICPenalty::aic: return 2.0 * cfg.sigma2 * dd;
        case ICPenalty::bic: return cfg.sigma2 * dd * std::log(nn);
        case ICPenalty::ebic: return cfg.sigma2 * (dd * std::log(nn) + 2.0 * cfg.gamma * log_binomial(nn, std::min(dd, nn)));
    }
    return 0.0;
}

/// Null-space projector of D_{-B_k} for step k >= 1 of the trace.
inline Projector step_projector(const PathTrace& trace, std::size_t k, FactorCache* cache = nullptr)
{
    const ModelStep& m = trace.step(k);
    const auto f = factor_for(trace.D, m.boundary, cache);
    return {f->null_projector(), f->nullity()};
}

inline double ic_value(const Vec& y, const PathTrace& trace, std::size_t k, const ICConfig& cfg,
                       FactorCache* cache = nullptr)
{
    const Projector P = step_projector(trace, k, cache);
    const double fit = (y - P.matrix * y).squaredNorm();
    return fit + ic_penalty_value(cfg, trace.D.cols(), P.subspace_dim);
}

/// {1} plus every later step whose null space differs from the previous step's.
inline std::vector<std::size_t> candidate_steps(const PathTrace& trace, FactorCache* cache = nullptr)
{
    std::vector<std::size_t> out;
    if (trace.steps.empty()) return out;
    out.push_back(1);
    Mat prev = step_projector(trace, 1, cache).matrix;
    for (std::size_t k = 2; k <= trace.steps.size(); ++k) {
        Mat cur = step_projector(trace, k, cache).matrix;
        if ((cur - prev).cwiseAbs().maxCoeff() > 1e-10) out.push_back(k);
        prev = std::move(cur);
    }
    return out;
}

struct ICTrace {
    std::vector<std::size_t> candidates; // k_1 < k_2 < ...
    std::vector<Index> nullities;
    std::vector<double> values;          // J at each candidate
    std::vector<int> rises;              // +1 if J_{j+1} >= J_j else -1, size = candidates - 1
    std::optional<std::size_t> chosen;   // position j (0-based) in candidates
    int q = 2;

    std::optional<std::size_t> chosen_step() const
    {
        if (!chosen) return std::nullopt;
        return candidates[*chosen];
    }

    /// Last path step the decision depends on: k_{j+q}.
    std::optional<std::size_t> decisive_step() const
    {
        if (!chosen) return std::nullopt;
        return candidates[*chosen + static_cast<std::size_t>(q)];
    }
};

/// First index j with q successive rises after it (within the precomputed J values).
inline std::optional<std::size_t> q_rise_rule(const std::vector<double>& J, int q)
{
    if (q < 1) throw InputError("q_rise_rule: q must be >= 1");
    const std::size_t qq = static_cast<std::size_t>(q);
    for (std::size_t j = 0; j + qq < J.size(); ++j) {
        bool ok = true;
        for (std::size_t t = j; t < j + qq && ok; ++t) ok = J[t + 1] >= J[t];
        if (ok) return j;
    }
    return std::nullopt;
}

inline ICTrace stop_rule(const Vec& y, const PathTrace& trace, const ICConfig& cfg, FactorCache* cache = nullptr)
{
    cfg.validate();
    ICTrace out;
    out.q = cfg.q;
    out.candidates = candidate_steps(trace, cache);
    for (std::size_t k : out.candidates) {
        const Projector P = step_projector(trace, k, cache);
        out.nullities.push_back(P.subspace_dim);
        out.values.push_back((y - P.matrix * y).squaredNorm() + ic_penalty_value(cfg, trace.D.cols(), P.subspace_dim));
    }
    for (std::size_t j = 0; j + 1 < out.values.size(); ++j)
        out.rises.push_back(out.values[j + 1] >= out.values[j] ? 1 : -1);
    out.chosen = q_rise_rule(out.values, cfg.q);
    return out;
}

/// One IC comparison, J_{l+1} - J_l = sign_term * (a^T y)^2 + penalty difference.
struct ICComparison {
    Vec a;             // unit vector spanning the projector difference
    double b = 0.0;    // |P_n(d_{l+1}) - P_n(d_l)|
    bool nullity_up = true;
    int rise = 1;
    int observed_sign = 1; // sign(a^T y), used when the event is a union of two half-spaces
    bool linearized = false;
};

/**
 * Rows encoding the first j+q-1 comparisons of the stopping rule. A rise with
 * nullity increasing is |a^T y| <= sqrt(b) (two rows); a fall is
 * |a^T y| > sqrt(b), which is linearized by also fixing sign(a^T y). When the
 * nullity decreases the roles of rise and fall swap.
 */
inline Polyhedron ic_polyhedron(const Vec& y, const PathTrace& trace, const ICConfig& cfg, const ICTrace& ict,
                                std::vector<ICComparison>* comparisons = nullptr, FactorCache* cache = nullptr)
{
    if (!ict.chosen) throw InputError("ic_polyhedron: stopping rule did not select a step");
    const Index n = trace.D.cols();
    const std::size_t upto = *ict.chosen + static_cast<std::size_t>(ict.q); // comparisons 0..upto-1
    RowSink sink(n);
    for (std::size_t l = 0; l < upto; ++l) {
        const Projector P0 = step_projector(trace, ict.candidates[l], cache);
        const Projector P1 = step_projector(trace, ict.candidates[l + 1], cache);
        const Index dd = P1.subspace_dim - P0.subspace_dim;
        if (dd != 1 && dd != -1)
            throw NumericalError("ic_polyhedron: candidate null spaces differ by dimension " + std::to_string(dd) +
                                 ", expected 1");
        ICComparison c;
        c.nullity_up = dd == 1;
        c.a = c.nullity_up ? rank1_projector_difference(P1.matrix, P0.matrix)
                           : rank1_projector_difference(P0.matrix, P1.matrix);
        c.b = std::abs(ic_penalty_value(cfg, n, P1.subspace_dim) - ic_penalty_value(cfg, n, P0.subspace_dim));
        c.rise = ict.rises[l];
        const double ay = c.a.dot(y);
        c.observed_sign = ay >= 0 ? 1 : -1;
        const double rb = std::sqrt(c.b);
        const bool inside = c.nullity_up == (c.rise == 1); // |a^T y| <= sqrt(b)
        const int tag = static_cast<int>(l + 1);
        if (inside) {
            sink.add(-c.a, -rb, tag, RowFamily::ic_pair);
            sink.add(c.a, -rb, tag, RowFamily::ic_pair);
        } else {
            c.linearized = true;
            sink.add(c.observed_sign * c.a, rb, tag, RowFamily::ic_pair);
        }
        if (comparisons) comparisons->push_back(std::move(c));
    }
    Polyhedron P = empty_polyhedron(n);
    sink.append_to(P);
    return P;
}

} // namespace glinfer
