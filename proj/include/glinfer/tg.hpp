#pragma once
#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>
#include <glinfer/errors.hpp>
#include <glinfer/linalg.hpp>
#include <glinfer/polytope.hpp>

namespace glinfer {

enum class ContrastKind { spike, segment, graph_segment, reg_segment, custom };

inline const char* to_string(ContrastKind k)
{
    switch (k) {
        case ContrastKind::spike: return "spike";
        case ContrastKind::segment: return "segment";
        case ContrastKind::graph_segment: return "graph_segment";
        case ContrastKind::reg_segment: return "reg_segment";
        case ContrastKind::custom: return "custom";
    }
    return "custom";
}

struct Contrast {
    Vec v;
    ContrastKind kind = ContrastKind::custom;
    Index location = 0; // 1-based changepoint / knot / boundary row, 0 if none
    int sign = 1;
};

namespace normal {

inline constexpr double inv_sqrt2 = 0.70710678118654752440;
inline constexpr double log_sqrt_2pi = 0.91893853320467274178;

/// log(1 - Phi(z)).
inline double log_q(double z)
{
    if (z == std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
    if (z == -std::numeric_limits<double>::infinity()) return 0.0;
    if (z < -5.0) return std::log1p(-0.5 * std::erfc(-z * inv_sqrt2));
    if (z <= 8.0) return std::log(0.5 * std::erfc(z * inv_sqrt2));
    // Mills ratio continued fraction R(z) = 1/(z + 1/(z + 2/(z + 3/(z + ...)))).
    double t = z;
    for (int k = 80; k >= 1; --k) t = z + k / t;
    return -0.5 * z * z - log_sqrt_2pi - std::log(t);
}

inline double log_cdf(double z) { return log_q(-z); }

inline double cdf(double z) { return 0.5 * std::erfc(-z * inv_sqrt2); }

inline double sf(double z) { return 0.5 * std::erfc(z * inv_sqrt2); }

/// Phi(hi) - Phi(lo) for lo <= hi, accurate when lo < 0 < hi or in either tail.
inline double mass(double lo, double hi)
{
    if (!(lo < hi)) return 0.0;
    if (lo >= 0) return std::exp(log_q(lo)) * -std::expm1(log_q(hi) - log_q(lo));
    if (hi <= 0) return std::exp(log_cdf(hi)) * -std::expm1(log_cdf(lo) - log_cdf(hi));
    return 0.5 * (std::erf(hi * inv_sqrt2) + std::erf(-lo * inv_sqrt2));
}

} // namespace normal

/**
 * CDF at x of N(mu, sigma2) truncated to [a, b], evaluated with log-tail
 * ratios so that intervals far in either tail keep full relative precision.
 */
inline double tg_cdf(double x, double mu, double sigma2, double a, double b)
{
    if (!(sigma2 > 0)) throw DimensionError("tg_cdf: variance must be positive");
    if (!(a < b)) throw DimensionError("tg_cdf: need a < b");
    if (x <= a) return 0.0;
    if (x >= b) return 1.0;
    const double sd = std::sqrt(sigma2);
    const double za = (a - mu) / sd, zb = (b - mu) / sd, zx = (x - mu) / sd;
    double F;
    if (za >= 0) {
        const double la = normal::log_q(za);
        F = std::expm1(normal::log_q(zx) - la) / std::expm1(normal::log_q(zb) - la);
    } else if (zb <= 0) {
        const double lb = normal::log_cdf(zb), lx = normal::log_cdf(zx), la = normal::log_cdf(za);
        F = std::exp(lx - lb) * std::expm1(la - lx) / std::expm1(la - lb);
    } else {
        F = normal::mass(za, zx) / normal::mass(za, zb);
    }
    if (std::isnan(F)) throw NumericalError("tg_cdf: truncation interval has no representable mass");
    return std::clamp(F, 0.0, 1.0);
}

/// 1 - tg_cdf, computed by reflection so the upper tail keeps relative precision.
inline double tg_sf(double x, double mu, double sigma2, double a, double b)
{
    return tg_cdf(-x, -mu, sigma2, -b, -a);
}

struct TruncationLimits {
    double vlo = -std::numeric_limits<double>::infinity();
    double vup = std::numeric_limits<double>::infinity();
    double stat = 0.0;
};

/// Feasibility slack allowed before a point is rejected as outside the polyhedron.
inline constexpr double feasibility_tol = 1e-8;

inline TruncationLimits truncation_limits(const Polyhedron& P, const Vec& v, const Vec& y)
{
    if (v.size() != P.dim || y.size() != P.dim) throw DimensionError("truncation_limits: length mismatch");
    const double vv = v.squaredNorm();
    if (!(vv > 0)) throw DimensionError("truncation_limits: zero contrast");
    TruncationLimits out;
    out.stat = v.dot(y);
    if (P.rows() == 0) return out;
    const Vec slack = P.slack(y);
    const double scale = std::max(1.0, y.norm());
    if (slack.minCoeff() < -feasibility_tol * scale)
        throw InputError("truncation_limits: y violates the polyhedron by " + std::to_string(-slack.minCoeff()));
    const Vec rho = (P.gamma * v) / vv;
    const double rho_tol = 1e-12 / std::sqrt(vv);
    double lo_gap = std::numeric_limits<double>::infinity(), up_gap = std::numeric_limits<double>::infinity();
    for (Index j = 0; j < rho.size(); ++j) {
        const double sj = std::max(slack(j), 0.0);
        if (rho(j) > rho_tol) lo_gap = std::min(lo_gap, sj / rho(j));
        else if (rho(j) < -rho_tol) up_gap = std::min(up_gap, -sj / rho(j));
    }
    out.vlo = out.stat - lo_gap;
    out.vup = out.stat + up_gap;
    return out;
}

struct TGResult {
    double stat = 0.0;
    double vlo = 0.0;
    double vup = 0.0;
    double sd = 0.0;          // sigma * ||v||
    double p_one = std::numeric_limits<double>::quiet_NaN();
    double p_two = std::numeric_limits<double>::quiet_NaN();
    bool degenerate = false;  // vlo == vup, pivot undefined
    std::optional<double> ci_lo;
    std::optional<double> ci_hi;
    double alpha = std::numeric_limits<double>::quiet_NaN();
};

inline bool degenerate_interval(double vlo, double vup, double sd)
{
    return !(vup - vlo > 1e-12 * std::max({1.0, sd, std::isfinite(vlo) ? std::abs(vlo) : 0.0,
                                          std::isfinite(vup) ? std::abs(vup) : 0.0}));
}

/// T = 1 - F^{[vlo,vup]}_{mu, sigma^2 ||v||^2}(v^T y), with two-sided 2 min(T, 1 - T).
inline TGResult tg_pvalue(const Vec& v, const Vec& y, double sigma2, const Polyhedron& P, double mu = 0.0)
{
    if (!(sigma2 > 0)) throw DimensionError("tg_pvalue: variance must be positive");
    const TruncationLimits lim = truncation_limits(P, v, y);
    TGResult r;
    r.stat = lim.stat;
    r.vlo = lim.vlo;
    r.vup = lim.vup;
    r.sd = std::sqrt(sigma2 * v.squaredNorm());
    if (degenerate_interval(r.vlo, r.vup, r.sd)) {
        r.degenerate = true;
        return r;
    }
    const double tau2 = r.sd * r.sd;
    r.p_one = tg_sf(r.stat, mu, tau2, r.vlo, r.vup);
    r.p_two = std::min(1.0, 2.0 * std::min(r.p_one, 1.0 - r.p_one));
    return r;
}

namespace detail {

/// Solves G(delta) = target for increasing G by bracket expansion then bisection.
template <class G>
double invert_increasing(G&& g, double target, double start, double step, double tol)
{
    constexpr int max_expansions = 64;
    double lo = start - step, hi = start + step;
    double w = step;
    int e = 0;
    while (g(lo) > target) {
        if (++e > max_expansions) throw NumericalError("tg_interval: lower bracket expansion failed");
        w *= 2;
        lo = start - w;
    }
    w = step;
    e = 0;
    while (g(hi) < target) {
        if (++e > max_expansions) throw NumericalError("tg_interval: upper bracket expansion failed");
        w *= 2;
        hi = start + w;
    }
    for (int it = 0; it < 400 && hi - lo > tol; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (g(mid) < target) lo = mid;
        else hi = mid;
    }
    return 0.5 * (lo + hi);
}

} // namespace detail

/// Equal-tailed 1 - alpha interval for v^T theta by inverting the pivot in its mean.
inline TGResult tg_interval(const Vec& v, const Vec& y, double sigma2, const Polyhedron& P, double alpha)
{
    if (!(alpha > 0 && alpha < 1)) throw DimensionError("tg_interval: alpha must lie in (0,1)");
    TGResult r = tg_pvalue(v, y, sigma2, P);
    r.alpha = alpha;
    if (r.degenerate) return r;
    const double tau2 = r.sd * r.sd;
    auto G = [&](double delta) { return tg_sf(r.stat, delta, tau2, r.vlo, r.vup); };
    const double tol = 1e-8 * r.sd;
    r.ci_lo = detail::invert_increasing(G, alpha / 2, r.stat, 2 * r.sd, tol);
    r.ci_hi = detail::invert_increasing(G, 1 - alpha / 2, r.stat, 2 * r.sd, tol);
    return r;
}

} // namespace glinfer
