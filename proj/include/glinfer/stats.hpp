#pragma once
#include <algorithm>
#include <cmath>
#include <vector>
#include <boost/math/distributions/normal.hpp>
#include <glinfer/errors.hpp>

namespace glinfer {

inline double normal_quantile(double p)
{
    if (!(p > 0 && p < 1)) throw DimensionError("normal_quantile: p must lie in (0,1)");
    static const boost::math::normal_distribution<double> N;
    return boost::math::quantile(N, p);
}

/// P(K > x) for the Kolmogorov limiting distribution.
inline double kolmogorov_sf(double x)
{
    if (x <= 0) return 1.0;
    if (x < 1.18) {
        // Small-x form: sqrt(2 pi)/x sum exp(-(2k-1)^2 pi^2 / (8 x^2)).
        const double pi2 = M_PI * M_PI;
        double s = 0.0;
        for (int k = 1; k <= 20; ++k) s += std::exp(-(2.0 * k - 1) * (2.0 * k - 1) * pi2 / (8.0 * x * x));
        return std::clamp(1.0 - std::sqrt(2.0 * M_PI) / x * s, 0.0, 1.0);
    }
    double s = 0.0;
    for (int k = 1; k <= 100; ++k) {
        const double term = std::exp(-2.0 * k * k * x * x);
        s += (k % 2 ? 1.0 : -1.0) * term;
        if (term < 1e-300) break;
    }
    return std::clamp(2.0 * s, 0.0, 1.0);
}

struct KSResult {
    double statistic = 0.0; // sup |F_n - F|, or the one-sided sup when requested
    double pvalue = 1.0;
    std::size_t n = 0;
};

enum class KSSide { two_sided, greater };

/**
 * KS test of a sample against Unif[0,1]. `greater` measures sup (F_n(x) - x),
 * the departure that indicates values stochastically smaller than uniform.
 * p-values use the Kolmogorov limit with Stephens' finite-n correction.
 */
inline KSResult ks_uniform(std::vector<double> x, KSSide side = KSSide::two_sided)
{
    KSResult r;
    r.n = x.size();
    if (x.empty()) throw DimensionError("ks_uniform: empty sample");
    std::sort(x.begin(), x.end());
    const double n = static_cast<double>(x.size());
    double dplus = 0.0, dminus = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double u = std::clamp(x[i], 0.0, 1.0);
        dplus = std::max(dplus, (static_cast<double>(i) + 1) / n - u);
        dminus = std::max(dminus, u - static_cast<double>(i) / n);
    }
    const double sq = std::sqrt(n);
    if (side == KSSide::two_sided) {
        r.statistic = std::max(dplus, dminus);
        r.pvalue = kolmogorov_sf((sq + 0.12 + 0.11 / sq) * r.statistic);
    } else {
        r.statistic = dplus;
        const double t = (sq + 0.12 + 0.11 / sq) * r.statistic;
        r.pvalue = std::min(1.0, std::exp(-2.0 * t * t));
    }
    return r;
}

inline double mean(const std::vector<double>& x)
{
    if (x.empty()) return std::nan("");
    double s = 0.0;
    for (double v : x) s += v;
    return s / static_cast<double>(x.size());
}

/// Empirical quantile by linear interpolation between order statistics.
inline double quantile(std::vector<double> x, double p)
{
    if (x.empty()) throw DimensionError("quantile: empty sample");
    std::sort(x.begin(), x.end());
    const double h = p * static_cast<double>(x.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(h));
    const auto hi = std::min(lo + 1, x.size() - 1);
    return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

} // namespace glinfer
