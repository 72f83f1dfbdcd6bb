#pragma once
#include <cstdint>
#include <boost/math/distributions/normal.hpp>
#include <glinfer/linalg.hpp>

namespace glinfer {

/**
 * Counter-based generator: draw t of stream s under seed k is
 * splitmix64(k * C1 ^ splitmix64(s * C2 + t)). Any (seed, stream, counter)
 * is reproducible on its own, so replications can run in any order.
 */
class CounterRng {
public:
    CounterRng(std::uint64_t seed, std::uint64_t stream) : key_(mix(seed * 0x9E3779B97F4A7C15ULL + 0x632BE59BD9B4E019ULL) ^ stream_key(stream)) {}

    static std::uint64_t mix(std::uint64_t z)
    {
        z += 0x9E3779B97F4A7C15ULL;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() { return mix(key_ ^ mix(counter_++ * 0xD6E8FEB86659FD93ULL)); }

    /// Uniform on the open interval (0, 1).
    double uniform() { return (static_cast<double>(next_u64() >> 11) + 0.5) * 0x1.0p-53; }

    double normal()
    {
        static const boost::math::normal_distribution<double> N;
        return boost::math::quantile(N, uniform());
    }

    Vec normal_vector(Index n, double sd = 1.0)
    {
        Vec z(n);
        for (Index i = 0; i < n; ++i) z(i) = sd * normal();
        return z;
    }

    std::uint64_t counter() const { return counter_; }

private:
    static std::uint64_t stream_key(std::uint64_t s) { return mix(s * 0xA0761D6478BD642FULL + 0xE7037ED1A0B428DBULL); }

    std::uint64_t key_;
    std::uint64_t counter_ = 0;
};

} // namespace glinfer
