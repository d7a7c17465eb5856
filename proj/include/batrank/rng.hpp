#pragma once

// Counter-derived random streams.
//
// Every random draw in a chain comes from a stream keyed by
// (seed, iteration, block, element). Nothing random is carried between
// iterations, so a chain is reproducible regardless of thread count and
// a resumed chain only needs (seed, next iteration) to continue exactly.

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <limits>
#include <random>

namespace batrank {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// xoshiro256** (Blackman & Vigna), usable as a std UniformRandomBitGenerator.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed = 0) { reseed(seed); }

    // Stream keyed by a seed and any number of integer labels.
    static Rng stream(std::uint64_t seed, std::initializer_list<std::uint64_t> labels) {
        std::uint64_t h = splitmix64(seed);
        for (auto l : labels) {
            h = splitmix64(h ^ splitmix64(l + 0x632be59bd9b4e019ULL));
        }
        return Rng(h);
    }

    void reseed(std::uint64_t seed) {
        std::uint64_t x = seed;
        for (auto& w : s_) {
            x += 0x9e3779b97f4a7c15ULL;
            w = splitmix64(x);
        }
    }

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    result_type operator()() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on the open interval (0, 1).
    double uniform() {
        return (static_cast<double>((*this)() >> 11) + 0.5) * 0x1.0p-53;
    }

    double normal() { return normal_(*this); }
    double normal(double mean, double sd) { return mean + sd * normal(); }

    // Gamma with the given shape and scale.
    double gamma(double shape, double scale) {
        return std::gamma_distribution<double>(shape, scale)(*this);
    }

    // Inverse gamma IG(a, b) with density proportional to x^{-a-1} exp(-b/x).
    double inv_gamma(double a, double b) { return 1.0 / gamma(a, 1.0 / b); }

    std::int64_t poisson(double mean) {
        if (!(mean > 0.0)) return 0;
        return std::poisson_distribution<std::int64_t>(mean)(*this);
    }

    bool bernoulli(double p) { return uniform() < p; }

    double beta(double a, double b) {
        const double x = gamma(a, 1.0);
        const double y = gamma(b, 1.0);
        return x / (x + y);
    }

private:
    static constexpr std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t s_[4]{};
    std::normal_distribution<double> normal_{0.0, 1.0};
};

}  // namespace batrank
