#pragma once

#include <cstdint>
#include <random>

namespace factorgibbs {

// Deterministic RNG wrapper. Doubles are produced directly from the mt19937_64
// bit stream ((x >> 11) * 2^-53) so sampled values are reproducible across
// standard library implementations; std::uniform_real_distribution is not.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : eng_(seed) {}

    double unit() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * unit(); }

    // Uniform integer in [0, n), n >= 1, via rejection on the top bits.
    std::uint64_t index(std::uint64_t n) {
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x;
        do { x = eng_(); } while (x >= limit);
        return x % n;
    }

private:
    std::mt19937_64 eng_;
};

} // namespace factorgibbs
