#pragma once

#include <cmath>
#include <cstdint>

namespace escnet {

// Deterministic 64-bit generator (splitmix64). Self-contained so that
// sampled values are bit-identical across platforms and standard library
// versions; std::*_distribution is implementation-defined and would break
// the reproducibility contract.
class RngStream {
public:
    explicit RngStream(uint64_t seed) : state_(seed) {}

    uint64_t next_u64() {
        uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1) with 53 bits of mantissa.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Log-uniform over [lo, hi], lo > 0.
    double log_uniform(double lo, double hi) {
        return std::exp(uniform(std::log(lo), std::log(hi)));
    }

    // Uniform integer in [0, n). Rejection-free is not needed here; the
    // slight modulo bias at n near 2^64 is irrelevant for our ranges,
    // but rejection keeps the draw exactly uniform anyway.
    uint64_t uniform_index(uint64_t n) {
        if (n == 0) return 0;
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Standard normal via Box-Muller, one value per call (pair cached).
    double normal() {
        if (have_cached_) {
            have_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        double u2 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(theta);
        have_cached_ = true;
        return r * std::cos(theta);
    }

    bool flip() { return (next_u64() & 1ULL) != 0; }

private:
    uint64_t state_;
    double cached_ = 0.0;
    bool have_cached_ = false;
};

// Derives an independent child seed from a base seed and a stream tag.
// Used to give every clip / fold / epoch its own generator.
inline uint64_t derive_seed(uint64_t base, uint64_t tag) {
    uint64_t z = base ^ (0x9E3779B97F4A7C15ULL * (tag + 0x632BE59BD9B4E019ULL));
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline uint64_t derive_seed(uint64_t base, uint64_t tag_a, uint64_t tag_b) {
    return derive_seed(derive_seed(base, tag_a), tag_b);
}

} // namespace escnet
