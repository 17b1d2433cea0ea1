#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <string_view>

#include "groklab/error.hpp"

namespace groklab {

namespace detail {

// SplitMix64 output function (Steele, Lea, Flood). Also used to mix seeds.
inline std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

} // namespace detail

// Deterministic per-consumer random stream. The stream state is a SplitMix64
// counter seeded from hash(master_seed, label), so changing one consumer's
// label or spec never perturbs the draws of any other consumer.
//
// Identical (seed, label) pairs replay the exact same sequence of draws.
class RngStream {
public:
    RngStream(std::uint64_t master_seed, std::string_view label)
        : state_(detail::mix64(master_seed ^ detail::mix64(detail::fnv1a64(label)))),
          seed_(master_seed),
          label_(label) {}

    std::uint64_t seed() const noexcept { return seed_; }
    const std::string& label() const noexcept { return label_; }

    std::uint64_t next_u64() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return detail::mix64(state_);
    }

    // Uniform in [0, 1) with 53 bits of precision.
    double next_unit() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_unit();
    }

    // Box-Muller transform on the uniform stream; the second variate of each
    // pair is cached so draws stay aligned with the uniform consumption.
    double normal(double mean, double stddev) {
        if (has_spare_) {
            has_spare_ = false;
            return mean + stddev * spare_;
        }
        const double u1 = 1.0 - next_unit(); // (0, 1], keeps log finite
        const double u2 = next_unit();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return mean + stddev * r * std::cos(theta);
    }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        if (n == 0) {
            fail(ErrorCode::InvalidArgument, "next_below: n must be positive");
        }
        // Rejection sampling over the largest multiple of n.
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        std::uint64_t x = next_u64();
        while (x >= limit) {
            x = next_u64();
        }
        return x % n;
    }

private:
    std::uint64_t state_;
    std::uint64_t seed_ = 0;
    std::string label_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

} // namespace groklab
