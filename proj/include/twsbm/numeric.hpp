#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace twsbm {

/// Thread-safe log|Gamma(x)|; std::lgamma writes the global signgam on glibc.
inline double log_gamma(double x) {
#if defined(__GLIBC__)
    int sign = 0;
    return ::lgamma_r(x, &sign);
#else
    return std::lgamma(x);
#endif
}

/// Number of unordered node pairs, n choose 2.
inline double pair_count(int n) { return 0.5 * static_cast<double>(n) * (n - 1); }

/// Seed for an independent sub-stream identified by (seed, a, b).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    std::uint32_t out[2];
    seq.generate(out, out + 2);
    return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

}  // namespace twsbm
