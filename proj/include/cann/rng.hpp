#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

namespace cann {

// All randomness in the library flows through these helpers. They map the
// raw mt19937_64 stream to values directly (instead of std::*_distribution,
// whose output is implementation-defined), so seeded runs produce the same
// bytes on every platform.
using Rng = std::mt19937_64;

/// Uniform double in [0, 1), 53-bit resolution.
inline double uniform_unit(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform double in [lo, hi).
inline double uniform_in(Rng& rng, double lo, double hi) {
    return lo + uniform_unit(rng) * (hi - lo);
}

/// Uniform integer in [0, n). Rejection sampling keeps it unbiased.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t draw;
    do {
        draw = rng();
    } while (draw >= limit);
    return draw % n;
}

/// Standard normal via Box-Muller on the pinned uniform stream.
inline double gaussian(Rng& rng) {
    double u1 = uniform_unit(rng);
    while (u1 == 0.0) u1 = uniform_unit(rng);
    const double u2 = uniform_unit(rng);
    constexpr double two_pi = 6.283185307179586476925286766559;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(two_pi * u2);
}

/// Fisher-Yates shuffle.
template <typename T>
void shuffle_in_place(std::vector<T>& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_index(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

inline std::vector<std::size_t> random_permutation(std::size_t n, Rng& rng) {
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    shuffle_in_place(perm, rng);
    return perm;
}

} // namespace cann
