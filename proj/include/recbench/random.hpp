#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>

namespace recbench {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stateless keyed hash of (seed, a, b) mapped to [0, 1). Used where a model
// needs a reproducible random value per (user, item) without mutable state.
inline double hash_unit(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
    std::uint64_t h = splitmix64(seed ^ splitmix64(a ^ splitmix64(b + 0x632be59bd9b4e019ULL)));
    return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// Standard normal draw keyed on (seed, a, b) via Box-Muller.
inline double hash_normal(std::uint64_t seed, std::uint64_t a, std::uint64_t b) noexcept {
    double u1 = hash_unit(seed, a, 2 * b);
    double u2 = hash_unit(seed, a, 2 * b + 1);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

inline double draw_unit(Rng& rng) noexcept {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

inline double draw_normal(Rng& rng, double mean = 0.0, double stddev = 1.0) noexcept {
    double u1 = draw_unit(rng);
    double u2 = draw_unit(rng);
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// Fisher-Yates shuffle driven by our own index draws so the permutation does
// not depend on the standard library's shuffle implementation.
template <class Vec>
void shuffle_in_place(Vec& v, Rng& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng() % i);
        using std::swap;
        swap(v[i - 1], v[j]);
    }
}

}  // namespace recbench
