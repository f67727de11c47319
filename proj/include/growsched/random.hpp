#ifndef GROWSCHED_RANDOM_HPP
#define GROWSCHED_RANDOM_HPP

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <random>
#include <vector>

namespace growsched {

// std::*_distribution output is implementation-defined; these helpers keep
// every generated byte a function of the seed alone.

using Rng = std::mt19937_64;

/// SplitMix64 finalizer, used to derive independent sub-seeds.
constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream) {
    std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// Uniform in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform in [0, n). Rejection sampling removes modulo bias.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
    if (n <= 1) return 0;
    const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() - std::numeric_limits<std::uint64_t>::max() % n;
    std::uint64_t draw = rng();
    while (draw >= limit) draw = rng();
    return draw % n;
}

inline double uniform_real(Rng& rng, double lo, double hi) {
    return lo + (hi - lo) * uniform01(rng);
}

inline bool bernoulli(Rng& rng, double p) {
    return uniform01(rng) < p;
}

inline double exponential(Rng& rng, double mean) {
    return -mean * std::log1p(-uniform01(rng));
}

/// Index drawn proportionally to non-negative weights.
inline std::size_t weighted_index(Rng& rng, const std::vector<double>& weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    double target = uniform01(rng) * total;
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (target < weights[i]) return i;
        target -= weights[i];
    }
    return weights.empty() ? 0 : weights.size() - 1;
}

/// Fisher-Yates.
template <typename T>
void shuffle_in_place(std::vector<T>& items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const std::size_t j = uniform_index(rng, i);
        std::swap(items[i - 1], items[j]);
    }
}

}  // namespace growsched

#endif  // GROWSCHED_RANDOM_HPP
