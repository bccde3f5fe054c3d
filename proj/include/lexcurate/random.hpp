#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string_view>
#include <utility>

#include "lexcurate/hash.hpp"

namespace lexcurate {

/// Engine used wherever a seeded, reproducible draw is required.
using Rng = std::mt19937_64;

/// Uniform integer in [0, bound) by rejection sampling on raw engine output.
/// Unlike std::uniform_int_distribution the sequence is identical across
/// standard library implementations.
inline std::uint64_t uniform_below(Rng& rng, std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t limit = Rng::max() - (Rng::max() % bound + 1) % bound;
    for (;;) {
        const std::uint64_t x = rng();
        if (x <= limit) return x % bound;
    }
}

/// Uniform double in [0, 1) from the top 53 bits.
inline double uniform_unit(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

/// Fisher-Yates shuffle driven by uniform_below.
template <typename T>
void shuffle(std::span<T> items, Rng& rng) {
    for (std::size_t i = items.size(); i > 1; --i) {
        const auto j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(items[i - 1], items[j]);
    }
}

/// Independent stream seed for a named sub-task of a seeded run.
inline std::uint64_t derive_seed(std::uint64_t seed, std::string_view label) {
    return hash_combine(mix64(seed), hash64(label));
}

}  // namespace lexcurate
