#pragma once

#include <cstdint>
#include <random>

namespace gratis {

using Rng = std::mt19937_64;

/// splitmix64 finalizer, used to derive independent child streams.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(mix64(master) ^ mix64(index + 0x632be59bd9b4e019ULL));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return derive_seed(derive_seed(master, a), b);
}

inline Rng make_rng(std::uint64_t seed) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)};
    return Rng(seq);
}

// The std distributions keep internal state (normal caches a second draw),
// so callers construct them locally instead of sharing.
inline double uniform01(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double std_normal(Rng& rng) {
    return std::normal_distribution<double>(0.0, 1.0)(rng);
}

inline int uniform_int(Rng& rng, int lo, int hi) {
    return std::uniform_int_distribution<int>(lo, hi)(rng);
}

}  // namespace gratis
