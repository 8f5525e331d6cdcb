#pragma once

#include <cstdint>
#include <random>

namespace specswarm {

/// Finalizer-style 64-bit mixer; used to derive independent seed streams.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Derives a dedicated seed for a named sub-stream of a master seed.
inline std::uint64_t derive_stream(std::uint64_t seed, std::uint64_t salt) {
    return splitmix64(splitmix64(seed) ^ splitmix64(salt));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64{seed};
}

/// Uniform draw from [0, n). n must be nonzero.
inline std::size_t uniform_index(std::mt19937_64& rng, std::size_t n) {
    std::uniform_int_distribution<std::size_t> d{0, n - 1};
    return d(rng);
}

/// Uniform draw from [0, 1).
inline double uniform_real(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> d{0.0, 1.0};
    return d(rng);
}

} // namespace specswarm
