#pragma once
// Internal seeded-stream helpers. mt19937_64 output is standardized, so
// drawing bits directly keeps generated values identical across platforms.

#include <cstdint>
#include <random>
#include <string_view>

#include "meshfuse/encoder.hpp"

namespace meshfuse::rng {

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t stream_seed(std::uint64_t seed, std::string_view label) {
    return mix64(seed ^ fnv1a64(label));
}

inline double uniform01(std::mt19937_64& gen) {
    return static_cast<double>(gen() >> 11) * 0x1.0p-53;
}

// Uniform in [lo, hi).
inline double uniform(std::mt19937_64& gen, double lo, double hi) {
    return lo + uniform01(gen) * (hi - lo);
}

}  // namespace meshfuse::rng
