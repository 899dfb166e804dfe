#pragma once

#include <cstdint>
#include <random>

namespace martkit {

using Rng = std::mt19937_64;

/// Seed splitting: replicate k of a study with root seed S uses seed S + k;
/// independent streams inside one work item are derived with stream_seed().
inline std::uint64_t replicate_seed(std::uint64_t root, std::uint64_t index) noexcept {
    return root + index;
}

/// splitmix64 finalizer of (seed, stream tag); decorrelates nearby seeds.
inline std::uint64_t stream_seed(std::uint64_t seed, std::uint64_t stream) noexcept {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

enum class Stream : std::uint64_t {
    NoiseFactors = 1,
    Innovations = 2,
    ThresholdSimulation = 3,
    Permutations = 4,
};

inline Rng make_rng(std::uint64_t seed, Stream stream) {
    return Rng(stream_seed(seed, static_cast<std::uint64_t>(stream)));
}

}  // namespace martkit
