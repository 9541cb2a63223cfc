#pragma once
// Seed derivation for independent, index-addressed random streams. Every
// stochastic step takes its own derived seed, so results do not depend on the
// order in which work items run.

#include <cstdint>
#include <random>

namespace mpt {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream, std::uint64_t index = 0) noexcept {
    return mix64(mix64(mix64(seed) ^ stream) ^ index);
}

// Stream tags. Values are arbitrary but fixed forever: changing one changes
// every generated dataset.
namespace stream {
inline constexpr std::uint64_t kVariations = 0x11;
inline constexpr std::uint64_t kNoise = 0x22;
inline constexpr std::uint64_t kTestNoise = 0x23;
inline constexpr std::uint64_t kSplit = 0x33;
inline constexpr std::uint64_t kMccv = 0x44;
inline constexpr std::uint64_t kModel = 0x55;
inline constexpr std::uint64_t kTrainset = 0x66;
inline constexpr std::uint64_t kEvaluation = 0x77;
}  // namespace stream

}  // namespace mpt
