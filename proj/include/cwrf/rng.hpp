#pragma once

#include <cstddef>
#include <cstdint>
#include <random>

namespace cwrf {

using Rng = std::mt19937_64;

// SplitMix64 finalizer. Used to derive statistically independent seeds from a
// master seed so that every stream (per tree, per pass, per repeat, per query)
// is reproducible in isolation.
constexpr std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag,
                                    std::uint64_t index = 0) {
  return mix64(mix64(mix64(master) ^ tag) + index);
}

// Stream tags. Distinct values keep derived streams disjoint.
namespace stream {
inline constexpr std::uint64_t kSplit = 0x11;
inline constexpr std::uint64_t kTree = 0x21;
inline constexpr std::uint64_t kBootstrap = 0x22;
inline constexpr std::uint64_t kWrfPass1 = 0x31;
inline constexpr std::uint64_t kWrfPass2 = 0x32;
inline constexpr std::uint64_t kCluster = 0x41;
inline constexpr std::uint64_t kSelect = 0x42;
inline constexpr std::uint64_t kKnowledge = 0x51;
inline constexpr std::uint64_t kProbe = 0x52;
inline constexpr std::uint64_t kOracle = 0x53;
inline constexpr std::uint64_t kRepeat = 0x61;
inline constexpr std::uint64_t kEvaluate = 0x62;
}  // namespace stream

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
  return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

}  // namespace cwrf
