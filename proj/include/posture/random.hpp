#pragma once

#include <cstdint>
#include <random>

namespace posture {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer. Used to turn (seed, index) pairs into independent
/// child seeds so that parallel work never shares a generator.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t index,
                                    std::uint64_t stream = 0) noexcept {
  return mix64(mix64(master ^ mix64(stream)) + index);
}

// Named streams so the same (master, index) never feeds two consumers.
namespace streams {
inline constexpr std::uint64_t params = 1;
inline constexpr std::uint64_t noise = 2;
inline constexpr std::uint64_t enrich = 3;
inline constexpr std::uint64_t shuffle = 4;
inline constexpr std::uint64_t init = 5;
inline constexpr std::uint64_t epoch = 6;
inline constexpr std::uint64_t search = 7;
} // namespace streams

} // namespace posture
