#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rae {

using Rng = std::mt19937_64;

// SplitMix64 finalizer.
inline constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream seed for (base, tag...). Streams with different tags do not overlap in
/// practice, so adding a consumer of randomness never perturbs another stream.
inline std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> tags) {
  std::uint64_t s = mix64(base);
  for (auto t : tags) s = mix64(s ^ mix64(t + 0x632be59bd9b4e019ULL));
  return s;
}

namespace stream {
inline constexpr std::uint64_t kEncoder = 1;
inline constexpr std::uint64_t kDecoder = 2;
inline constexpr std::uint64_t kAdversary = 3;
inline constexpr std::uint64_t kNuisance = 4;
inline constexpr std::uint64_t kClassifier = 5;
inline constexpr std::uint64_t kShuffle = 6;
inline constexpr std::uint64_t kMasks = 7;
inline constexpr std::uint64_t kSplit = 8;
inline constexpr std::uint64_t kModel = 9;
inline constexpr std::uint64_t kSubsample = 10;
inline constexpr std::uint64_t kSynthetic = 11;
}  // namespace stream

}  // namespace rae
