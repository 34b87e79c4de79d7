#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>
#include <span>

namespace homoenc {

/// The one engine used everywhere. Distribution transforms on top of it are
/// written out in dists/sampling.hpp so streams are identical across standard
/// library implementations.
using Rng = std::mt19937_64;

/// Derives an independent stream from a root seed and a tuple of counters
/// (run, epoch, step, slot, ...).
inline Rng derive_rng(std::uint64_t seed, std::span<const std::uint64_t> path) {
  std::uint32_t words[32];
  std::size_t n = 0;
  words[n++] = static_cast<std::uint32_t>(seed);
  words[n++] = static_cast<std::uint32_t>(seed >> 32);
  for (auto p : path) {
    if (n + 2 > 32) break;
    words[n++] = static_cast<std::uint32_t>(p);
    words[n++] = static_cast<std::uint32_t>(p >> 32);
  }
  std::seed_seq s(words, words + n);
  return Rng(s);
}

inline Rng derive_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  return derive_rng(seed, std::span<const std::uint64_t>(path.begin(), path.size()));
}

/// Uniform double in [0, 1) with 53 random bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform integer in [0, n) by rejection; n > 0.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  std::uint64_t r;
  do {
    r = rng();
  } while (r >= limit);
  return r % n;
}

}  // namespace homoenc
