#pragma once

#include <cstdint>
#include <random>

namespace mvq {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to decorrelate derived seeds.
constexpr std::uint64_t mix_seed(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// Seed of the stream owned by worker `index` (seed + worker index).
constexpr std::uint64_t worker_seed(std::uint64_t master, std::uint64_t index) {
  return master + index;
}

// Seed of trial `trial` at sweep grid point `point`.
constexpr std::uint64_t trial_seed(std::uint64_t master, std::uint64_t point,
                                   std::uint64_t trial) {
  return mix_seed(master ^ mix_seed((point << 32) ^ trial));
}

inline Rng make_rng(std::uint64_t seed) { return Rng(mix_seed(seed)); }

}  // namespace mvq
