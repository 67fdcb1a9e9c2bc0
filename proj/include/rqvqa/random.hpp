#pragma once

#include <cstdint>
#include <random>

namespace rqvqa {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to derive independent child seeds from a master
/// seed and a counter (split k of a run gets derive_seed(master, k)).
constexpr std::uint64_t derive_seed(std::uint64_t master, std::uint64_t counter) {
  std::uint64_t z = master + 0x9E3779B97F4A7C15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace rqvqa
