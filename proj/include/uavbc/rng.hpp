#pragma once

#include <cstdint>
#include <random>

namespace uavbc {

using Rng = std::mt19937_64;

// Stream identifiers. Each consumer of randomness owns one stream so that
// changing how often one consumer draws never shifts another's sequence.
enum class Stream : std::uint64_t {
  kArrivals = 1,
  kService = 2,
  kMobility = 3,
  kBattery = 4,
  kLayout = 5,
  kSplit = 6,
  kInit = 7,
  kShuffle = 8,
};

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Seed for (seed, run, stream); distinct triples give unrelated generators.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t run, Stream stream) {
  return splitmix64(splitmix64(splitmix64(seed) ^ run) ^ static_cast<std::uint64_t>(stream));
}

inline Rng make_stream(std::uint64_t seed, std::uint64_t run, Stream stream) {
  return Rng(derive_seed(seed, run, stream));
}

}  // namespace uavbc
