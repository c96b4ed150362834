#pragma once

#include <cstdint>
#include <random>

namespace lorf {

using Rng = std::mt19937_64;

/// SplitMix64 finalizer; used to turn (seed, stream, index) triples into
/// well-separated engine seeds.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Named randomness streams. Every consumer of randomness derives its engine
/// from the master seed through one of these, so results never depend on
/// thread scheduling or on which other streams were used.
enum class Stream : std::uint64_t {
  kTree = 1,
  kReplication = 2,
  kImputeColumn = 3,
  kImputeDraw = 4,
  kImputeOrder = 5,
  kCentroids = 6,
  kDataTrain = 7,
  kDataTest = 8,
  kClassifier = 9,
  kTuning = 10,
};

constexpr std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                                    std::uint64_t index = 0) {
  return mix64(mix64(master ^ mix64(static_cast<std::uint64_t>(stream))) + index);
}

inline Rng make_rng(std::uint64_t master, Stream stream, std::uint64_t index = 0) {
  return Rng(derive_seed(master, stream, index));
}

/// Uniform draw on [0, 1) built from the top 53 bits, identical on every
/// standard library (std::uniform_real_distribution is not).
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Unbiased integer on [0, bound) by rejection; portable across libraries.
inline std::uint64_t uniform_index(Rng& rng, std::uint64_t bound) {
  const std::uint64_t limit = (~std::uint64_t{0}) - ((~std::uint64_t{0}) % bound);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % bound;
}

}  // namespace lorf
