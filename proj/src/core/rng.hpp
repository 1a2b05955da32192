#pragma once

#include <cstdint>

#include "lattice.hpp"

namespace heatlab {

// SplitMix64 finalizer: a bijective 64-bit mixer.
constexpr std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

constexpr std::uint64_t hash_combine(std::uint64_t h, std::uint64_t v) { return mix64(h ^ mix64(v)); }

// Uniform double in (0, 1] from the top 53 bits.
constexpr double to_unit_open(std::uint64_t bits) {
  return (static_cast<double>(bits >> 11) + 1.0) * 0x1.0p-53;
}

// Uniform double in [0, 1).
constexpr double to_unit(std::uint64_t bits) { return static_cast<double>(bits >> 11) * 0x1.0p-53; }

inline double counter_uniform_open(std::uint64_t seed, const Point& site, std::uint64_t channel) {
  std::uint64_t h = mix64(seed);
  for (int i = 0; i < kMaxDim; ++i) h = hash_combine(h, static_cast<std::uint64_t>(site[i]));
  return to_unit_open(hash_combine(h, channel));
}

// Counter-based stream: the n-th draw is a pure function of
// (seed, stream, path, n), so results do not depend on scheduling.
class CounterStream {
public:
  CounterStream(std::uint64_t seed, std::uint64_t stream, std::uint64_t path)
      : key_(hash_combine(hash_combine(mix64(seed), stream), path)) {}

  std::uint64_t next_bits() { return mix64(key_ ^ (0xd1b54a32d192ed03ULL * ++counter_)); }
  double uniform() { return to_unit(next_bits()); }

private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace heatlab
