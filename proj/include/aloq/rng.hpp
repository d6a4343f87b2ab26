#pragma once

#include <cstdint>
#include <random>

namespace aloq {

using Rng = std::mt19937_64;

/// Derives an independent seed for a named purpose via splitmix64 on
/// (seed, stream), so that nearby seeds do not collide.
inline std::uint64_t substream_seed(std::uint64_t seed, std::uint64_t stream_id) {
  std::uint64_t z = seed + 0x9e3779b97f4a7c15ULL * (stream_id + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// Derives an independent seeded generator for a named purpose. Keeping one
/// stream per concern (initial design, env draws, hyper chain, ...) makes runs
/// reproducible even when individual consumers change how much randomness they
/// draw.
inline Rng substream(std::uint64_t seed, std::uint64_t stream_id) {
  return Rng(substream_seed(seed, stream_id));
}

inline double uniform01(Rng& rng) {
  return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline double normal01(Rng& rng) {
  return std::normal_distribution<double>(0.0, 1.0)(rng);
}

}  // namespace aloq
