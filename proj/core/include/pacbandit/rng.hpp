#pragma once

#include <cstdint>
#include <random>

namespace pacbandit {

using Rng = std::mt19937_64;

std::uint64_t splitmix64(std::uint64_t x);

// Child seed for stream `tag` of `parent`. Streams are addressed by counter,
// so adding new tags never shifts the seeds of existing ones.
std::uint64_t derive_seed(std::uint64_t parent, std::uint64_t tag);

inline Rng make_rng(std::uint64_t seed) { return Rng(splitmix64(seed)); }

// Uniform double in [0,1) from the top 53 bits.
inline double uniform01(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

double standard_normal(Rng& rng);

}  // namespace pacbandit
