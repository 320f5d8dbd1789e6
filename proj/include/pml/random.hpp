#pragma once

#include <cstdint>
#include <random>

namespace pml {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Independent stream for draw i of a seeded run.
inline std::mt19937_64 stream(std::uint64_t seed, std::uint64_t i) { return std::mt19937_64(splitmix64(seed ^ splitmix64(i))); }

/// Uniform on [0, 1) from the top 53 bits; unlike std distributions this is
/// the same on every standard library.
inline double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace pml
