#pragma once

#include <cstdint>
#include <random>
#include <vector>

namespace rblb::rng {

/// splitmix64 finalizer; used to derive independent stream seeds from
/// (base seed, step, item) style tuples.
inline std::uint64_t splitmix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

inline std::uint64_t mix(std::uint64_t a, std::uint64_t b) {
  return splitmix(a ^ (splitmix(b) + 0x9e3779b97f4a7c15ULL));
}

inline std::mt19937_64 engine(std::uint64_t seed) { return std::mt19937_64(seed); }

inline std::vector<float> normal(std::mt19937_64& eng, std::size_t count, float mean,
                                 float stddev) {
  std::normal_distribution<float> dist(mean, stddev);
  std::vector<float> out(count);
  for (auto& v : out) v = dist(eng);
  return out;
}

}  // namespace rblb::rng
