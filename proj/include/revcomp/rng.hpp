#pragma once

// Seeded sampling that gives the same sequence on every platform. Only the raw
// mt19937_64 output is used; std distributions are implementation-defined.

#include <cstdint>
#include <random>
#include <string_view>

namespace revcomp {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

// FNV-1a, used to give each check its own stream
inline std::uint64_t stream_id(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) h = (h ^ c) * 0x100000001b3ULL;
  return h;
}

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}
  // per-sample generator: independent of which thread runs the sample
  Rng(std::uint64_t seed, std::string_view stream, std::uint64_t index)
      : eng_(splitmix64(splitmix64(seed ^ stream_id(stream)) + index)) {}

  double uniform() { return static_cast<double>(eng_() >> 11) * 0x1.0p-53; }
  double uniform(double a, double b) { return a + (b - a) * uniform(); }
  std::uint64_t bits() { return eng_(); }

 private:
  std::mt19937_64 eng_;
};

}  // namespace revcomp
