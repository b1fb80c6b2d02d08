#pragma once

#include <cmath>
#include <cstdint>

namespace grab {

// SplitMix64 (Steele, Lea & Flood). The whole stream is pinned by the seed
// and the code below, so runs are reproducible across platforms; the std
// distributions make no such promise.
class SplitMix64 {
 public:
  using result_type = std::uint64_t;

  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  static constexpr std::uint64_t min() { return 0; }
  static constexpr std::uint64_t max() { return ~0ull; }

 private:
  std::uint64_t state_;
};

// Derives an independent stream from a base seed plus up to two tags,
// e.g. (seed, epoch) or (seed, epoch, restart attempt).
inline std::uint64_t substream(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
  SplitMix64 g(seed ^ (a * 0xD1342543DE82EF95ull) ^ (b * 0x2545F4914F6CDD1Dull));
  std::uint64_t s = g();
  return s ^ g();
}

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(SplitMix64& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

// Uniform on {0, ..., n-1}, rejection sampled so every index is equally likely.
inline std::uint64_t uniform_index(SplitMix64& g, std::uint64_t n) {
  const std::uint64_t threshold = (0 - n) % n;  // 2^64 mod n
  for (;;) {
    const std::uint64_t r = g();
    if (r >= threshold) return r % n;
  }
}

inline double normal01(SplitMix64& g) {
  // Box-Muller, cosine branch only.
  double u1 = uniform01(g);
  while (u1 <= 0.0) u1 = uniform01(g);
  const double u2 = uniform01(g);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
}

}  // namespace grab
