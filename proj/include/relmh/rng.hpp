#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace relmh {

// Seedable RNG with named substreams. Substreams are derived so that changing
// how one consumer draws cannot perturb another consumer's sequence (the
// proposer and the accept/reject test get separate streams).
//
// All floating-point draws are built from raw 64-bit output, never from
// std::uniform_real_distribution, so sequences are identical across standard
// library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  static uint64_t mix(uint64_t seed, std::string_view stream) {
    // splitmix64 over seed xor FNV-1a of the stream label.
    uint64_t h = 1469598103934665603ull;
    for (char c : stream) {
      h ^= static_cast<unsigned char>(c);
      h *= 1099511628211ull;
    }
    uint64_t z = seed ^ h;
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  static Rng stream(uint64_t seed, std::string_view name) { return Rng(mix(seed, name)); }

  uint64_t next_u64() { return gen_(); }

  // Uniform on (0, 1]; log() of the result is always finite.
  double uniform() { return static_cast<double>((gen_() >> 11) + 1) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be positive.
  uint64_t below(uint64_t n) {
    // Rejection sampling to avoid modulo bias.
    uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = gen_();
    } while (x >= limit);
    return x % n;
  }

  int64_t range(int64_t lo, int64_t hi) {  // inclusive
    return lo + static_cast<int64_t>(below(static_cast<uint64_t>(hi - lo + 1)));
  }

  bool bernoulli(double p) { return uniform() <= p; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace relmh
