#pragma once

#include <cstdint>

namespace xpsim {

// Self-contained splitmix64 stream. The standard <random> distributions are
// implementation-defined, so everything that feeds simulation state or output
// goes through this to keep runs bit-reproducible across platforms.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : state_(seed) {}

  uint64_t next() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  // Uniform over [0, bound) via 128-bit multiply. bound must be nonzero.
  uint64_t bounded(uint64_t bound) {
    return (uint64_t)(((unsigned __int128)next() * bound) >> 64);
  }

  // Uniform over [lo, hi] inclusive.
  uint64_t range(uint64_t lo, uint64_t hi) { return lo + bounded(hi - lo + 1); }

  // Uniform in [0, 1) with 53 bits of randomness.
  double uniform01() { return (double)(next() >> 11) * 0x1.0p-53; }

  bool bernoulli(double p) { return uniform01() < p; }

 private:
  uint64_t state_;
};

// Stable stream derivation: children obtained from a master seed and a salt
// never collide across salts, so adding a thread or device does not perturb
// any other component's stream.
inline uint64_t derive_seed(uint64_t master, uint64_t salt) {
  uint64_t h = master ^ 0x2545f4914f6cdd1dULL;
  h ^= salt + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  Rng mix(h);
  return mix.next();
}

inline uint64_t hash_str(const char* s) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (; *s; s++) {
    h ^= (uint8_t)*s;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace xpsim
