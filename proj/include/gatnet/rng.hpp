#pragma once

#include <cstdint>
#include <cmath>
#include <vector>

namespace gatnet {

// Counter-based deterministic PRNG built on the SplitMix64 finalizer.
// Every output is a pure function of (seed, stream, counter), so identical
// (seed, stream, call sequence) produce identical values on every platform.
// Distinct stream ids give statistically independent sequences; each
// randomized operation in the library draws from its own stream so adding
// one op never shifts the draws of another.
struct RngState {
  uint64_t seed = 0;
  uint64_t stream = 0;
  uint64_t counter = 0;

  RngState() = default;
  RngState(uint64_t seed_, uint64_t stream_) : seed(seed_), stream(stream_) {}

  static uint64_t mix(uint64_t z) {
    z ^= z >> 30;
    z *= 0xBF58476D1CE4E5B9ULL;
    z ^= z >> 27;
    z *= 0x94D049BB133111EBULL;
    z ^= z >> 31;
    return z;
  }

  // Derive an independent stream without touching this one.
  RngState substream(uint64_t id) const {
    return RngState(seed, mix(stream + 0x9E3779B97F4A7C15ULL * (id + 1)));
  }

  uint64_t next_u64() {
    ++counter;
    return mix((seed ^ mix(stream)) + counter * 0x9E3779B97F4A7C15ULL);
  }

  // Uniform in [0, 1), 53 random bits.
  double next_double() { return double(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  // Standard normal via Box-Muller (two uniform draws per call).
  double normal() {
    double u1 = next_double();
    double u2 = next_double();
    while (u1 <= 0.0) u1 = next_double();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t below(uint64_t n) { return next_u64() % n; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = size_t(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }
};

}  // namespace gatnet
