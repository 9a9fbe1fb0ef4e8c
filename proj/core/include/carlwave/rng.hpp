#pragma once

#include <cmath>
#include <cstdint>

namespace carlwave {

/// Counter-based generator: every draw is a pure hash of (seed, stream,
/// counter), so parallel schedules and replay order cannot change the values.
/// Streams give independent substreams for ensembles without coordination.
class CounterRng {
 public:
  CounterRng(uint64_t seed, uint64_t stream) : key_(mix(seed ^ mix(stream * 0x9E3779B97F4A7C15ull))) {}

  /// Uniform in [0,1) from the 53 high bits of the hashed counter.
  double uniform(uint64_t counter) const {
    return static_cast<double>(hash(counter) >> 11) * 0x1.0p-53;
  }

  /// Uniform in [lo, hi).
  double uniform(uint64_t counter, double lo, double hi) const {
    return lo + (hi - lo) * uniform(counter);
  }

  /// Standard normal via Box-Muller on counters (2k, 2k+1).
  double normal(uint64_t counter) const {
    const double u1 = uniform(2 * counter);
    const double u2 = uniform(2 * counter + 1);
    const double r = std::sqrt(-2.0 * std::log(u1 + 0x1.0p-60));
    return r * std::cos(6.283185307179586476925286766559 * u2);
  }

 private:
  static uint64_t mix(uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }
  uint64_t hash(uint64_t counter) const { return mix(key_ + counter * 0xD1342543DE82EF95ull); }

  uint64_t key_;
};

}  // namespace carlwave
