#pragma once

#include <cstdint>

namespace harnacklab {

/// splitmix64: tiny, portable, byte-identical across platforms. Library
/// engines are avoided so seeded outputs stay reproducible everywhere.
struct Rng {
  std::uint64_t state;

  explicit Rng(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    state += 0x9E3779B97F4A7C15ull;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1).
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform double in (lo, hi].
  double uniform(double lo, double hi) { return hi - (hi - lo) * uniform(); }
};

}  // namespace harnacklab
