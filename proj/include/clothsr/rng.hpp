#pragma once

#include <cstdint>
#include <random>

namespace clothsr {

/// Deterministic uniform doubles from a 64-bit Mersenne Twister, with a fixed
/// integer-to-double conversion so streams match across standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace clothsr
