#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace tcrl {

// Deterministic RNG used everywhere seeded behavior is promised. The normal
// variate is generated by an explicit Box-Muller transform (two uniforms per
// draw, no cached spare) so the byte stream of any seeded artifact does not
// depend on the standard library's distribution internals.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  // Uniform in [0, 1).
  double uniform() {
    // 53 random bits -> double mantissa.
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n).
  int uniform_int(int n) {
    return static_cast<int>(engine_() % static_cast<uint64_t>(n));
  }

  double normal() {
    double u1 = uniform();
    double u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
  }

  double normal(double mean, double sigma) { return mean + sigma * normal(); }

  uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
};

}  // namespace tcrl
