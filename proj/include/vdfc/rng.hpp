#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace vdfc {

/// Deterministic random source with a fully specified sample path, so that
/// sequences reproduce bit-for-bit across platforms and standard libraries:
///   - engine: std::mt19937_64 (algorithm fixed by the C++ standard)
///   - uniform doubles: top 53 bits of one engine draw, scaled to [0,1)
///   - normals: Box-Muller, one pair per two uniforms, second value cached
///
/// std::normal_distribution is deliberately not used; its algorithm is
/// implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  /// Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  /// Uniform on [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal N(0, 1).
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = 1.0 - uniform();  // (0, 1], keeps log finite
    const double u2 = uniform();
    const double r = std::sqrt(-2.0 * std::log(u1));
    const double a = 2.0 * M_PI * u2;
    spare_ = r * std::sin(a);
    has_spare_ = true;
    return r * std::cos(a);
  }

  std::uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  double spare_ = 0.0;
  bool has_spare_ = false;
};

}  // namespace vdfc
