#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

#include "mkiso/mink.hpp"

namespace mkiso {

/// Counter-based random stream: splitmix64 keyed by (seed, stream), so sample i
/// draws the same numbers however the samples are scheduled.
class CounterRng {
 public:
  CounterRng(std::uint64_t seed, std::uint64_t stream) : state_(mix(seed ^ mix(stream + 0x632BE59BD9B4E019ULL))) {}

  std::uint64_t next() {
    state_ += 0x9E3779B97F4A7C15ULL;
    return mix(state_);
  }
  /// Uniform on [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }
  /// Standard normal by Box-Muller.
  double normal() {
    const double u1 = 1.0 - uniform();
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
  }
  /// Uniform direction on the unit sphere of R^d.
  Vec direction(int d) {
    Vec v(d);
    do {
      for (int i = 0; i < d; ++i) v[i] = normal();
    } while (v.norm() < 1e-12);
    return v / v.norm();
  }
  /// Uniform point in the ball of radius r in R^d.
  Vec in_ball(int d, double r) {
    if (d == 0) return Vec::Zero(0);
    return direction(d) * (r * std::pow(uniform(), 1.0 / d));
  }

  static std::uint64_t mix(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

 private:
  std::uint64_t state_;
};

}  // namespace mkiso
