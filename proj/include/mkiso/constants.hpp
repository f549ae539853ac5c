#pragma once

// Ball volumes and the closed-form constants of the isoperimetric bounds.

#include <cmath>
#include <numbers>

#include "mkiso/error.hpp"

namespace mkiso {

/// Volume of the unit ball in R^d, pi^{d/2} / Gamma(d/2 + 1). vol(B^0) = 1.
inline double ball_volume(int d) {
  if (d < 0) throw Error("ball_volume: negative dimension");
  return std::pow(std::numbers::pi, 0.5 * d) / std::tgamma(0.5 * d + 1.0);
}

/// Area of the unit sphere bounding B^d, d vol(B^d).
inline double sphere_area(int d) {
  if (d < 1) throw Error("sphere_area: need d >= 1");
  return d * ball_volume(d);
}

/// tau + sqrt(tau^2 - 1), the exponential of the rapidity with cosh = tau.
inline double slope_growth(double tau) {
  if (!(tau >= 1.0)) throw Error("slope_growth: tau must be >= 1");
  return tau + std::sqrt(tau * tau - 1.0);
}

/// Constant of the bound vol^{n-1} <= c (vol(boundary) + int sqrt(-<H,H>))^n
/// for codimension purely timelike (m = 0).
inline double thm1_constant(int n, int k, double tau) {
  if (k < 2) throw Unsupported("thm1_constant: needs k >= 2 (embed R^{n,1} into R^{n,2})");
  if (n < 1) throw Error("thm1_constant: needs n >= 1");
  return (static_cast<double>(n + k - 2) / n) * std::pow(slope_growth(tau), n + k - 2) /
         (std::pow(static_cast<double>(n), n) * ball_volume(n));
}

/// Constant of the bound for m >= 1 spacelike normal directions.
inline double thm2_constant(int n, int m, int k, double tau) {
  if (k < 2) throw Unsupported("thm2_constant: needs k >= 2 (embed R^{n,1} into R^{n,2})");
  if (m < 1) throw Error("thm2_constant: needs m >= 1");
  if (n < 1) throw Error("thm2_constant: needs n >= 1");
  return (static_cast<double>(n + m + k - 2) / (n + m)) * std::pow(slope_growth(tau), n + m + k - 2) *
         std::pow(tau * tau + 1.0, 0.5 * (k - 2)) / std::pow(tau, m + k - 2) * ball_volume(m) /
         (std::pow(static_cast<double>(n), n) * ball_volume(n + m));
}

/// Lower bound on lim eps^{-2} |D intersected with the shell -eps^2 < |xi|^2 < 0|:
/// k vol(B^k) vol(dB^{n+m}) / (2(n+m+k-2)) (c0 (tau - sqrt(tau^2-1)))^{n+m+k-2}.
inline double shell_measure_lower_bound(int n, int m, int k, double tau, double c0) {
  if (k < 2) throw Unsupported("shell_measure_lower_bound: needs k >= 2");
  const int p = n + m + k - 2;
  return k * ball_volume(k) * sphere_area(n + m) / (2.0 * p) * std::pow(c0 / slope_growth(tau), p);
}

}  // namespace mkiso
