#pragma once

// Monte Carlo sweeps over an AbpContext: each runs one pointwise check at many
// random points and keeps the count of failures and the worst case. Sample i
// uses the stream (seed, i), so a sweep is reproducible and any single sample
// can be replayed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mkiso/abp.hpp"

namespace mkiso {

/// Analytic vs finite-difference det dPhi at random points of Omega.
struct JacobianSweep {
  int points = 0;
  int failures = 0;         // relative difference above tol
  double worst_rel = 0;     // |det - det_fd| / max(1, |det|)
  Vec worst_location;       // ambient position of x
  double min_det_in_A = std::numeric_limits<double>::infinity();
};

inline JacobianSweep jacobian_sweep(const AbpContext& ctx, int points, std::uint64_t seed, double tol = 1e-4) {
  JacobianSweep r;
  for (int i = 0; r.points < points && i < 20 * points; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    const auto sp = sample_omega_point(ctx, rng);
    if (!sp) continue;
    const auto& [d, p] = *sp;
    const double a = jacobian_det(ctx, d, p);
    const double rel = std::abs(a - jacobian_det_fd(ctx, d, p)) / std::max(1.0, std::abs(a));
    ++r.points;
    if (rel > tol) ++r.failures;
    if (rel >= r.worst_rel) {
      r.worst_rel = rel;
      r.worst_location = ctx.mesh_position(d.where);
    }
    if (classify(ctx, d, p).in_A.value_or(false)) r.min_det_in_A = std::min(r.min_det_in_A, a);
  }
  if (r.points < points) throw EstimateInconclusive("jacobian_sweep: could not sample enough points of Omega");
  return r;
}

/// The Jacobian bound 0 <= det <= ((c0 (c_f - f) - <H, y>) / n)^n at random points of A.
struct AmGmSweep {
  int points = 0;
  int violations = 0;
  double min_det = std::numeric_limits<double>::infinity();
  double min_scalar = std::numeric_limits<double>::infinity();
  double worst_excess = -std::numeric_limits<double>::infinity();  // max (det - bound)
  double max_gap = 0;                                              // max (bound - det), 0 at equality
  Vec worst_location;
};

inline AmGmSweep amgm_sweep(const AbpContext& ctx, int points, std::uint64_t seed, double tol = 1e-6) {
  AmGmSweep r;
  for (int i = 0; r.points < points && i < 50 * points; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    const auto sp = sample_omega_point(ctx, rng);
    if (!sp) continue;
    const auto& [d, p] = *sp;
    if (!classify(ctx, d, p).in_A.value_or(false)) continue;
    const AmGmCheck c = amgm_bound_check(ctx, d, p, tol);
    ++r.points;
    r.min_det = std::min(r.min_det, c.lhs);
    r.min_scalar = std::min(r.min_scalar, c.scalar);
    r.max_gap = std::max(r.max_gap, c.rhs - c.lhs);
    if (c.lhs - c.rhs > r.worst_excess) {
      r.worst_excess = c.lhs - c.rhs;
      r.worst_location = ctx.mesh_position(d.where);
    }
    if (!c.ok) ++r.violations;
  }
  if (r.points < points) throw EstimateInconclusive("amgm_sweep: could not sample enough points of A");
  return r;
}

/// Surjectivity onto D: minimizers of u - <x, xi> for random xi in D.
struct SurjectivitySweep {
  int targets = 0;
  int passed = 0;  // interior, in U, residual below tol, A-condition
  double worst_residual = 0;
  double min_hessian_eig = std::numeric_limits<double>::infinity();
  std::vector<Vec> failed;  // xi that did not pass
  std::vector<std::string> reasons;

  [[nodiscard]] double pass_rate() const { return targets ? static_cast<double>(passed) / targets : 0.0; }
};

inline SurjectivitySweep surjectivity_sweep(const AbpContext& ctx, const std::vector<Vec>& targets, double residual_tol = 1e-4) {
  SurjectivitySweep r;
  for (const Vec& xi : targets) {
    ++r.targets;
    try {
      const SurjectivityResult s = surjectivity_check(ctx, xi);
      r.worst_residual = std::max(r.worst_residual, s.residual);
      r.min_hessian_eig = std::min(r.min_hessian_eig, s.hessian_min_eig);
      std::string why;
      if (!s.interior) why = "minimizer on the boundary";
      else if (!s.in_U) why = "|grad u| >= c0 at the minimizer";
      else if (s.residual >= residual_tol) why = "residual " + std::to_string(s.residual);
      else if (!s.a_condition) why = "Hessian eigenvalue " + std::to_string(s.hessian_min_eig);
      if (why.empty()) {
        ++r.passed;
      } else {
        r.failed.push_back(xi);
        r.reasons.push_back(why);
      }
    } catch (const SurjectivityViolation& e) {
      r.failed.push_back(xi);
      r.reasons.push_back(e.what());
    }
  }
  return r;
}

inline std::vector<Vec> random_targets(const AbpContext& ctx, int count, std::uint64_t seed) {
  std::vector<Vec> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int i = 0; i < count; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    out.push_back(sample_in_D(ctx, rng));
  }
  return out;
}

/// <grad w, eta> on boundary faces for random xi in D, where w = u - <x, xi>.
struct FluxSweep {
  int targets = 0;
  int failures = 0;  // margin below -tol
  double min_margin = std::numeric_limits<double>::infinity();
};

inline FluxSweep flux_sweep(const AbpContext& ctx, int count, std::uint64_t seed) {
  FluxSweep r;
  const double tol = 1e-2 * ctx.c0();
  for (const Vec& xi : random_targets(ctx, count, seed)) {
    const double m = boundary_flux_margin(ctx, xi);
    ++r.targets;
    r.min_margin = std::min(r.min_margin, m);
    if (m <= -tol) ++r.failures;
  }
  return r;
}

/// Forward inclusion and region nesting at random normal-bundle points.
struct NestingSweep {
  int points = 0;
  int in_A = 0;
  int nesting_failures = 0;   // in_A without in_Omega, or in_Omega without in_U and in_D
  int inclusion_failures = 0; // point of A whose image is outside D
};

inline NestingSweep nesting_sweep(const AbpContext& ctx, int points, std::uint64_t seed) {
  NestingSweep r;
  for (int i = 0; i < points; ++i) {
    CounterRng rng(seed, static_cast<std::uint64_t>(i));
    const PointData d = ctx.evaluate(ctx.sample_point(rng));
    const double R = 2.0 * ctx.c0() * ctx.tau();
    const NormalPoint p = ctx.normal_point(d, rng.in_ball(ctx.m(), R), rng.in_ball(ctx.k(), R));
    const RegionFlags f = classify(ctx, d, p);
    ++r.points;
    if ((f.in_Omega && !(f.in_U && f.in_D)) || (f.in_A.value_or(false) && !f.in_Omega)) ++r.nesting_failures;
    if (f.in_A.value_or(false)) {
      ++r.in_A;
      if (!in_region_D(ctx, phi(d, p))) ++r.inclusion_failures;
    }
  }
  return r;
}

}  // namespace mkiso
