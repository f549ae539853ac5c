#pragma once

// Randomized check of the projection bounds of a spacelike subspace L of
// R^{n+m,k}: for every v,
//   (1)  |pi_L v|     <= tau |pi_s v| + sqrt(tau^2 - 1) |pi_t v|
//   (2a) |pi_{N+} v|  <= |pi_s v|
//   (2b) |pi_{N-} v|  <= sqrt(tau^2 - 1) |pi_s v| + tau |pi_t v|
// and bound (1) is attained by the witness cos(phi) e_1^+ - sin(phi) e_1^-.
//
// Subspaces are drawn as graphs {(e, A e)} over a random n-plane E of the
// spatial slice, with A: E -> R^k of operator norm below `max_tilt`, so the
// slope 1 / sqrt(1 - |A|^2) ranges over [1, 1 / sqrt(1 - max_tilt^2)].

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <vector>

#include "mkiso/rng.hpp"
#include "mkiso/spacelike_linalg.hpp"

namespace mkiso {

struct LinearFuzzDims {
  int n = 2, m = 0, k = 2;
};

struct LinearFuzzOptions {
  int subspaces = 100;        // random L per signature
  int vectors = 250;          // random v per L
  double slack = 1e-9;        // allowed excess over each bound, relative to max(1, rhs)
  double witness_tol = 1e-6;  // |lhs1 - rhs1| at the witness, relative to max(1, rhs1)
  double max_tilt = 0.99;
  std::uint64_t seed = 1;
};

struct LinearFuzzResult {
  LinearFuzzDims dims;
  long checked = 0;
  long violations_1 = 0, violations_2a = 0, violations_2b = 0;
  int witnesses_found = 0;  // subspaces whose witness attains bound (1)
  int subspaces = 0;
  double worst_excess = -std::numeric_limits<double>::infinity();  // max (lhs - rhs) / max(1, rhs)
  double worst_witness_gap = 0;
  double worst_completeness = 0;
  double max_tau = 1;

  [[nodiscard]] long violations() const { return violations_1 + violations_2a + violations_2b; }
  [[nodiscard]] bool ok() const { return violations() == 0 && witnesses_found == subspaces; }
};

/// Basis of a random spacelike n-plane in R^{n+m,k}.
inline Mat random_spacelike_plane(const Signature& sig, int n, CounterRng& rng, double max_tilt) {
  const int N = sig.space_dim, k = sig.time_dim;
  Mat G(N, n);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < n; ++j) G(i, j) = rng.normal();
  const Mat Q = Eigen::HouseholderQR<Mat>(G).householderQ() * Mat::Identity(N, n);
  Mat A(k, n);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = rng.normal();
  if (k > 0 && A.norm() > 0) {
    const double top = Eigen::JacobiSVD<Mat>(A).singularValues()(0);
    A *= max_tilt * rng.uniform() / top;
  }
  Mat basis(N + k, n);
  basis.topRows(N) = Q;
  basis.bottomRows(k) = A;
  return basis;
}

inline LinearFuzzResult linear_bounds_fuzz(const LinearFuzzDims& dims, const LinearFuzzOptions& opt = {}) {
  if (dims.n < 1 || dims.m < 0 || dims.k < 0) throw Error("linear_bounds_fuzz: need n >= 1, m >= 0, k >= 0");
  const Signature sig(dims.n + dims.m, dims.k);
  LinearFuzzResult r;
  r.dims = dims;
  for (int l = 0; l < opt.subspaces; ++l) {
    CounterRng rng(opt.seed, static_cast<std::uint64_t>(l));
    const SpacelikeFrame fr = build_frame(SpacelikeSubspace(sig, random_spacelike_plane(sig, dims.n, rng, opt.max_tilt)));
    const NormalSplit ns = normal_split(fr);
    r.max_tau = std::max(r.max_tau, fr.tau);
    ++r.subspaces;
    for (int i = 0; i < opt.vectors; ++i) {
      Vec v(sig.dim());
      for (int a = 0; a < v.size(); ++a) v[a] = rng.normal();
      v *= std::exp(2.0 * rng.normal());
      const ProjectionBounds b = projection_bounds(fr, ns, v);
      ++r.checked;
      auto excess = [&](double lhs, double rhs) {
        const double e = (lhs - rhs) / std::max(1.0, rhs);
        r.worst_excess = std::max(r.worst_excess, e);
        return e > opt.slack;
      };
      r.violations_1 += excess(b.lhs1, b.rhs1) ? 1 : 0;
      r.violations_2a += excess(b.lhs2a, b.rhs2a) ? 1 : 0;
      r.violations_2b += excess(b.lhs2b, b.rhs2b) ? 1 : 0;
      r.worst_completeness = std::max(r.worst_completeness, b.completeness_residual / std::max(1.0, v.norm()));
    }
    // the witness has nonnegative coefficients on [0, pi/2]
    const double phi = 0.5 * std::numbers::pi * rng.uniform();
    const ProjectionBounds w = projection_bounds(fr, ns, sharpness_witness(fr, phi));
    const double gap = std::abs(w.lhs1 - w.rhs1) / std::max(1.0, w.rhs1);
    r.worst_witness_gap = std::max(r.worst_witness_gap, gap);
    r.witnesses_found += gap <= opt.witness_tol ? 1 : 0;
  }
  return r;
}

}  // namespace mkiso
