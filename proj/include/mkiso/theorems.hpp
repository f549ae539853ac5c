#pragma once

// Both sides of the isoperimetric bounds for spacelike surfaces, and the
// two-dimensional comparisons against the Euclidean and Fiala-Huber bounds.
//
//   m = 0:   vol^{n-1} <= c(n,k,tau)   (vol(dS) + int sqrt(-<H,H>))^n
//   m >= 1:  vol^{n-1} <= c(n,m,k,tau) (vol(dS) + int (a(tau)|pi_s H| + sqrt(tau^2+1)|pi_t H|))^n
//
// with a(tau) = (1 + sqrt(tau^4 - 1)) / tau. Reports carry the discrete (mesh)
// values that decide pass/fail, plus quadrature values of the same quantities
// on the parametric surface as an oracle.
//
// Geodesic disks are built in geodesic polar coordinates: geodesics from p
// with unit initial speed, integrated by RK4 together with their Jacobi field
// J = d/dphi. The boundary length at radius r is the integral of |J| over phi
// (trapezoid rule, spectrally accurate for the periodic integrand) and the
// area is the integral of that length in r (Simpson).

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "mkiso/constants.hpp"
#include "mkiso/error.hpp"
#include "mkiso/mesh.hpp"
#include "mkiso/neumann.hpp"
#include "mkiso/parametric.hpp"

namespace mkiso {

struct TheoremConstants {
  int n = 2, m = 0, k = 2;
  double tau = 1.0;
  std::optional<double> c_thm1;  // m = 0 only
  std::optional<double> c_thm2;  // m >= 1 only
};

inline TheoremConstants theorem_constants(int n, int m, int k, double tau) {
  if (k < 2) throw Unsupported("the bounds need k >= 2 (embed R^{n,1} into R^{n,2})");
  TheoremConstants c{n, m, k, tau, std::nullopt, std::nullopt};
  if (m == 0) c.c_thm1 = thm1_constant(n, k, tau);
  else c.c_thm2 = thm2_constant(n, m, k, tau);
  return c;
}

/// Coefficient of |pi_s H| in the m >= 1 density, written two ways.
inline double spatial_weight(double tau) { return (1.0 + std::sqrt(tau * tau * tau * tau - 1.0)) / tau; }
inline double spatial_weight_split(double tau) { return 1.0 / tau + std::sqrt(tau * tau - 1.0 / (tau * tau)); }

/// |a(tau) - (1/tau + sqrt(tau^2 - 1/tau^2))|.
inline double density_identity_residual(double tau) { return std::abs(spatial_weight(tau) - spatial_weight_split(tau)); }

struct CheckOptions {
  int res = 64;                 // mesh resolution
  double slack_constant = 0.5;  // resolution slack = slack_constant * h
  double curvature_tol = 1e-8;  // largest <H,H> accepted as timelike round-off (m = 0)
  QuadOptions quad{};           // quadrature of the oracle values
  bool oracle = true;           // also compute the quadrature values
};

struct InequalityReport {
  std::string surface;
  int theorem = 1;
  int n = 2, m = 0, k = 2;
  double tau = 1.0;
  TheoremConstants constants;
  int res = 0;
  double h = 0;      // max edge length / sqrt(vol)
  double vol = 0;    // mesh values
  double bvol = 0;
  double integral_f = 0;
  double lhs = 0;    // vol^{n-1}
  double rhs = 0;    // c (bvol + int f)^n
  double ratio = 0;  // lhs / rhs
  double slack = 0;  // slack_constant * h
  bool pass = false;
  double clamped = 0;            // largest <H,H> > 0 clamped to 0 (m = 0)
  double identity_residual = 0;  // m >= 1
  // quadrature oracle on the parametric surface
  std::optional<double> vol_quad, bvol_quad, integral_f_quad, ratio_quad;
  // n = 2 extras
  std::optional<double> total_K;
  std::optional<double> fiala_huber_rhs;
};

namespace detail {

inline bool is_disk_domain(const Domain& D) {
  if (D.is_box()) return false;
  const auto& a = D.annulus();
  return a.r0 == 0.0 && a.full_turn();
}

/// Per-point density for the report's theorem.
inline double report_density(const CurvatureData& c, int m, double tau) {
  return m == 0 ? thm1_density(c) : thm2_density(c, tau);
}

inline void finish_report(InequalityReport& r, const CheckOptions& opt) {
  r.theorem = r.m == 0 ? 1 : 2;
  r.constants = theorem_constants(r.n, r.m, r.k, r.tau);
  const double c = r.m == 0 ? *r.constants.c_thm1 : *r.constants.c_thm2;
  r.lhs = std::pow(r.vol, r.n - 1);
  r.rhs = c * std::pow(r.bvol + r.integral_f, r.n);
  r.ratio = r.lhs / r.rhs;
  r.slack = opt.slack_constant * r.h;
  r.pass = r.ratio <= 1.0 + r.slack;
  if (r.m > 0) r.identity_residual = density_identity_residual(r.tau);
}

inline void check_timelike_H(const std::vector<CurvatureData>& curv, double tol) {
  for (std::size_t v = 0; v < curv.size(); ++v) {
    if (curv[v].H_mink_sq > tol) {
      throw TimelikeHViolation("<H,H> = " + std::to_string(curv[v].H_mink_sq) + " > 0 at vertex " + std::to_string(v) +
                               "; the m = 0 bound needs timelike H");
    }
  }
}

}  // namespace detail

/// Report of the bound that applies to S (m = 0 or m >= 1), from a mesh at
/// opt.res with vertex curvature from the parametric jets.
inline InequalityReport check_theorem(const ParametricSurface& S, const CheckOptions& opt = {}) {
  InequalityReport r;
  r.surface = S.name();
  r.n = S.n();
  r.m = S.m();
  r.k = S.k();
  if (r.k < 2) throw Unsupported("the bounds need k >= 2 (embed R^{n,1} into R^{n,2})");
  r.res = opt.res;
  r.tau = slope_field(S).tau;
  const SurfaceMesh M = mesh_from_parametric(S, opt.res);
  const auto curv = vertex_curvature(M, S);
  if (r.m == 0) detail::check_timelike_H(curv, opt.curvature_tol);
  const Vec mass = M.lumped_mass();
  for (std::size_t v = 0; v < curv.size(); ++v) {
    r.integral_f += mass[static_cast<Eigen::Index>(v)] * detail::report_density(curv[v], r.m, r.tau);
    r.clamped = std::max(r.clamped, r.m == 0 ? curv[v].H_mink_sq : 0.0);
  }
  r.vol = M.volume();
  r.bvol = M.boundary_volume();
  r.h = M.max_edge_length() / std::sqrt(r.vol);
  detail::finish_report(r, opt);

  if (opt.oracle) {
    r.vol_quad = volume(S, opt.quad);
    r.bvol_quad = boundary_volume(S, opt.quad);
    r.integral_f_quad = integrate_over(
        S, [&](const Vec& s) { return detail::report_density(second_fundamental_form(S, s), r.m, r.tau); }, opt.quad);
    const double c = r.m == 0 ? *r.constants.c_thm1 : *r.constants.c_thm2;
    r.ratio_quad = std::pow(*r.vol_quad, r.n - 1) / (c * std::pow(*r.bvol_quad + *r.integral_f_quad, r.n));
    if (r.n == 2) {
      r.total_K = integrate_over(S, [&](const Vec& s) { return second_fundamental_form(S, s).gauss_K; }, opt.quad);
      const double denom = 4.0 * std::numbers::pi - 2.0 * *r.total_K;
      if (detail::is_disk_domain(S.domain()) && denom > 0) r.fiala_huber_rhs = *r.bvol_quad * *r.bvol_quad / denom;
    }
  }
  return r;
}

/// Report from a mesh alone: curvature from quadratic fits, slope per cell.
inline InequalityReport check_theorem(const SurfaceMesh& M, const CheckOptions& opt = {}, const std::string& name = "mesh") {
  InequalityReport r;
  r.surface = name;
  r.n = M.n();
  r.m = M.sig().space_dim - M.n();
  r.k = M.sig().time_dim;
  if (r.k < 2) throw Unsupported("the bounds need k >= 2 (embed R^{n,1} into R^{n,2})");
  r.tau = slope_field(M).tau;
  const auto curv = vertex_curvature(M);
  if (r.m == 0) detail::check_timelike_H(curv, opt.curvature_tol);
  const Vec mass = M.lumped_mass();
  for (std::size_t v = 0; v < curv.size(); ++v) {
    r.integral_f += mass[static_cast<Eigen::Index>(v)] * detail::report_density(curv[v], r.m, r.tau);
    r.clamped = std::max(r.clamped, r.m == 0 ? curv[v].H_mink_sq : 0.0);
  }
  r.vol = M.volume();
  r.bvol = M.boundary_volume();
  r.h = M.max_edge_length() / std::sqrt(r.vol);
  detail::finish_report(r, opt);
  return r;
}

/// The m = 0 bound; surfaces with spacelike normal directions go to check_thm2.
inline InequalityReport check_thm1(const ParametricSurface& S, const CheckOptions& opt = {}) {
  if (S.m() != 0) throw Unsupported("check_thm1: surface has m = " + std::to_string(S.m()) + " > 0, use check_thm2");
  return check_theorem(S, opt);
}

inline InequalityReport check_thm2(const ParametricSurface& S, const CheckOptions& opt = {}) {
  if (S.m() < 1) throw Unsupported("check_thm2: surface has m = 0, use check_thm1");
  return check_theorem(S, opt);
}

// ---------------------------------------------------------------------------
// Two-dimensional comparisons.

/// Area, boundary length and curvature integrals of a disk-type region.
struct DiskGeometry {
  int n = 2, m = 0, k = 2;
  double area = 0;
  double length = 0;
  double total_K = 0;
  double min_K = std::numeric_limits<double>::infinity();
  double integral_f = 0;  // density of the bound that applies (m = 0 or m >= 1) at this tau
  double tau = 1;
};

/// Quadrature geometry of a surface over a full parameter disk.
inline DiskGeometry disk_geometry(const ParametricSurface& S, const QuadOptions& q = {}) {
  if (S.n() != 2 || !detail::is_disk_domain(S.domain())) throw Unsupported("disk_geometry: needs a surface over a full disk");
  DiskGeometry g{S.n(), S.m(), S.k()};
  g.tau = slope_field(S).tau;
  g.area = volume(S, q);
  g.length = boundary_volume(S, q);
  for (const ParamSample& p : S.domain().quadrature(q.cells, q.order)) {
    const Jet j = S.jet(p.s);
    const CurvatureData c = curvature_from_jet(S.sig(), j);
    const double dv = p.weight * std::sqrt(metric::gram(S.sig(), j.d1).determinant());
    g.total_K += dv * c.gauss_K;
    g.min_K = std::min(g.min_K, c.gauss_K);
    g.integral_f += dv * detail::report_density(c, g.m, g.tau);
  }
  return g;
}

struct FialaHuberReport {
  double area = 0;
  double length = 0;
  double total_K = 0;
  double rhs_euclidean = 0;  // L^2 / (4 pi)
  double rhs_fh = 0;         // L^2 / (4 pi - 2 int K)
  double rhs_theorem = 0;    // c (L + int f)^2 with the constant that applies
  int theorem = 1;
  double tau = 1;
  bool exceeds_euclidean = false;  // area > L^2 / (4 pi)
  bool fh_holds = false;
  bool theorem_holds = false;
  bool fh_tighter = false;  // rhs_fh < rhs_theorem
};

inline FialaHuberReport fiala_huber_compare(const DiskGeometry& g, double k_tol = 1e-8) {
  if (g.n != 2) throw Unsupported("fiala_huber_compare: surfaces only (n = 2)");
  if (g.min_K < -k_tol) throw FHInapplicable("fiala_huber_compare: Gauss curvature " + std::to_string(g.min_K) + " < 0");
  const double denom = 4.0 * std::numbers::pi - 2.0 * g.total_K;
  if (denom <= 0) throw FHInapplicable("fiala_huber_compare: 2 int K = " + std::to_string(2 * g.total_K) + " >= 4 pi");
  FialaHuberReport r;
  r.area = g.area;
  r.length = g.length;
  r.total_K = g.total_K;
  r.tau = g.tau;
  r.rhs_euclidean = g.length * g.length / (4.0 * std::numbers::pi);
  r.rhs_fh = g.length * g.length / denom;
  const TheoremConstants c = theorem_constants(2, g.m, g.k, g.tau);
  r.theorem = g.m == 0 ? 1 : 2;
  r.rhs_theorem = (g.m == 0 ? *c.c_thm1 : *c.c_thm2) * std::pow(g.length + g.integral_f, 2);
  r.exceeds_euclidean = r.area > r.rhs_euclidean;
  r.fh_holds = r.area <= r.rhs_fh;
  r.theorem_holds = r.area <= r.rhs_theorem;
  r.fh_tighter = r.rhs_fh < r.rhs_theorem;
  return r;
}

inline FialaHuberReport fiala_huber_compare(const ParametricSurface& S, const QuadOptions& q = {}) {
  return fiala_huber_compare(disk_geometry(S, q));
}

// ---------------------------------------------------------------------------
// Geodesic polar coordinates.

struct GeodesicOptions {
  int angles = 64;         // geodesics per disk
  int steps = 128;         // RK4 steps per geodesic (rounded up to even)
  double fd_step = 1e-4;   // Christoffel derivative step, times the domain scale
};

namespace detail {

struct GeodesicState {
  Vec s, v, J, W;  // position, velocity, Jacobi field d/dphi and its derivative
};

/// d/dt of the geodesic and its Jacobi field:
///   s' = v,  v' = -Gamma(v, v),  J' = W,  W' = -(dGamma . J)(v, v) - 2 Gamma(v, W).
inline GeodesicState geodesic_rhs(const ParametricSurface& S, const GeodesicState& x, double h) {
  const int n = S.n();
  const auto G = christoffel(S.sig(), S.jet(x.s));
  GeodesicState d{x.v, Vec(n), x.W, Vec(n)};
  const double jn = x.J.norm();
  std::vector<Mat> dG(static_cast<std::size_t>(n), Mat::Zero(n, n));
  if (jn > 0) {
    const Vec dir = x.J / jn;
    const auto Gp = christoffel(S.sig(), S.jet(x.s + h * dir));
    const auto Gm = christoffel(S.sig(), S.jet(x.s - h * dir));
    for (int c = 0; c < n; ++c) {
      const auto cc = static_cast<std::size_t>(c);
      dG[cc] = (Gp[cc] - Gm[cc]) * (jn / (2.0 * h));
    }
  }
  for (int c = 0; c < n; ++c) {
    const auto cc = static_cast<std::size_t>(c);
    d.v[c] = -x.v.dot(G[cc] * x.v);
    d.W[c] = -x.v.dot(dG[cc] * x.v) - 2.0 * x.v.dot(G[cc] * x.W);
  }
  return d;
}

inline GeodesicState axpy(const GeodesicState& x, double a, const GeodesicState& d) {
  return {x.s + a * d.s, x.v + a * d.v, x.J + a * d.J, x.W + a * d.W};
}

}  // namespace detail

struct GeodesicDisk {
  double radius = 0;
  DiskGeometry geometry;
};

/// Geodesic disk of radius rho about the parameter point p.
inline GeodesicDisk geodesic_disk(const ParametricSurface& S, const Vec& p, double rho, const GeodesicOptions& opt = {}) {
  if (S.n() != 2) throw Unsupported("geodesic_disk: surfaces only (n = 2)");
  if (!(rho > 0)) throw Error("geodesic_disk: radius must be positive");
  if (S.domain().boundary_distance(p) <= 0) throw Error("geodesic_disk: centre is not interior");
  const int steps = opt.steps + opt.steps % 2;
  const double dt = rho / steps;
  const double h = opt.fd_step * S.domain().scale();
  const Mat g0 = induced_metric(S, p);
  // E^T g E = I
  const Mat E = Eigen::LLT<Mat>(g0).matrixL().solve(Mat::Identity(2, 2)).transpose();

  // per step node: sum over angles of |J|, K |J| and the density data
  std::vector<double> len(static_cast<std::size_t>(steps + 1), 0.0), kj(len), hs(len), ht(len), h1(len);
  double tau = 1.0, min_K = std::numeric_limits<double>::infinity();
  for (int a = 0; a < opt.angles; ++a) {
    const double phi = 2.0 * std::numbers::pi * a / opt.angles;
    detail::GeodesicState x{p, E * Vec{{std::cos(phi), std::sin(phi)}}, Vec::Zero(2),
                            E * Vec{{-std::sin(phi), std::cos(phi)}}};
    for (int i = 0; i <= steps; ++i) {
      if (i > 0) {
        const auto k1 = detail::geodesic_rhs(S, x, h);
        const auto k2 = detail::geodesic_rhs(S, detail::axpy(x, 0.5 * dt, k1), h);
        const auto k3 = detail::geodesic_rhs(S, detail::axpy(x, 0.5 * dt, k2), h);
        const auto k4 = detail::geodesic_rhs(S, detail::axpy(x, dt, k3), h);
        x = {x.s + dt / 6 * (k1.s + 2 * k2.s + 2 * k3.s + k4.s), x.v + dt / 6 * (k1.v + 2 * k2.v + 2 * k3.v + k4.v),
             x.J + dt / 6 * (k1.J + 2 * k2.J + 2 * k3.J + k4.J), x.W + dt / 6 * (k1.W + 2 * k2.W + 2 * k3.W + k4.W)};
        if (S.domain().boundary_distance(x.s) <= 0) {
          throw RadiusTooLarge("geodesic disk of radius " + std::to_string(rho) + " leaves the domain");
        }
      }
      const Jet j = S.jet(x.s);
      const Mat g = metric::gram(S.sig(), j.d1);
      const double jl = std::sqrt(std::max(0.0, x.J.dot(g * x.J)));
      const CurvatureData c = curvature_from_jet(S.sig(), j);
      const auto ii = static_cast<std::size_t>(i);
      len[ii] += jl;
      kj[ii] += c.gauss_K * jl;
      hs[ii] += c.H_s_norm * jl;
      ht[ii] += c.H_t_norm * jl;
      h1[ii] += thm1_density(c) * jl;
      min_K = std::min(min_K, c.gauss_K);
      tau = std::max(tau, slope(tangent_space(S.sig(), j)));
    }
  }
  const double dphi = 2.0 * std::numbers::pi / opt.angles;
  auto simpson = [&](const std::vector<double>& f) {
    double acc = f.front() + f.back();
    for (int i = 1; i < steps; ++i) acc += (i % 2 ? 4.0 : 2.0) * f[static_cast<std::size_t>(i)];
    return acc * dt / 3.0 * dphi;
  };
  GeodesicDisk d;
  d.radius = rho;
  DiskGeometry& G = d.geometry;
  G.n = 2;
  G.m = S.m();
  G.k = S.k();
  G.tau = tau;
  G.length = len.back() * dphi;
  G.area = simpson(len);
  G.total_K = simpson(kj);
  G.min_K = min_K;
  G.integral_f = G.m == 0 ? simpson(h1) : spatial_weight_split(tau) * simpson(hs) + std::sqrt(tau * tau + 1) * simpson(ht);
  return d;
}

struct GeodesicExpansion {
  Vec p;
  std::vector<double> radii;
  std::vector<double> ratio;  // 4 pi A / L^2 at each radius
  double coefficient = 0;     // c in 4 pi A / L^2 - 1 = c rho^2 + d rho^4
  double quartic = 0;         // d
  double gauss_K = 0;         // at p, from the metric alone
  double expected = 0;        // gauss_K / 4
  double rel_error = 0;       // |c - K/4| / |K/4|, or |c| when K = 0
};

/// Fit of the isoperimetric ratio of small geodesic disks about p against rho^2.
/// Default radii are {0.02, 0.04, ..., 0.1} times a length scale: the domain
/// scale, capped at five times a lower bound for the geodesic distance from p
/// to the boundary so the largest disk stays inside.
inline GeodesicExpansion geodesic_ball_expansion(const ParametricSurface& S, const Vec& p, std::vector<double> radii = {},
                                                 const GeodesicOptions& opt = {}) {
  if (radii.empty()) {
    const double stretch = std::sqrt(Eigen::SelfAdjointEigenSolver<Mat>(induced_metric(S, p)).eigenvalues().minCoeff());
    const double L = std::min(S.domain().scale(), 5.0 * stretch * S.domain().boundary_distance(p));
    for (int i = 1; i <= 5; ++i) radii.push_back(0.02 * i * L);
  }
  if (radii.size() < 2) throw Error("geodesic_ball_expansion: need at least two radii");
  GeodesicExpansion e;
  e.p = p;
  e.radii = radii;
  Mat X(static_cast<Eigen::Index>(radii.size()), 2);
  Vec y(static_cast<Eigen::Index>(radii.size()));
  for (std::size_t i = 0; i < radii.size(); ++i) {
    const DiskGeometry g = geodesic_disk(S, p, radii[i], opt).geometry;
    const double q = 4.0 * std::numbers::pi * g.area / (g.length * g.length);
    e.ratio.push_back(q);
    const double r2 = radii[i] * radii[i];
    const auto ii = static_cast<Eigen::Index>(i);
    X(ii, 0) = r2;
    X(ii, 1) = r2 * r2;
    y[ii] = q - 1.0;
  }
  // scale the columns so the least-squares problem is well conditioned
  const Vec colscale = X.colwise().norm().transpose();
  const Vec c = (X * colscale.cwiseInverse().asDiagonal()).colPivHouseholderQr().solve(y).cwiseQuotient(colscale);
  e.coefficient = c[0];
  e.quartic = c[1];
  e.gauss_K = gauss_curvature(S, p);
  e.expected = e.gauss_K / 4.0;
  e.rel_error = e.expected != 0.0 ? std::abs(e.coefficient - e.expected) / std::abs(e.expected) : std::abs(e.coefficient);
  return e;
}

}  // namespace mkiso
