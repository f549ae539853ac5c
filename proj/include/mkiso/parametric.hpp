#pragma once

// Smooth backend: an immersion F from a parameter domain into R^{n+m,k},
// evaluated together with its first and second partial derivatives.

#include <Eigen/Dense>

#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "mkiso/domain.hpp"
#include "mkiso/error.hpp"
#include "mkiso/mink.hpp"
#include "mkiso/spacelike_linalg.hpp"

namespace mkiso {

/// Position and partial derivatives of an immersion at one parameter point.
struct Jet {
  Vec x;                // ambient position
  Mat d1;               // dim x n, column a = dF/ds_a
  std::vector<Vec> d2;  // n*n entries, d2[a*n+b] = d^2F/ds_a ds_b

  [[nodiscard]] int n() const { return static_cast<int>(d1.cols()); }
  [[nodiscard]] const Vec& dd(int a, int b) const { return d2[static_cast<std::size_t>(a * n() + b)]; }
};

using Immersion = std::function<Jet(const Vec&)>;
using PositionMap = std::function<Vec(const Vec&)>;

/// Central-difference jet of a position-only map. First derivatives use
/// step h1, second derivatives the larger step h2 to limit cancellation.
inline Jet finite_difference_jet(const PositionMap& f, const Vec& s, double h1, double h2) {
  const int n = static_cast<int>(s.size());
  Jet j;
  j.x = f(s);
  j.d1.resize(j.x.size(), n);
  for (int a = 0; a < n; ++a) {
    Vec sp = s, sm = s;
    sp[a] += h1;
    sm[a] -= h1;
    j.d1.col(a) = (f(sp) - f(sm)) / (2.0 * h1);
  }
  j.d2.assign(static_cast<std::size_t>(n * n), Vec());
  for (int a = 0; a < n; ++a) {
    for (int b = a; b < n; ++b) {
      Vec v;
      if (a == b) {
        Vec sp = s, sm = s;
        sp[a] += h2;
        sm[a] -= h2;
        v = (f(sp) - 2.0 * j.x + f(sm)) / (h2 * h2);
      } else {
        Vec spp = s, spm = s, smp = s, smm = s;
        spp[a] += h2, spp[b] += h2;
        spm[a] += h2, spm[b] -= h2;
        smp[a] -= h2, smp[b] += h2;
        smm[a] -= h2, smm[b] -= h2;
        v = (f(spp) - f(spm) - f(smp) + f(smm)) / (4.0 * h2 * h2);
      }
      j.d2[static_cast<std::size_t>(a * n + b)] = v;
      j.d2[static_cast<std::size_t>(b * n + a)] = v;
    }
  }
  return j;
}

class ParametricSurface {
 public:
  ParametricSurface(std::string name, Signature sig, Domain domain, Immersion immersion)
      : name_(std::move(name)), sig_(sig), domain_(std::move(domain)), immersion_(std::move(immersion)) {}

  /// Immersion known only by position; derivatives by central differences
  /// (h1 = 1e-5 * domain scale, h2 = 1e-4 * domain scale).
  static ParametricSurface from_positions(std::string name, Signature sig, Domain domain, PositionMap f) {
    const double h1 = 1e-5 * domain.scale();
    const double h2 = 1e-4 * domain.scale();
    Immersion imm = [f = std::move(f), h1, h2](const Vec& s) { return finite_difference_jet(f, s, h1, h2); };
    return {std::move(name), sig, std::move(domain), std::move(imm)};
  }

  [[nodiscard]] const std::string& name() const { return name_; }
  [[nodiscard]] const Signature& sig() const { return sig_; }
  [[nodiscard]] const Domain& domain() const { return domain_; }
  [[nodiscard]] int n() const { return domain_.dim(); }
  /// Codimension split: m spatial, k temporal normal directions.
  [[nodiscard]] int m() const { return sig_.space_dim - n(); }
  [[nodiscard]] int k() const { return sig_.time_dim; }

  [[nodiscard]] Jet jet(const Vec& s) const { return immersion_(s); }
  [[nodiscard]] Vec position(const Vec& s) const { return immersion_(s).x; }
  [[nodiscard]] const Immersion& immersion() const { return immersion_; }

  std::map<std::string, double> params;

 private:
  std::string name_;
  Signature sig_;
  Domain domain_;
  Immersion immersion_;
};

// ---------------------------------------------------------------------------
// Pointwise intrinsic / extrinsic quantities from a jet.

inline SpacelikeSubspace tangent_space(const Signature& sig, const Jet& j) { return {sig, j.d1}; }

inline Mat induced_metric(const Signature& sig, const Jet& j) {
  Mat g = metric::gram(sig, j.d1);
  Eigen::LLT<Mat> llt(g);
  if (llt.info() != Eigen::Success) {
    throw NotSpacelike("induced_metric: tangent Gram matrix not positive definite");
  }
  return g;
}

inline Mat induced_metric(const ParametricSurface& S, const Vec& s) {
  try {
    return induced_metric(S.sig(), S.jet(s));
  } catch (const NotSpacelike&) {
    throw NotSpacelike("induced_metric: not spacelike at parameter (" + std::to_string(s[0]) +
                       (s.size() > 1 ? "," + std::to_string(s[1]) : std::string()) + ")");
  }
}

/// Christoffel symbols Gamma^c_ab = g^{cd} <F_ab, F_d>; entry [c](a,b).
inline std::vector<Mat> christoffel(const Signature& sig, const Jet& j) {
  const int n = j.n();
  const Mat g = metric::gram(sig, j.d1);
  const Mat ginv = g.inverse();
  std::vector<Mat> G(static_cast<std::size_t>(n), Mat::Zero(n, n));
  for (int a = 0; a < n; ++a) {
    for (int b = 0; b < n; ++b) {
      Vec low(n);
      for (int d = 0; d < n; ++d) low[d] = metric::inner(sig, j.dd(a, b), j.d1.col(d));
      const Vec up = ginv * low;
      for (int c = 0; c < n; ++c) G[static_cast<std::size_t>(c)](a, b) = up[c];
    }
  }
  return G;
}

struct CurvatureData {
  Mat frame;            // dim x n, orthonormal tangent frame e_i
  Mat frame_coeffs;     // n x n, e_i = sum_a d1_a * frame_coeffs(a, i)
  std::vector<Vec> II;  // n*n normal vectors II(e_i, e_j)
  Vec H;                // trace of II
  double H_s_norm = 0;
  double H_t_norm = 0;
  double H_mink_sq = 0;
  double gauss_K = std::numeric_limits<double>::quiet_NaN();  // n = 2 only, via the Gauss equation

  [[nodiscard]] int n() const { return static_cast<int>(frame.cols()); }
  [[nodiscard]] const Vec& ii(int i, int j) const { return II[static_cast<std::size_t>(i * n() + j)]; }

  /// Symmetric matrix <II(e_i,e_j), y>.
  [[nodiscard]] Mat contract(const Signature& sig, const Eigen::Ref<const Vec>& y) const {
    const int nn = n();
    Mat out(nn, nn);
    for (int i = 0; i < nn; ++i)
      for (int j = 0; j < nn; ++j) out(i, j) = metric::inner(sig, ii(i, j), y);
    return out;
  }
};

/// Second fundamental form and mean curvature at a jet.
inline CurvatureData curvature_from_jet(const Signature& sig, const Jet& j) {
  const int n = j.n();
  const SpacelikeSubspace T(sig, j.d1);
  const SpacelikeFrame fr = build_frame(T);
  const Eigen::LLT<Mat> llt(T.gram());
  // g = L L^T; e = d1 L^{-T} is orthonormal.
  const Mat Linv = llt.matrixL().solve(Mat::Identity(n, n));
  CurvatureData c;
  c.frame_coeffs = Linv.transpose();
  c.frame = j.d1 * c.frame_coeffs;
  std::vector<Vec> normal_d2(static_cast<std::size_t>(n * n));
  for (int a = 0; a < n; ++a)
    for (int b = 0; b < n; ++b) {
      const Vec& v = j.dd(a, b);
      normal_d2[static_cast<std::size_t>(a * n + b)] = v - detail::project_onto_raw(fr, v);
    }
  c.II.assign(static_cast<std::size_t>(n * n), Vec::Zero(sig.dim()));
  for (int i = 0; i < n; ++i)
    for (int k = 0; k < n; ++k) {
      Vec acc = Vec::Zero(sig.dim());
      for (int a = 0; a < n; ++a)
        for (int b = 0; b < n; ++b)
          acc += c.frame_coeffs(a, i) * c.frame_coeffs(b, k) * normal_d2[static_cast<std::size_t>(a * n + b)];
      c.II[static_cast<std::size_t>(i * n + k)] = acc;
    }
  c.H = Vec::Zero(sig.dim());
  for (int i = 0; i < n; ++i) c.H += c.ii(i, i);
  c.H_s_norm = metric::norm_s(sig, c.H);
  c.H_t_norm = metric::norm_t(sig, c.H);
  c.H_mink_sq = metric::inner(sig, c.H, c.H);
  if (n == 2) {
    c.gauss_K = metric::inner(sig, c.ii(0, 0), c.ii(1, 1)) - metric::inner(sig, c.ii(0, 1), c.ii(0, 1));
  }
  return c;
}

inline CurvatureData second_fundamental_form(const ParametricSurface& S, const Vec& s) {
  return curvature_from_jet(S.sig(), S.jet(s));
}

/// Intrinsic Gauss curvature from the induced metric alone (Brioschi formula).
/// First metric derivatives are exact from the jet; the second ones are
/// fourth-order central differences of those with step h (default 1e-4 * domain scale).
inline double gauss_curvature(const ParametricSurface& S, const Vec& s, double h = -1.0) {
  if (S.n() != 2) throw Unsupported("gauss_curvature: only defined for n = 2");
  if (h <= 0) h = 1e-4 * S.domain().scale();
  const Signature& sig = S.sig();
  struct FirstForm {
    double E, F, G, Eu, Ev, Fu, Fv, Gu, Gv;
  };
  auto first = [&](const Vec& p) {
    const Jet j = S.jet(p);
    auto ip = [&](const Vec& a, const Vec& b) { return metric::inner(sig, a, b); };
    const Vec& Fu = j.d1.col(0);
    const Vec& Fv = j.d1.col(1);
    FirstForm f{};
    f.E = ip(Fu, Fu);
    f.F = ip(Fu, Fv);
    f.G = ip(Fv, Fv);
    f.Eu = 2 * ip(j.dd(0, 0), Fu);
    f.Ev = 2 * ip(j.dd(0, 1), Fu);
    f.Fu = ip(j.dd(0, 0), Fv) + ip(Fu, j.dd(0, 1));
    f.Fv = ip(j.dd(0, 1), Fv) + ip(Fu, j.dd(1, 1));
    f.Gu = 2 * ip(j.dd(0, 1), Fv);
    f.Gv = 2 * ip(j.dd(1, 1), Fv);
    return f;
  };
  auto shifted = [&](int axis, double d) {
    Vec p = s;
    p[axis] += d;
    return first(p);
  };
  const FirstForm f = first(s);
  // Fourth-order central differences.
  const FirstForm u1 = shifted(0, h), u_1 = shifted(0, -h), u2 = shifted(0, 2 * h), u_2 = shifted(0, -2 * h);
  const FirstForm v1 = shifted(1, h), v_1 = shifted(1, -h), v2 = shifted(1, 2 * h), v_2 = shifted(1, -2 * h);
  auto d4 = [h](double p1, double m1, double p2, double m2) { return (8 * (p1 - m1) - (p2 - m2)) / (12 * h); };
  const double Evv = d4(v1.Ev, v_1.Ev, v2.Ev, v_2.Ev);
  const double Guu = d4(u1.Gu, u_1.Gu, u2.Gu, u_2.Gu);
  const double Fuv = 0.5 * (d4(v1.Fu, v_1.Fu, v2.Fu, v_2.Fu) + d4(u1.Fv, u_1.Fv, u2.Fv, u_2.Fv));

  Eigen::Matrix3d M1, M2;
  M1 << -0.5 * Evv + Fuv - 0.5 * Guu, 0.5 * f.Eu, f.Fu - 0.5 * f.Ev,  //
      f.Fv - 0.5 * f.Gu, f.E, f.F,                                     //
      0.5 * f.Gv, f.F, f.G;
  M2 << 0, 0.5 * f.Ev, 0.5 * f.Gu,  //
      0.5 * f.Ev, f.E, f.F,         //
      0.5 * f.Gu, f.F, f.G;
  const double det = f.E * f.G - f.F * f.F;
  return (M1.determinant() - M2.determinant()) / (det * det);
}

// ---------------------------------------------------------------------------
// Slope field.

struct SlopeSample {
  Vec s;
  double tau = 1.0;
};

struct SlopeField {
  std::vector<SlopeSample> samples;
  double tau = 1.0;
  Vec argmax;
  int grid_res = 0;
  bool converged = true;
  std::string warning;
};

struct SlopeOptions {
  int res = 32;              // grid intervals per axis
  double cap = 1e3;          // tau(x) above this is rejected
  double rel_tol = 1e-6;     // accepted change of the max under refinement
  int max_refinements = 3;
};

inline double pointwise_slope(const ParametricSurface& S, const Vec& s) {
  return slope(tangent_space(S.sig(), S.jet(s)));
}

namespace detail {

inline SlopeField slope_on_grid(const ParametricSurface& S, int res, double cap) {
  SlopeField f;
  f.grid_res = res;
  f.tau = 0.0;
  for (const Vec& s : S.domain().grid(res)) {
    double t;
    try {
      t = pointwise_slope(S, s);
    } catch (const NotSpacelike& e) {
      throw NotSpacelike(std::string(e.what()) + " at grid point (" + std::to_string(s[0]) + "," +
                         std::to_string(s.size() > 1 ? s[1] : 0.0) + ")");
    }
    if (t > cap) {
      throw SlopeCapExceeded("slope " + std::to_string(t) + " exceeds cap " + std::to_string(cap));
    }
    if (t > f.tau) {
      f.tau = t;
      f.argmax = s;
    }
    f.samples.push_back({s, t});
  }
  return f;
}

}  // namespace detail

/// tau(x) on a grid and its maximum, refined until the max is stable.
inline SlopeField slope_field(const ParametricSurface& S, const SlopeOptions& opt = {}) {
  SlopeField cur = detail::slope_on_grid(S, opt.res, opt.cap);
  int res = opt.res;
  for (int round = 0; round < opt.max_refinements; ++round) {
    res *= 2;
    SlopeField next = detail::slope_on_grid(S, res, opt.cap);
    const double change = std::abs(next.tau - cur.tau) / next.tau;
    cur = std::move(next);
    if (change < opt.rel_tol) {
      cur.converged = true;
      return cur;
    }
  }
  cur.converged = false;
  cur.warning = "global slope not stable after " + std::to_string(opt.max_refinements) + " refinements";
  return cur;
}

// ---------------------------------------------------------------------------
// Volumes.

struct QuadOptions {
  int cells = 32;  // panels per axis
  int order = 4;   // Gauss-Legendre points per panel
};

inline double volume(const ParametricSurface& S, const QuadOptions& q = {}) {
  double v = 0.0;
  for (const ParamSample& p : S.domain().quadrature(q.cells, q.order)) {
    v += p.weight * std::sqrt(induced_metric(S, p.s).determinant());
  }
  return v;
}

inline double boundary_volume(const ParametricSurface& S, const QuadOptions& q = {}) {
  double v = 0.0;
  for (const BoundarySample& b : S.domain().boundary_quadrature(q.cells, q.order)) {
    const Mat g = induced_metric(S, b.s);
    const Mat gb = b.tangents.transpose() * g * b.tangents;
    v += b.weight * std::sqrt(gb.determinant());
  }
  return v;
}

/// Integral of a pointwise quantity over the surface against dv.
template <class F>
double integrate_over(const ParametricSurface& S, F&& f, const QuadOptions& q = {}) {
  double v = 0.0;
  for (const ParamSample& p : S.domain().quadrature(q.cells, q.order)) {
    v += p.weight * std::sqrt(induced_metric(S, p.s).determinant()) * f(p.s);
  }
  return v;
}

/// Outward unit conormal of the boundary, expressed in parameter components
/// (w) and ambient coordinates (eta = dF w).
struct Conormal {
  Vec w;
  Vec eta;
};

inline Conormal outward_conormal(const ParametricSurface& S, const BoundarySample& b) {
  const Jet j = S.jet(b.s);
  const Mat g = metric::gram(S.sig(), j.d1);
  Vec w = b.outward;
  if (b.tangents.cols() > 0) {
    const Mat& J = b.tangents;
    const Mat gb = J.transpose() * g * J;
    w -= J * gb.ldlt().solve(J.transpose() * g * b.outward);
  }
  w /= std::sqrt(w.dot(g * w));
  return {w, j.d1 * w};
}

}  // namespace mkiso
