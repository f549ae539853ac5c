#pragma once

// The comparison map Phi(x, y) = grad u(x) + y on the normal bundle, the regions
// D, U, Omega, A built from it, the Jacobian of Phi, and the Monte Carlo checks
// of the covering argument (surjectivity onto D and the shell measure estimate).
//
// u is the FEM solution of the Neumann problem. Second derivatives of u are
// recovered at each query point by a least-squares quadratic fit of the nodal
// values in chart coordinates, constrained so that its Laplace-Beltrami value at
// the point equals c0 (c_f - f), the equation u solves. The gradient, Hessian and
// the comparison map at that point all come from this one local quadratic, so
// finite differences of Phi are consistent with the analytic Jacobian.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <memory>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "mkiso/constants.hpp"
#include "mkiso/error.hpp"
#include "mkiso/mesh.hpp"
#include "mkiso/mink.hpp"
#include "mkiso/neumann.hpp"
#include "mkiso/parametric.hpp"
#include "mkiso/rng.hpp"
#include "mkiso/spacelike_linalg.hpp"

namespace mkiso {

/// A point of the surface: a cell and barycentric coordinates (entries sum to 1).
struct SurfacePoint {
  int cell = -1;
  Vec bary;
};

/// A point (x, y) of the normal bundle. y is ambient; y_plus and y_minus are its
/// coordinates in the spacelike and timelike normal frames at x.
struct NormalPoint {
  SurfacePoint x;
  Vec y;
  Vec y_plus;
  Vec y_minus;
};

struct RegionFlags {
  bool in_D = false;
  bool in_U = false;
  bool in_Omega = false;
  std::optional<bool> in_A;  // empty when no Hessian is available at x
  double hessian_min_eig = std::numeric_limits<double>::quiet_NaN();
};

/// Quadratic a + b.d + d^T Q d / 2 in chart coordinates, d = s - s0.
struct LocalQuadratic {
  Vec s0;
  double a = 0.0;
  Vec b;
  Mat Q;

  [[nodiscard]] double value(const Vec& s) const {
    const Vec d = s - s0;
    return a + b.dot(d) + 0.5 * d.dot(Q * d);
  }
  [[nodiscard]] Vec gradient(const Vec& s) const { return b + Q * (s - s0); }
};

/// Local coordinates around a point: the immersion as a jet-valued map.
struct Chart {
  std::function<Jet(const Vec&)> jet;
  Vec s;  // coordinates of the point itself
};

/// Monomials d^e / e! of total degree <= deg in n variables, sorted by degree,
/// with the index of e + 1_a for each exponent and direction (-1 past deg).
struct PolyBasis {
  int n = 0;
  int deg = 0;
  std::vector<std::vector<int>> exps;
  std::vector<std::vector<int>> up;

  PolyBasis(int n_, int deg_) : n(n_), deg(deg_) {
    std::vector<int> e(static_cast<std::size_t>(n), 0);
    std::function<void(int, int)> rec = [&](int a, int left) {
      if (a == n - 1) {
        e[static_cast<std::size_t>(a)] = left;
        exps.push_back(e);
        return;
      }
      for (int p = left; p >= 0; --p) {
        e[static_cast<std::size_t>(a)] = p;
        rec(a + 1, left - p);
      }
    };
    for (int total = 0; total <= deg; ++total) rec(0, total);
    std::map<std::vector<int>, int> where;
    for (std::size_t i = 0; i < exps.size(); ++i) where[exps[i]] = static_cast<int>(i);
    up.assign(exps.size(), std::vector<int>(static_cast<std::size_t>(n), -1));
    for (std::size_t i = 0; i < exps.size(); ++i)
      for (int a = 0; a < n; ++a) {
        std::vector<int> f = exps[i];
        ++f[static_cast<std::size_t>(a)];
        const auto it = where.find(f);
        if (it != where.end()) up[i][static_cast<std::size_t>(a)] = it->second;
      }
  }

  [[nodiscard]] int size() const { return static_cast<int>(exps.size()); }
  [[nodiscard]] int degree_of(int i) const {
    int t = 0;
    for (int p : exps[static_cast<std::size_t>(i)]) t += p;
    return t;
  }
  /// Values of all monomials d^e / e! at d.
  [[nodiscard]] Vec monomials(const Vec& d) const {
    Vec out(size());
    for (int i = 0; i < size(); ++i) {
      double v = 1.0;
      const auto& e = exps[static_cast<std::size_t>(i)];
      for (int a = 0; a < n; ++a)
        for (int p = 1; p <= e[static_cast<std::size_t>(a)]; ++p) v *= d[a] / p;
      out[i] = v;
    }
    return out;
  }
};

/// Polynomial in chart coordinates centred at s0, stored by its partial
/// derivatives at s0: P(s) = sum_e coef[e] (s - s0)^e / e!.
struct LocalPolynomial {
  std::shared_ptr<const PolyBasis> basis;
  Vec s0;
  Vec coef;

  [[nodiscard]] double value(const Vec& s) const { return coef.dot(basis->monomials(s - s0)); }
  [[nodiscard]] Vec gradient(const Vec& s) const {
    const Vec mono = basis->monomials(s - s0);
    Vec g = Vec::Zero(basis->n);
    for (int i = 0; i < basis->size(); ++i)
      for (int a = 0; a < basis->n; ++a) {
        const int j = basis->up[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
        if (j >= 0) g[a] += coef[j] * mono[i];
      }
    return g;
  }
  [[nodiscard]] Mat hessian(const Vec& s) const {
    const Vec mono = basis->monomials(s - s0);
    const int n = basis->n;
    Mat H = Mat::Zero(n, n);
    for (int i = 0; i < basis->size(); ++i)
      for (int a = 0; a < n; ++a) {
        const int j = basis->up[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
        if (j < 0) continue;
        for (int b = 0; b < n; ++b) {
          const int k = basis->up[static_cast<std::size_t>(j)][static_cast<std::size_t>(b)];
          if (k >= 0) H(a, b) += coef[k] * mono[i];
        }
      }
    return H;
  }
};

/// Everything the checks need at one point of the surface.
struct PointData {
  SurfacePoint where;
  Chart chart;
  Jet jet;
  CurvatureData curv;  // II, H and an orthonormal tangent frame
  NormalSplit normals;
  LocalQuadratic u;
  Vec grad_u;           // ambient tangent vector
  double grad_norm = 0;
  Mat hessian;          // n x n, covariant Hessian of u in the frame curv.frame
  double f = 0;         // density at the point
  double laplacian = 0; // c0 (c_f - f), the trace of hessian
  bool on_boundary = false;
};

struct AbpOptions {
  int fit_degree = 3;             // degree of the per-vertex polynomial fit of u
  double fit_radius = 1.0;        // largest stencil radius = fit_radius sqrt(h L), h local edge, L chart diameter
  int min_rings = 2;              // the stencil always contains this k-ring
  double hessian_tol = 1e-6;      // A-condition tolerance in the surjectivity check
  double fd_step = 1e-5;          // finite-difference step for the Jacobian oracle
  int max_descent = 200;          // Armijo descent iterations
  double descent_tol = 1e-10;     // stop when |grad w| falls below this (times c0)
};

namespace detail {

/// Minkowski-orthonormalize the columns of B: spacelike columns first, then timelike ones.
inline Mat gram_schmidt_normal(const Signature& sig, const Mat& B, int m) {
  Mat out = B;
  for (int j = 0; j < B.cols(); ++j) {
    Vec v = B.col(j);
    for (int i = 0; i < j; ++i) {
      const double sgn = i < m ? 1.0 : -1.0;
      v -= sgn * metric::inner(sig, v, out.col(i)) * out.col(i);
    }
    const double q = metric::inner(sig, v, v);
    if (std::abs(q) < 1e-300) throw IllConditioned("gram_schmidt_normal: null vector");
    out.col(j) = v / std::sqrt(std::abs(q));
  }
  return out;
}

inline Mat symmetric_from_upper(int n, const Vec& q) {
  Mat Q(n, n);
  int idx = 0;
  for (int a = 0; a < n; ++a)
    for (int b = a; b < n; ++b) Q(a, b) = Q(b, a) = q[idx++];
  return Q;
}

}  // namespace detail

class AbpContext {
 public:
  /// Solves the Neumann problem on `mesh` with the density of `kind` and builds
  /// the comparison data. With a parametric twin, charts are its parameters and
  /// tau, II and H are taken from it; otherwise they come from fitted patches.
  AbpContext(SurfaceMesh mesh, std::optional<ParametricSurface> twin, DensityKind kind, double c0 = 1.0,
             AbpOptions opt = {})
      : mesh_(std::move(mesh)), twin_(std::move(twin)), c0_(c0), opt_(opt) {
    if (twin_ && !mesh_.params()) throw InvalidMesh("AbpContext: a twin needs parameter coordinates on the mesh");
    tau_ = twin_ ? slope_field(*twin_).tau : slope_field(mesh_).tau;
    const auto curv = twin_ ? vertex_curvature(mesh_, *twin_) : vertex_curvature(mesh_);
    if (kind == DensityKind::Custom) {
      f_.values = Vec::Zero(mesh_.num_vertices());
      f_.kind = DensityKind::Custom;
    } else {
      f_ = density_from_curvature(curv, kind, tau_);
    }
    init();
  }

  /// Same, with an explicit density field.
  AbpContext(SurfaceMesh mesh, std::optional<ParametricSurface> twin, DensityField f, double c0 = 1.0,
             AbpOptions opt = {})
      : mesh_(std::move(mesh)), twin_(std::move(twin)), c0_(c0), f_(std::move(f)), opt_(opt) {
    if (twin_ && !mesh_.params()) throw InvalidMesh("AbpContext: a twin needs parameter coordinates on the mesh");
    tau_ = twin_ ? slope_field(*twin_).tau : slope_field(mesh_).tau;
    init();
  }

  [[nodiscard]] const SurfaceMesh& mesh() const { return mesh_; }
  [[nodiscard]] const std::optional<ParametricSurface>& twin() const { return twin_; }
  [[nodiscard]] const NeumannSolution& sol() const { return sol_; }
  [[nodiscard]] const DensityField& density() const { return f_; }
  [[nodiscard]] const std::vector<NormalSplit>& normal_frames() const { return normal_frames_; }
  [[nodiscard]] const AbpOptions& options() const { return opt_; }
  [[nodiscard]] const Signature& sig() const { return mesh_.sig(); }
  [[nodiscard]] double tau() const { return tau_; }
  [[nodiscard]] double c0() const { return c0_; }
  [[nodiscard]] int n() const { return mesh_.n(); }
  [[nodiscard]] int m() const { return sig().space_dim - n(); }
  [[nodiscard]] int k() const { return sig().time_dim; }

  /// Cell across the face opposite local vertex i, or -1 on the boundary.
  [[nodiscard]] int cell_neighbor(int c, int i) const {
    return adjacency_[static_cast<std::size_t>(c * (n() + 1) + i)];
  }

  /// Ambient position of a surface point on the mesh.
  [[nodiscard]] Vec mesh_position(const SurfacePoint& p) const {
    Vec x = Vec::Zero(sig().dim());
    const auto idx = mesh_.cell(p.cell);
    for (std::size_t i = 0; i < idx.size(); ++i) x += p.bary[static_cast<Eigen::Index>(i)] * mesh_.vertex(idx[i]);
    return x;
  }

  /// Parameter coordinates of a surface point (twin only).
  [[nodiscard]] Vec param_of(const SurfacePoint& p) const {
    const Mat& P = *mesh_.params();
    Vec s = Vec::Zero(n());
    const auto idx = mesh_.cell(p.cell);
    for (std::size_t i = 0; i < idx.size(); ++i) s += p.bary[static_cast<Eigen::Index>(i)] * P.col(idx[i]);
    return s;
  }

  /// Barycentric coordinates of the parameter point s in cell c (twin only).
  [[nodiscard]] Vec param_bary(int c, const Vec& s) const {
    const Mat& P = *mesh_.params();
    const auto idx = mesh_.cell(c);
    Mat E(n(), n());
    for (int a = 0; a < n(); ++a) E.col(a) = P.col(idx[static_cast<std::size_t>(a) + 1]) - P.col(idx[0]);
    const Vec l = E.fullPivLu().solve(s - P.col(idx[0]));
    Vec b(n() + 1);
    b[0] = 1.0 - l.sum();
    b.tail(n()) = l;
    return b;
  }

  /// Walks from `hint` to the cell whose parameter simplex contains s (twin
  /// only). Outside the triangulated region the last cell is returned with
  /// barycentric coordinates clamped onto it.
  [[nodiscard]] SurfacePoint locate(const Vec& s, int hint) const {
    int c = hint;
    for (int guard = 0; guard < 4 * mesh_.num_cells() + 8; ++guard) {
      Vec b = param_bary(c, s);
      Eigen::Index worst;
      const double lo = b.minCoeff(&worst);
      if (lo >= -1e-12) return {c, b};
      const int next = cell_neighbor(c, static_cast<int>(worst));
      if (next < 0) {
        b = b.cwiseMax(0.0);
        return {c, b / b.sum()};
      }
      c = next;
    }
    throw Error("AbpContext::locate: walk did not terminate");
  }

  /// Density at a surface point, linear in the cell.
  [[nodiscard]] double density_at(const SurfacePoint& p) const {
    double f = 0.0;
    const auto idx = mesh_.cell(p.cell);
    for (std::size_t i = 0; i < idx.size(); ++i) f += p.bary[static_cast<Eigen::Index>(i)] * f_.values[idx[i]];
    return f;
  }

  /// Chart around a surface point. With a twin the chart coordinates are its
  /// parameters (s_override replaces the interpolated parameter point); without
  /// one, the fitted quadratic patch at the cell vertex of largest weight.
  [[nodiscard]] Chart chart_at(const SurfacePoint& p, const std::optional<Vec>& s_override = std::nullopt) const {
    if (twin_) {
      const ParametricSurface* S = &*twin_;
      return {[S](const Vec& s) { return S->jet(s); }, s_override ? *s_override : param_of(p)};
    }
    const int v = anchor_vertex(p);
    Chart ch = vertex_chart(v);
    ch.s = s_override ? *s_override : local_coords(v, mesh_position(p));
    return ch;
  }

  /// Collects the geometry at the point and the local quadratic for u there:
  /// the per-vertex fits of the cell blended with the barycentric weights (one
  /// fit without a twin), with the Hessian shifted by a multiple of the metric so
  /// that its Laplace-Beltrami trace is exactly c0 (c_f - f).
  [[nodiscard]] PointData evaluate(const SurfacePoint& p, const std::optional<Vec>& s_override = std::nullopt) const {
    PointData d;
    d.where = p;
    d.chart = chart_at(p, s_override);
    d.jet = d.chart.jet(d.chart.s);
    d.curv = curvature_from_jet(sig(), d.jet);
    d.normals = normal_split(tangent_space(sig(), d.jet));
    d.f = density_at(p);
    d.laplacian = c0_ * (sol_.c_f - d.f);

    LocalQuadratic& P = d.u;
    P.s0 = d.chart.s;
    P.a = 0.0;
    P.b = Vec::Zero(n());
    P.Q = Mat::Zero(n(), n());
    if (twin_) {
      const auto idx = mesh_.cell(p.cell);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        const double w = p.bary[static_cast<Eigen::Index>(i)];
        const LocalPolynomial& Pi = vertex_fit(idx[i]);
        P.a += w * Pi.value(P.s0);
        P.b += w * Pi.gradient(P.s0);
        P.Q += w * Pi.hessian(P.s0);
      }
    } else {
      const LocalPolynomial& Pv = vertex_fit(anchor_vertex(p));
      P.a = Pv.value(P.s0);
      P.b = Pv.gradient(P.s0);
      P.Q = Pv.hessian(P.s0);
    }
    const Mat g = metric::gram(sig(), d.jet.d1);
    const Mat ginv = g.inverse();
    const auto G = christoffel(sig(), d.jet);
    Mat cov = P.Q;
    for (int c = 0; c < n(); ++c) cov -= P.b[c] * G[static_cast<std::size_t>(c)];
    const double shift = (d.laplacian - ginv.cwiseProduct(cov).sum()) / n();
    P.Q += shift * g;
    cov += shift * g;

    d.grad_u = d.jet.d1 * (ginv * P.b);
    d.grad_norm = std::sqrt(std::max(0.0, P.b.dot(ginv * P.b)));
    d.hessian = d.curv.frame_coeffs.transpose() * cov * d.curv.frame_coeffs;
    d.hessian = 0.5 * (d.hessian + d.hessian.transpose());
    d.on_boundary = twin_ ? twin_->domain().boundary_distance(d.chart.s) <= 0.0 : false;
    const auto idx = mesh_.cell(p.cell);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      // a zero weight puts the point on the face opposite vertex i
      if (std::abs(p.bary[static_cast<Eigen::Index>(i)]) < 1e-14 && cell_neighbor(p.cell, static_cast<int>(i)) < 0) d.on_boundary = true;
    }
    return d;
  }

  /// Polynomial fit of u around vertex v in chart coordinates (twin parameters,
  /// or the patch chart of v). Least squares over the vertices within the fit
  /// radius, plus the Neumann condition at boundary vertices, with the
  /// Laplace-Beltrami value at v pinned to c0 (c_f - f(v)).
  [[nodiscard]] const LocalPolynomial& vertex_fit(int v) const {
    auto& slot = fits_[static_cast<std::size_t>(v)];
    if (!slot) slot = fit_vertex(v);
    return *slot;
  }

  /// Normal point at x with the given frame coordinates.
  [[nodiscard]] NormalPoint normal_point(const PointData& d, const Vec& y_plus, const Vec& y_minus) const {
    NormalPoint p;
    p.x = d.where;
    p.y_plus = y_plus;
    p.y_minus = y_minus;
    p.y = d.normals.n_plus * y_plus + d.normals.n_minus * y_minus;
    return p;
  }

  /// The surface point at vertex v.
  [[nodiscard]] SurfacePoint vertex_point(int v) const {
    const int c = mesh_.vertex_cells(v).front();
    Vec b = Vec::Zero(n() + 1);
    const auto idx = mesh_.cell(c);
    for (std::size_t i = 0; i < idx.size(); ++i)
      if (idx[i] == v) b[static_cast<Eigen::Index>(i)] = 1.0;
    return {c, b};
  }

  /// The surface point at chart coordinates s of the chart in `d`, with the
  /// parameter override to pass to evaluate(); empty when s leaves the surface.
  [[nodiscard]] std::optional<std::pair<SurfacePoint, std::optional<Vec>>> relocate(const PointData& d, const Vec& s) const {
    if (twin_) {
      if (twin_->domain().boundary_distance(s) <= 0.0) return std::nullopt;
      return std::make_pair(locate(s, d.where.cell), std::optional<Vec>(s));
    }
    const Vec x = d.chart.jet(s).x;
    const Vec Jd = metric::diagonal(sig());
    int cell = d.where.cell;
    for (int hop = 0; hop < 64; ++hop) {
      double lo = -std::numeric_limits<double>::infinity();
      int bestc = cell;
      Vec bestb;
      std::set<int> cand;
      for (int v : mesh_.cell(cell))
        for (int c : mesh_.vertex_cells(v)) cand.insert(c);
      for (int c : cand) {
        const Mat E = mesh_.cell_edges(c);
        const Vec l = metric::gram(sig(), E).ldlt().solve(E.transpose() * Jd.cwiseProduct(x - mesh_.vertex(mesh_.cell(c)[0])));
        Vec b(n() + 1);
        b[0] = 1.0 - l.sum();
        b.tail(n()) = l;
        if (b.minCoeff() > lo) {
          lo = b.minCoeff();
          bestc = c;
          bestb = b;
        }
      }
      if (lo >= -1e-9) {
        bestb = bestb.cwiseMax(0.0);
        return std::make_pair(SurfacePoint{bestc, bestb / bestb.sum()}, std::optional<Vec>());
      }
      if (bestc == cell) {
        // no cell of the star contains x: outside if it lies beyond a boundary face
        Eigen::Index worst;
        bestb.minCoeff(&worst);
        if (cell_neighbor(bestc, static_cast<int>(worst)) < 0) return std::nullopt;
        cell = cell_neighbor(bestc, static_cast<int>(worst));
        continue;
      }
      cell = bestc;
    }
    return std::nullopt;
  }

  /// Area-weighted random point of the mesh.
  [[nodiscard]] SurfacePoint sample_point(CounterRng& rng) const {
    const double r = rng.uniform() * cum_volume_.back();
    const int c = static_cast<int>(std::upper_bound(cum_volume_.begin(), cum_volume_.end(), r) - cum_volume_.begin());
    Vec b(n() + 1);
    for (int i = 0; i <= n(); ++i) b[i] = -std::log(1.0 - rng.uniform());
    return {std::min(c, mesh_.num_cells() - 1), b / b.sum()};
  }

 private:
  void init() {
    if (!(c0_ > 0)) throw Error("AbpContext: c0 must be positive");
    if (f_.values.size() != mesh_.num_vertices()) throw InvalidMesh("AbpContext: density size mismatch");
    sol_ = solve_neumann(mesh_, f_, c0_);
    const int nc = mesh_.num_cells();
    const int np1 = n() + 1;
    normal_frames_.reserve(static_cast<std::size_t>(nc));
    for (int c = 0; c < nc; ++c) normal_frames_.push_back(normal_split(SpacelikeSubspace(sig(), mesh_.cell_edges(c))));
    adjacency_.assign(static_cast<std::size_t>(nc * np1), -1);
    std::map<std::vector<int>, std::pair<int, int>> faces;
    for (int c = 0; c < nc; ++c) {
      const auto idx = mesh_.cell(c);
      for (int i = 0; i < np1; ++i) {
        std::vector<int> f;
        for (int j = 0; j < np1; ++j)
          if (j != i) f.push_back(idx[static_cast<std::size_t>(j)]);
        std::sort(f.begin(), f.end());
        auto [it, fresh] = faces.emplace(f, std::make_pair(c, i));
        if (!fresh) {
          adjacency_[static_cast<std::size_t>(c * np1 + i)] = it->second.first;
          adjacency_[static_cast<std::size_t>(it->second.first * np1 + it->second.second)] = c;
        }
      }
    }
    cum_volume_.resize(static_cast<std::size_t>(nc));
    double acc = 0.0;
    for (int c = 0; c < nc; ++c) cum_volume_[static_cast<std::size_t>(c)] = acc += mesh_.cell_volume(c);
    if (!twin_) patches_.resize(static_cast<std::size_t>(mesh_.num_vertices()));
    fits_.resize(static_cast<std::size_t>(mesh_.num_vertices()));
    mark_.assign(static_cast<std::size_t>(mesh_.num_vertices()), 0);
    if (opt_.fit_degree < 2) throw Error("AbpContext: fit_degree must be at least 2");
    basis_ = std::make_shared<const PolyBasis>(n(), opt_.fit_degree);
    if (twin_) {
      chart_diameter_ = twin_->domain().scale();
    } else {
      chart_diameter_ = (mesh_.vertices().rowwise().maxCoeff() - mesh_.vertices().rowwise().minCoeff()).norm();
    }
    vertex_conormal_.assign(static_cast<std::size_t>(mesh_.num_vertices()), Vec());
    for (std::size_t f = 0; f < mesh_.boundary_faces().size(); ++f) {
      const Vec eta = face_conormal(mesh_, f);
      for (int v : mesh_.boundary_faces()[f]) {
        auto& slot = vertex_conormal_[static_cast<std::size_t>(v)];
        if (slot.size() == 0) slot = Vec::Zero(sig().dim());
        slot += eta;
      }
    }
  }

  const Jet& patch(int v) const {
    auto& slot = patches_[static_cast<std::size_t>(v)];
    if (!slot) slot = fit_quadratic_patch(mesh_, v);
    return *slot;
  }

  [[nodiscard]] int anchor_vertex(const SurfacePoint& p) const {
    Eigen::Index vmax;
    p.bary.maxCoeff(&vmax);
    return mesh_.cell(p.cell)[static_cast<std::size_t>(vmax)];
  }

  /// Patch chart of vertex v (no twin): s -> x0 + d1 s + d2(s, s) / 2.
  [[nodiscard]] Chart vertex_chart(int v) const {
    const Jet& J0 = patch(v);
    Chart ch;
    ch.jet = [J0, nn = n()](const Vec& s) {
      Jet j;
      j.x = J0.x + J0.d1 * s;
      j.d1 = J0.d1;
      for (int a = 0; a < nn; ++a)
        for (int b = 0; b < nn; ++b) {
          j.x += 0.5 * s[a] * s[b] * J0.dd(a, b);
          j.d1.col(a) += s[b] * J0.dd(a, b);
        }
      j.d2 = J0.d2;
      return j;
    };
    ch.s = Vec::Zero(n());
    return ch;
  }

  /// Coordinates of an ambient point in the patch chart of v (tangent projection).
  [[nodiscard]] Vec local_coords(int v, const Vec& x) const {
    const Jet& J0 = patch(v);
    const Mat g = metric::gram(sig(), J0.d1);
    return g.ldlt().solve(J0.d1.transpose() * metric::diagonal(sig()).cwiseProduct(x - J0.x));
  }

  /// Candidate stencils grow from the min_rings ring up to the fit radius; the
  /// one whose Hessian coefficients have the smallest estimated standard error
  /// (residual variance times the normal-equation inverse) is kept. Large
  /// stencils average out nodal noise, small ones limit truncation error.
  [[nodiscard]] LocalPolynomial fit_vertex(int v) const {
    const int nn = n();
    auto coords = [&](int w) -> Vec { return twin_ ? Vec(mesh_.params()->col(w)) : local_coords(v, mesh_.vertex(w)); };
    const Chart ch = twin_ ? Chart{[S = &*twin_](const Vec& s) { return S->jet(s); }, coords(v)} : vertex_chart(v);
    const Vec s0 = coords(v);
    const PolyBasis& B = *basis_;
    const int nu = B.size();

    double h = 0.0;
    for (int w : mesh_.neighbors(v)) h += (coords(w) - s0).norm();
    h /= static_cast<double>(std::max<std::size_t>(1, mesh_.neighbors(v).size()));
    const double R = opt_.fit_radius * std::sqrt(h * chart_diameter_);

    // all vertices graph-connected to v within R, plus the min_rings ring
    ++stamp_;
    std::vector<int> st;
    auto take = [&](int w) {
      if (mark_[static_cast<std::size_t>(w)] == stamp_) return;
      mark_[static_cast<std::size_t>(w)] = stamp_;
      st.push_back(w);
    };
    for (int w : k_ring(mesh_, v, opt_.min_rings)) take(w);
    for (std::size_t q = 0; q < st.size(); ++q)
      for (int w : mesh_.neighbors(st[q]))
        if (mark_[static_cast<std::size_t>(w)] != stamp_ && (coords(w) - s0).norm() <= R) take(w);
    for (int extra = 1; static_cast<int>(st.size()) < 2 * nu && extra < 8; ++extra)
      for (int w : k_ring(mesh_, v, opt_.min_rings + extra)) take(w);
    if (static_cast<int>(st.size()) < nu) throw InvalidMesh("vertex_fit: stencil too small at vertex " + std::to_string(v));
    std::vector<std::pair<double, int>> order;
    for (int w : st) order.emplace_back((coords(w) - s0).norm(), w);
    std::sort(order.begin(), order.end());

    const Jet j0 = ch.jet(s0);
    const Mat ginv = metric::gram(sig(), j0.d1).inverse();
    const auto G = christoffel(sig(), j0);
    const double target = c0_ * (sol_.c_f - f_.values[v]);
    std::vector<int> hess_idx;
    for (int i = 0; i < nu; ++i)
      if (B.degree_of(i) == 2) hess_idx.push_back(i);

    // candidate sizes: the ring count, then geometric growth to the full stencil
    int ring_count = 0;
    {
      std::set<int> ring;
      for (int w : k_ring(mesh_, v, opt_.min_rings)) ring.insert(w);
      for (const auto& [dist, w] : order) ring_count += ring.count(w) ? 1 : 0;
      ring_count = std::max(ring_count, std::min<int>(2 * nu, static_cast<int>(order.size())));
    }
    std::vector<int> sizes;
    for (double c = ring_count; c < static_cast<double>(order.size()); c *= 1.6) sizes.push_back(static_cast<int>(c));
    sizes.push_back(static_cast<int>(order.size()));

    LocalPolynomial best;
    double best_err = std::numeric_limits<double>::infinity();
    for (int J : sizes) {
      const double rho = order[static_cast<std::size_t>(J) - 1].first;
      if (!(rho > 0)) continue;
      int nb = 0;
      for (int r = 0; r < J; ++r) nb += vertex_conormal_[static_cast<std::size_t>(order[static_cast<std::size_t>(r)].second)].size() > 0 ? 1 : 0;
      // Unknowns are the derivatives scaled by rho^|e|, so rows are O(1).
      Mat X = Mat::Zero(J + nb, nu);
      Vec y(J + nb);
      int row = J;
      for (int r = 0; r < J; ++r) {
        const int w = order[static_cast<std::size_t>(r)].second;
        const Vec sw = coords(w);
        const Vec mono = B.monomials((sw - s0) / rho);
        X.row(r) = mono.transpose();
        y[r] = sol_.u[w];
        const Vec& eta = vertex_conormal_[static_cast<std::size_t>(w)];
        if (eta.size() == 0) continue;
        // Neumann condition <grad u, eta> = c0 at boundary vertices
        const Jet jw = ch.jet(sw);
        const Mat gw = metric::gram(sig(), jw.d1);
        Vec cw = gw.ldlt().solve(jw.d1.transpose() * metric::diagonal(sig()).cwiseProduct(eta));
        cw /= std::sqrt(cw.dot(gw * cw));
        for (int i = 0; i < nu; ++i)
          for (int a = 0; a < nn; ++a) {
            const int j = B.up[static_cast<std::size_t>(i)][static_cast<std::size_t>(a)];
            if (j >= 0) X(row, j) += cw[a] * mono[i];
          }
        y[row++] = rho * c0_;
      }
      // sum g^{ab} (Q_ab - Gamma^c_ab b_c) = c0 (c_f - f(v)), times rho^2
      Vec crow = Vec::Zero(nu);
      for (int a = 0; a < nn; ++a) {
        const int ia = B.up[0][static_cast<std::size_t>(a)];
        crow[ia] -= rho * ginv.cwiseProduct(G[static_cast<std::size_t>(a)]).sum();
        for (int b = 0; b < nn; ++b) crow[B.up[static_cast<std::size_t>(ia)][static_cast<std::size_t>(b)]] += ginv(a, b);
      }
      const Mat XtX = X.transpose() * X;
      Mat K = Mat::Zero(nu + 1, nu + 1);
      K.topLeftCorner(nu, nu) = XtX;
      K.block(0, nu, nu, 1) = crow;
      K.block(nu, 0, 1, nu) = crow.transpose();
      Vec rhs(nu + 1);
      rhs.head(nu) = X.transpose() * y;
      rhs[nu] = rho * rho * target;
      const Eigen::FullPivLU<Mat> lu(K);
      if (!lu.isInvertible()) continue;
      const Vec th = lu.solve(rhs);
      const double dof = std::max(1.0, static_cast<double>(X.rows() - nu + 1));
      const double sigma2 = (X * th.head(nu) - y).squaredNorm() / dof;
      const Mat Kinv = lu.inverse();
      double var = 0.0;
      for (int i : hess_idx) var += Kinv(i, i);
      const double err = std::sqrt(std::max(0.0, sigma2 * var)) / (rho * rho);
      if (err < best_err) {
        best_err = err;
        best.basis = basis_;
        best.s0 = s0;
        best.coef.resize(nu);
        for (int i = 0; i < nu; ++i) best.coef[i] = th[i] / std::pow(rho, B.degree_of(i));
      }
    }
    if (!best.basis) throw InvalidMesh("vertex_fit: singular fit at vertex " + std::to_string(v));
    return best;
  }

  SurfaceMesh mesh_;
  std::optional<ParametricSurface> twin_;
  double c0_ = 1.0;
  DensityField f_;
  AbpOptions opt_;
  double tau_ = 1.0;
  NeumannSolution sol_;
  std::vector<NormalSplit> normal_frames_;
  std::vector<int> adjacency_;
  std::vector<double> cum_volume_;
  std::vector<Vec> vertex_conormal_;  // summed conormals of adjacent boundary faces, empty inside
  double chart_diameter_ = 1.0;
  mutable std::vector<std::optional<Jet>> patches_;
  std::shared_ptr<const PolyBasis> basis_;
  mutable std::vector<std::optional<LocalPolynomial>> fits_;
  mutable std::vector<int> mark_;
  mutable int stamp_ = 0;
};

// ---------------------------------------------------------------------------
// Regions and the comparison map.

/// c0 - tau |pi_s xi| - sqrt(tau^2 - 1) |pi_t xi|; D is where this is positive.
inline double region_D_margin(const AbpContext& ctx, const Eigen::Ref<const Vec>& xi) {
  const double t = ctx.tau();
  return ctx.c0() - t * metric::norm_s(ctx.sig(), xi) - std::sqrt(std::max(0.0, t * t - 1.0)) * metric::norm_t(ctx.sig(), xi);
}

inline bool in_region_D(const AbpContext& ctx, const Eigen::Ref<const Vec>& xi) { return region_D_margin(ctx, xi) > 0.0; }

inline Vec phi(const PointData& d, const NormalPoint& p) { return d.grad_u + p.y; }

inline Vec phi(const AbpContext& ctx, const NormalPoint& p) { return phi(ctx.evaluate(p.x), p); }

/// Hess u - <II, y> in the orthonormal tangent frame.
inline Mat a_matrix(const AbpContext& ctx, const PointData& d, const Vec& y) {
  Mat M = d.hessian - d.curv.contract(ctx.sig(), y);
  return 0.5 * (M + M.transpose());
}

inline RegionFlags classify(const AbpContext& ctx, const PointData& d, const NormalPoint& p) {
  RegionFlags r;
  r.in_D = in_region_D(ctx, phi(d, p));
  r.in_U = !d.on_boundary && d.grad_norm < ctx.c0();
  r.in_Omega = r.in_U && r.in_D;
  const Mat M = a_matrix(ctx, d, p.y);
  r.hessian_min_eig = Eigen::SelfAdjointEigenSolver<Mat>(M, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  r.in_A = r.in_Omega && r.hessian_min_eig >= 0.0;
  return r;
}

inline RegionFlags classify(const AbpContext& ctx, const NormalPoint& p) { return classify(ctx, ctx.evaluate(p.x), p); }

/// det(Hess u - <II, y>), the Jacobian determinant of Phi in orthonormal frames.
inline double jacobian_det(const AbpContext& ctx, const PointData& d, const NormalPoint& p) {
  return a_matrix(ctx, d, p.y).determinant();
}

inline double jacobian_det(const AbpContext& ctx, const NormalPoint& p) { return jacobian_det(ctx, ctx.evaluate(p.x), p); }

/// Finite-difference determinant of dPhi. The normal bundle is coordinatized by
/// chart coordinates s and coefficients c in a normal frame that varies smoothly
/// with s; the ambient Jacobian is expressed in the orthonormal frame
/// {e_i, f_j} at x and in orthonormal coordinates on the source.
inline double jacobian_det_fd(const AbpContext& ctx, const PointData& d, const NormalPoint& p, double h = 0.0) {
  if (h <= 0) h = ctx.options().fd_step;
  const Signature& sig = ctx.sig();
  const int n = ctx.n(), m = ctx.m(), k = ctx.k();
  const int dim = sig.dim();
  Mat B0(dim, m + k);
  B0 << d.normals.n_plus, d.normals.n_minus;
  const Vec coef = (Vec(m + k) << p.y_plus, p.y_minus).finished();
  const Vec Jd = metric::diagonal(sig);
  auto phi_at = [&](const Vec& s, const Vec& c) {
    const Jet j = d.chart.jet(s);
    const Mat g = metric::gram(sig, j.d1);
    const Mat ginv = g.inverse();
    const Vec grad = j.d1 * (ginv * d.u.gradient(s));
    // normal frame at s: project B0 onto the normal space and re-orthonormalize
    const Mat Pt = j.d1 * ginv * j.d1.transpose() * Jd.asDiagonal();
    const Mat N = detail::gram_schmidt_normal(sig, B0 - Pt * B0, m);
    return Vec(grad + N * c);
  };
  Mat Jm(dim, dim);
  for (int a = 0; a < n; ++a) {
    Vec sp = d.chart.s, sm = d.chart.s;
    sp[a] += h;
    sm[a] -= h;
    Jm.col(a) = (phi_at(sp, coef) - phi_at(sm, coef)) / (2.0 * h);
  }
  for (int j = 0; j < m + k; ++j) {
    Vec cp = coef, cm = coef;
    cp[j] += h;
    cm[j] -= h;
    Jm.col(n + j) = (phi_at(d.chart.s, cp) - phi_at(d.chart.s, cm)) / (2.0 * h);
  }
  // source: d/de_i = sum_a coeffs(a, i) d/ds_a
  Mat src = Mat::Identity(dim, dim);
  src.topLeftCorner(n, n) = d.curv.frame_coeffs;
  // target basis {e_i, f_j}
  Mat basis(dim, dim);
  basis << d.curv.frame, B0;
  return basis.fullPivLu().solve(Jm * src).determinant();
}

inline double jacobian_det_fd(const AbpContext& ctx, const NormalPoint& p, double h = 0.0) {
  return jacobian_det_fd(ctx, ctx.evaluate(p.x), p, h);
}

/// The Jacobian bound at a point of A: 0 <= det <= ((c0 (c_f - f) - <H, y>) / n)^n.
struct AmGmCheck {
  double lhs = 0;     // det(Hess u - <II, y>)
  double rhs = 0;     // ((c0 (c_f - f) - <H, y>) / n)^n
  double scalar = 0;  // c0 (c_f - f) - <H, y>
  bool ok = false;

  void require() const {
    if (!ok) {
      throw BoundViolation("Jacobian bound violated: det = " + std::to_string(lhs) + ", bound = " + std::to_string(rhs) +
                           ", scalar = " + std::to_string(scalar));
    }
  }
};

inline AmGmCheck amgm_bound_check(const AbpContext& ctx, const PointData& d, const NormalPoint& p, double tol = 1e-6) {
  AmGmCheck r;
  r.lhs = jacobian_det(ctx, d, p);
  r.scalar = d.laplacian - metric::inner(ctx.sig(), d.curv.H, p.y);
  r.rhs = std::pow(r.scalar / ctx.n(), ctx.n());
  r.ok = r.lhs >= -tol && r.lhs <= r.rhs + tol && r.scalar >= -tol;
  return r;
}

inline AmGmCheck amgm_bound_check(const AbpContext& ctx, const NormalPoint& p, double tol = 1e-6) {
  return amgm_bound_check(ctx, ctx.evaluate(p.x), p, tol);
}

// ---------------------------------------------------------------------------
// Sampling.

/// Random point of Omega: x area-weighted with |grad u| < c0, and normal frame
/// coordinates uniform in a ball around the coordinates that bring Phi closest
/// to the origin, with radius the Euclidean extent of D (capped at 2 c0 in the
/// timelike directions when tau = 1) over the smallest singular value of the
/// frame. Points with Phi outside D are rejected; gives up after max_tries.
inline std::optional<std::pair<PointData, NormalPoint>> sample_omega_point(const AbpContext& ctx, CounterRng& rng,
                                                                           int max_tries = 1000) {
  const double t = ctx.tau();
  const double c0 = ctx.c0();
  const double extent = c0 * std::sqrt(1.0 / (t * t) + (t > 1.0 + 1e-9 ? 1.0 / (t * t - 1.0) : 4.0));
  const int m = ctx.m(), k = ctx.k();
  for (int tries = 0; tries < max_tries;) {
    PointData d = ctx.evaluate(ctx.sample_point(rng));
    ++tries;
    if (d.on_boundary || d.grad_norm >= c0) continue;
    Mat B(ctx.sig().dim(), m + k);
    B << d.normals.n_plus, d.normals.n_minus;
    const Eigen::JacobiSVD<Mat> svd(B, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Vec center = -svd.solve(d.grad_u);
    const double radius = extent / svd.singularValues().minCoeff();
    for (int inner = 0; inner < 20 && tries < max_tries; ++inner, ++tries) {
      const Vec c = center + rng.in_ball(m + k, radius);
      NormalPoint p = ctx.normal_point(d, c.head(m), c.tail(k));
      if (in_region_D(ctx, phi(d, p))) return std::make_pair(std::move(d), std::move(p));
    }
  }
  return std::nullopt;
}

/// Random xi in D: spatial part uniform in the ball of radius c0 / tau, temporal
/// part uniform in the ball of radius c0 / sqrt(tau^2 - 1) (radius c0 when tau = 1),
/// rejected until it lies in D.
inline Vec sample_in_D(const AbpContext& ctx, CounterRng& rng) {
  const Signature& sig = ctx.sig();
  const double t = ctx.tau();
  const double rs = ctx.c0() / t;
  const double rt = t > 1.0 + 1e-12 ? ctx.c0() / std::sqrt(t * t - 1.0) : ctx.c0();
  for (;;) {
    Vec xi(sig.dim());
    xi.head(sig.space_dim) = rng.in_ball(sig.space_dim, rs);
    if (sig.time_dim > 0) xi.tail(sig.time_dim) = rng.in_ball(sig.time_dim, rt);
    if (in_region_D(ctx, xi)) return xi;
  }
}

// ---------------------------------------------------------------------------
// Surjectivity of Phi onto D.

struct SurjectivityResult {
  SurfacePoint x;
  Vec s;                // chart coordinates of the minimizer
  Vec y;                // normal part of xi at the minimizer
  double residual = 0;  // |Phi(x, y) - xi|, Euclidean
  double grad_norm = 0; // |grad u| at the minimizer
  double hessian_min_eig = 0;
  double boundary_distance = 0;  // parameter distance to the boundary (twin only)
  bool interior = false;
  bool in_U = false;
  bool a_condition = false;  // hessian_min_eig >= -hessian_tol
  int iterations = 0;
  int start_vertex = -1;
};

/// Minimizes w(x) = u(x) - <x, xi> over the surface: vertex scan, then Newton
/// steps on G = grad u - xi^T = 0 with a finite-difference Jacobian of G, and
/// steepest descent on w when the Newton step fails. A step is accepted when it
/// decreases w or |G|. Throws SurjectivityViolation when the iteration can only
/// make progress by leaving the surface through its boundary.
inline SurjectivityResult surjectivity_check(const AbpContext& ctx, const Vec& xi) {
  if (!in_region_D(ctx, xi)) throw Error("surjectivity_check: xi is not in D");
  const SurfaceMesh& M = ctx.mesh();
  const Signature& sig = ctx.sig();
  const int n = ctx.n();
  const Vec Jd = metric::diagonal(sig);
  const Vec xiJ = Jd.cwiseProduct(xi);  // <x, xi> = x . xiJ
  SurjectivityResult res;

  int best = 0;
  double wbest = std::numeric_limits<double>::infinity();
  for (int v = 0; v < M.num_vertices(); ++v) {
    const double w = ctx.sol().u[v] - M.vertex(v).dot(xiJ);
    if (w < wbest) {
      wbest = w;
      best = v;
    }
  }
  res.start_vertex = best;
  PointData d = ctx.evaluate(ctx.vertex_point(best));

  // Components of G at e as a covector in the chart of `base`.
  auto G_at = [&](const PointData& e, const PointData& base) -> Vec {
    if (ctx.twin()) return e.u.b - e.jet.d1.transpose() * xiJ;
    const Mat ginv = metric::gram(sig, e.jet.d1).inverse();
    const Vec amb = e.grad_u - e.jet.d1 * (ginv * (e.jet.d1.transpose() * xiJ));
    return base.jet.d1.transpose() * Jd.cwiseProduct(amb);
  };
  auto w_at = [&](const PointData& e) { return e.u.a - e.jet.x.dot(xiJ); };
  auto merit_at = [&](const Vec& G, const PointData& base) {
    return G.dot(metric::gram(sig, base.jet.d1).ldlt().solve(G));
  };
  auto probe = [&](const PointData& base, const Vec& s) -> std::optional<PointData> {
    const auto moved = ctx.relocate(base, s);
    if (!moved) return std::nullopt;
    return ctx.evaluate(moved->first, moved->second);
  };

  const double tol = ctx.options().descent_tol * ctx.c0();
  const double fd = 1e-7 * (ctx.twin() ? ctx.twin()->domain().scale() : 1.0);
  int escapes = 0;
  for (int it = 0; it < ctx.options().max_descent; ++it) {
    res.iterations = it + 1;
    const Vec G = G_at(d, d);
    const double merit = merit_at(G, d);
    const double w0 = w_at(d);
    if (std::sqrt(merit) < tol) {
      // A stationary point with an indefinite Hessian of w is a saddle: leave
      // it along the most negative direction and keep descending.
      const Vec y = xi - d.jet.d1 * (metric::gram(sig, d.jet.d1).inverse() * (d.jet.d1.transpose() * xiJ));
      const Eigen::SelfAdjointEigenSolver<Mat> es(a_matrix(ctx, d, y));
      if (es.eigenvalues()[0] >= -ctx.options().hessian_tol || escapes >= 5) break;
      ++escapes;
      const Vec v = d.curv.frame_coeffs * es.eigenvectors().col(0);
      bool moved = false;
      for (double t = 0.1; t > 1e-8 && !moved; t *= 0.5)
        for (double sgn : {1.0, -1.0}) {
          auto e = probe(d, d.chart.s + sgn * t * v);
          if (e && w_at(*e) < w0) {
            d = std::move(*e);
            moved = true;
            break;
          }
        }
      if (!moved) break;
      continue;
    }

    // Jacobian of G in the chart of d, by central differences
    Mat JG(n, n);
    bool jac_ok = true;
    for (int a = 0; a < n && jac_ok; ++a) {
      Vec sp = d.chart.s, sm = d.chart.s;
      sp[a] += fd;
      sm[a] -= fd;
      const auto ep = probe(d, sp), em = probe(d, sm);
      if (!ep || !em) {
        jac_ok = false;
        break;
      }
      JG.col(a) = (G_at(*ep, d) - G_at(*em, d)) / (2.0 * fd);
    }
    std::vector<Vec> dirs;
    if (jac_ok) {
      const Eigen::FullPivLU<Mat> lu(JG);
      if (lu.isInvertible()) dirs.push_back(-lu.solve(G));
    }
    dirs.push_back(-metric::gram(sig, d.jet.d1).ldlt().solve(G));

    bool accepted = false, hit_boundary = false;
    for (std::size_t k = 0; k < dirs.size() && !accepted; ++k) {
      const Vec& dir = dirs[k];
      const bool newton = jac_ok && k == 0 && dirs.size() == 2;
      const double slope = G.dot(dir);
      for (double t = 1.0; t > 1e-12; t *= 0.5) {
        auto e = probe(d, d.chart.s + t * dir);
        if (!e) {
          hit_boundary = true;
          continue;
        }
        const bool w_ok = slope < 0 && w_at(*e) <= w0 + 1e-4 * t * slope;
        const bool merit_ok = newton && merit_at(G_at(*e, d), d) <= (1.0 - 1e-4 * t) * merit;
        if (w_ok || merit_ok) {
          d = std::move(*e);
          accepted = true;
          break;
        }
      }
    }
    if (!accepted) {
      if (hit_boundary) throw SurjectivityViolation("surjectivity_check: minimizer of w on the boundary");
      break;
    }
  }

  const Mat ginv = metric::gram(sig, d.jet.d1).inverse();
  const Vec xiT = d.jet.d1 * (ginv * (d.jet.d1.transpose() * xiJ));
  res.x = d.where;
  res.s = d.chart.s;
  res.y = xi - xiT;
  res.residual = (d.grad_u - xiT).norm();
  res.grad_norm = d.grad_norm;
  res.boundary_distance = ctx.twin() ? ctx.twin()->domain().boundary_distance(d.chart.s) : std::numeric_limits<double>::infinity();
  res.interior = !d.on_boundary && res.boundary_distance > 0.0;
  res.in_U = res.interior && d.grad_norm < ctx.c0();
  res.hessian_min_eig = Eigen::SelfAdjointEigenSolver<Mat>(a_matrix(ctx, d, res.y), Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
  res.a_condition = res.hessian_min_eig >= -ctx.options().hessian_tol;
  return res;
}

/// Smallest <grad w_xi, eta> over boundary faces, with the FEM gradient of the
/// owning cell; positive for xi in D up to the discrete flux error.
inline double boundary_flux_margin(const AbpContext& ctx, const Vec& xi) {
  const SurfaceMesh& M = ctx.mesh();
  double lo = std::numeric_limits<double>::infinity();
  for (std::size_t f = 0; f < M.boundary_faces().size(); ++f) {
    const Vec eta = face_conormal(M, f);
    const int c = M.boundary_owner()[f].first;
    const double v = metric::inner(ctx.sig(), ctx.sol().grad_u.col(c), eta) - metric::inner(ctx.sig(), xi, eta);
    lo = std::min(lo, v);
  }
  return lo;
}

// ---------------------------------------------------------------------------
// Shell measure estimate.

struct MeasureRun {
  double eps = 0;
  double mean = 0;      // estimate of eps^{-2} times the restricted integral
  double half_width = 0;  // 95% confidence half-width
  long accepted = 0;    // samples with a nonzero contribution
};

struct MeasureEstimate {
  double lhs_analytic = 0;
  MeasureRun at_eps, at_half;
  double rhs_extrapolated = 0;  // 2 R(eps/2) - R(eps), linear in eps
  double ci = 0;                // 95% half-width of the extrapolated value
  double slack = 0;             // |R(eps/2) - R(eps)|, the size of the extrapolation
  bool holds = false;
};

namespace detail {

/// One Monte Carlo run. Sample i draws x area-weighted on the mesh, then
/// s = |y+| uniform on [0, S] with a uniform direction in N+, t = -|y|^2 uniform
/// on (|grad u|^2, |grad u|^2 + eps^2) and |y-| = sqrt(s^2 + t) with a uniform
/// direction in N-. The weight is the inverse sampling density times
/// det dPhi 1_A 1_D, divided by eps^2.
inline MeasureRun measure_run(const AbpContext& ctx, double eps, long n_samples, std::uint64_t seed, std::uint64_t stream0) {
  const int n = ctx.n(), m = ctx.m(), k = ctx.k();
  const double vol = ctx.mesh().volume();
  const double S = 2.0 * (ctx.c0() + eps) * ctx.tau() + ctx.c0();
  MeasureRun run;
  run.eps = eps;
  double sum = 0.0, sum2 = 0.0;
  for (long i = 0; i < n_samples; ++i) {
    CounterRng rng(seed, stream0 + static_cast<std::uint64_t>(i));
    const SurfacePoint x = ctx.sample_point(rng);
    double wx = vol;
    const PointData d = ctx.evaluate(x);
    if (ctx.twin()) {
      // reweight the mesh-area density to the surface measure at the parameter point
      const auto idx = ctx.mesh().cell(x.cell);
      Mat E(n, n);
      for (int a = 0; a < n; ++a) E.col(a) = ctx.mesh().params()->col(idx[static_cast<std::size_t>(a) + 1]) - ctx.mesh().params()->col(idx[0]);
      double fact = 1.0;
      for (int a = 1; a <= n; ++a) fact *= a;
      const double param_vol = std::abs(E.determinant()) / fact;
      const double sqrt_g = std::sqrt(metric::gram(ctx.sig(), d.jet.d1).determinant());
      wx *= sqrt_g * param_vol / ctx.mesh().cell_volume(x.cell);
    }
    double contrib = 0.0;
    if (!d.on_boundary && d.grad_norm < ctx.c0()) {
      const double g2 = d.grad_norm * d.grad_norm;
      double s = 0.0, wy = 1.0;
      Vec yp = Vec::Zero(m);
      if (m > 0) {
        s = S * rng.uniform();
        yp = s * rng.direction(m);
        wy *= S * sphere_area(m) * std::pow(s, m - 1);
      }
      const double t = g2 + eps * eps * rng.uniform();
      const double r = std::sqrt(s * s + t);
      const Vec ym = r * rng.direction(k);
      // dy- = r^{k-1} dr dOmega, and dt = 2 r dr at fixed s
      wy *= 0.5 * sphere_area(k) * std::pow(r, k - 2) * eps * eps;
      const NormalPoint p = ctx.normal_point(d, yp, ym);
      if (in_region_D(ctx, phi(d, p))) {
        const Mat A = a_matrix(ctx, d, p.y);
        const double mineig = Eigen::SelfAdjointEigenSolver<Mat>(A, Eigen::EigenvaluesOnly).eigenvalues().minCoeff();
        if (mineig >= 0.0) contrib = wx * wy * A.determinant() / (eps * eps);
      }
    }
    if (contrib != 0.0) ++run.accepted;
    sum += contrib;
    sum2 += contrib * contrib;
  }
  const double N = static_cast<double>(n_samples);
  run.mean = sum / N;
  const double var = std::max(0.0, sum2 / N - run.mean * run.mean);
  run.half_width = 1.96 * std::sqrt(var / N);
  return run;
}

}  // namespace detail

/// Compares the analytic lower bound for the shell measure of D with the
/// Monte Carlo estimate of the restricted normal-bundle integral, run at eps
/// and eps/2 and extrapolated linearly to eps = 0.
inline MeasureEstimate measure_estimate_check(const AbpContext& ctx, double eps, long n_samples, std::uint64_t seed = 1) {
  if (!(eps > 0)) throw Error("measure_estimate_check: eps must be positive");
  if (n_samples < 2) throw Error("measure_estimate_check: need at least 2 samples");
  MeasureEstimate r;
  r.lhs_analytic = shell_measure_lower_bound(ctx.n(), ctx.m(), ctx.k(), ctx.tau(), ctx.c0());
  r.at_eps = detail::measure_run(ctx, eps, n_samples, seed, 0);
  r.at_half = detail::measure_run(ctx, 0.5 * eps, n_samples, seed, static_cast<std::uint64_t>(n_samples));
  if (r.at_eps.accepted == 0 || r.at_half.accepted == 0) {
    throw EstimateInconclusive("measure_estimate_check: no sample landed in A over the shell");
  }
  r.rhs_extrapolated = 2.0 * r.at_half.mean - r.at_eps.mean;
  r.ci = std::sqrt(4.0 * r.at_half.half_width * r.at_half.half_width + r.at_eps.half_width * r.at_eps.half_width);
  r.slack = std::abs(r.at_half.mean - r.at_eps.mean);
  r.holds = r.lhs_analytic <= r.rhs_extrapolated + r.ci + r.slack;
  return r;
}

}  // namespace mkiso
