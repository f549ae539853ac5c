#pragma once

// Piecewise-linear finite elements for the Neumann problem
//   Lap u = c0 (c_f - f)   on the surface,   <grad u, eta> = c0   on the boundary,
// assembled with the induced Riemannian metric of each cell.

#include <Eigen/Dense>
#include <Eigen/IterativeLinearSolvers>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "mkiso/error.hpp"
#include "mkiso/mesh.hpp"
#include "mkiso/mink.hpp"
#include "mkiso/parametric.hpp"

namespace mkiso {

using SpMat = Eigen::SparseMatrix<double>;

enum class DensityKind { Thm1, Thm2, Custom };

inline const char* to_string(DensityKind k) {
  switch (k) {
    case DensityKind::Thm1: return "thm1";
    case DensityKind::Thm2: return "thm2";
    case DensityKind::Custom: return "custom";
  }
  return "?";
}

struct DensityField {
  Vec values;  // per vertex, >= 0
  DensityKind kind = DensityKind::Custom;
  double clamped = 0.0;  // largest positive <H,H> that was clamped to zero (thm1)
};

/// sqrt(-<H,H>), clamping spacelike round-off to zero.
inline double thm1_density(const CurvatureData& c) { return std::sqrt(std::max(0.0, -c.H_mink_sq)); }

/// (1/tau + sqrt(tau^2 - 1/tau^2)) |pi_s H| + sqrt(tau^2 + 1) |pi_t H|.
inline double thm2_density(const CurvatureData& c, double tau) {
  return (1.0 / tau + std::sqrt(tau * tau - 1.0 / (tau * tau))) * c.H_s_norm + std::sqrt(tau * tau + 1.0) * c.H_t_norm;
}

inline DensityField density_from_curvature(const std::vector<CurvatureData>& curv, DensityKind kind, double tau = 1.0) {
  DensityField f;
  f.kind = kind;
  f.values.resize(static_cast<Eigen::Index>(curv.size()));
  for (std::size_t i = 0; i < curv.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    if (kind == DensityKind::Thm1) {
      f.clamped = std::max(f.clamped, curv[i].H_mink_sq);
      f.values[ii] = thm1_density(curv[i]);
    } else {
      f.values[ii] = thm2_density(curv[i], tau);
    }
  }
  return f;
}

/// Vertex curvature from the parametric twin the mesh was generated from.
inline std::vector<CurvatureData> vertex_curvature(const SurfaceMesh& M, const ParametricSurface& S) {
  if (!M.params()) throw InvalidMesh("vertex_curvature: mesh carries no parameter coordinates");
  std::vector<CurvatureData> out;
  out.reserve(static_cast<std::size_t>(M.num_vertices()));
  for (int v = 0; v < M.num_vertices(); ++v) out.push_back(second_fundamental_form(S, M.params()->col(v)));
  return out;
}

/// Vertex curvature from quadratic fits; boundary vertices take the value of
/// the nearest interior vertex in the 1-ring (or 2-ring).
inline std::vector<CurvatureData> vertex_curvature(const SurfaceMesh& M) {
  std::vector<std::optional<CurvatureData>> tmp(static_cast<std::size_t>(M.num_vertices()));
  for (int v = 0; v < M.num_vertices(); ++v)
    if (!M.is_boundary_vertex(v) && !M.vertex_cells(v).empty()) tmp[static_cast<std::size_t>(v)] = second_fundamental_form(M, v);
  std::vector<CurvatureData> out(static_cast<std::size_t>(M.num_vertices()));
  for (int v = 0; v < M.num_vertices(); ++v) {
    if (tmp[static_cast<std::size_t>(v)]) {
      out[static_cast<std::size_t>(v)] = *tmp[static_cast<std::size_t>(v)];
      continue;
    }
    int best = -1;
    double best_d = std::numeric_limits<double>::infinity();
    for (int w : k_ring(M, v, 2)) {
      if (!tmp[static_cast<std::size_t>(w)]) continue;
      const Vec d = M.vertex(w) - M.vertex(v);
      const double dd = std::abs(metric::inner(M.sig(), d, d));
      if (dd < best_d) {
        best_d = dd;
        best = w;
      }
    }
    if (best < 0) throw BoundaryCurvatureUnavailable("vertex_curvature: no interior vertex near " + std::to_string(v));
    out[static_cast<std::size_t>(v)] = *tmp[static_cast<std::size_t>(best)];
  }
  return out;
}

// ---------------------------------------------------------------------------
// Assembly.

namespace detail {

/// Gradients of the n+1 barycentric functions in edge coordinates (n x (n+1)).
inline Mat barycentric_gradients(int n) {
  Mat D = Mat::Zero(n, n + 1);
  D.col(0).setConstant(-1.0);
  D.rightCols(n).setIdentity();
  return D;
}

}  // namespace detail

/// Stiffness matrix K_ij = int <grad phi_i, grad phi_j> dv.
inline SpMat assemble_stiffness(const SurfaceMesh& M) {
  const int n = M.n();
  const Mat D = detail::barycentric_gradients(n);
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(M.num_cells() * (n + 1) * (n + 1)));
  for (int c = 0; c < M.num_cells(); ++c) {
    const Mat G = M.cell_gram(c);
    const Mat Kc = M.cell_volume(c) * D.transpose() * G.ldlt().solve(D);
    const auto idx = M.cell(c);
    for (int a = 0; a <= n; ++a)
      for (int b = 0; b <= n; ++b)
        trips.emplace_back(idx[static_cast<std::size_t>(a)], idx[static_cast<std::size_t>(b)], Kc(a, b));
  }
  SpMat K(M.num_vertices(), M.num_vertices());
  K.setFromTriplets(trips.begin(), trips.end());
  return K;
}

/// (L + int f dv) / A with lumped vertex integration.
inline double compute_cf(const SurfaceMesh& M, const DensityField& f) {
  if (f.values.size() != M.num_vertices()) throw InvalidMesh("compute_cf: density size mismatch");
  if ((f.values.array() < 0).any()) throw Error("compute_cf: density must be non-negative");
  const Vec m = M.lumped_mass();
  const double A = m.sum();
  if (!(A > 0)) throw InvalidMesh("compute_cf: non-positive volume");
  return (M.boundary_volume() + f.values.dot(m)) / A;
}

struct NeumannOptions {
  double compat_warn = 1e-6;     // pre-projection residual that triggers a warning
  double iterative_tol = 1e-12;  // relative residual of the fallback solver
  bool force_iterative = false;
};

struct NeumannSolution {
  Vec u;        // per vertex, mass-weighted mean zero
  Mat grad_u;   // dim x cells, ambient intrinsic gradient per cell
  double c0 = 1.0;
  double c_f = 0.0;
  double compat_residual = 0.0;          // Green identity, after projection
  double pre_projection_residual = 0.0;  // |sum b| / (c0 L) before projection
  double boundary_flux_error = 0.0;      // max over boundary faces of |<grad u, eta> - c0|
  double linear_residual = 0.0;          // |K u - b| / |b|
  std::string solver;
  std::string warning;
};

/// Outward unit conormal of a boundary face inside its owning cell.
inline Vec face_conormal(const SurfaceMesh& M, std::size_t face) {
  const auto& f = M.boundary_faces()[face];
  const auto [c, opp] = M.boundary_owner()[face];
  const Vec p0 = M.vertex(f[0]);
  const Vec q = M.vertex(M.cell(c)[static_cast<std::size_t>(opp)]) - p0;
  Vec w = -q;
  if (f.size() > 1) {
    Mat F(M.sig().dim(), static_cast<Eigen::Index>(f.size() - 1));
    for (std::size_t a = 1; a < f.size(); ++a) F.col(static_cast<Eigen::Index>(a - 1)) = M.vertex(f[a]) - p0;
    const Mat Gf = metric::gram(M.sig(), F);
    const Vec rhs = F.transpose() * metric::diagonal(M.sig()).asDiagonal() * w;
    w -= F * Gf.ldlt().solve(rhs);
  }
  return w / std::sqrt(metric::inner(M.sig(), w, w));
}

/// Ambient intrinsic gradient of the piecewise-linear interpolant, one column per cell.
inline Mat gradient_field(const SurfaceMesh& M, const Vec& u) {
  const int n = M.n();
  const Mat D = detail::barycentric_gradients(n);
  Mat out(M.sig().dim(), M.num_cells());
  for (int c = 0; c < M.num_cells(); ++c) {
    const auto idx = M.cell(c);
    Vec ul(n + 1);
    for (int a = 0; a <= n; ++a) ul[a] = u[idx[static_cast<std::size_t>(a)]];
    const Vec du = D * ul;
    const Mat E = M.cell_edges(c);
    out.col(c) = E * M.cell_gram(c).ldlt().solve(du);
  }
  return out;
}

inline Mat gradient_field(const NeumannSolution& sol, const SurfaceMesh& M) { return gradient_field(M, sol.u); }

namespace detail {

inline Vec solve_gauged(const SurfaceMesh& M, const SpMat& K, const Vec& mass, const Vec& b,
                        const NeumannOptions& opt, std::string& solver) {
  const int N = M.num_vertices();
  // [K m; m^T 0] [u; lambda] = [b; 0]
  std::vector<Eigen::Triplet<double>> trips;
  trips.reserve(static_cast<std::size_t>(K.nonZeros() + 2 * N));
  for (int k = 0; k < K.outerSize(); ++k)
    for (SpMat::InnerIterator it(K, k); it; ++it) trips.emplace_back(static_cast<int>(it.row()), static_cast<int>(it.col()), it.value());
  for (int i = 0; i < N; ++i) {
    trips.emplace_back(i, N, mass[i]);
    trips.emplace_back(N, i, mass[i]);
  }
  SpMat A(N + 1, N + 1);
  A.setFromTriplets(trips.begin(), trips.end());
  A.makeCompressed();
  Vec rhs = Vec::Zero(N + 1);
  rhs.head(N) = b;
  if (!opt.force_iterative) {
    Eigen::SparseLU<SpMat, Eigen::COLAMDOrdering<int>> lu;
    lu.compute(A);
    if (lu.info() == Eigen::Success) {
      Vec x = lu.solve(rhs);
      if (lu.info() == Eigen::Success && x.allFinite()) {
        solver = "sparse-lu";
        return x.head(N);
      }
    }
  }
  Eigen::BiCGSTAB<SpMat, Eigen::IncompleteLUT<double>> it;
  it.setTolerance(opt.iterative_tol);
  it.setMaxIterations(20 * (N + 1));
  it.compute(A);
  Vec x = it.solve(rhs);
  if (it.info() != Eigen::Success || !x.allFinite()) throw SolverFailure("solve_neumann: linear solve failed");
  solver = "bicgstab";
  return x.head(N);
}

}  // namespace detail

/// General Neumann problem Lap u = s, du/deta = g with lumped source and flux.
/// `source` and `flux` are per-vertex values; flux is read on boundary vertices only.
/// The right-hand side is projected orthogonal to constants before solving.
inline NeumannSolution solve_neumann_general(const SurfaceMesh& M, const Vec& source, const Vec& flux,
                                             const NeumannOptions& opt = {}) {
  if (!M.is_connected()) throw NotConnected("solve_neumann: mesh is not connected");
  const Vec m = M.lumped_mass();
  const Vec mb = M.boundary_mass();
  Vec b = -(source.array() * m.array()).matrix() + (flux.array() * mb.array()).matrix();
  NeumannSolution sol;
  const double scale = std::max(1e-300, (flux.array() * mb.array()).abs().sum());
  sol.pre_projection_residual = std::abs(b.sum()) / scale;
  b -= (b.sum() / m.sum()) * m;
  const SpMat K = assemble_stiffness(M);
  sol.u = detail::solve_gauged(M, K, m, b, opt, sol.solver);
  sol.u.array() -= sol.u.dot(m) / m.sum();
  const Vec Ku = K * sol.u;
  sol.linear_residual = (Ku - b).norm() / std::max(1e-300, b.norm());
  sol.grad_u = gradient_field(M, sol.u);
  return sol;
}

/// Neumann problem with Lap u = c0 (c_f - f) and <grad u, eta> = c0.
inline NeumannSolution solve_neumann(const SurfaceMesh& M, const DensityField& f, double c0 = 1.0,
                                     const NeumannOptions& opt = {}) {
  if (!(c0 > 0)) throw Error("solve_neumann: c0 must be positive");
  if (!M.is_connected()) throw NotConnected("solve_neumann: mesh is not connected");
  const Vec m = M.lumped_mass();
  const Vec mb = M.boundary_mass();
  const double L = mb.sum();
  const double cf = compute_cf(M, f);
  // Unit right-hand side; the c0 one is an exact scalar multiple of it.
  Vec b1 = -((cf - f.values.array()) * m.array()).matrix() + mb;
  NeumannSolution sol;
  sol.c0 = c0;
  sol.c_f = cf;
  sol.pre_projection_residual = std::abs(b1.sum()) / L;
  if (sol.pre_projection_residual > opt.compat_warn) {
    sol.warning = "compatibility residual " + std::to_string(sol.pre_projection_residual) + " before projection";
  }
  b1 -= (b1.sum() / m.sum()) * m;
  const Vec b = c0 * b1;
  const SpMat K = assemble_stiffness(M);
  sol.u = detail::solve_gauged(M, K, m, b, opt, sol.solver);
  const Vec Ku = K * sol.u;
  sol.linear_residual = (Ku - b).norm() / std::max(1e-300, b.norm());
  // Discrete Green identity: int Lap u = -sum (K u)_i + c0 L must equal c0 L.
  sol.compat_residual = std::abs(Ku.sum()) / (c0 * L);
  sol.grad_u = gradient_field(M, sol.u);
  for (std::size_t i = 0; i < M.boundary_faces().size(); ++i) {
    const Vec eta = face_conormal(M, i);
    const int c = M.boundary_owner()[i].first;
    sol.boundary_flux_error = std::max(sol.boundary_flux_error, std::abs(metric::inner(M.sig(), sol.grad_u.col(c), eta) - c0));
  }
  return sol;
}

/// Fraction of the area where |grad u| < c0.
inline double region_U_fraction(const SurfaceMesh& M, const NeumannSolution& sol) {
  double in = 0;
  for (int c = 0; c < M.num_cells(); ++c) {
    const Vec g = sol.grad_u.col(c);
    if (std::sqrt(std::max(0.0, metric::inner(M.sig(), g, g))) < sol.c0) in += M.cell_volume(c);
  }
  return in / M.volume();
}

}  // namespace mkiso
