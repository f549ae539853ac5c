#include <gtest/gtest.h>

#include "mkiso/corpus.hpp"
#include "mkiso/neumann.hpp"

using namespace mkiso;

namespace {

constexpr double kPi = std::numbers::pi;

DensityField zero_density(const SurfaceMesh& M) { return {Vec::Zero(M.num_vertices()), DensityKind::Custom, 0}; }

/// Max-norm error against a closed form after removing its discrete mean.
double max_error(const SurfaceMesh& M, const Vec& u, const std::function<double(const Vec&)>& exact) {
  const Vec m = M.lumped_mass();
  Vec e(M.num_vertices());
  for (int v = 0; v < M.num_vertices(); ++v) e[v] = exact(M.params()->col(v));
  e.array() -= e.dot(m) / m.sum();
  return (u - e).cwiseAbs().maxCoeff();
}

}  // namespace

TEST(ComputeCf, FlatDiskZeroAndConstantDensity) {
  const auto M = mesh_from_parametric(flat_disk(), 64);
  const double cf0 = compute_cf(M, zero_density(M));
  EXPECT_NEAR(cf0, 2.0, 1e-3);
  EXPECT_NEAR(cf0, M.boundary_volume() / M.volume(), 1e-12);
  DensityField f{Vec::Constant(M.num_vertices(), 0.7), DensityKind::Custom, 0};
  EXPECT_NEAR(compute_cf(M, f), cf0 + 0.7, 1e-13);
  f.values[0] = -1;
  EXPECT_THROW(compute_cf(M, f), Error);
}

TEST(ComputeCf, CatenoidAgainstClosedForms) {
  const auto S = elliptic_catenoid(1.0, 0.5, 2.0);
  const auto M = mesh_from_parametric(S, 64);
  const auto f = density_from_curvature(vertex_curvature(M, S), DensityKind::Thm1);
  EXPECT_LT(f.values.maxCoeff(), 1e-7);
  auto F = [](double r) { return 0.5 * (r * std::sqrt(r * r + 1) - std::asinh(r)); };
  const double A = 2 * kPi * (F(2.0) - F(0.5));
  const double L = 2 * kPi * (0.5 + 2.0);
  EXPECT_NEAR(compute_cf(M, f), L / A, 2e-3 * L / A);
}

TEST(Density, Thm2IdentityAndReduction) {
  CurvatureData c;
  c.H_s_norm = 0.3;
  c.H_t_norm = 0.4;
  for (double tau : {1.0, 1.5, 7.0}) {
    const double a = (1 + std::sqrt(std::pow(tau, 4) - 1)) / tau;
    EXPECT_NEAR(thm2_density(c, tau), a * 0.3 + std::sqrt(tau * tau + 1) * 0.4, 1e-13);
  }
  c.H_t_norm = 0;
  EXPECT_DOUBLE_EQ(thm2_density(c, 1.0), 0.3);
  c.H_mink_sq = 1e-20;
  EXPECT_EQ(thm1_density(c), 0.0);
}

TEST(Stiffness, SymmetricPsdWithConstantKernel) {
  const auto M = mesh_from_parametric(elliptic_catenoid(1.0, 0.5, 2.0), 12);
  const SpMat K = assemble_stiffness(M);
  const Mat Kd(K);
  EXPECT_LT((Kd - Kd.transpose()).norm(), 1e-12 * Kd.norm());
  EXPECT_LT((Kd * Vec::Ones(M.num_vertices())).norm(), 1e-10);
  Eigen::SelfAdjointEigenSolver<Mat> es(Kd);
  EXPECT_GT(es.eigenvalues()[0], -1e-10);
  EXPECT_GT(es.eigenvalues()[1], 1e-6);
}

TEST(Stiffness, BoostInvariant) {
  const auto A = mesh_from_parametric(flat_disk(), 8);
  const auto B = mesh_from_parametric(boosted_disk(0.7), 8);
  EXPECT_LT((Mat(assemble_stiffness(A)) - Mat(assemble_stiffness(B))).norm(), 1e-10);
}

TEST(SolveNeumann, FlatDiskClosedForm) {
  auto exact = [](const Vec& x) { return 0.5 * x.squaredNorm(); };
  std::vector<double> errs;
  for (int res : {16, 32, 64, 128}) {
    const auto M = mesh_from_parametric(flat_disk(), res);
    const auto sol = solve_neumann(M, zero_density(M), 1.0);
    errs.push_back(max_error(M, sol.u, exact));
    EXPECT_LT(sol.compat_residual, 1e-10);
    EXPECT_LT(std::abs(sol.u.dot(M.lumped_mass())), 1e-12);
  }
  EXPECT_LT(errs.back(), 2e-3);
  for (std::size_t i = 1; i < errs.size(); ++i) EXPECT_GE(std::log2(errs[i - 1] / errs[i]), 1.8);
}

TEST(SolveNeumann, ManufacturedSaddle) {
  // u = x1^2 - x2^2 is harmonic with flux 2 (x1^2 - x2^2) on the unit circle.
  auto exact = [](const Vec& x) { return x[0] * x[0] - x[1] * x[1]; };
  std::vector<double> errs;
  for (int res : {16, 32, 64, 128}) {
    const auto M = mesh_from_parametric(flat_disk(), res);
    Vec flux(M.num_vertices());
    for (int v = 0; v < M.num_vertices(); ++v) flux[v] = 2 * exact(M.params()->col(v));
    const auto sol = solve_neumann_general(M, Vec::Zero(M.num_vertices()), flux);
    errs.push_back(max_error(M, sol.u, exact));
  }
  for (std::size_t i = 1; i < errs.size(); ++i) EXPECT_GE(std::log2(errs[i - 1] / errs[i]), 1.8) << i;
}

TEST(SolveNeumann, GreenIdentityOnCorpus) {
  for (const auto& e : corpus_entries()) {
    const auto S = corpus(e.name);
    const auto M = mesh_from_parametric(S, 32);
    const double tau = slope_field(S).tau;
    const auto kind = S.m() == 0 ? DensityKind::Thm1 : DensityKind::Thm2;
    const auto f = density_from_curvature(vertex_curvature(M, S), kind, tau);
    const auto sol = solve_neumann(M, f, 1.0);
    EXPECT_LT(sol.compat_residual, 1e-10) << e.name;
    EXPECT_LT(sol.pre_projection_residual, 1e-10) << e.name;
    EXPECT_LT(sol.linear_residual, 1e-10) << e.name;
    EXPECT_TRUE(sol.warning.empty()) << e.name;
    EXPECT_GT(region_U_fraction(M, sol), 0.5) << e.name;
  }
}

TEST(SolveNeumann, LinearInC0) {
  const auto S = elliptic_catenoid(1.0, 0.5, 2.0);
  const auto M = mesh_from_parametric(S, 16);
  const auto f = density_from_curvature(vertex_curvature(M, S), DensityKind::Thm1);
  const auto s1 = solve_neumann(M, f, 1.0);
  const auto s3 = solve_neumann(M, f, 3.0);
  EXPECT_LT((s3.u - 3.0 * s1.u).cwiseAbs().maxCoeff(), 1e-12 * std::max(1.0, s3.u.cwiseAbs().maxCoeff()));
  EXPECT_DOUBLE_EQ(s1.c_f, s3.c_f);
}

TEST(SolveNeumann, IterativeFallbackAgrees) {
  const auto M = mesh_from_parametric(flat_disk(), 16);
  NeumannOptions o;
  o.force_iterative = true;
  const auto a = solve_neumann(M, zero_density(M), 1.0);
  const auto b = solve_neumann(M, zero_density(M), 1.0, o);
  EXPECT_EQ(b.solver, "bicgstab");
  EXPECT_EQ(a.solver, "sparse-lu");
  EXPECT_LT((a.u - b.u).cwiseAbs().maxCoeff(), 1e-8);
}

TEST(SolveNeumann, ErrorsOnBadInput) {
  const auto M = mesh_from_parametric(flat_disk(), 4);
  EXPECT_THROW(solve_neumann(M, zero_density(M), 0.0), Error);
  const Signature sig(2, 1);
  Mat D = Mat::Zero(3, 6);
  D.col(1) << 1, 0, 0;
  D.col(2) << 0, 1, 0;
  D.col(3) << 5, 5, 0;
  D.col(4) << 6, 5, 0;
  D.col(5) << 5, 6, 0;
  const SurfaceMesh two(sig, 2, D, {0, 1, 2, 3, 4, 5});
  EXPECT_THROW(solve_neumann(two, zero_density(two), 1.0), NotConnected);
}

TEST(GradientField, FlatDiskIsPosition) {
  const auto M = mesh_from_parametric(flat_disk(), 32);
  const auto sol = solve_neumann(M, zero_density(M), 1.0);
  double err = 0;
  for (int c = 0; c < M.num_cells(); ++c) {
    Vec b = Vec::Zero(4);
    for (int v : M.cell(c)) b += M.vertex(v) / 3.0;
    err = std::max(err, (sol.grad_u.col(c) - b).norm());
  }
  EXPECT_LT(err, 0.1);
  EXPECT_EQ(gradient_field(M, Vec::Constant(M.num_vertices(), 2.5)).norm(), 0.0);
}

TEST(GradientField, TangentAndBoostEquivariant) {
  const double beta = 0.6;
  const auto A = mesh_from_parametric(flat_disk(), 16);
  const auto B = mesh_from_parametric(boosted_disk(beta), 16);
  const auto sa = solve_neumann(A, zero_density(A), 1.0);
  const auto sb = solve_neumann(B, zero_density(B), 1.0);
  Mat boost = Mat::Identity(4, 4);
  boost(0, 0) = boost(2, 2) = std::cosh(beta);
  boost(0, 2) = boost(2, 0) = std::sinh(beta);
  EXPECT_LT((boost * sa.grad_u - sb.grad_u).cwiseAbs().maxCoeff(), 1e-8);
  // Tangency: the normal part vanishes.
  for (int c = 0; c < B.num_cells(); ++c) {
    const auto fr = build_frame(SpacelikeSubspace(B.sig(), B.cell_edges(c)));
    const Vec g = sb.grad_u.col(c);
    EXPECT_LT((g - detail::project_onto_raw(fr, g)).norm(), 1e-10);
  }
}

TEST(SolveNeumann, FluxErrorShrinks) {
  double prev = 1e9;
  for (int res : {8, 16, 32}) {
    const auto M = mesh_from_parametric(flat_disk(), res);
    const double e = solve_neumann(M, zero_density(M), 1.0).boundary_flux_error;
    EXPECT_LT(e, prev);
    prev = e;
  }
}
