#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mkiso/abp.hpp"
#include "mkiso/corpus.hpp"

using namespace mkiso;

namespace {

constexpr double kPi = std::numbers::pi;

const AbpContext& flat_ctx() {
  static const AbpContext ctx(mesh_from_parametric(flat_disk(), 32), flat_disk(), DensityKind::Thm1);
  return ctx;
}

const AbpContext& boosted_ctx() {
  static const AbpContext ctx(mesh_from_parametric(boosted_disk(0.8), 32), boosted_disk(0.8), DensityKind::Thm1);
  return ctx;
}

const AbpContext& catenoid_ctx() {
  static const auto S = corpus("elliptic-catenoid");
  static const AbpContext ctx(mesh_from_parametric(S, 32), S, DensityKind::Thm1);
  return ctx;
}

const AbpContext& euclid_catenoid_ctx() {
  static const auto S = corpus("euclidean-catenoid");
  static const AbpContext ctx(mesh_from_parametric(S, 32), S, DensityKind::Thm2);
  return ctx;
}

Vec vec2(double a, double b) { return (Vec(2) << a, b).finished(); }

/// Ambient vector of R^{2,2} from spatial and temporal parts.
Vec r22(double x1, double x2, double t1, double t2) { return (Vec(4) << x1, x2, t1, t2).finished(); }

/// The cell and barycentric coordinates of a parameter point (twin contexts).
SurfacePoint at_param(const AbpContext& ctx, const Vec& s) { return ctx.locate(s, 0); }

}  // namespace

TEST(CounterRng, DeterministicPerStream) {
  CounterRng a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  const double xa = a.uniform();
  EXPECT_EQ(xa, b.uniform());
  EXPECT_NE(xa, c.uniform());
  EXPECT_NE(xa, d.uniform());
}

TEST(CounterRng, UniformAndBallMoments) {
  CounterRng r(1, 0);
  double sum = 0, sum2 = 0;
  const int N = 200000;
  for (int i = 0; i < N; ++i) {
    const double u = r.uniform();
    ASSERT_GE(u, 0.0);
    ASSERT_LT(u, 1.0);
    sum += u;
    sum2 += u * u;
  }
  EXPECT_NEAR(sum / N, 0.5, 5e-3);
  EXPECT_NEAR(sum2 / N, 1.0 / 3.0, 5e-3);
  // uniform in the unit disk: E|v|^2 = 1/2
  double r2 = 0;
  for (int i = 0; i < N; ++i) {
    const Vec v = r.in_ball(2, 1.0);
    ASSERT_LE(v.norm(), 1.0);
    r2 += v.squaredNorm();
  }
  EXPECT_NEAR(r2 / N, 0.5, 5e-3);
}

TEST(AbpContext, SlopeAndNormalFrames) {
  for (const AbpContext* ctx : {&flat_ctx(), &boosted_ctx(), &catenoid_ctx()}) {
    EXPECT_NEAR(ctx->tau(), slope_field(*ctx->twin()).tau, 1e-12);
    const auto& M = ctx->mesh();
    for (int c = 0; c < M.num_cells(); c += 7) {
      const Mat E = M.cell_edges(c);
      const auto& ns = ctx->normal_frames()[static_cast<std::size_t>(c)];
      Mat N(E.rows(), ns.n_plus.cols() + ns.n_minus.cols());
      N << ns.n_plus, ns.n_minus;
      for (int a = 0; a < E.cols(); ++a)
        for (int j = 0; j < N.cols(); ++j) {
          const double scale = E.col(a).norm() * N.col(j).norm();
          EXPECT_LT(std::abs(metric::inner(M.sig(), E.col(a), N.col(j))) / scale, 1e-10);
        }
    }
  }
  EXPECT_NEAR(boosted_ctx().tau(), std::cosh(0.8), 1e-6);
}

TEST(RegionD, UnitSlopeIgnoresTime) {
  const auto& ctx = flat_ctx();
  EXPECT_TRUE(in_region_D(ctx, r22(0.5, 0, 3.0, -4.0)));
  EXPECT_TRUE(in_region_D(ctx, r22(0.3, 0.4 - 1e-9, 100.0, 0)));
  EXPECT_FALSE(in_region_D(ctx, r22(0.6, 0.8, 0, 0)));
}

TEST(RegionD, BoostedArithmetic) {
  const auto& ctx = boosted_ctx();
  const Vec xi = r22(0.5, 0, 0.2, 0);
  // cosh 0.8 = 1.33743, sinh 0.8 = 0.88811
  const double margin = 1.0 - 1.33743 * 0.5 - 0.88811 * 0.2;
  EXPECT_NEAR(region_D_margin(ctx, xi), margin, 1e-5);
  EXPECT_GT(margin, 0.0);
  EXPECT_TRUE(in_region_D(ctx, xi));
  // |pi_s xi| = c0 / tau sits on the boundary of D
  EXPECT_FALSE(in_region_D(ctx, r22(ctx.c0() / ctx.tau(), 0, 0, 0)));
}

TEST(Phi, FlatDiskGradientIsPosition) {
  const auto& ctx = flat_ctx();
  for (const Vec& s : {vec2(0.1, 0.2), vec2(-0.4, 0.3), vec2(0.0, -0.7)}) {
    const PointData d = ctx.evaluate(at_param(ctx, s), s);
    const NormalPoint p = ctx.normal_point(d, Vec::Zero(0), Vec::Zero(2));
    const Vec v = phi(d, p);
    // u = |x|^2 / 2 - 1/4 up to the discrete c_f, so grad u = x (c_f / 2)
    EXPECT_NEAR((v.head(2) - s).norm(), 0.0, 2e-3);
    EXPECT_NEAR(v.tail(2).norm(), 0.0, 1e-12);
  }
}

TEST(Phi, AffineInNormalDirection) {
  const auto& ctx = catenoid_ctx();
  CounterRng r(3, 0);
  for (int i = 0; i < 20; ++i) {
    const PointData d = ctx.evaluate(ctx.sample_point(r));
    const Vec c1 = r.in_ball(2, 1.0), c2 = r.in_ball(2, 1.0);
    const NormalPoint p = ctx.normal_point(d, Vec::Zero(0), c1);
    const NormalPoint q = ctx.normal_point(d, Vec::Zero(0), c1 + c2);
    const Vec w = d.normals.n_minus * c2;
    EXPECT_LT((phi(d, q) - phi(d, p) - w).norm(), 1e-12);
  }
}

TEST(Phi, NormalPartOrthogonalToTangent) {
  const auto& ctx = catenoid_ctx();
  CounterRng r(4, 0);
  for (int i = 0; i < 20; ++i) {
    const PointData d = ctx.evaluate(ctx.sample_point(r));
    const NormalPoint p = ctx.normal_point(d, Vec::Zero(0), r.in_ball(2, 2.0));
    const Vec y = phi(d, p) - d.grad_u;
    for (int a = 0; a < d.jet.d1.cols(); ++a) {
      EXPECT_LT(std::abs(metric::inner(ctx.sig(), y, d.jet.d1.col(a))), 1e-9);
      EXPECT_LT(std::abs(metric::inner(ctx.sig(), p.y, d.jet.d1.col(a))), 1e-9);
    }
  }
}

TEST(Classify, FlatDiskCentre) {
  const auto& ctx = flat_ctx();
  const Vec s = vec2(0.05, -0.02);
  const PointData d = ctx.evaluate(at_param(ctx, s), s);
  const NormalPoint p = ctx.normal_point(d, Vec::Zero(0), vec2(0.1, 0.05));
  const RegionFlags f = classify(ctx, d, p);
  EXPECT_TRUE(f.in_D);
  EXPECT_TRUE(f.in_U);
  EXPECT_TRUE(f.in_Omega);
  ASSERT_TRUE(f.in_A.has_value());
  EXPECT_TRUE(*f.in_A);
  EXPECT_NEAR(f.hessian_min_eig, 1.0, 5e-3);
}

TEST(Classify, NestingOnSampledPoints) {
  for (const AbpContext* ctx : {&flat_ctx(), &catenoid_ctx(), &euclid_catenoid_ctx()}) {
    CounterRng r(5, 0);
    int in_A = 0;
    for (int i = 0; i < 300; ++i) {
      const PointData d = ctx->evaluate(ctx->sample_point(r));
      const NormalPoint p = ctx->normal_point(d, r.in_ball(ctx->m(), 1.0), r.in_ball(ctx->k(), 1.0));
      const RegionFlags f = classify(*ctx, d, p);
      EXPECT_EQ(f.in_U, !d.on_boundary && d.grad_norm < ctx->c0());
      EXPECT_EQ(f.in_Omega, f.in_U && f.in_D);
      if (f.in_A.value_or(false)) {
        ++in_A;
        EXPECT_TRUE(f.in_Omega);
        // forward inclusion: A maps into D
        EXPECT_GT(region_D_margin(*ctx, phi(d, p)), 0.0);
      }
    }
    EXPECT_GT(in_A, 0);
  }
}

TEST(Classify, BoundaryPointIsNotInU) {
  const auto& ctx = flat_ctx();
  const auto& M = ctx.mesh();
  const auto& face = M.boundary_faces().front();
  const int c = M.boundary_owner().front().first;
  const auto idx = M.cell(c);
  Vec b = Vec::Zero(3);
  for (std::size_t i = 0; i < 3; ++i)
    if (std::find(face.begin(), face.end(), idx[i]) != face.end()) b[static_cast<Eigen::Index>(i)] = 0.5;
  const PointData d = ctx.evaluate({c, b});
  EXPECT_TRUE(d.on_boundary);
  EXPECT_FALSE(classify(ctx, d, ctx.normal_point(d, Vec::Zero(0), Vec::Zero(2))).in_U);
}

TEST(Jacobian, FlatDiskIsOne) {
  const auto& ctx = flat_ctx();
  CounterRng r(6, 0);
  for (int i = 0; i < 50; ++i) {
    const auto sp = sample_omega_point(ctx, r);
    ASSERT_TRUE(sp);
    EXPECT_NEAR(jacobian_det(ctx, sp->first, sp->second), 1.0, 2e-2);
  }
}

TEST(Jacobian, FiniteDifferenceAgreement) {
  for (const AbpContext* ctx : {&flat_ctx(), &boosted_ctx(), &catenoid_ctx(), &euclid_catenoid_ctx()}) {
    CounterRng r(8, 0);
    for (int i = 0; i < 30; ++i) {
      const auto sp = sample_omega_point(*ctx, r);
      ASSERT_TRUE(sp);
      const double a = jacobian_det(*ctx, sp->first, sp->second);
      const double f = jacobian_det_fd(*ctx, sp->first, sp->second);
      EXPECT_LT(std::abs(a - f), 1e-4 * std::max(1.0, std::abs(a))) << ctx->twin()->name();
    }
  }
}

TEST(Jacobian, MeshBackendFiniteDifference) {
  const AbpContext ctx(mesh_from_parametric(sphere_cap(1.0, 0.5), 24), std::nullopt, DensityKind::Thm1);
  CounterRng r(9, 0);
  for (int i = 0; i < 20; ++i) {
    const auto sp = sample_omega_point(ctx, r);
    ASSERT_TRUE(sp);
    const double a = jacobian_det(ctx, sp->first, sp->second);
    EXPECT_LT(std::abs(a - jacobian_det_fd(ctx, sp->first, sp->second)), 1e-4 * std::max(1.0, std::abs(a)));
  }
}

TEST(AmGm, FlatDiskEquality) {
  const auto& ctx = flat_ctx();
  CounterRng r(10, 0);
  for (int i = 0; i < 100; ++i) {
    const auto sp = sample_omega_point(ctx, r);
    ASSERT_TRUE(sp);
    const AmGmCheck c = amgm_bound_check(ctx, sp->first, sp->second);
    EXPECT_TRUE(c.ok);
    // trace is c0 c_f = 2 (1 + O(h^2)); the bound is attained up to Hessian anisotropy
    EXPECT_NEAR(c.rhs, std::pow(ctx.c0() * ctx.sol().c_f / 2.0, 2), 1e-12);
    EXPECT_LT(c.rhs - c.lhs, 1e-4);
  }
}

TEST(AmGm, StrictForDistinctEigenvalues) {
  const auto& ctx = euclid_catenoid_ctx();
  CounterRng r(11, 0);
  int strict = 0, checked = 0;
  for (int i = 0; i < 300 && checked < 100; ++i) {
    const auto sp = sample_omega_point(ctx, r);
    ASSERT_TRUE(sp);
    if (!classify(ctx, sp->first, sp->second).in_A.value_or(false)) continue;
    ++checked;
    const AmGmCheck c = amgm_bound_check(ctx, sp->first, sp->second);
    EXPECT_NO_THROW(c.require());
    EXPECT_GE(c.lhs, -1e-9);
    EXPECT_GE(c.scalar, -1e-6);
    strict += c.rhs - c.lhs > 1e-8 ? 1 : 0;
  }
  EXPECT_GT(checked, 20);
  EXPECT_EQ(strict, checked);
}

TEST(AmGm, RequireThrowsOnViolation) {
  AmGmCheck c;
  c.lhs = 2.0;
  c.rhs = 1.0;
  c.ok = false;
  EXPECT_THROW(c.require(), BoundViolation);
}

TEST(Surjectivity, FlatDiskClosedForm) {
  const auto& ctx = flat_ctx();
  const Vec xi = r22(0.3, 0, 0.7, 0);
  const SurjectivityResult s = surjectivity_check(ctx, xi);
  // w = c_f |x|^2 / 4 - <x, xi> is minimized at x = 2 pi_s(xi) / c_f
  const Vec expect = 2.0 * xi.head(2) / ctx.sol().c_f;
  EXPECT_LT((s.s - expect).norm(), 2e-3);
  EXPECT_LT((s.y - r22(0, 0, 0.7, 0)).norm(), 1e-9);
  EXPECT_LT(s.residual, 1e-6);
  EXPECT_TRUE(s.interior);
  EXPECT_TRUE(s.in_U);
  EXPECT_TRUE(s.a_condition);
}

TEST(Surjectivity, ZeroTargetFindsCriticalPoint) {
  const auto& ctx = flat_ctx();
  const SurjectivityResult s = surjectivity_check(ctx, Vec::Zero(4));
  EXPECT_LT(s.s.norm(), 2e-3);
  EXPECT_LT(s.y.norm(), 1e-12);
  EXPECT_LT(s.grad_norm, 1e-6);
}

TEST(Surjectivity, RejectsPointsOutsideD) {
  EXPECT_THROW(surjectivity_check(flat_ctx(), r22(1.5, 0, 0, 0)), Error);
}

TEST(Surjectivity, RandomTargetsOnCatenoids) {
  for (const AbpContext* ctx : {&catenoid_ctx(), &euclid_catenoid_ctx()}) {
    int good = 0;
    for (int i = 0; i < 100; ++i) {
      CounterRng r(12, static_cast<std::uint64_t>(i));
      const Vec xi = sample_in_D(*ctx, r);
      ASSERT_TRUE(in_region_D(*ctx, xi));
      const SurjectivityResult s = surjectivity_check(*ctx, xi);
      good += s.interior && s.in_U && s.residual < 1e-4 && s.a_condition ? 1 : 0;
    }
    EXPECT_GE(good, 99) << ctx->twin()->name();
  }
}

TEST(Surjectivity, MeshBackend) {
  const AbpContext ctx(mesh_from_parametric(flat_disk(), 32), std::nullopt, DensityKind::Thm1);
  const SurjectivityResult s = surjectivity_check(ctx, r22(0.3, 0, 0.7, 0));
  const Vec x = ctx.mesh_position(s.x);
  EXPECT_LT((x.head(2) - 2.0 * vec2(0.3, 0) / ctx.sol().c_f).norm(), 2e-3);
  EXPECT_LT(s.residual, 1e-6);
  EXPECT_TRUE(s.a_condition);
}

TEST(BoundaryFlux, PointsOutwardForTargetsInD) {
  for (const AbpContext* ctx : {&flat_ctx(), &boosted_ctx(), &catenoid_ctx()}) {
    for (int i = 0; i < 50; ++i) {
      CounterRng r(13, static_cast<std::uint64_t>(i));
      EXPECT_GT(boundary_flux_margin(*ctx, sample_in_D(*ctx, r)), -1e-2 * ctx->c0());
    }
  }
}

TEST(MeasureEstimate, FlatDiskConstant) {
  EXPECT_NEAR(shell_measure_lower_bound(2, 0, 2, 1.0, 1.0), kPi * kPi, 1e-12);
  // p = n + m + k - 2 = 2: doubling c0 scales the bound by 4
  EXPECT_NEAR(shell_measure_lower_bound(2, 0, 2, 1.0, 2.0), 4 * kPi * kPi, 1e-12);
  EXPECT_NEAR(shell_measure_lower_bound(2, 1, 2, 1.3, 2.0) / shell_measure_lower_bound(2, 1, 2, 1.3, 1.0), 8.0, 1e-12);
}

TEST(MeasureEstimate, FlatDiskMonteCarlo) {
  const MeasureEstimate r = measure_estimate_check(flat_ctx(), 1e-2, 20000, 42);
  EXPECT_NEAR(r.lhs_analytic, kPi * kPi, 1e-12);
  // every sample lands in A over the shell, and the integrand is det = 1 times the shell volume
  EXPECT_EQ(r.at_eps.accepted, 20000);
  EXPECT_NEAR(r.rhs_extrapolated, kPi * kPi, 2e-2);
  EXPECT_TRUE(r.holds);
}

TEST(MeasureEstimate, Deterministic) {
  const MeasureEstimate a = measure_estimate_check(catenoid_ctx(), 1e-2, 2000, 5);
  const MeasureEstimate b = measure_estimate_check(catenoid_ctx(), 1e-2, 2000, 5);
  EXPECT_EQ(a.rhs_extrapolated, b.rhs_extrapolated);
  EXPECT_EQ(a.ci, b.ci);
}

TEST(MeasureEstimate, BadArguments) {
  EXPECT_THROW(measure_estimate_check(flat_ctx(), 0.0, 100), Error);
  EXPECT_THROW(measure_estimate_check(flat_ctx(), 1e-2, 1), Error);
}
