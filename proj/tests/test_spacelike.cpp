#include <gtest/gtest.h>

#include <Eigen/Eigenvalues>
#include <random>

#include "mkiso/spacelike_linalg.hpp"

using namespace mkiso;

namespace {

/// Random spacelike n-subspace: a Euclidean n-plane tilted by a random
/// linear map into time with operator norm < 1.
Mat random_spacelike_basis(const Signature& sig, int n, std::mt19937_64& rng, double max_tilt = 0.9) {
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, max_tilt);
  const int N = sig.space_dim, k = sig.time_dim;
  Mat A(N, n);
  for (int i = 0; i < N; ++i)
    for (int j = 0; j < n; ++j) A(i, j) = g(rng);
  Eigen::HouseholderQR<Mat> qr(A);
  const Mat Q = qr.householderQ() * Mat::Identity(N, n);
  Mat B(k, n);
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < n; ++j) B(i, j) = g(rng);
  if (k > 0 && B.norm() > 0) {
    const double s = Eigen::JacobiSVD<Mat>(B).singularValues()(0);
    B *= u(rng) / s;
  }
  Mat basis(N + k, n);
  basis.topRows(N) = Q;
  basis.bottomRows(k) = B;
  Mat mix(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) mix(i, j) = g(rng) + (i == j ? 3.0 : 0.0);
  return basis * mix;
}

/// Slope oracle: max |pi_s v|^2 over <v,v> = 1 is the largest generalized
/// eigenvalue of (S^T S, Gram).
double slope_oracle(const Signature& sig, const Mat& basis) {
  const Mat S = basis.topRows(sig.space_dim);
  const Mat G = metric::gram(sig, basis);
  Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(S.transpose() * S, G);
  return std::sqrt(es.eigenvalues().maxCoeff());
}

Vec random_vec(int d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Vec v(d);
  for (int i = 0; i < d; ++i) v[i] = g(rng);
  return v;
}

}  // namespace

TEST(BuildFrame, EuclideanLine) {
  const Signature s(2, 1);
  Mat b(3, 1);
  b << 1, 0, 0;
  const auto fr = build_frame(SpacelikeSubspace(s, b));
  EXPECT_DOUBLE_EQ(fr.lambda(0), 0.0);
  EXPECT_DOUBLE_EQ(fr.tau, 1.0);
}

TEST(BuildFrame, BoostedLine) {
  const Signature s(1, 2);
  const double beta = 0.5;
  Mat b(3, 1);
  b << std::cosh(beta), std::sinh(beta), 0;
  const auto fr = build_frame(SpacelikeSubspace(s, b));
  EXPECT_NEAR(fr.lambda(0), std::tanh(beta), 1e-14);
  EXPECT_NEAR(fr.tau, std::cosh(beta), 1e-12);
  EXPECT_NEAR(fr.tau, 1.1276259652063807, 1e-12);
}

TEST(BuildFrame, BlockBoostTwoRapidities) {
  const Signature s(2, 2);
  const double b1 = 1.1, b2 = 0.4;
  // Boost (x1,t1) by b2 and (x2,t2) by b1, so the larger rapidity is second in input order.
  Mat basis = Mat::Zero(4, 2);
  basis(0, 0) = std::cosh(b2);
  basis(2, 0) = std::sinh(b2);
  basis(1, 1) = std::cosh(b1);
  basis(3, 1) = std::sinh(b1);
  const auto fr = build_frame(SpacelikeSubspace(s, basis));
  EXPECT_NEAR(fr.lambdas[0], std::tanh(b1), 1e-12);
  EXPECT_NEAR(fr.lambdas[1], std::tanh(b2), 1e-12);
  EXPECT_NEAR(fr.tau, std::cosh(b1), 1e-12);
}

TEST(BuildFrame, RejectsTimelikeAndNearNull) {
  const Signature s(1, 1);
  Mat t(2, 1);
  t << 0.5, 1.0;
  EXPECT_THROW(SpacelikeSubspace(s, t), NotSpacelike);
  Mat two(2, 2);
  two << 1, 0, 0, 1;
  EXPECT_THROW(SpacelikeSubspace(s, two), Error);
  const Signature s2(2, 0);
  Mat nearly(2, 2);
  nearly << 1, 1, 0, 1e-7;
  EXPECT_THROW(SpacelikeSubspace(s2, nearly), IllConditioned);
}

TEST(BuildFrame, ReconstructsSubspaceAndFrameIsOrthonormal) {
  std::mt19937_64 rng(3);
  for (auto [N, k, n] : std::vector<std::array<int, 3>>{{1, 1, 1}, {2, 2, 2}, {3, 2, 2}, {5, 2, 3}, {3, 0, 2}, {4, 3, 1}}) {
    const Signature s(N, k);
    const Mat basis = random_spacelike_basis(s, n, rng);
    const auto fr = build_frame(SpacelikeSubspace(s, basis));
    // e+ and e- orthonormal in the positive-definite sense, e+ spatial, e- temporal.
    EXPECT_NEAR((fr.e_plus.transpose() * fr.e_plus - Mat::Identity(N, N)).norm(), 0, 1e-12);
    EXPECT_NEAR(fr.e_plus.bottomRows(k).norm(), 0, 0);
    if (k > 0) {
      EXPECT_NEAR((fr.e_minus.transpose() * fr.e_minus - Mat::Identity(k, k)).norm(), 0, 1e-12);
      EXPECT_NEAR(fr.e_minus.topRows(N).norm(), 0, 0);
    }
    // The orthonormal L basis spans the input: principal angles via projection residual.
    const Mat& Lb = fr.L_basis_orthonormal;
    EXPECT_NEAR((metric::gram(s, Lb) - Mat::Identity(n, n)).norm(), 0, 1e-10);
    const Mat coef = basis.colPivHouseholderQr().solve(Lb);
    EXPECT_LT((basis * coef - Lb).norm(), 1e-8);
    // Lambdas descending and in [0,1).
    for (int j = 0; j + 1 < fr.lambdas.size(); ++j) EXPECT_GE(fr.lambdas[j], fr.lambdas[j + 1]);
    for (int j = 0; j < fr.lambdas.size(); ++j) {
      EXPECT_GE(fr.lambdas[j], 0.0);
      EXPECT_LT(fr.lambdas[j], 1.0);
      if (j >= k) {
        EXPECT_EQ(fr.lambdas[j], 0.0);
      }
    }
  }
}

TEST(Slope, EuclideanSliceIsOne) {
  const Signature s(3, 2);
  Mat b = Mat::Zero(5, 2);
  b(0, 0) = 1;
  b(2, 1) = 2;
  EXPECT_DOUBLE_EQ(slope(SpacelikeSubspace(s, b)), 1.0);
}

TEST(Slope, BoostedLineIsCosh) {
  const Signature s(1, 1);
  Mat b(2, 1);
  b << std::cosh(1.0), std::sinh(1.0);
  EXPECT_NEAR(slope(SpacelikeSubspace(s, b)), 1.5430806348152437, 1e-12);
}

TEST(Slope, AgreesWithGeneralizedEigenOracle) {
  std::mt19937_64 rng(5);
  for (int t = 0; t < 200; ++t) {
    const Signature s(2 + t % 3, 1 + t % 2);
    const int n = 1 + t % std::min(2, s.space_dim);
    const Mat basis = random_spacelike_basis(s, n, rng);
    EXPECT_NEAR(slope(SpacelikeSubspace(s, basis)), slope_oracle(s, basis), 1e-8);
  }
}

TEST(Slope, AgreesWithSamplingOracle) {
  std::mt19937_64 rng(17);
  const Signature s(3, 2);
  const Mat basis = random_spacelike_basis(s, 2, rng);
  const SpacelikeSubspace L(s, basis);
  const auto fr = build_frame(L);
  double best_s = 0, best_t = 0;
  std::normal_distribution<double> g;
  for (int i = 0; i < 1000000; ++i) {
    Vec a(2);
    a << g(rng), g(rng);
    Vec v = basis * a;
    v /= std::sqrt(metric::inner(s, v, v));
    best_s = std::max(best_s, metric::norm_s(s, v));
    best_t = std::max(best_t, metric::norm_t(s, v));
  }
  EXPECT_NEAR(best_s, fr.tau, 1e-4);
  EXPECT_LE(best_s, fr.tau + 1e-12);
  // Dual slope identity: max |pi_t v| over unit v in L is sqrt(tau^2 - 1).
  EXPECT_NEAR(best_t, std::sqrt(fr.tau * fr.tau - 1), 1e-4);
}

TEST(Slope, DualSlopeIdentityExact) {
  std::mt19937_64 rng(19);
  for (int t = 0; t < 100; ++t) {
    const Signature s(3, 2);
    const Mat basis = random_spacelike_basis(s, 2, rng);
    const auto fr = build_frame(SpacelikeSubspace(s, basis));
    const Mat T = basis.bottomRows(2);
    Eigen::GeneralizedSelfAdjointEigenSolver<Mat> es(T.transpose() * T, metric::gram(s, basis));
    EXPECT_NEAR(std::sqrt(es.eigenvalues().maxCoeff()), std::sqrt(fr.tau * fr.tau - 1), 1e-8);
  }
}

TEST(Slope, TauOneIffAllLambdasZero) {
  std::mt19937_64 rng(23);
  for (int t = 0; t < 50; ++t) {
    const Signature s(3, 2);
    const double tilt = t % 2 == 0 ? 0.0 : 0.5;
    Mat basis = random_spacelike_basis(s, 2, rng, tilt);
    const auto fr = build_frame(SpacelikeSubspace(s, basis));
    const bool all_zero = fr.lambdas.cwiseAbs().maxCoeff() < 1e-10;
    EXPECT_EQ(std::abs(fr.tau - 1.0) < 1e-12, all_zero);
  }
}

TEST(Slope, NotInvariantUnderBoosts) {
  const Signature s(2, 1);
  Mat b = Mat::Zero(3, 1);
  b(0, 0) = 1;
  const double t0 = slope(SpacelikeSubspace(s, b));
  Mat boost = Mat::Identity(3, 3);
  boost(0, 0) = boost(2, 2) = std::cosh(0.7);
  boost(0, 2) = boost(2, 0) = std::sinh(0.7);
  const double t1 = slope(SpacelikeSubspace(s, boost * b));
  EXPECT_DOUBLE_EQ(t0, 1.0);
  EXPECT_GT(t1, 1.2);
}

TEST(ProjectOnto, FixesL) {
  std::mt19937_64 rng(29);
  const Signature s(3, 2);
  const Mat basis = random_spacelike_basis(s, 2, rng);
  const SpacelikeSubspace L(s, basis);
  const MinkVec v(s, basis * Vec{{0.3, -1.2}});
  EXPECT_LT((project_onto(L, v) - v).coords().norm(), 1e-12);
}

TEST(ProjectOnto, BoostedLineSaturatesBoundOne) {
  const Signature s(1, 1);
  const double beta = 0.5;
  Mat b(2, 1);
  b << std::cosh(beta), std::sinh(beta);
  const MinkVec p = project_onto(SpacelikeSubspace(s, b), MinkVec(s, {1, 0}));
  EXPECT_NEAR(std::sqrt(mink_square(p)), std::cosh(beta), 1e-12);
}

TEST(ProjectOnto, MatchesGramLeastSquaresOracle) {
  std::mt19937_64 rng(31);
  for (int t = 0; t < 200; ++t) {
    const Signature s(2, 2);
    const int n = 1 + t % 2;
    const Mat basis = random_spacelike_basis(s, n, rng);
    const SpacelikeSubspace L(s, basis);
    const Vec v = random_vec(4, rng);
    const Vec rhs = basis.transpose() * metric::diagonal(s).asDiagonal() * v;
    const Vec a = metric::gram(s, basis).ldlt().solve(rhs);
    const Vec oracle = basis * a;
    const MinkVec p = project_onto(L, MinkVec(s, v));
    EXPECT_LT((p.coords() - oracle).norm(), 1e-10 * std::max(1.0, oracle.norm()));
    // Residual orthogonal to L.
    for (int j = 0; j < n; ++j) EXPECT_NEAR(metric::inner(s, v - p.coords(), basis.col(j)), 0, 1e-10);
  }
}

TEST(NormalSplit, EuclideanCase) {
  const Signature s(2, 1);
  Mat b(3, 1);
  b << 1, 0, 0;
  const auto ns = normal_split(SpacelikeSubspace(s, b));
  ASSERT_EQ(ns.n_plus.cols(), 1);
  ASSERT_EQ(ns.n_minus.cols(), 1);
  EXPECT_NEAR(std::abs(ns.n_plus(1, 0)), 1.0, 1e-14);
  EXPECT_NEAR(std::abs(ns.n_minus(2, 0)), 1.0, 1e-14);
}

TEST(NormalSplit, BoostedLineTimelikeNormal) {
  const Signature s(1, 2);
  const double beta = 0.6;
  Mat b(3, 1);
  b << std::cosh(beta), std::sinh(beta), 0;
  const auto ns = normal_split(SpacelikeSubspace(s, b));
  ASSERT_EQ(ns.n_plus.cols(), 0);
  ASSERT_EQ(ns.n_minus.cols(), 2);
  bool found = false;
  for (int j = 0; j < 2; ++j) {
    const Vec n = ns.n_minus.col(j);
    EXPECT_NEAR(metric::inner(s, n, n), -1.0, 1e-12);
    if (std::abs(std::abs(n[0]) - std::sinh(beta)) < 1e-12 && std::abs(std::abs(n[1]) - std::cosh(beta)) < 1e-12) found = true;
  }
  EXPECT_TRUE(found);
}

TEST(NormalSplit, OrthogonalAndSpanning) {
  std::mt19937_64 rng(37);
  for (auto [N, k, n] : std::vector<std::array<int, 3>>{{3, 2, 2}, {2, 2, 2}, {4, 1, 2}, {2, 0, 1}}) {
    const Signature s(N, k);
    const Mat basis = random_spacelike_basis(s, n, rng);
    const auto fr = build_frame(SpacelikeSubspace(s, basis));
    const auto ns = normal_split(fr);
    Mat all(N + k, N + k);
    all << fr.L_basis_orthonormal, ns.n_plus, ns.n_minus;
    Vec expect(N + k);
    expect << Vec::Ones(N), -Vec::Ones(k);
    EXPECT_LT((metric::gram(s, all) - Mat(expect.asDiagonal())).norm(), 1e-10);
  }
}

TEST(LinearBounds, FuzzAllBoundsAndCompleteness) {
  std::mt19937_64 rng(41);
  const Signature s(3, 2);
  for (int l = 0; l < 20; ++l) {
    const auto fr = build_frame(SpacelikeSubspace(s, random_spacelike_basis(s, 2, rng, 0.95)));
    const auto ns = normal_split(fr);
    for (int i = 0; i < 5000; ++i) {
      const auto b = projection_bounds(fr, ns, random_vec(5, rng));
      ASSERT_TRUE(b.holds(1e-9));
      ASSERT_LT(b.completeness_residual, 1e-9);
    }
  }
}

TEST(LinearBounds, WitnessAttainsBoundOne) {
  std::mt19937_64 rng(43);
  std::uniform_real_distribution<double> u(0, 2 * std::numbers::pi);
  for (int l = 0; l < 50; ++l) {
    const Signature s(3, 2);
    const auto fr = build_frame(SpacelikeSubspace(s, random_spacelike_basis(s, 2, rng)));
    const auto ns = normal_split(fr);
    // The witness is sharp for phi in [0, pi/2] where both coefficients are nonnegative.
    const double phi = std::fmod(u(rng), std::numbers::pi / 2);
    const auto b = projection_bounds(fr, ns, sharpness_witness(fr, phi));
    EXPECT_NEAR(b.lhs1, b.rhs1, 1e-6);
  }
}
