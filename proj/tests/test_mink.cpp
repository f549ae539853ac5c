#include <gtest/gtest.h>

#include <random>

#include "mkiso/mink.hpp"

using namespace mkiso;

TEST(Signature, RejectsEmptySpace) {
  EXPECT_THROW(Signature(0, 1), Error);
  EXPECT_THROW(Signature(1, -1), Error);
  EXPECT_NO_THROW(Signature(1, 0));
}

TEST(MinkInner, SpatialUnitVector) {
  const Signature s(1, 1);
  EXPECT_DOUBLE_EQ(mink_inner(MinkVec(s, {1, 0}), MinkVec(s, {1, 0})), 1.0);
}

TEST(MinkInner, SignsOfTemporalPart) {
  const Signature s(2, 2);
  const MinkVec u(s, {1, 2, 3, 4});
  const MinkVec v(s, {5, 6, 7, 8});
  EXPECT_DOUBLE_EQ(mink_inner(u, v), 5 + 12 - 21 - 32);
}

TEST(MinkInner, SignatureMismatchThrows) {
  EXPECT_THROW(mink_inner(MinkVec(Signature(2, 1), {1, 0, 0}), MinkVec(Signature(1, 2), {1, 0, 0})),
               SignatureMismatch);
}

TEST(MinkInner, SquareSplitsIntoProjections) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> g;
  for (int trial = 0; trial < 200; ++trial) {
    const Signature s(1 + trial % 4, trial % 3);
    Vec c(s.dim());
    for (int i = 0; i < s.dim(); ++i) c[i] = g(rng);
    const MinkVec v(s, c);
    const double ns = norm_s(v), nt = norm_t(v);
    EXPECT_NEAR(mink_square(v), ns * ns - nt * nt, 1e-12);
    EXPECT_NEAR((proj_s(v) + proj_t(v) - v).coords().norm(), 0.0, 0.0);
  }
}

TEST(MinkInner, SymmetricAndBilinear) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> g;
  const Signature s(3, 2);
  auto rv = [&] {
    Vec c(s.dim());
    for (int i = 0; i < s.dim(); ++i) c[i] = g(rng);
    return MinkVec(s, c);
  };
  for (int t = 0; t < 100; ++t) {
    const MinkVec a = rv(), b = rv(), c = rv();
    const double al = g(rng);
    EXPECT_NEAR(mink_inner(a, b), mink_inner(b, a), 1e-14);
    EXPECT_NEAR(mink_inner(al * a + c, b), al * mink_inner(a, b) + mink_inner(c, b), 1e-12);
  }
}

TEST(CausalClass, Classification) {
  const Signature s(1, 1);
  EXPECT_EQ(causal_class(MinkVec(s, {1, 0})), CausalClass::Spacelike);
  EXPECT_EQ(causal_class(MinkVec(s, {0, 1})), CausalClass::Timelike);
  EXPECT_EQ(causal_class(MinkVec(s, {1, 1})), CausalClass::Null);
  EXPECT_EQ(causal_class(MinkVec(s, {1, 1 - 1e-14})), CausalClass::Null);
  EXPECT_EQ(causal_class(MinkVec(s, {1, 0.9}), 0.5), CausalClass::Null);
  EXPECT_THROW(causal_class(MinkVec(s, {1, 0}), -1.0), Error);
}

TEST(CausalClass, BoostPreservesClass) {
  const Signature s(1, 1);
  for (double beta : {0.1, 1.0, 3.0}) {
    const double c = std::cosh(beta), sh = std::sinh(beta);
    const MinkVec v(s, {2.0 * c + 0.5 * sh, 2.0 * sh + 0.5 * c});
    EXPECT_EQ(causal_class(v), CausalClass::Spacelike);
    EXPECT_NEAR(mink_square(v), 4.0 - 0.25, 1e-10);
  }
}
