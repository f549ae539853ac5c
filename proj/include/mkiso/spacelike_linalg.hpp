#pragma once

// Linear algebra of a spacelike n-plane L in R^{n+m,k}.
//
// pi_s restricted to L is injective, so L is the graph of a map B from
// H = pi_s(L) to the temporal axes. The SVD of B (Euclidean metrics on both
// sides) gives orthonormal e_j^+ spanning H, orthonormal e_j^- spanning the
// temporal axes and singular values 0 <= lambda_j < 1 with
//
//   L   = span{ (e_j^+ + lambda_j e_j^-) / sqrt(1 - lambda_j^2) }   (orthonormal)
//   N^+ = span{ e_j^+ : j > n }                                     (spacelike)
//   N^- = span{ (lambda_j e_j^+ + e_j^-) / sqrt(1 - lambda_j^2) }   (timelike)
//
// and slope tau(L) = 1 / sqrt(1 - lambda_1^2).

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "mkiso/error.hpp"
#include "mkiso/mink.hpp"

namespace mkiso {

struct SubspaceOptions {
  /// Smallest/largest Gram eigenvalue ratio below which the basis is rejected.
  double ill_conditioned_ratio = 1e-10;
  /// Singular values below this are set to exactly zero.
  double lambda_zero_tol = 1e-13;
};

class SpacelikeSubspace {
 public:
  /// Columns of `basis` are ambient coordinate vectors.
  SpacelikeSubspace(Signature sig, Mat basis, const SubspaceOptions& opt = {})
      : sig_(sig), basis_(std::move(basis)) {
    if (basis_.rows() != sig_.dim()) {
      throw SignatureMismatch("SpacelikeSubspace: basis rows do not match signature");
    }
    if (basis_.cols() < 1 || basis_.cols() > sig_.space_dim) {
      throw Error("SpacelikeSubspace: dimension must be in [1, space_dim]");
    }
    gram_ = metric::gram(sig_, basis_);
    Eigen::SelfAdjointEigenSolver<Mat> es(gram_, Eigen::EigenvaluesOnly);
    const double lo = es.eigenvalues().minCoeff();
    const double hi = es.eigenvalues().maxCoeff();
    if (!(lo > 0.0)) {
      throw NotSpacelike("SpacelikeSubspace: Gram matrix not positive definite (min eigenvalue " +
                         std::to_string(lo) + ")");
    }
    if (lo < opt.ill_conditioned_ratio * hi) {
      throw IllConditioned("SpacelikeSubspace: Gram eigenvalue ratio " + std::to_string(lo / hi) +
                           " below threshold");
    }
    opt_ = opt;
  }

  SpacelikeSubspace(const std::vector<MinkVec>& basis, const SubspaceOptions& opt = {})
      : SpacelikeSubspace(checked_sig(basis), stack(basis), opt) {}

  [[nodiscard]] const Signature& sig() const { return sig_; }
  [[nodiscard]] const Mat& basis() const { return basis_; }
  [[nodiscard]] const Mat& gram() const { return gram_; }
  [[nodiscard]] int dim() const { return static_cast<int>(basis_.cols()); }
  [[nodiscard]] int codim_space() const { return sig_.space_dim - dim(); }
  [[nodiscard]] const SubspaceOptions& options() const { return opt_; }

 private:
  static Signature checked_sig(const std::vector<MinkVec>& basis) {
    if (basis.empty()) throw Error("SpacelikeSubspace: empty basis");
    for (const auto& b : basis) basis.front().check_same(b);
    return basis.front().sig();
  }
  static Mat stack(const std::vector<MinkVec>& basis) {
    Mat m(basis.front().size(), static_cast<Eigen::Index>(basis.size()));
    for (std::size_t j = 0; j < basis.size(); ++j) m.col(static_cast<Eigen::Index>(j)) = basis[j].coords();
    return m;
  }

  Signature sig_;
  Mat basis_;
  Mat gram_;
  SubspaceOptions opt_{};
};

/// Adapted frame of a spacelike subspace. Columns are ambient vectors.
struct SpacelikeFrame {
  Signature sig;
  int n = 0;       // dim L
  int m = 0;       // space_dim - n
  int k = 0;       // time_dim
  Mat e_plus;      // dim x (n+m), orthonormal spatial; first n span pi_s(L)
  Mat e_minus;     // dim x k, orthonormal temporal
  Vec lambdas;     // n entries, descending, >= 0
  double tau = 1;  // 1 / sqrt(1 - lambda_1^2)
  Mat L_basis_orthonormal;  // dim x n

  [[nodiscard]] double lambda(int j) const { return j < lambdas.size() ? lambdas[j] : 0.0; }
};

struct NormalSplit {
  Mat n_plus;   // dim x m, spacelike orthonormal
  Mat n_minus;  // dim x k, timelike, <v,v> = -1
};

inline SpacelikeFrame build_frame(const SpacelikeSubspace& L) {
  const Signature sig = L.sig();
  const int N = sig.space_dim;
  const int k = sig.time_dim;
  const int n = L.dim();
  const Mat S = L.basis().topRows(N);
  const Mat T = L.basis().bottomRows(k);

  Eigen::HouseholderQR<Mat> qr(S);
  const Mat Q = qr.householderQ() * Mat::Identity(N, N);
  const Mat R = qr.matrixQR().topLeftCorner(n, n).triangularView<Eigen::Upper>();
  if (R.diagonal().cwiseAbs().minCoeff() == 0.0) {
    throw NotSpacelike("build_frame: spatial projection of L is not injective");
  }

  SpacelikeFrame fr;
  fr.sig = sig;
  fr.n = n;
  fr.m = N - n;
  fr.k = k;
  fr.lambdas = Vec::Zero(n);

  Mat V = Mat::Identity(n, n);
  Mat U = Mat::Identity(k, k);
  if (k > 0) {
    // B = T R^{-1}, the graph map in the orthonormal basis Q1 of H.
    const Mat B = R.transpose().triangularView<Eigen::Lower>().solve(T.transpose()).transpose();
    Eigen::JacobiSVD<Mat> svd(B, Eigen::ComputeFullU | Eigen::ComputeFullV);
    V = svd.matrixV();
    U = svd.matrixU();
    const Vec& sv = svd.singularValues();
    for (int j = 0; j < std::min(n, k); ++j) {
      fr.lambdas[j] = sv[j] < L.options().lambda_zero_tol ? 0.0 : sv[j];
    }
  }
  if (n > 0 && fr.lambdas[0] >= 1.0) {
    throw NotSpacelike("build_frame: singular value >= 1");
  }

  fr.e_plus = Mat::Zero(sig.dim(), N);
  fr.e_plus.topLeftCorner(N, n) = Q.leftCols(n) * V;
  fr.e_plus.topRightCorner(N, N - n) = Q.rightCols(N - n);
  fr.e_minus = Mat::Zero(sig.dim(), k);
  fr.e_minus.bottomRows(k) = U;

  fr.tau = 1.0 / std::sqrt(1.0 - fr.lambdas[0] * fr.lambdas[0]);

  fr.L_basis_orthonormal.resize(sig.dim(), n);
  for (int j = 0; j < n; ++j) {
    const double lj = fr.lambdas[j];
    Vec col = fr.e_plus.col(j);
    if (j < k) col += lj * fr.e_minus.col(j);
    fr.L_basis_orthonormal.col(j) = col / std::sqrt(1.0 - lj * lj);
  }
  return fr;
}

inline double slope(const SpacelikeSubspace& L) { return build_frame(L).tau; }

inline NormalSplit normal_split(const SpacelikeFrame& fr) {
  NormalSplit ns;
  ns.n_plus = fr.e_plus.rightCols(fr.m);
  ns.n_minus.resize(fr.sig.dim(), fr.k);
  for (int j = 0; j < fr.k; ++j) {
    const double lj = fr.lambda(j);
    Vec col = fr.e_minus.col(j);
    if (j < fr.n) col += lj * fr.e_plus.col(j);
    ns.n_minus.col(j) = col / std::sqrt(1.0 - lj * lj);
  }
  return ns;
}

inline NormalSplit normal_split(const SpacelikeSubspace& L) { return normal_split(build_frame(L)); }

namespace detail {

inline Vec project_onto_raw(const SpacelikeFrame& fr, const Eigen::Ref<const Vec>& v) {
  Vec out = Vec::Zero(v.size());
  for (int j = 0; j < fr.n; ++j) {
    const double lj = fr.lambda(j);
    const double vp = fr.e_plus.col(j).dot(v);
    const double vm = j < fr.k ? fr.e_minus.col(j).dot(v) : 0.0;
    Vec dir = fr.e_plus.col(j);
    if (j < fr.k) dir += lj * fr.e_minus.col(j);
    out += ((vp - lj * vm) / (1.0 - lj * lj)) * dir;
  }
  return out;
}

}  // namespace detail

/// Minkowski-orthogonal projection onto L.
inline MinkVec project_onto(const SpacelikeFrame& fr, const MinkVec& v) {
  if (!(v.sig() == fr.sig)) throw SignatureMismatch("project_onto: signature mismatch");
  return {fr.sig, detail::project_onto_raw(fr, v.coords())};
}

inline MinkVec project_onto(const SpacelikeSubspace& L, const MinkVec& v) {
  return project_onto(build_frame(L), v);
}

/// The three normal-space pieces of v together with their norms.
struct Decomposition {
  Vec along_L;
  Vec along_Nplus;
  Vec along_Nminus;
  double norm_L = 0;       // |pi_L v|, L is spacelike
  double norm_Nplus = 0;   // |pi_{N+} v|
  double norm_Nminus = 0;  // positive-definite norm on N^-
};

inline Decomposition decompose(const SpacelikeFrame& fr, const NormalSplit& ns,
                               const Eigen::Ref<const Vec>& v) {
  Decomposition d;
  d.along_L = detail::project_onto_raw(fr, v);
  d.along_Nplus = Vec::Zero(v.size());
  for (int j = 0; j < ns.n_plus.cols(); ++j) {
    d.along_Nplus += ns.n_plus.col(j).dot(v) * ns.n_plus.col(j);
  }
  d.along_Nminus = Vec::Zero(v.size());
  double s2 = 0.0;
  for (int j = 0; j < ns.n_minus.cols(); ++j) {
    const double c = metric::inner(fr.sig, ns.n_minus.col(j), v);
    d.along_Nminus -= c * ns.n_minus.col(j);  // <n_j, n_j> = -1
    s2 += c * c;
  }
  d.norm_L = std::sqrt(std::max(0.0, metric::inner(fr.sig, d.along_L, d.along_L)));
  d.norm_Nplus = d.along_Nplus.norm();
  d.norm_Nminus = std::sqrt(s2);
  return d;
}

/// Slack of each projection bound at v: (rhs - lhs) for bounds (1), (2a), (2b).
struct ProjectionBounds {
  double lhs1 = 0, rhs1 = 0;
  double lhs2a = 0, rhs2a = 0;
  double lhs2b = 0, rhs2b = 0;
  double completeness_residual = 0;

  [[nodiscard]] bool holds(double slack) const {
    return lhs1 <= rhs1 + slack && lhs2a <= rhs2a + slack && lhs2b <= rhs2b + slack;
  }
};

inline ProjectionBounds projection_bounds(const SpacelikeFrame& fr, const NormalSplit& ns,
                                          const Eigen::Ref<const Vec>& v) {
  const Decomposition d = decompose(fr, ns, v);
  const double s = metric::norm_s(fr.sig, v);
  const double t = metric::norm_t(fr.sig, v);
  const double tau = fr.tau;
  const double tc = std::sqrt(std::max(0.0, tau * tau - 1.0));
  ProjectionBounds b;
  b.lhs1 = d.norm_L;
  b.rhs1 = tau * s + tc * t;
  b.lhs2a = d.norm_Nplus;
  b.rhs2a = s;
  b.lhs2b = d.norm_Nminus;
  b.rhs2b = tc * s + tau * t;
  b.completeness_residual = (d.along_L + d.along_Nplus + d.along_Nminus - v).norm();
  return b;
}

/// A vector attaining bound (1): cos(phi) e_1^+ - sin(phi) e_1^-.
inline Vec sharpness_witness(const SpacelikeFrame& fr, double phi) {
  Vec v = std::cos(phi) * fr.e_plus.col(0);
  if (fr.k > 0) v -= std::sin(phi) * fr.e_minus.col(0);
  return v;
}

}  // namespace mkiso
