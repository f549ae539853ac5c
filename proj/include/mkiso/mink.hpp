#pragma once

// Pseudo-Euclidean space R^{p,q}: p spatial axes followed by q temporal axes.
// The inner product is <u,v> = sum_{i<p} u_i v_i - sum_{i>=p} u_i v_i, so the
// temporal part carries the positive-definite norm after projection.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <ostream>
#include <string>

#include "mkiso/error.hpp"

namespace mkiso {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

struct Signature {
  int space_dim = 1;
  int time_dim = 0;

  Signature() = default;
  Signature(int space, int time) : space_dim(space), time_dim(time) {
    if (space < 1 || time < 0) {
      throw Error("Signature: need space_dim >= 1 and time_dim >= 0, got (" +
                  std::to_string(space) + "," + std::to_string(time) + ")");
    }
  }

  [[nodiscard]] int dim() const { return space_dim + time_dim; }
  friend bool operator==(const Signature&, const Signature&) = default;
};

inline std::ostream& operator<<(std::ostream& os, const Signature& s) {
  return os << "R^{" << s.space_dim << "," << s.time_dim << "}";
}

// Raw-coordinate kernels. Hot loops use these directly on Eigen storage.
namespace metric {

inline double inner(const Signature& sig, const Eigen::Ref<const Vec>& u,
                    const Eigen::Ref<const Vec>& v) {
  const int p = sig.space_dim;
  const int q = sig.time_dim;
  return u.head(p).dot(v.head(p)) - u.tail(q).dot(v.tail(q));
}

inline double norm_s(const Signature& sig, const Eigen::Ref<const Vec>& v) {
  return v.head(sig.space_dim).norm();
}

inline double norm_t(const Signature& sig, const Eigen::Ref<const Vec>& v) {
  return v.tail(sig.time_dim).norm();
}

/// diag(+1,...,+1,-1,...,-1)
inline Eigen::VectorXd diagonal(const Signature& sig) {
  Vec d = Vec::Ones(sig.dim());
  d.tail(sig.time_dim).setConstant(-1.0);
  return d;
}

/// Matrix of pairwise inner products of the columns of `basis`.
inline Mat gram(const Signature& sig, const Eigen::Ref<const Mat>& basis) {
  const Vec d = diagonal(sig);
  return basis.transpose() * d.asDiagonal() * basis;
}

}  // namespace metric

class MinkVec {
 public:
  MinkVec() = default;
  MinkVec(Signature sig, Vec coords) : sig_(sig), coords_(std::move(coords)) {
    if (coords_.size() != sig_.dim()) {
      throw Error("MinkVec: coordinate count " + std::to_string(coords_.size()) +
                  " does not match " + std::to_string(sig_.dim()));
    }
  }
  MinkVec(Signature sig, std::initializer_list<double> coords)
      : MinkVec(sig, Eigen::Map<const Vec>(coords.begin(), static_cast<Eigen::Index>(coords.size()))) {}

  static MinkVec zero(Signature sig) { return {sig, Vec::Zero(sig.dim())}; }

  [[nodiscard]] const Signature& sig() const { return sig_; }
  [[nodiscard]] const Vec& coords() const { return coords_; }
  [[nodiscard]] Vec& coords() { return coords_; }
  [[nodiscard]] int size() const { return static_cast<int>(coords_.size()); }
  double operator[](int i) const { return coords_[i]; }
  double& operator[](int i) { return coords_[i]; }

  [[nodiscard]] auto spatial() const { return coords_.head(sig_.space_dim); }
  [[nodiscard]] auto temporal() const { return coords_.tail(sig_.time_dim); }

  MinkVec& operator+=(const MinkVec& o) {
    check_same(o);
    coords_ += o.coords_;
    return *this;
  }
  MinkVec& operator-=(const MinkVec& o) {
    check_same(o);
    coords_ -= o.coords_;
    return *this;
  }
  MinkVec& operator*=(double s) {
    coords_ *= s;
    return *this;
  }
  friend MinkVec operator+(MinkVec a, const MinkVec& b) { return a += b; }
  friend MinkVec operator-(MinkVec a, const MinkVec& b) { return a -= b; }
  friend MinkVec operator*(double s, MinkVec a) { return a *= s; }
  friend MinkVec operator*(MinkVec a, double s) { return a *= s; }
  friend MinkVec operator-(MinkVec a) {
    a.coords_ = -a.coords_;
    return a;
  }

  void check_same(const MinkVec& o) const {
    if (!(sig_ == o.sig_)) {
      throw SignatureMismatch("MinkVec: signature mismatch");
    }
  }

 private:
  Signature sig_{};
  Vec coords_{Vec::Zero(1)};
};

inline double mink_inner(const MinkVec& u, const MinkVec& v) {
  u.check_same(v);
  return metric::inner(u.sig(), u.coords(), v.coords());
}

/// <v,v>, which may be negative.
inline double mink_square(const MinkVec& v) { return mink_inner(v, v); }

inline MinkVec proj_s(const MinkVec& v) {
  MinkVec out = v;
  out.coords().tail(v.sig().time_dim).setZero();
  return out;
}

inline MinkVec proj_t(const MinkVec& v) {
  MinkVec out = v;
  out.coords().head(v.sig().space_dim).setZero();
  return out;
}

/// Euclidean lengths of the two projections.
inline double norm_s(const MinkVec& v) { return v.spatial().norm(); }
inline double norm_t(const MinkVec& v) { return v.temporal().norm(); }

enum class CausalClass { Spacelike, Timelike, Null };

inline const char* to_string(CausalClass c) {
  switch (c) {
    case CausalClass::Spacelike:
      return "spacelike";
    case CausalClass::Timelike:
      return "timelike";
    case CausalClass::Null:
      return "null";
  }
  return "?";
}

/// Default null-band width: 1e-12 * max(1, |coords|^2).
inline double default_null_tol(const MinkVec& v) {
  return 1e-12 * std::max(1.0, v.coords().squaredNorm());
}

inline CausalClass causal_class(const MinkVec& v, double tol) {
  if (tol < 0) throw Error("causal_class: tol must be >= 0");
  const double q = mink_square(v);
  if (q > tol) return CausalClass::Spacelike;
  if (q < -tol) return CausalClass::Timelike;
  return CausalClass::Null;
}

inline CausalClass causal_class(const MinkVec& v) { return causal_class(v, default_null_tol(v)); }

}  // namespace mkiso
