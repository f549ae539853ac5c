#pragma once

// Benchmark surfaces with closed-form jets.
//
//   flat-disk           (x1, x2, 0.. | 0..)                         tau = 1, H = 0
//   boosted-disk        (x1 cosh b, x2 | x1 sinh b, 0..)            tau = cosh b, H = 0
//   elliptic-catenoid   (x1, x2 | a asinh(r/a), 0..)  r in [r0, r1] maximal in R^{2,1}
//   euclidean-catenoid  (x1, x2, a acosh(r/a) | 0..)  r in [r0, r1] minimal in R^3, r0 > a
//   sphere-cap          (x1, x2, sqrt(R^2 - r^2) | 0..)              |H| = 2/R
//   maximal-graph       (x1, x2 | f(x1, x2), 0..)     user polynomial f, |grad f| < 1
//
// The elliptic catenoid solves the radial maximal surface equation
// (r f' / sqrt(1 - f'^2))' = 0, i.e. r f' / sqrt(1 - f'^2) = a, giving
// f' = a / sqrt(r^2 + a^2) and f = a asinh(r / a). Its induced metric in polar
// coordinates is diag(r^2 / (r^2 + a^2), r^2) and tau(r) = sqrt(1 + a^2 / r^2).
//
// All domains are Cartesian parameter disks/annuli; graphs place the height in
// one ambient coordinate and pad remaining spatial/temporal axes with zeros.

#include <cctype>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <vector>

#include "mkiso/domain.hpp"
#include "mkiso/error.hpp"
#include "mkiso/parametric.hpp"

namespace mkiso {

using SurfaceParams = std::map<std::string, double>;

struct CorpusEntry {
  std::string name;
  std::string description;
  SurfaceParams defaults;
};

inline const std::vector<CorpusEntry>& corpus_entries() {
  static const std::vector<CorpusEntry> entries = {
      {"flat-disk", "unit disk in a Euclidean slice; params R, m (extra spatial axes), k", {{"R", 1.0}, {"m", 0}, {"k", 2}}},
      {"boosted-disk", "flat disk boosted with rapidity beta in the x1-t1 plane", {{"beta", 0.5}, {"R", 1.0}, {"m", 0}, {"k", 2}}},
      {"elliptic-catenoid", "maximal graph t = a asinh(r/a) over r0 <= r <= r1 in R^{2,1}", {{"a", 1.0}, {"r0", 0.5}, {"r1", 2.0}, {"k", 2}}},
      {"euclidean-catenoid", "minimal graph z = a acosh(r/a) over r0 <= r <= r1 in R^3", {{"a", 1.0}, {"r0", 1.2}, {"r1", 2.5}, {"k", 2}}},
      {"sphere-cap", "cap of the round sphere of radius R with polar angle angle", {{"R", 1.0}, {"angle", 0.5}, {"k", 2}}},
      {"maximal-graph", "spacelike graph t = sum c_ij x1^i x2^j over the disk of radius R", {{"R", 1.0}, {"k", 2}}},
  };
  return entries;
}

namespace detail {

inline double param_or(const SurfaceParams& p, const std::string& key, double def) {
  auto it = p.find(key);
  return it == p.end() ? def : it->second;
}

inline int int_param(const SurfaceParams& p, const std::string& key, double def) {
  const double v = param_or(p, key, def);
  if (v != std::floor(v) || v < 0) throw Error("parameter " + key + " must be a non-negative integer");
  return static_cast<int>(v);
}

/// Graph over a planar domain: ambient = (x1, x2, ...) with h(x) at `height_index`.
/// h is given by value, gradient and Hessian.
struct GraphHeight {
  std::function<double(const Vec&)> h;
  std::function<Vec(const Vec&)> grad;
  std::function<Mat(const Vec&)> hess;
};

inline Immersion graph_immersion(const Signature& sig, int height_index, GraphHeight gh) {
  return [sig, height_index, gh = std::move(gh)](const Vec& s) {
    Jet j;
    j.x = Vec::Zero(sig.dim());
    j.x[0] = s[0];
    j.x[1] = s[1];
    j.d1 = Mat::Zero(sig.dim(), 2);
    j.d1(0, 0) = 1.0;
    j.d1(1, 1) = 1.0;
    j.d2.assign(4, Vec::Zero(sig.dim()));
    if (height_index >= 0) {
      j.x[height_index] = gh.h(s);
      const Vec g = gh.grad(s);
      const Mat H = gh.hess(s);
      j.d1(height_index, 0) = g[0];
      j.d1(height_index, 1) = g[1];
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) j.d2[static_cast<std::size_t>(a * 2 + b)][height_index] = H(a, b);
    }
    return j;
  };
}

/// Radial height h(r) with derivatives f1 = h', f2 = h''.
inline GraphHeight radial_height(std::function<double(double)> f0, std::function<double(double)> f1,
                                 std::function<double(double)> f2) {
  GraphHeight gh;
  gh.h = [f0](const Vec& s) { return f0(s.norm()); };
  gh.grad = [f1](const Vec& s) {
    const double r = s.norm();
    return Vec(f1(r) * s / r);
  };
  gh.hess = [f1, f2](const Vec& s) {
    const double r = s.norm();
    const Mat P = s * s.transpose() / (r * r);
    return Mat(f2(r) * P + (f1(r) / r) * (Mat::Identity(2, 2) - P));
  };
  return gh;
}

}  // namespace detail

inline ParametricSurface flat_disk(double R = 1.0, int m = 0, int k = 2) {
  ParametricSurface S("flat-disk", Signature(2 + m, k), Domain(AnnulusDomain{0.0, R}),
                      detail::graph_immersion(Signature(2 + m, k), -1, {}));
  S.params = {{"R", R}, {"m", m}, {"k", k}};
  return S;
}

inline ParametricSurface boosted_disk(double beta, double R = 1.0, int m = 0, int k = 2) {
  if (k < 1) throw Error("boosted-disk needs k >= 1");
  const Signature sig(2 + m, k);
  const double ch = std::cosh(beta), sh = std::sinh(beta);
  Immersion imm = [sig, ch, sh](const Vec& s) {
    Jet j;
    j.x = Vec::Zero(sig.dim());
    j.x[0] = s[0] * ch;
    j.x[1] = s[1];
    j.x[sig.space_dim] = s[0] * sh;
    j.d1 = Mat::Zero(sig.dim(), 2);
    j.d1(0, 0) = ch;
    j.d1(sig.space_dim, 0) = sh;
    j.d1(1, 1) = 1.0;
    j.d2.assign(4, Vec::Zero(sig.dim()));
    return j;
  };
  ParametricSurface S("boosted-disk", sig, Domain(AnnulusDomain{0.0, R}), std::move(imm));
  S.params = {{"beta", beta}, {"R", R}, {"m", m}, {"k", k}};
  return S;
}

inline ParametricSurface elliptic_catenoid(double a, double r0, double r1, int k = 2) {
  if (a <= 0) throw Error("elliptic-catenoid: a must be positive");
  if (r0 <= 0) throw NotSpacelike("elliptic-catenoid: r0 must be positive (the graph is null at r = 0)");
  if (k < 1) throw Error("elliptic-catenoid needs k >= 1");
  const Signature sig(2, k);
  auto gh = detail::radial_height([a](double r) { return a * std::asinh(r / a); },
                                  [a](double r) { return a / std::sqrt(r * r + a * a); },
                                  [a](double r) { return -a * r / std::pow(r * r + a * a, 1.5); });
  ParametricSurface S("elliptic-catenoid", sig, Domain(AnnulusDomain{r0, r1}),
                      detail::graph_immersion(sig, sig.space_dim, std::move(gh)));
  S.params = {{"a", a}, {"r0", r0}, {"r1", r1}, {"k", k}};
  return S;
}

inline ParametricSurface euclidean_catenoid(double a, double r0, double r1, int k = 2) {
  if (a <= 0) throw Error("euclidean-catenoid: a must be positive");
  if (r0 <= a) throw Error("euclidean-catenoid: need r0 > a (graph is vertical at the waist)");
  const Signature sig(3, k);
  auto gh = detail::radial_height([a](double r) { return a * std::acosh(r / a); },
                                  [a](double r) { return a / std::sqrt(r * r - a * a); },
                                  [a](double r) { return -a * r / std::pow(r * r - a * a, 1.5); });
  ParametricSurface S("euclidean-catenoid", sig, Domain(AnnulusDomain{r0, r1}),
                      detail::graph_immersion(sig, 2, std::move(gh)));
  S.params = {{"a", a}, {"r0", r0}, {"r1", r1}, {"k", k}};
  return S;
}

/// Upper cap of the sphere of radius R, polar angle in (0, pi/2).
inline ParametricSurface sphere_cap(double R, double angle, int k = 2) {
  if (R <= 0 || angle <= 0 || angle >= std::numbers::pi / 2) {
    throw Error("sphere-cap: need R > 0 and 0 < angle < pi/2");
  }
  const Signature sig(3, k);
  auto gh = detail::radial_height([R](double r) { return std::sqrt(R * R - r * r); },
                                  [R](double r) { return -r / std::sqrt(R * R - r * r); },
                                  [R](double r) { return -R * R / std::pow(R * R - r * r, 1.5); });
  // r = 0 is regular for this graph; evaluate the Hessian there by its limit.
  auto hess = gh.hess;
  gh.hess = [hess, R](const Vec& s) {
    if (s.norm() < 1e-300) return Mat(-Mat::Identity(2, 2) / R);
    return hess(s);
  };
  auto grad = gh.grad;
  gh.grad = [grad](const Vec& s) {
    if (s.norm() < 1e-300) return Vec(Vec::Zero(2));
    return grad(s);
  };
  ParametricSurface S("sphere-cap", sig, Domain(AnnulusDomain{0.0, R * std::sin(angle)}),
                      detail::graph_immersion(sig, 2, std::move(gh)));
  S.params = {{"R", R}, {"angle", angle}, {"k", k}};
  return S;
}

/// Polynomial spacelike graph t = sum c_ij x1^i x2^j; coefficients from keys "cIJ".
inline ParametricSurface maximal_graph(const SurfaceParams& p) {
  const double R = detail::param_or(p, "R", 1.0);
  const int k = detail::int_param(p, "k", 2);
  struct Term {
    int i, j;
    double c;
  };
  std::vector<Term> terms;
  for (const auto& [key, val] : p) {
    if (key.size() == 3 && key[0] == 'c' && std::isdigit(key[1]) && std::isdigit(key[2])) {
      terms.push_back({key[1] - '0', key[2] - '0', val});
    }
  }
  auto ipow = [](double x, int e) { return e <= 0 ? 1.0 : std::pow(x, e); };
  detail::GraphHeight gh;
  gh.h = [terms, ipow](const Vec& s) {
    double v = 0;
    for (const auto& t : terms) v += t.c * ipow(s[0], t.i) * ipow(s[1], t.j);
    return v;
  };
  gh.grad = [terms, ipow](const Vec& s) {
    Vec g = Vec::Zero(2);
    for (const auto& t : terms) {
      if (t.i > 0) g[0] += t.c * t.i * ipow(s[0], t.i - 1) * ipow(s[1], t.j);
      if (t.j > 0) g[1] += t.c * t.j * ipow(s[0], t.i) * ipow(s[1], t.j - 1);
    }
    return g;
  };
  gh.hess = [terms, ipow](const Vec& s) {
    Mat H = Mat::Zero(2, 2);
    for (const auto& t : terms) {
      if (t.i > 1) H(0, 0) += t.c * t.i * (t.i - 1) * ipow(s[0], t.i - 2) * ipow(s[1], t.j);
      if (t.j > 1) H(1, 1) += t.c * t.j * (t.j - 1) * ipow(s[0], t.i) * ipow(s[1], t.j - 2);
      if (t.i > 0 && t.j > 0) {
        const double v = t.c * t.i * t.j * ipow(s[0], t.i - 1) * ipow(s[1], t.j - 1);
        H(0, 1) += v;
        H(1, 0) += v;
      }
    }
    return H;
  };
  const Signature sig(2, k);
  auto grad = gh.grad;
  ParametricSurface S("maximal-graph", sig, Domain(AnnulusDomain{0.0, R}),
                      detail::graph_immersion(sig, sig.space_dim, std::move(gh)));
  S.params = p;
  for (const Vec& s : S.domain().grid(32)) {
    if (grad(s).norm() >= 1.0) {
      throw NotSpacelike("maximal-graph: |grad f| >= 1 at (" + std::to_string(s[0]) + "," + std::to_string(s[1]) + ")");
    }
  }
  return S;
}

/// Named surface with parameter overrides on top of the defaults.
inline ParametricSurface corpus(const std::string& name, const SurfaceParams& overrides = {}) {
  const CorpusEntry* entry = nullptr;
  for (const auto& e : corpus_entries())
    if (e.name == name) entry = &e;
  if (!entry) throw UnknownSurface("unknown surface '" + name + "'");
  SurfaceParams p = entry->defaults;
  for (const auto& [k, v] : overrides) {
    if (!p.count(k) && !(name == "maximal-graph" && k.size() == 3 && k[0] == 'c')) {
      throw Error("surface " + name + " has no parameter '" + k + "'");
    }
    p[k] = v;
  }
  using detail::int_param;
  if (name == "flat-disk") return flat_disk(p["R"], int_param(p, "m", 0), int_param(p, "k", 2));
  if (name == "boosted-disk") return boosted_disk(p["beta"], p["R"], int_param(p, "m", 0), int_param(p, "k", 2));
  if (name == "elliptic-catenoid") return elliptic_catenoid(p["a"], p["r0"], p["r1"], int_param(p, "k", 2));
  if (name == "euclidean-catenoid") return euclidean_catenoid(p["a"], p["r0"], p["r1"], int_param(p, "k", 2));
  if (name == "sphere-cap") return sphere_cap(p["R"], p["angle"], int_param(p, "k", 2));
  return maximal_graph(p);
}

}  // namespace mkiso
