#pragma once

// Parameter domains for immersions: n-dimensional boxes (optionally periodic
// along some axes) and planar annulus sectors given in Cartesian parameters,
// so that a disk is the annulus with r0 = 0 and carries no polar singularity.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <variant>
#include <vector>

#include "mkiso/error.hpp"
#include "mkiso/mink.hpp"
#include "mkiso/quadrature.hpp"

namespace mkiso {

struct BoxDomain {
  Vec lo;
  Vec hi;
  std::vector<bool> periodic;
};

struct AnnulusDomain {
  double r0 = 0.0;
  double r1 = 1.0;
  double theta0 = 0.0;
  double theta1 = 2.0 * std::numbers::pi;

  [[nodiscard]] bool full_turn() const {
    return std::abs(theta1 - theta0 - 2.0 * std::numbers::pi) < 1e-14;
  }
  [[nodiscard]] bool has_inner_boundary() const { return r0 > 0.0; }
};

/// Parameter-space weight for integrating over the domain.
struct ParamSample {
  Vec s;
  double weight = 0.0;
};

/// Quadrature node on a boundary piece. `tangents` spans the piece (n x (n-1)),
/// `outward` points out of the domain in parameter space.
struct BoundarySample {
  Vec s;
  Mat tangents;
  Vec outward;
  double weight = 0.0;
};

class Domain {
 public:
  Domain() : Domain(AnnulusDomain{}) {}
  explicit Domain(BoxDomain b) : d_(std::move(b)) {
    const auto& box = std::get<BoxDomain>(d_);
    if (box.lo.size() != box.hi.size() || box.lo.size() < 1) throw Error("BoxDomain: bad bounds");
    if ((box.hi - box.lo).minCoeff() <= 0) throw Error("BoxDomain: empty box");
    if (box.periodic.empty()) std::get<BoxDomain>(d_).periodic.assign(box.lo.size(), false);
    if (static_cast<Eigen::Index>(std::get<BoxDomain>(d_).periodic.size()) != box.lo.size()) {
      throw Error("BoxDomain: periodic flag count mismatch");
    }
  }
  explicit Domain(AnnulusDomain a) : d_(a) {
    if (a.r0 < 0 || a.r1 <= a.r0) throw Error("AnnulusDomain: need 0 <= r0 < r1");
    if (a.theta1 <= a.theta0 || a.theta1 - a.theta0 > 2.0 * std::numbers::pi + 1e-14) {
      throw Error("AnnulusDomain: bad angular range");
    }
  }

  [[nodiscard]] bool is_box() const { return std::holds_alternative<BoxDomain>(d_); }
  [[nodiscard]] const BoxDomain& box() const { return std::get<BoxDomain>(d_); }
  [[nodiscard]] const AnnulusDomain& annulus() const { return std::get<AnnulusDomain>(d_); }

  [[nodiscard]] int dim() const { return is_box() ? static_cast<int>(box().lo.size()) : 2; }

  /// Largest extent, used to scale finite-difference steps.
  [[nodiscard]] double scale() const {
    if (is_box()) return (box().hi - box().lo).maxCoeff();
    return 2.0 * annulus().r1;
  }

  [[nodiscard]] double param_volume() const {
    if (is_box()) return (box().hi - box().lo).prod();
    const auto& a = annulus();
    return 0.5 * (a.theta1 - a.theta0) * (a.r1 * a.r1 - a.r0 * a.r0);
  }

  /// Map periodic coordinates into range. Annulus points are unchanged.
  [[nodiscard]] Vec wrap(Vec s) const {
    if (!is_box()) return s;
    const auto& b = box();
    for (int a = 0; a < s.size(); ++a) {
      if (!b.periodic[a]) continue;
      const double L = b.hi[a] - b.lo[a];
      s[a] = b.lo[a] + std::fmod(std::fmod(s[a] - b.lo[a], L) + L, L);
    }
    return s;
  }

  /// Signed parameter distance to the boundary; negative outside.
  [[nodiscard]] double boundary_distance(const Vec& s) const {
    double d = std::numeric_limits<double>::infinity();
    if (is_box()) {
      const auto& b = box();
      for (int a = 0; a < s.size(); ++a) {
        if (b.periodic[a]) continue;
        d = std::min({d, s[a] - b.lo[a], b.hi[a] - s[a]});
      }
      return d;
    }
    const auto& an = annulus();
    const double r = s.norm();
    d = an.r1 - r;
    if (an.has_inner_boundary()) d = std::min(d, r - an.r0);
    if (!an.full_turn()) {
      double th = std::atan2(s[1], s[0]);
      while (th < an.theta0) th += 2.0 * std::numbers::pi;
      const double rel = th - an.theta0;
      const double span = an.theta1 - an.theta0;
      if (rel > span) {
        // outside the sector: distance to the nearer bounding ray, negated
        const double over = std::min(rel - span, 2.0 * std::numbers::pi - rel);
        return -r * std::sin(std::min(over, std::numbers::pi / 2));
      }
      d = std::min({d, r * std::sin(std::min(rel, std::numbers::pi / 2)),
                    r * std::sin(std::min(span - rel, std::numbers::pi / 2))});
    }
    return d;
  }

  [[nodiscard]] bool contains(const Vec& s, double tol = 0.0) const { return boundary_distance(s) >= -tol; }

  /// Structured sample grid including boundary points. `res` intervals per axis.
  [[nodiscard]] std::vector<Vec> grid(int res) const {
    std::vector<Vec> pts;
    if (is_box()) {
      const auto& b = box();
      const int n = dim();
      std::vector<int> counts(n);
      for (int a = 0; a < n; ++a) counts[a] = b.periodic[a] ? res : res + 1;
      std::vector<int> idx(n, 0);
      while (true) {
        Vec s(n);
        for (int a = 0; a < n; ++a) s[a] = b.lo[a] + (b.hi[a] - b.lo[a]) * idx[a] / res;
        pts.push_back(s);
        int a = 0;
        while (a < n && ++idx[a] == counts[a]) idx[a++] = 0;
        if (a == n) break;
      }
      return pts;
    }
    const auto& an = annulus();
    const int nth = an.full_turn() ? res : res + 1;
    for (int i = 0; i <= res; ++i) {
      const double r = an.r0 + (an.r1 - an.r0) * i / res;
      if (r == 0.0) {
        pts.push_back(Vec::Zero(2));
        continue;
      }
      for (int j = 0; j < nth; ++j) {
        const double th = an.theta0 + (an.theta1 - an.theta0) * j / res;
        pts.push_back(Vec{{r * std::cos(th), r * std::sin(th)}});
      }
    }
    return pts;
  }

  /// Composite tensor-product Gauss-Legendre rule in parameter measure ds.
  [[nodiscard]] std::vector<ParamSample> quadrature(int cells, int order) const {
    std::vector<ParamSample> out;
    if (is_box()) {
      const auto& b = box();
      const int n = dim();
      std::vector<QuadRule> rules;
      for (int a = 0; a < n; ++a) rules.push_back(composite_gauss(b.lo[a], b.hi[a], cells, order));
      const int m = static_cast<int>(rules[0].nodes.size());
      std::vector<int> idx(n, 0);
      while (true) {
        ParamSample p{Vec(n), 1.0};
        for (int a = 0; a < n; ++a) {
          p.s[a] = rules[a].nodes[idx[a]];
          p.weight *= rules[a].weights[idx[a]];
        }
        out.push_back(std::move(p));
        int a = 0;
        while (a < n && ++idx[a] == m) idx[a++] = 0;
        if (a == n) break;
      }
      return out;
    }
    const auto& an = annulus();
    const QuadRule qr = composite_gauss(an.r0, an.r1, cells, order);
    const QuadRule qt = composite_gauss(an.theta0, an.theta1, cells, order);
    for (std::size_t i = 0; i < qr.nodes.size(); ++i) {
      const double r = qr.nodes[i];
      for (std::size_t j = 0; j < qt.nodes.size(); ++j) {
        const double th = qt.nodes[j];
        out.push_back({Vec{{r * std::cos(th), r * std::sin(th)}}, qr.weights[i] * qt.weights[j] * r});
      }
    }
    return out;
  }

  /// Quadrature over every boundary piece; weight is the parameter measure of the piece.
  [[nodiscard]] std::vector<BoundarySample> boundary_quadrature(int cells, int order) const {
    std::vector<BoundarySample> out;
    if (is_box()) {
      const auto& b = box();
      const int n = dim();
      for (int axis = 0; axis < n; ++axis) {
        if (b.periodic[axis]) continue;
        std::vector<int> others;
        for (int a = 0; a < n; ++a)
          if (a != axis) others.push_back(a);
        std::vector<QuadRule> rules;
        for (int a : others) rules.push_back(composite_gauss(b.lo[a], b.hi[a], cells, order));
        for (int side = 0; side < 2; ++side) {
          std::vector<int> idx(others.size(), 0);
          while (true) {
            BoundarySample bs;
            bs.s = Vec::Zero(n);
            bs.s[axis] = side == 0 ? b.lo[axis] : b.hi[axis];
            bs.tangents = Mat::Zero(n, n - 1);
            bs.outward = Vec::Zero(n);
            bs.outward[axis] = side == 0 ? -1.0 : 1.0;
            bs.weight = 1.0;
            for (std::size_t c = 0; c < others.size(); ++c) {
              bs.s[others[c]] = rules[c].nodes[idx[c]];
              bs.weight *= rules[c].weights[idx[c]];
              bs.tangents(others[c], static_cast<Eigen::Index>(c)) = 1.0;
            }
            out.push_back(std::move(bs));
            std::size_t c = 0;
            while (c < others.size() && ++idx[c] == static_cast<int>(rules[c].nodes.size())) idx[c++] = 0;
            if (c == others.size()) break;
          }
        }
      }
      return out;
    }
    const auto& an = annulus();
    const QuadRule qt = composite_gauss(an.theta0, an.theta1, cells, order);
    auto circle = [&](double r, double sign) {
      for (std::size_t j = 0; j < qt.nodes.size(); ++j) {
        const double th = qt.nodes[j];
        BoundarySample bs;
        bs.s = Vec{{r * std::cos(th), r * std::sin(th)}};
        bs.tangents = Mat(2, 1);
        bs.tangents << -r * std::sin(th), r * std::cos(th);
        bs.outward = sign * Vec{{std::cos(th), std::sin(th)}};
        bs.weight = qt.weights[j];
        out.push_back(std::move(bs));
      }
    };
    circle(an.r1, 1.0);
    if (an.has_inner_boundary()) circle(an.r0, -1.0);
    if (!an.full_turn()) {
      const QuadRule qr = composite_gauss(an.r0, an.r1, cells, order);
      for (int side = 0; side < 2; ++side) {
        const double th = side == 0 ? an.theta0 : an.theta1;
        const Vec dir{{std::cos(th), std::sin(th)}};
        const Vec nrm = side == 0 ? Vec{{std::sin(th), -std::cos(th)}} : Vec{{-std::sin(th), std::cos(th)}};
        for (std::size_t i = 0; i < qr.nodes.size(); ++i) {
          BoundarySample bs;
          bs.s = qr.nodes[i] * dir;
          bs.tangents = dir;
          bs.outward = nrm;
          bs.weight = qr.weights[i];
          out.push_back(std::move(bs));
        }
      }
    }
    return out;
  }

  /// Map two uniforms on [0,1) to a point uniformly distributed in parameter measure.
  [[nodiscard]] Vec sample_uniform(const Vec& u) const {
    if (is_box()) {
      const auto& b = box();
      return b.lo.array() + (b.hi - b.lo).array() * u.array();
    }
    const auto& an = annulus();
    const double r = std::sqrt(an.r0 * an.r0 + u[0] * (an.r1 * an.r1 - an.r0 * an.r0));
    const double th = an.theta0 + u[1] * (an.theta1 - an.theta0);
    return Vec{{r * std::cos(th), r * std::sin(th)}};
  }

 private:
  std::variant<BoxDomain, AnnulusDomain> d_;
};

}  // namespace mkiso
