#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace mkiso {

struct QuadRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// Gauss-Legendre nodes/weights by Newton iteration on P_order.
inline QuadRule gauss_legendre(int order) {
  if (order < 1) throw std::invalid_argument("gauss_legendre: order must be >= 1");
  QuadRule q;
  q.nodes.resize(order);
  q.weights.resize(order);
  for (int i = 0; i < (order + 1) / 2; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (order + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= order; ++j) {
        const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = order * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int j = 2; j <= order; ++j) {
      const double p2 = ((2.0 * j - 1.0) * x * p1 - (j - 1.0) * p0) / j;
      p0 = p1;
      p1 = p2;
    }
    dp = order * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    q.nodes[i] = -x;
    q.nodes[order - 1 - i] = x;
    q.weights[i] = w;
    q.weights[order - 1 - i] = w;
  }
  if (order % 2 == 1) q.nodes[order / 2] = 0.0;
  return q;
}

/// Composite Gauss-Legendre on [a, b] with `cells` equal panels.
inline QuadRule composite_gauss(double a, double b, int cells, int order) {
  const QuadRule base = gauss_legendre(order);
  QuadRule q;
  const double h = (b - a) / cells;
  for (int c = 0; c < cells; ++c) {
    const double mid = a + (c + 0.5) * h;
    for (int i = 0; i < order; ++i) {
      q.nodes.push_back(mid + 0.5 * h * base.nodes[i]);
      q.weights.push_back(0.5 * h * base.weights[i]);
    }
  }
  return q;
}

template <class F>
double integrate(F&& f, double a, double b, int cells = 64, int order = 8) {
  const QuadRule q = composite_gauss(a, b, cells, order);
  double s = 0.0;
  for (std::size_t i = 0; i < q.nodes.size(); ++i) s += q.weights[i] * f(q.nodes[i]);
  return s;
}

}  // namespace mkiso
