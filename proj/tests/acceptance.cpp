// Acceptance run: one PASS/FAIL line per criterion, with the measured numbers
// and the tolerance they were held to. Exit status is the number of failures.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "mkiso/corpus.hpp"
#include "mkiso/diagnostics.hpp"
#include "mkiso/linear_fuzz.hpp"
#include "mkiso/neumann.hpp"
#include "mkiso/theorems.hpp"

using namespace mkiso;

namespace {

constexpr double kPi = std::numbers::pi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

class Timer {
 public:
  [[nodiscard]] double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

DensityKind density_for(const ParametricSurface& S) { return S.m() == 0 ? DensityKind::Thm1 : DensityKind::Thm2; }

/// Corpus surfaces at their defaults, with a curved polynomial for maximal-graph.
std::vector<ParametricSurface> corpus_defaults() {
  std::vector<ParametricSurface> out;
  for (const auto& e : corpus_entries()) {
    if (e.name == "maximal-graph") out.push_back(corpus(e.name, {{"c20", 0.2}, {"c02", -0.1}, {"c11", 0.1}}));
    else out.push_back(corpus(e.name));
  }
  return out;
}

Outcome sharp_flat_disk() {
  Timer t;
  CheckOptions o;
  o.res = 128;
  const InequalityReport r = check_thm1(flat_disk(), o);
  const double s = t.seconds();
  const bool ok = r.ratio >= 0.99 && r.ratio <= 1.001 && s < 10;
  return {ok, fmt("lhs=%.6f rhs=%.6f (pi=%.6f) ratio=%.8f in [0.99, 1.001], %.1fs < 10s", r.lhs, r.rhs, kPi, r.ratio, s)};
}

Outcome boosted_disks() {
  bool ok = true;
  std::string d;
  for (double beta : {0.2, 0.5, 0.8, 1.2}) {
    Timer t;
    CheckOptions o;
    o.res = 128;
    const InequalityReport r = check_thm1(boosted_disk(beta), o);
    const double s = t.seconds();
    const double tau_err = std::abs(r.tau - std::cosh(beta));
    const double rel = std::abs(r.ratio / std::exp(-2 * beta) - 1);
    ok = ok && tau_err <= 1e-6 && rel <= 0.01 && s < 10;
    d += fmt("b=%.1f: |tau-cosh|=%.1e rel=%.1e %.1fs; ", beta, tau_err, rel, s);
  }
  return {ok, d + "tol tau 1e-6, ratio 1%, 10s each"};
}

Outcome linear_fuzz() {
  Timer t;
  long checked = 0, violations = 0;
  int witnesses = 0, subspaces = 0;
  double worst = -1;
  for (const LinearFuzzDims& d : {LinearFuzzDims{1, 0, 1}, LinearFuzzDims{2, 0, 2}, LinearFuzzDims{2, 1, 2}, LinearFuzzDims{3, 2, 2}}) {
    LinearFuzzOptions o;
    o.subspaces = 100;
    o.vectors = 250;
    const LinearFuzzResult r = linear_bounds_fuzz(d, o);
    checked += r.checked;
    violations += r.violations();
    witnesses += r.witnesses_found;
    subspaces += r.subspaces;
    worst = std::max(worst, r.worst_excess);
  }
  const double s = t.seconds();
  const bool ok = checked >= 100000 && violations == 0 && witnesses == subspaces && s < 60;
  return {ok, fmt("%ld vectors, %ld violations at slack 1e-9 (worst excess %.1e), witnesses %d/%d within 1e-6, %.1fs < 60s",
                  checked, violations, worst, witnesses, subspaces, s)};
}

Outcome neumann() {
  std::vector<double> errs;
  for (int res : {16, 32, 64, 128}) {
    const SurfaceMesh M = mesh_from_parametric(flat_disk(), res);
    const NeumannSolution sol = solve_neumann(M, DensityField{Vec::Zero(M.num_vertices()), DensityKind::Custom, 0}, 1.0);
    const Vec m = M.lumped_mass();
    Vec e(M.num_vertices());
    for (int v = 0; v < M.num_vertices(); ++v) e[v] = 0.5 * M.params()->col(v).squaredNorm() - 0.25;
    e.array() -= e.dot(m) / m.sum();
    errs.push_back((sol.u - e).cwiseAbs().maxCoeff());
  }
  double min_order = 1e9;
  for (std::size_t i = 1; i < errs.size(); ++i) min_order = std::min(min_order, std::log2(errs[i - 1] / errs[i]));
  double worst_green = 0;
  for (const ParametricSurface& S : corpus_defaults()) {
    const SurfaceMesh M = mesh_from_parametric(S, 64);
    const double tau = slope_field(S).tau;
    const NeumannSolution sol = solve_neumann(M, density_from_curvature(vertex_curvature(M, S), density_for(S), tau), 1.0);
    worst_green = std::max(worst_green, sol.compat_residual);
  }
  const bool ok = errs.back() < 2e-3 && min_order >= 1.8 && worst_green < 1e-10;
  return {ok, fmt("max error %.2e at 128 (< 2e-3), min order %.2f over 3 refinements (>= 1.8), Green residual %.1e on corpus (< 1e-10)",
                  errs.back(), min_order, worst_green)};
}

const std::vector<ParametricSurface>& abp_surfaces() {
  static const std::vector<ParametricSurface> s = {flat_disk(), boosted_disk(0.8), corpus("elliptic-catenoid")};
  return s;
}

Outcome jacobian_fd() {
  bool ok = true;
  std::string d;
  for (const ParametricSurface& S : abp_surfaces()) {
    const AbpContext ctx(mesh_from_parametric(S, 32), S, density_for(S));
    const JacobianSweep j = jacobian_sweep(ctx, 100, 5);
    ok = ok && j.failures == 0;
    d += fmt("%s: %d pts worst rel %.1e; ", S.name().c_str(), j.points, j.worst_rel);
  }
  return {ok, d + "tol 1e-4"};
}

Outcome jacobian_bound() {
  bool ok = true;
  std::string d;
  std::vector<ParametricSurface> surfaces = abp_surfaces();
  surfaces.push_back(corpus("euclidean-catenoid"));
  surfaces.push_back(corpus("sphere-cap"));
  for (const ParametricSurface& S : surfaces) {
    const bool flat = S.name() == "flat-disk";
    const AbpContext ctx(mesh_from_parametric(S, flat ? 64 : 32), S, density_for(S));
    const AmGmSweep a = amgm_sweep(ctx, 10000, 6);
    const bool this_ok = a.violations == 0 && a.min_det >= -1e-6 && a.min_scalar >= -1e-6 && (!flat || a.max_gap <= 1e-6);
    ok = ok && this_ok;
    d += fmt("%s: %d pts, %d viol, min det %.1e, min scalar %.2f%s; ", S.name().c_str(), a.points, a.violations, a.min_det,
             a.min_scalar, flat ? fmt(", equality gap %.1e", a.max_gap).c_str() : "");
  }
  return {ok, d + "tol 1e-6"};
}

Outcome surjectivity() {
  bool ok = true;
  std::string d;
  for (const ParametricSurface& S : corpus_defaults()) {
    const AbpContext ctx(mesh_from_parametric(S, 64), S, density_for(S));
    const SurjectivitySweep s = surjectivity_sweep(ctx, random_targets(ctx, 500, 7));
    int persisting = 0;
    if (!s.failed.empty()) {
      const AbpContext fine(mesh_from_parametric(S, 128), S, density_for(S));
      const SurjectivitySweep again = surjectivity_sweep(fine, s.failed);
      persisting = again.targets - again.passed;
    }
    ok = ok && s.pass_rate() >= 0.99 && persisting == 0;
    d += fmt("%s %.1f%% (residual %.0e, eig %.1e, %d left after refining); ", S.name().c_str(), 100 * s.pass_rate(),
             s.worst_residual, s.min_hessian_eig, persisting);
  }
  return {ok, d + "need >= 99%, residual < 1e-4, eig > -1e-6"};
}

Outcome measure_estimate() {
  Timer t;
  const AbpContext ctx(mesh_from_parametric(flat_disk(), 64), flat_disk(), DensityKind::Thm1, 1.0);
  const MeasureEstimate m = measure_estimate_check(ctx, 1e-2, 1000000, 8);
  const double s = t.seconds();
  const bool ok = m.holds && std::abs(m.lhs_analytic - kPi * kPi) < 1e-12 && s < 120;
  return {ok, fmt("lhs %.6f (pi^2) <= extrapolated %.6f + CI %.1e + slack %.1e, 1e6 samples, %.1fs < 120s", m.lhs_analytic,
                  m.rhs_extrapolated, m.ci, m.slack, s)};
}

Outcome global_checks() {
  std::vector<ParametricSurface> surfaces = {flat_disk(), boosted_disk(0.5)};
  for (double a : {0.5, 1.0, 2.0})
    for (double r0 : {0.25, 0.5}) surfaces.push_back(corpus("elliptic-catenoid", {{"a", a}, {"r0", r0}}));
  surfaces.push_back(corpus("maximal-graph", {{"c20", 0.2}, {"c02", -0.1}, {"c11", 0.1}}));
  surfaces.push_back(corpus("euclidean-catenoid"));
  for (double angle : {0.5, 1.0, 1.5}) surfaces.push_back(corpus("sphere-cap", {{"angle", angle}}));
  surfaces.push_back(corpus("flat-disk", {{"m", 1}}));
  bool ok = true;
  double worst_ratio = 0, worst_time = 0;
  int count = 0;
  for (const ParametricSurface& S : surfaces) {
    Timer t;
    const InequalityReport r = check_theorem(S, CheckOptions{});
    const double s = t.seconds();
    ok = ok && r.pass && s < 30;
    worst_ratio = std::max(worst_ratio, r.ratio - r.slack);
    worst_time = std::max(worst_time, s);
    ++count;
    if (!r.pass) std::printf("    %s: ratio %.6f slack %.2e\n", S.name().c_str(), r.ratio, r.slack);
  }
  return {ok, fmt("%d surfaces pass, max(ratio - slack) = %.4f <= 1, slowest %.1fs < 30s", count, worst_ratio, worst_time)};
}

Outcome section5_demo() {
  const auto cat = corpus("elliptic-catenoid", {{"r0", 0.25}});
  const FialaHuberReport f = fiala_huber_compare(geodesic_disk(cat, Vec{{0.5, 0.0}}, 0.05).geometry);
  const GeodesicExpansion sph = geodesic_ball_expansion(sphere_cap(1.0, 1.2), Vec{{0.4, -0.3}});
  const GeodesicExpansion ce = geodesic_ball_expansion(corpus("elliptic-catenoid"), Vec{{1.0, 0.0}});
  const bool ok = f.exceeds_euclidean && f.fh_holds && f.theorem_holds && sph.rel_error <= 0.1 && ce.rel_error <= 0.1;
  return {ok, fmt("catenoid disk A=%.6f > L^2/4pi=%.6f, A <= FH %.6f, A <= thm %.4f; expansion sphere %.4f vs %.4f, "
                  "catenoid %.4f vs %.4f (10%%)",
                  f.area, f.rhs_euclidean, f.rhs_fh, f.rhs_theorem, sph.coefficient, sph.expected, ce.coefficient,
                  ce.expected)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"sharp flat disk", sharp_flat_disk},
      {"boosted disks", boosted_disks},
      {"linear projection bounds", linear_fuzz},
      {"Neumann solver", neumann},
      {"Jacobian vs finite differences", jacobian_fd},
      {"Jacobian AM-GM bound", jacobian_bound},
      {"surjectivity onto D", surjectivity},
      {"shell measure estimate", measure_estimate},
      {"global inequality checks", global_checks},
      {"Euclidean constant fails, FH and expansion hold", section5_demo},
  };
  int failures = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    Timer t;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failures += o.pass ? 0 : 1;
    std::printf("[%s] %2zu %s: %s (%.1fs)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(), t.seconds());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(criteria.size()) - failures, criteria.size());
  return failures;
}
