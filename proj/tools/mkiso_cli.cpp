// mkiso: command-line driver for the verification toolkit.
//
// Every subcommand builds a list of flat records and prints them as JSON, an
// aligned table, or CSV. Exit status: 0 when every check passes, 1 when an
// inequality or pointwise check fails beyond its tolerance, 2 on bad input,
// unreadable meshes, or numerical failures that stop a check from running.

#include <CLI11.hpp>
#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "mkiso/corpus.hpp"
#include "mkiso/diagnostics.hpp"
#include "mkiso/linear_fuzz.hpp"
#include "mkiso/mesh.hpp"
#include "mkiso/neumann.hpp"
#include "mkiso/theorems.hpp"

using json = nlohmann::ordered_json;
using namespace mkiso;

namespace {

struct Report {
  std::vector<json> rows;
  bool pass = true;
};

// ---------------------------------------------------------------------------
// Output.

void flatten_into(const json& j, const std::string& prefix, json& out) {
  if (j.is_object()) {
    for (const auto& [k, v] : j.items()) flatten_into(v, prefix.empty() ? k : prefix + "." + k, out);
  } else if (j.is_array()) {
    std::string s;
    for (const auto& v : j) s += (s.empty() ? "" : ";") + (v.is_string() ? v.get<std::string>() : v.dump());
    out[prefix] = s;
  } else {
    out[prefix] = j;
  }
}

json flatten(const json& j) {
  json out = json::object();
  flatten_into(j, "", out);
  return out;
}

std::string cell_text(const json& v) {
  if (v.is_null()) return "";
  if (v.is_string()) return v.get<std::string>();
  if (v.is_boolean()) return v.get<bool>() ? "true" : "false";
  if (v.is_number_float()) {
    std::ostringstream os;
    os << std::setprecision(10) << v.get<double>();
    return os.str();
  }
  return v.dump();
}

std::vector<std::string> column_keys(const std::vector<json>& flat) {
  std::vector<std::string> keys;
  for (const auto& r : flat)
    for (const auto& [k, v] : r.items())
      if (std::find(keys.begin(), keys.end(), k) == keys.end()) keys.push_back(k);
  return keys;
}

std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) out += c == '"' ? std::string("\"\"") : std::string(1, c);
  return out + "\"";
}

void write_json(std::ostream& os, const Report& r) {
  const json doc = r.rows.size() == 1 ? r.rows.front() : json(r.rows);
  os << doc.dump(2) << "\n";
}

void write_csv(std::ostream& os, const Report& r) {
  std::vector<json> flat;
  for (const auto& row : r.rows) flat.push_back(flatten(row));
  const auto keys = column_keys(flat);
  for (std::size_t i = 0; i < keys.size(); ++i) os << (i ? "," : "") << csv_escape(keys[i]);
  os << "\n";
  for (const auto& row : flat) {
    for (std::size_t i = 0; i < keys.size(); ++i) os << (i ? "," : "") << csv_escape(row.contains(keys[i]) ? cell_text(row[keys[i]]) : "");
    os << "\n";
  }
}

void write_table(std::ostream& os, const Report& r) {
  std::vector<json> flat;
  for (const auto& row : r.rows) flat.push_back(flatten(row));
  if (flat.size() == 1) {
    std::size_t w = 0;
    for (const auto& [k, v] : flat[0].items()) w = std::max(w, k.size());
    for (const auto& [k, v] : flat[0].items()) os << std::left << std::setw(static_cast<int>(w) + 2) << k << cell_text(v) << "\n";
    return;
  }
  const auto keys = column_keys(flat);
  std::vector<std::size_t> width;
  for (const auto& k : keys) {
    std::size_t w = k.size();
    for (const auto& row : flat) w = std::max(w, row.contains(k) ? cell_text(row[k]).size() : 0);
    width.push_back(w);
  }
  for (std::size_t i = 0; i < keys.size(); ++i) os << std::left << std::setw(static_cast<int>(width[i]) + 2) << keys[i];
  os << "\n";
  for (const auto& row : flat) {
    for (std::size_t i = 0; i < keys.size(); ++i)
      os << std::left << std::setw(static_cast<int>(width[i]) + 2) << (row.contains(keys[i]) ? cell_text(row[keys[i]]) : "");
    os << "\n";
  }
}

void emit(const Report& r, std::string format, const std::string& out) {
  if (format.empty()) {
    format = "json";
    if (out.size() > 4 && out.substr(out.size() - 4) == ".csv") format = "csv";
  }
  std::ofstream file;
  if (!out.empty()) {
    file.open(out);
    if (!file) throw ParseError("cannot write " + out);
  }
  std::ostream& os = out.empty() ? std::cout : file;
  if (format == "json") write_json(os, r);
  else if (format == "csv") write_csv(os, r);
  else write_table(os, r);
}

// ---------------------------------------------------------------------------
// Inputs.

SurfaceParams parse_params(const std::string& text) {
  SurfaceParams p;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ParseError("--params: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    std::size_t used = 0;
    double v = 0;
    try {
      v = std::stod(val, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != val.size() || val.empty()) throw ParseError("--params: '" + val + "' is not a number");
    p[key] = v;
  }
  return p;
}

json params_json(const SurfaceParams& p) {
  json j = json::object();
  for (const auto& [k, v] : p) j[k] = v;
  return j;
}

json vec_json(const Eigen::Ref<const Vec>& v) {
  json j = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) j.push_back(v[i]);
  return j;
}

Vec to_vec(const std::vector<double>& v) {
  Vec out(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i < v.size(); ++i) out[static_cast<Eigen::Index>(i)] = v[i];
  return out;
}

/// Options shared by the subcommands that work on one surface.
struct SurfaceArgs {
  std::string surface;
  std::string params;
  std::string mesh;
  int res = 32;

  void add(CLI::App* app, int default_res, bool allow_mesh) {
    res = default_res;
    app->add_option("--surface", surface, "corpus surface name (see `corpus list`)");
    app->add_option("--params", params, "surface parameters as k=v,k=v");
    app->add_option("--res", res, "mesh resolution")->capture_default_str()->check(CLI::PositiveNumber);
    if (allow_mesh) app->add_option("--mesh", mesh, "read the surface from a minkmesh file instead");
  }

  [[nodiscard]] ParametricSurface parametric() const {
    if (surface.empty()) throw ParseError("--surface is required");
    return corpus(surface, parse_params(params));
  }

  [[nodiscard]] bool from_file() const { return !mesh.empty(); }

  [[nodiscard]] std::string label() const { return from_file() ? mesh : surface; }
};

struct Common {
  std::string format;
  std::string out;
  std::uint64_t seed = 1;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--format", c.format, "output format")->check(CLI::IsMember({"json", "table", "csv"}));
  app->add_option("--out", c.out, "write the report to this file");
  app->add_option("--seed", c.seed, "random seed")->capture_default_str();
}

DensityKind parse_density(const std::string& s, int m) {
  if (s.empty()) return m == 0 ? DensityKind::Thm1 : DensityKind::Thm2;
  if (s == "thm1") return DensityKind::Thm1;
  if (s == "thm2") return DensityKind::Thm2;
  if (s == "zero") return DensityKind::Custom;
  throw ParseError("--density must be thm1, thm2 or zero");
}

// ---------------------------------------------------------------------------
// Subcommands.

Report run_slope(const SurfaceArgs& a, bool per_sample) {
  Report r;
  if (a.from_file()) {
    const SurfaceMesh M = read_minkmesh_file(a.mesh);
    const SlopeField f = slope_field(M);
    r.rows.push_back({{"surface", a.label()}, {"tau", f.tau}, {"cells", M.num_cells()}});
    return r;
  }
  const ParametricSurface S = a.parametric();
  SlopeOptions o;
  o.res = a.res;
  const SlopeField f = slope_field(S, o);
  if (per_sample) {
    for (const auto& s : f.samples) r.rows.push_back({{"s", vec_json(s.s)}, {"tau", s.tau}});
    return r;
  }
  r.rows.push_back({{"surface", S.name()},
                    {"params", params_json(S.params)},
                    {"tau", f.tau},
                    {"argmax", vec_json(f.argmax)},
                    {"grid_res", f.grid_res},
                    {"converged", f.converged},
                    {"warning", f.warning}});
  return r;
}

Report run_curvature(const SurfaceArgs& a, bool per_vertex, const std::vector<double>& at) {
  Report r;
  if (!at.empty()) {
    const ParametricSurface S = a.parametric();
    const Vec s = to_vec(at);
    if (!S.domain().contains(s)) throw ParseError("--at: point is outside the parameter domain");
    const CurvatureData c = second_fundamental_form(S, s);
    json row = {{"surface", S.name()},     {"s", vec_json(s)},          {"H", vec_json(c.H)},
                {"H_s_norm", c.H_s_norm},  {"H_t_norm", c.H_t_norm},    {"H_mink_sq", c.H_mink_sq},
                {"tau", pointwise_slope(S, s)}};
    if (S.n() == 2) {
      row["gauss_K_gauss_equation"] = c.gauss_K;
      row["gauss_K_brioschi"] = gauss_curvature(S, s);
    }
    r.rows.push_back(row);
    return r;
  }
  std::optional<ParametricSurface> S;
  SurfaceMesh M = a.from_file() ? read_minkmesh_file(a.mesh) : mesh_from_parametric(*(S = a.parametric()), a.res);
  const auto curv = S ? vertex_curvature(M, *S) : vertex_curvature(M);
  if (per_vertex) {
    for (int v = 0; v < M.num_vertices(); ++v) {
      const auto& c = curv[static_cast<std::size_t>(v)];
      r.rows.push_back({{"vertex", v},
                        {"x", vec_json(M.vertex(v))},
                        {"H_s_norm", c.H_s_norm},
                        {"H_t_norm", c.H_t_norm},
                        {"H_mink_sq", c.H_mink_sq},
                        {"gauss_K", c.gauss_K},
                        {"boundary", M.is_boundary_vertex(v)}});
    }
    return r;
  }
  const Vec mass = M.lumped_mass();
  double max_hs = 0, max_ht = 0, max_hsq = -std::numeric_limits<double>::infinity(), int_K = 0;
  for (std::size_t v = 0; v < curv.size(); ++v) {
    max_hs = std::max(max_hs, curv[v].H_s_norm);
    max_ht = std::max(max_ht, curv[v].H_t_norm);
    max_hsq = std::max(max_hsq, curv[v].H_mink_sq);
    if (M.n() == 2) int_K += mass[static_cast<Eigen::Index>(v)] * curv[v].gauss_K;
  }
  json row = {{"surface", a.label()},    {"vertices", M.num_vertices()}, {"cells", M.num_cells()},
              {"max_H_s_norm", max_hs},  {"max_H_t_norm", max_ht},       {"max_H_mink_sq", max_hsq}};
  if (M.n() == 2) {
    const GaussBonnet gb = gauss_bonnet(M);
    row["integral_K"] = int_K;
    row["angle_defect_total"] = gb.interior_curvature;
    row["boundary_turning"] = gb.boundary_turning;
    row["gauss_bonnet_total"] = gb.total();
    row["two_pi_euler"] = 2 * std::numbers::pi * M.euler_characteristic();
  }
  r.rows.push_back(row);
  return r;
}

Report run_solve_neumann(const SurfaceArgs& a, const std::string& density, double c0, bool per_vertex, int quad_order) {
  Report r;
  std::optional<ParametricSurface> S;
  SurfaceMesh M = a.from_file() ? read_minkmesh_file(a.mesh) : mesh_from_parametric(*(S = a.parametric()), a.res);
  const int m = M.sig().space_dim - M.n();
  const DensityKind kind = parse_density(density, m);
  const double tau = S ? slope_field(*S).tau : slope_field(M).tau;
  DensityField f;
  if (kind == DensityKind::Custom) {
    f.values = Vec::Zero(M.num_vertices());
  } else {
    f = density_from_curvature(S ? vertex_curvature(M, *S) : vertex_curvature(M), kind, tau);
  }
  const NeumannSolution sol = solve_neumann(M, f, c0);
  if (per_vertex) {
    for (int v = 0; v < M.num_vertices(); ++v)
      r.rows.push_back({{"vertex", v}, {"x", vec_json(M.vertex(v))}, {"u", sol.u[v]}, {"f", f.values[v]}});
    return r;
  }
  r.rows.push_back({{"surface", a.label()},
                    {"density", to_string(kind)},
                    {"c0", c0},
                    {"tau", tau},
                    {"c_f", sol.c_f},
                    {"u_min", sol.u.minCoeff()},
                    {"u_max", sol.u.maxCoeff()},
                    {"compat_residual", sol.compat_residual},
                    {"pre_projection_residual", sol.pre_projection_residual},
                    {"boundary_flux_error", sol.boundary_flux_error},
                    {"linear_residual", sol.linear_residual},
                    {"region_U_fraction", region_U_fraction(M, sol)},
                    {"solver", sol.solver},
                    {"warning", sol.warning}});
  if (S && kind != DensityKind::Custom) {
    // c_f = (vol(boundary) + int f) / vol, from quadrature on the exact surface
    const QuadOptions q{.cells = 32, .order = quad_order};
    const double int_f = integrate_over(
        *S, [&](const Vec& s) { return detail::report_density(second_fundamental_form(*S, s), kind == DensityKind::Thm1 ? 0 : 1, tau); }, q);
    r.rows.back()["c_f_quad"] = (boundary_volume(*S, q) + int_f) / volume(*S, q);
  }
  return r;
}

struct AbpArgs {
  int samples = 1000;
  int targets = 100;
  double eps = -1;
  double c0 = 1.0;
  std::string density;
};

Report run_abp_diagnose(const SurfaceArgs& a, const Common& c, const AbpArgs& o) {
  const ParametricSurface S = a.parametric();
  const AbpContext ctx(mesh_from_parametric(S, a.res), S, parse_density(o.density, S.m()), o.c0);
  const double eps = o.eps > 0 ? o.eps : 1e-2 * o.c0;
  const json params = {{"surface_params", params_json(S.params)}, {"res", a.res}, {"seed", c.seed}, {"c0", o.c0}};
  Report r;
  auto record = [&](const std::string& check, bool pass, const json& where, double residual, json extra) {
    json row = {{"check", check}, {"surface", S.name()}, {"parameters", params}, {"pass", pass},
                {"worst_location", where}, {"residual", residual}};
    for (auto& [k, v] : extra.items()) row[k] = v;
    r.rows.push_back(row);
    r.pass = r.pass && pass;
  };

  const NestingSweep ns = nesting_sweep(ctx, o.samples, c.seed);
  record("region_nesting", ns.nesting_failures == 0 && ns.inclusion_failures == 0, nullptr,
         ns.nesting_failures + ns.inclusion_failures,
         {{"points", ns.points}, {"in_A", ns.in_A}, {"inclusion_failures", ns.inclusion_failures}});

  const JacobianSweep js = jacobian_sweep(ctx, std::min(o.samples, 100), c.seed);
  record("jacobian_fd", js.failures == 0, vec_json(js.worst_location), js.worst_rel,
         {{"points", js.points}, {"failures", js.failures}, {"tolerance", 1e-4}, {"min_det_in_A", js.min_det_in_A}});

  const AmGmSweep am = amgm_sweep(ctx, o.samples, c.seed);
  record("jacobian_bound", am.violations == 0, vec_json(am.worst_location), std::max(0.0, am.worst_excess),
         {{"points", am.points}, {"violations", am.violations}, {"min_det", am.min_det}, {"min_scalar", am.min_scalar},
          {"max_gap", am.max_gap}, {"tolerance", 1e-6}});

  const SurjectivitySweep ss = surjectivity_sweep(ctx, random_targets(ctx, o.targets, c.seed));
  json fails = json::array();
  for (std::size_t i = 0; i < ss.failed.size(); ++i) fails.push_back({{"xi", vec_json(ss.failed[i])}, {"reason", ss.reasons[i]}});
  record("surjectivity", ss.pass_rate() >= 0.99, ss.failed.empty() ? json(nullptr) : vec_json(ss.failed.front()),
         ss.worst_residual,
         {{"targets", ss.targets}, {"passed", ss.passed}, {"min_hessian_eig", ss.min_hessian_eig}, {"failures", fails}});

  const FluxSweep fs = flux_sweep(ctx, std::min(o.targets, 100), c.seed);
  record("boundary_flux", fs.failures == 0, nullptr, fs.min_margin, {{"targets", fs.targets}, {"tolerance", 1e-2 * o.c0}});

  const MeasureEstimate me = measure_estimate_check(ctx, eps, o.samples, c.seed);
  record("measure_estimate", me.holds, nullptr, me.lhs_analytic - me.rhs_extrapolated,
         {{"eps", eps}, {"lhs_analytic", me.lhs_analytic}, {"rhs_eps", me.at_eps.mean}, {"rhs_half_eps", me.at_half.mean},
          {"rhs_extrapolated", me.rhs_extrapolated}, {"ci", me.ci}, {"slack", me.slack}});
  return r;
}

json report_json(const InequalityReport& r) {
  json j = {{"surface", r.surface}, {"theorem", r.theorem}, {"n", r.n},       {"m", r.m},
            {"k", r.k},             {"tau", r.tau},         {"res", r.res},   {"h", r.h},
            {"vol", r.vol},         {"bvol", r.bvol},       {"integral_f", r.integral_f},
            {"lhs", r.lhs},         {"rhs", r.rhs},         {"ratio", r.ratio}, {"slack", r.slack},
            {"pass", r.pass}};
  j["constant"] = r.theorem == 1 ? *r.constants.c_thm1 : *r.constants.c_thm2;
  if (r.theorem == 1) j["clamped_H_sq"] = r.clamped;
  else j["identity_residual"] = r.identity_residual;
  if (r.ratio_quad) {
    j["vol_quad"] = *r.vol_quad;
    j["bvol_quad"] = *r.bvol_quad;
    j["integral_f_quad"] = *r.integral_f_quad;
    j["ratio_quad"] = *r.ratio_quad;
  }
  if (r.total_K) j["total_K"] = *r.total_K;
  if (r.fiala_huber_rhs) j["fiala_huber_rhs"] = *r.fiala_huber_rhs;
  return j;
}

Report run_check(const SurfaceArgs& a, int theorem, const std::vector<int>& series, double slack_constant, int quad_order) {
  Report r;
  std::vector<int> resolutions = series.empty() ? std::vector<int>{a.res} : series;
  for (int res : resolutions) {
    CheckOptions o;
    o.res = res;
    o.slack_constant = slack_constant;
    o.quad.order = quad_order;
    InequalityReport rep;
    if (a.from_file()) {
      const SurfaceMesh M = read_minkmesh_file(a.mesh);
      const int m = M.sig().space_dim - M.n();
      if ((theorem == 1) != (m == 0)) throw Unsupported("mesh has m = " + std::to_string(m) + "; use check-thm" + (m == 0 ? "1" : "2"));
      rep = check_theorem(M, o, a.mesh);
    } else {
      const ParametricSurface S = a.parametric();
      rep = theorem == 1 ? check_thm1(S, o) : check_thm2(S, o);
    }
    r.rows.push_back(report_json(rep));
    r.pass = r.pass && rep.pass;
  }
  return r;
}

Report run_fiala_huber(const SurfaceArgs& a, const std::vector<double>& center, double radius) {
  const ParametricSurface S = a.parametric();
  DiskGeometry g;
  std::string region = "surface";
  if (!center.empty()) {
    if (!(radius > 0)) throw ParseError("--radius is required with --center");
    g = geodesic_disk(S, to_vec(center), radius).geometry;
    region = "geodesic disk";
  } else {
    g = disk_geometry(S);
  }
  const FialaHuberReport f = fiala_huber_compare(g);
  Report r;
  json row = {{"surface", S.name()},   {"params", params_json(S.params)}, {"region", region},
              {"area", f.area},        {"length", f.length},             {"total_K", f.total_K},
              {"tau", f.tau},          {"rhs_euclidean", f.rhs_euclidean}, {"rhs_fiala_huber", f.rhs_fh},
              {"rhs_theorem", f.rhs_theorem}, {"theorem", f.theorem},     {"exceeds_euclidean", f.exceeds_euclidean},
              {"fiala_huber_holds", f.fh_holds}, {"theorem_holds", f.theorem_holds},
              {"tighter", f.fh_tighter ? "fiala-huber" : "theorem"}};
  if (!center.empty()) {
    row["center"] = center;
    row["radius"] = radius;
  }
  r.rows.push_back(row);
  r.pass = f.fh_holds && f.theorem_holds;
  return r;
}

Report run_geodesic(const SurfaceArgs& a, const std::vector<double>& center, const std::vector<double>& radii, double tol) {
  const ParametricSurface S = a.parametric();
  if (center.empty()) throw ParseError("--center is required");
  const GeodesicExpansion e = geodesic_ball_expansion(S, to_vec(center), radii);
  const bool pass = e.expected != 0.0 ? e.rel_error <= tol : std::abs(e.coefficient) <= 1e-3;
  Report r;
  r.rows.push_back({{"surface", S.name()},
                    {"params", params_json(S.params)},
                    {"center", center},
                    {"radii", e.radii},
                    {"isoperimetric_ratio", e.ratio},
                    {"coefficient", e.coefficient},
                    {"quartic", e.quartic},
                    {"gauss_K", e.gauss_K},
                    {"expected", e.expected},
                    {"rel_error", e.rel_error},
                    {"pass", pass}});
  r.pass = pass;
  return r;
}

Report run_linear_fuzz(const std::string& signatures, long count, std::uint64_t seed) {
  std::vector<LinearFuzzDims> dims;
  std::stringstream ss(signatures);
  std::string item;
  while (std::getline(ss, item, ';')) {
    LinearFuzzDims d;
    char c1 = 0, c2 = 0;
    std::stringstream is(item);
    if (!(is >> d.n >> c1 >> d.m >> c2 >> d.k) || c1 != ',' || c2 != ',') throw ParseError("--signatures: expected n,m,k;... got '" + item + "'");
    dims.push_back(d);
  }
  Report r;
  for (const auto& d : dims) {
    LinearFuzzOptions o;
    o.seed = seed;
    o.vectors = 250;
    o.subspaces = static_cast<int>(std::max<long>(1, count / o.vectors));
    const LinearFuzzResult f = linear_bounds_fuzz(d, o);
    r.rows.push_back({{"n", d.n},
                      {"m", d.m},
                      {"k", d.k},
                      {"subspaces", f.subspaces},
                      {"vectors", f.checked},
                      {"violations_1", f.violations_1},
                      {"violations_2a", f.violations_2a},
                      {"violations_2b", f.violations_2b},
                      {"worst_excess", f.worst_excess},
                      {"witnesses_found", f.witnesses_found},
                      {"worst_witness_gap", f.worst_witness_gap},
                      {"max_tau", f.max_tau},
                      {"pass", f.ok()}});
    r.pass = r.pass && f.ok();
  }
  return r;
}

Report run_corpus_list() {
  Report r;
  for (const auto& e : corpus_entries()) {
    std::string defaults;
    for (const auto& [k, v] : e.defaults) {
      std::ostringstream os;
      os << k << "=" << v;
      defaults += (defaults.empty() ? "" : ",") + os.str();
    }
    r.rows.push_back({{"name", e.name}, {"description", e.description}, {"defaults", defaults}});
  }
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Verification toolkit for isoperimetric bounds of spacelike submanifolds of Minkowski space"};
  app.require_subcommand(1);
  Common common;

  SurfaceArgs slope_a;
  bool per_sample = false;
  auto* slope = app.add_subcommand("slope", "global space-time slope tau of a surface");
  slope_a.add(slope, 32, true);
  slope->add_flag("--per-sample", per_sample, "one record per grid point");
  add_common(slope, common);

  SurfaceArgs curv_a;
  bool curv_per_vertex = false;
  std::vector<double> curv_at;
  auto* curvature = app.add_subcommand("curvature", "mean and Gauss curvature summary");
  curv_a.add(curvature, 32, true);
  curvature->add_flag("--per-vertex", curv_per_vertex, "one record per mesh vertex");
  curvature->add_option("--at", curv_at, "evaluate at this parameter point instead (s1,s2)")->delimiter(',');
  add_common(curvature, common);

  SurfaceArgs neu_a;
  std::string neu_density;
  double neu_c0 = 1.0;
  bool neu_per_vertex = false;
  auto* neumann = app.add_subcommand("solve-neumann", "solve Lap u = c0 (c_f - f), du/deta = c0");
  neu_a.add(neumann, 32, true);
  neumann->add_option("--density", neu_density, "thm1, thm2 or zero (default by codimension)");
  neumann->add_option("--c0", neu_c0, "boundary flux")->capture_default_str()->check(CLI::PositiveNumber);
  neumann->add_flag("--per-vertex", neu_per_vertex, "one record per mesh vertex");
  int neu_quad = 4;
  neumann->add_option("--quad-order", neu_quad, "Gauss-Legendre points per panel for the c_f oracle")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(neumann, common);

  SurfaceArgs abp_a;
  AbpArgs abp_o;
  auto* abp = app.add_subcommand("abp-diagnose", "checks of the comparison map on one surface");
  abp_a.add(abp, 32, false);
  abp->add_option("--samples", abp_o.samples, "Monte Carlo samples per check")->capture_default_str()->check(CLI::PositiveNumber);
  abp->add_option("--targets", abp_o.targets, "random xi for the surjectivity check")->capture_default_str()->check(CLI::PositiveNumber);
  abp->add_option("--eps", abp_o.eps, "shell width (default 1e-2 c0)");
  abp->add_option("--c0", abp_o.c0, "boundary flux")->capture_default_str()->check(CLI::PositiveNumber);
  abp->add_option("--density", abp_o.density, "thm1, thm2 or zero (default by codimension)");
  add_common(abp, common);

  SurfaceArgs t1_a, t2_a;
  std::vector<int> t1_series, t2_series;
  double t1_slack = CheckOptions{}.slack_constant, t2_slack = t1_slack;
  auto* thm1 = app.add_subcommand("check-thm1", "both sides of the bound for m = 0");
  t1_a.add(thm1, 64, true);
  thm1->add_option("--series", t1_series, "resolutions for a convergence series (r1,r2,...)")->delimiter(',');
  thm1->add_option("--slack-constant", t1_slack, "resolution slack per unit h")->capture_default_str();
  int t1_quad = 4, t2_quad = 4;
  thm1->add_option("--quad-order", t1_quad, "Gauss-Legendre points per panel for the oracle")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(thm1, common);
  auto* thm2 = app.add_subcommand("check-thm2", "both sides of the bound for m >= 1");
  t2_a.add(thm2, 64, true);
  thm2->add_option("--series", t2_series, "resolutions for a convergence series (r1,r2,...)")->delimiter(',');
  thm2->add_option("--slack-constant", t2_slack, "resolution slack per unit h")->capture_default_str();
  thm2->add_option("--quad-order", t2_quad, "Gauss-Legendre points per panel for the oracle")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(thm2, common);

  SurfaceArgs fh_a;
  std::vector<double> fh_center;
  double fh_radius = 0;
  auto* fh = app.add_subcommand("fiala-huber", "compare area with the Euclidean, Fiala-Huber and theorem bounds");
  fh_a.add(fh, 32, false);
  fh->add_option("--center", fh_center, "use the geodesic disk about this parameter point (s1,s2)")->delimiter(',');
  fh->add_option("--radius", fh_radius, "geodesic radius");
  add_common(fh, common);

  SurfaceArgs geo_a;
  std::vector<double> geo_center, geo_radii;
  double geo_tol = 0.1;
  auto* geo = app.add_subcommand("geodesic-expansion", "fit 4 pi A / L^2 - 1 against rho^2 for small geodesic disks");
  geo_a.add(geo, 32, false);
  geo->add_option("--center", geo_center, "parameter point (s1,s2)")->delimiter(',');
  geo->add_option("--radii", geo_radii, "geodesic radii (default 0.02..0.1 of the length scale)")->delimiter(',');
  geo->add_option("--tol", geo_tol, "relative tolerance against K/4")->capture_default_str();
  add_common(geo, common);

  std::string fuzz_sigs = "1,0,1;2,0,2;2,1,2;3,2,2";
  long fuzz_count = 25000;
  auto* fuzz = app.add_subcommand("lemma-linear-fuzz", "random check of the projection bounds of spacelike subspaces");
  fuzz->add_option("--signatures", fuzz_sigs, "n,m,k triples separated by ;")->capture_default_str();
  fuzz->add_option("--count", fuzz_count, "random vectors per signature")->capture_default_str()->check(CLI::PositiveNumber);
  add_common(fuzz, common);

  auto* corpus_cmd = app.add_subcommand("corpus", "benchmark surfaces");
  corpus_cmd->require_subcommand(1);
  auto* corpus_list = corpus_cmd->add_subcommand("list", "list corpus surfaces and their default parameters");
  add_common(corpus_list, common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    Report r;
    if (*slope) r = run_slope(slope_a, per_sample);
    else if (*curvature) r = run_curvature(curv_a, curv_per_vertex, curv_at);
    else if (*neumann) r = run_solve_neumann(neu_a, neu_density, neu_c0, neu_per_vertex, neu_quad);
    else if (*abp) r = run_abp_diagnose(abp_a, common, abp_o);
    else if (*thm1) r = run_check(t1_a, 1, t1_series, t1_slack, t1_quad);
    else if (*thm2) r = run_check(t2_a, 2, t2_series, t2_slack, t2_quad);
    else if (*fh) r = run_fiala_huber(fh_a, fh_center, fh_radius);
    else if (*geo) r = run_geodesic(geo_a, geo_center, geo_radii, geo_tol);
    else if (*fuzz) r = run_linear_fuzz(fuzz_sigs, fuzz_count, common.seed);
    else r = run_corpus_list();
    emit(r, common.format, common.out);
    return r.pass ? 0 : 1;
  } catch (const SurjectivityViolation& e) {
    std::cerr << "violation: " << e.what() << "\n";
    return 1;
  } catch (const BoundViolation& e) {
    std::cerr << "violation: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
