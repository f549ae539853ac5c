#pragma once

// Discrete backend: simplicial meshes with ambient Minkowski coordinates.
// Cells are n-simplices, boundary faces are the unshared (n-1)-faces oriented
// so that, with the opposite cell vertex appended, they reproduce the cell's
// orientation.

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "mkiso/error.hpp"
#include "mkiso/mink.hpp"
#include "mkiso/parametric.hpp"

namespace mkiso {

class SurfaceMesh {
 public:
  SurfaceMesh() = default;

  /// `vertices` is dim x V; `cells` is a flat list with stride n+1.
  SurfaceMesh(Signature sig, int n, Mat vertices, std::vector<int> cells,
              std::optional<std::vector<std::vector<int>>> boundary = std::nullopt)
      : sig_(sig), n_(n), vertices_(std::move(vertices)), cells_(std::move(cells)) {
    if (n_ < 1) throw InvalidMesh("SurfaceMesh: cell dimension must be >= 1");
    if (vertices_.rows() != sig_.dim()) throw SignatureMismatch("SurfaceMesh: vertex dimension mismatch");
    if (cells_.empty() || cells_.size() % static_cast<std::size_t>(n_ + 1) != 0) {
      throw InvalidMesh("SurfaceMesh: cell list is empty or not a multiple of n+1");
    }
    for (int idx : cells_) {
      if (idx < 0 || idx >= vertices_.cols()) throw InvalidMesh("SurfaceMesh: cell index out of range");
    }
    build_topology();
    if (boundary) {
      check_boundary(*boundary);
    }
    validate_cells();
  }

  [[nodiscard]] const Signature& sig() const { return sig_; }
  [[nodiscard]] int n() const { return n_; }
  [[nodiscard]] int num_vertices() const { return static_cast<int>(vertices_.cols()); }
  [[nodiscard]] int num_cells() const { return static_cast<int>(cells_.size() / static_cast<std::size_t>(n_ + 1)); }
  [[nodiscard]] const Mat& vertices() const { return vertices_; }
  [[nodiscard]] auto vertex(int v) const { return vertices_.col(v); }
  [[nodiscard]] std::span<const int> cell(int c) const {
    return {cells_.data() + static_cast<std::size_t>(c) * static_cast<std::size_t>(n_ + 1),
            static_cast<std::size_t>(n_ + 1)};
  }
  [[nodiscard]] const std::vector<int>& cell_indices() const { return cells_; }
  [[nodiscard]] const std::vector<std::vector<int>>& boundary_faces() const { return boundary_; }
  /// Cell owning each boundary face and the local index of the vertex opposite it.
  [[nodiscard]] const std::vector<std::pair<int, int>>& boundary_owner() const { return boundary_owner_; }
  [[nodiscard]] bool is_boundary_vertex(int v) const { return on_boundary_[static_cast<std::size_t>(v)]; }
  [[nodiscard]] const std::vector<int>& vertex_cells(int v) const { return vertex_cells_[static_cast<std::size_t>(v)]; }
  [[nodiscard]] const std::vector<int>& neighbors(int v) const { return neighbors_[static_cast<std::size_t>(v)]; }

  /// Parameter coordinates of each vertex when generated from a parametric surface.
  [[nodiscard]] const std::optional<Mat>& params() const { return params_; }
  void set_params(Mat p) {
    if (p.cols() != vertices_.cols() || p.rows() != n_) throw InvalidMesh("set_params: shape mismatch");
    params_ = std::move(p);
  }

  /// Edge vectors p_i - p_0 of a cell, dim x n.
  [[nodiscard]] Mat cell_edges(int c) const {
    const auto idx = cell(c);
    Mat E(sig_.dim(), n_);
    for (int a = 0; a < n_; ++a) E.col(a) = vertices_.col(idx[static_cast<std::size_t>(a + 1)]) - vertices_.col(idx[0]);
    return E;
  }
  [[nodiscard]] Mat cell_gram(int c) const { return metric::gram(sig_, cell_edges(c)); }
  [[nodiscard]] double cell_volume(int c) const { return cell_volumes_[static_cast<std::size_t>(c)]; }
  [[nodiscard]] const std::vector<double>& cell_volumes() const { return cell_volumes_; }

  [[nodiscard]] double face_volume(std::span<const int> face) const {
    if (face.size() == 1) return 1.0;
    const int d = static_cast<int>(face.size()) - 1;
    Mat E(sig_.dim(), d);
    for (int a = 0; a < d; ++a) E.col(a) = vertices_.col(face[static_cast<std::size_t>(a + 1)]) - vertices_.col(face[0]);
    const double det = metric::gram(sig_, E).determinant();
    return std::sqrt(std::max(0.0, det)) / std::tgamma(d + 1.0);
  }

  [[nodiscard]] double volume() const {
    double v = 0;
    for (double c : cell_volumes_) v += c;
    return v;
  }

  [[nodiscard]] double boundary_volume() const {
    double v = 0;
    for (const auto& f : boundary_) v += face_volume(f);
    return v;
  }

  /// Lumped vertex masses: each cell gives vol/(n+1) to its vertices.
  [[nodiscard]] Vec lumped_mass() const {
    Vec m = Vec::Zero(num_vertices());
    for (int c = 0; c < num_cells(); ++c)
      for (int v : cell(c)) m[v] += cell_volumes_[static_cast<std::size_t>(c)] / (n_ + 1);
    return m;
  }

  /// Lumped boundary masses: each face gives vol/n to its vertices.
  [[nodiscard]] Vec boundary_mass() const {
    Vec m = Vec::Zero(num_vertices());
    for (const auto& f : boundary_) {
      const double w = face_volume(f) / static_cast<double>(f.size());
      for (int v : f) m[v] += w;
    }
    return m;
  }

  /// Longest edge in the induced metric.
  [[nodiscard]] double max_edge_length() const {
    double h = 0;
    for (int c = 0; c < num_cells(); ++c) {
      const auto idx = cell(c);
      for (std::size_t a = 0; a < idx.size(); ++a)
        for (std::size_t b = a + 1; b < idx.size(); ++b) {
          const Vec e = vertices_.col(idx[b]) - vertices_.col(idx[a]);
          h = std::max(h, std::sqrt(std::max(0.0, metric::inner(sig_, e, e))));
        }
    }
    return h;
  }

  [[nodiscard]] bool is_connected() const {
    std::vector<char> seen(static_cast<std::size_t>(num_vertices()), 0);
    std::vector<int> stack{cell(0)[0]};
    seen[static_cast<std::size_t>(stack.back())] = 1;
    int count = 1;
    while (!stack.empty()) {
      const int v = stack.back();
      stack.pop_back();
      for (int w : neighbors(v)) {
        if (!seen[static_cast<std::size_t>(w)]) {
          seen[static_cast<std::size_t>(w)] = 1;
          ++count;
          stack.push_back(w);
        }
      }
    }
    int used = 0;
    for (const auto& vc : vertex_cells_) used += vc.empty() ? 0 : 1;
    return count == used;
  }

  [[nodiscard]] int euler_characteristic() const {
    if (n_ != 2) throw Unsupported("euler_characteristic: n = 2 only");
    std::map<std::pair<int, int>, int> edges;
    for (int c = 0; c < num_cells(); ++c) {
      const auto idx = cell(c);
      for (int a = 0; a < 3; ++a) {
        int u = idx[static_cast<std::size_t>(a)], w = idx[static_cast<std::size_t>((a + 1) % 3)];
        edges[{std::min(u, w), std::max(u, w)}] = 1;
      }
    }
    int used = 0;
    for (const auto& vc : vertex_cells_) used += vc.empty() ? 0 : 1;
    return used - static_cast<int>(edges.size()) + num_cells();
  }

 private:
  void build_topology() {
    const int V = num_vertices();
    vertex_cells_.assign(static_cast<std::size_t>(V), {});
    neighbors_.assign(static_cast<std::size_t>(V), {});
    for (int c = 0; c < num_cells(); ++c) {
      const auto idx = cell(c);
      for (int v : idx) vertex_cells_[static_cast<std::size_t>(v)].push_back(c);
      for (int v : idx)
        for (int w : idx)
          if (v != w) neighbors_[static_cast<std::size_t>(v)].push_back(w);
    }
    for (auto& nb : neighbors_) {
      std::sort(nb.begin(), nb.end());
      nb.erase(std::unique(nb.begin(), nb.end()), nb.end());
    }
    // Unshared faces.
    std::map<std::vector<int>, std::vector<std::pair<int, int>>> faces;
    for (int c = 0; c < num_cells(); ++c) {
      const auto idx = cell(c);
      for (int i = 0; i <= n_; ++i) {
        std::vector<int> key;
        for (int a = 0; a <= n_; ++a)
          if (a != i) key.push_back(idx[static_cast<std::size_t>(a)]);
        std::sort(key.begin(), key.end());
        faces[key].push_back({c, i});
      }
    }
    boundary_.clear();
    boundary_owner_.clear();
    for (const auto& [key, owners] : faces) {
      if (owners.size() > 2) throw InvalidMesh("SurfaceMesh: non-manifold face shared by more than two cells");
      if (owners.size() != 1) continue;
      const auto [c, i] = owners.front();
      boundary_.push_back(oriented_face(c, i));
      boundary_owner_.push_back({c, i});
    }
    on_boundary_.assign(static_cast<std::size_t>(V), false);
    for (const auto& f : boundary_)
      for (int v : f) on_boundary_[static_cast<std::size_t>(v)] = true;
  }

  /// Face opposite local vertex i, ordered so that it carries the induced orientation.
  [[nodiscard]] std::vector<int> oriented_face(int c, int i) const {
    const auto idx = cell(c);
    std::vector<int> f;
    for (int a = 0; a <= n_; ++a)
      if (a != i) f.push_back(idx[static_cast<std::size_t>(a)]);
    if (((n_ - i) % 2 == 1) && f.size() >= 2) std::swap(f[0], f[1]);
    return f;
  }

  void check_boundary(const std::vector<std::vector<int>>& given) const {
    auto canon = [](std::vector<std::vector<int>> fs) {
      for (auto& f : fs) std::sort(f.begin(), f.end());
      std::sort(fs.begin(), fs.end());
      return fs;
    };
    if (canon(given) != canon(boundary_)) {
      throw InvalidMesh("SurfaceMesh: supplied boundary faces differ from the unshared cell faces");
    }
  }

  void validate_cells() {
    cell_volumes_.resize(static_cast<std::size_t>(num_cells()));
    const double fact = std::tgamma(n_ + 1.0);
    double vmax = 0;
    for (int c = 0; c < num_cells(); ++c) {
      const Mat G = cell_gram(c);
      Eigen::SelfAdjointEigenSolver<Mat> es(G, Eigen::EigenvaluesOnly);
      const double lo = es.eigenvalues().minCoeff(), hi = es.eigenvalues().maxCoeff();
      if (!(hi > 0) || lo < -1e-12 * hi) {
        throw NotSpacelike("SurfaceMesh: cell " + std::to_string(c) + " has a non-positive-definite edge Gram matrix");
      }
      if (lo <= 1e-12 * hi) throw MeshDegenerate("SurfaceMesh: cell " + std::to_string(c) + " is degenerate");
      const double vol = std::sqrt(std::max(0.0, G.determinant())) / fact;
      cell_volumes_[static_cast<std::size_t>(c)] = vol;
      vmax = std::max(vmax, vol);
    }
    for (int c = 0; c < num_cells(); ++c) {
      if (!(cell_volumes_[static_cast<std::size_t>(c)] > 1e-14 * vmax)) {
        throw MeshDegenerate("SurfaceMesh: cell " + std::to_string(c) + " is degenerate");
      }
    }
  }

  Signature sig_{};
  int n_ = 2;
  Mat vertices_;
  std::vector<int> cells_;
  std::vector<std::vector<int>> boundary_;
  std::vector<std::pair<int, int>> boundary_owner_;
  std::vector<bool> on_boundary_;
  std::vector<std::vector<int>> vertex_cells_;
  std::vector<std::vector<int>> neighbors_;
  std::vector<double> cell_volumes_;
  std::optional<Mat> params_;
};

/// Slope of each cell's tangent plane and their maximum.
inline SlopeField slope_field(const SurfaceMesh& M) {
  SlopeField f;
  f.tau = 0.0;
  for (int c = 0; c < M.num_cells(); ++c) {
    const double t = slope(SpacelikeSubspace(M.sig(), M.cell_edges(c)));
    Vec centroid = Vec::Zero(M.sig().dim());
    for (int v : M.cell(c)) centroid += M.vertex(v);
    centroid /= M.n() + 1;
    if (t > f.tau) {
      f.tau = t;
      f.argmax = centroid;
    }
    f.samples.push_back({centroid, t});
  }
  return f;
}

// ---------------------------------------------------------------------------
// minkmesh text format.

inline void write_minkmesh(std::ostream& os, const SurfaceMesh& M, bool with_boundary = true) {
  os << "minkmesh " << M.sig().space_dim << ' ' << M.sig().time_dim << '\n';
  os << std::setprecision(17);
  for (int v = 0; v < M.num_vertices(); ++v) {
    os << 'v';
    for (int i = 0; i < M.sig().dim(); ++i) os << ' ' << M.vertices()(i, v);
    os << '\n';
  }
  for (int c = 0; c < M.num_cells(); ++c) {
    os << 'c';
    for (int v : M.cell(c)) os << ' ' << v;
    os << '\n';
  }
  if (with_boundary) {
    for (const auto& f : M.boundary_faces()) {
      os << 'b';
      for (int v : f) os << ' ' << v;
      os << '\n';
    }
  }
}

inline SurfaceMesh read_minkmesh(std::istream& is) {
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& msg) { throw ParseError("minkmesh line " + std::to_string(lineno) + ": " + msg); };
  std::optional<Signature> sig;
  std::vector<Vec> verts;
  std::vector<int> cells;
  int cell_size = -1;
  std::vector<std::vector<int>> bfaces;
  while (std::getline(is, line)) {
    ++lineno;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (!sig) {
      int p, q;
      if (tag != "minkmesh" || !(ls >> p >> q)) fail("expected header 'minkmesh <space_dim> <time_dim>'");
      sig = Signature(p, q);
      continue;
    }
    if (tag == "v") {
      Vec v(sig->dim());
      for (int i = 0; i < sig->dim(); ++i)
        if (!(ls >> v[i])) fail("vertex needs " + std::to_string(sig->dim()) + " coordinates");
      double extra;
      if (ls >> extra) fail("too many vertex coordinates");
      verts.push_back(v);
    } else if (tag == "c" || tag == "b") {
      std::vector<int> idx;
      int i;
      while (ls >> i) idx.push_back(i);
      if (!ls.eof()) fail("bad index");
      if (tag == "c") {
        if (cell_size < 0) cell_size = static_cast<int>(idx.size());
        if (static_cast<int>(idx.size()) != cell_size || cell_size < 2) fail("inconsistent cell size");
        cells.insert(cells.end(), idx.begin(), idx.end());
      } else {
        bfaces.push_back(idx);
      }
    } else {
      fail("unknown record '" + tag + "'");
    }
  }
  if (!sig) throw ParseError("minkmesh: missing header");
  if (verts.empty() || cells.empty()) throw ParseError("minkmesh: no vertices or cells");
  Mat V(sig->dim(), static_cast<Eigen::Index>(verts.size()));
  for (std::size_t i = 0; i < verts.size(); ++i) V.col(static_cast<Eigen::Index>(i)) = verts[i];
  std::optional<std::vector<std::vector<int>>> b;
  if (!bfaces.empty()) b = bfaces;
  return {*sig, cell_size - 1, std::move(V), std::move(cells), b};
}

inline SurfaceMesh read_minkmesh_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open mesh file " + path);
  return read_minkmesh(in);
}

// ---------------------------------------------------------------------------
// Structured triangulation of a parametric surface.

namespace detail {

/// Kuhn subdivision of a box grid into n! simplices per cube.
inline void kuhn_cells(const std::vector<int>& counts, const std::vector<bool>& periodic, int res,
                       const std::function<int(const std::vector<int>&)>& index, std::vector<int>& cells) {
  const int n = static_cast<int>(counts.size());
  std::vector<int> perm(static_cast<std::size_t>(n));
  std::vector<int> c(static_cast<std::size_t>(n), 0);
  while (true) {
    std::iota(perm.begin(), perm.end(), 0);
    do {
      std::vector<int> cur = c;
      cells.push_back(index(cur));
      for (int a : perm) {
        ++cur[static_cast<std::size_t>(a)];
        if (periodic[static_cast<std::size_t>(a)]) cur[static_cast<std::size_t>(a)] %= counts[static_cast<std::size_t>(a)];
        cells.push_back(index(cur));
      }
    } while (std::next_permutation(perm.begin(), perm.end()));
    int a = 0;
    while (a < n && ++c[static_cast<std::size_t>(a)] == res) c[static_cast<std::size_t>(a++)] = 0;
    if (a == n) break;
  }
}


/// Delaunay triangulation of planar points (Bowyer-Watson with ghost triangles
/// for the hull). Returns counter-clockwise index triples. Points are inserted
/// in the given order, so spatially coherent input keeps the point walks short.
inline std::vector<int> delaunay_2d(const std::vector<Eigen::Vector2d>& pts) {
  struct Tri {
    std::array<int, 3> v;    // -1 marks the ghost vertex at infinity
    std::array<int, 3> nb;   // neighbour opposite v[k]
    bool alive = true;
  };
  const int np = static_cast<int>(pts.size());
  if (np < 3) throw Error("delaunay_2d: need at least 3 points");
  auto orient = [&](int a, int b, int c) {
    const auto &p = pts[static_cast<std::size_t>(a)], &q = pts[static_cast<std::size_t>(b)], &r = pts[static_cast<std::size_t>(c)];
    return (q.x() - p.x()) * (r.y() - p.y()) - (q.y() - p.y()) * (r.x() - p.x());
  };
  auto incircle = [&](int a, int b, int c, int d) {
    const Eigen::Vector2d pa = pts[static_cast<std::size_t>(a)] - pts[static_cast<std::size_t>(d)];
    const Eigen::Vector2d pb = pts[static_cast<std::size_t>(b)] - pts[static_cast<std::size_t>(d)];
    const Eigen::Vector2d pc = pts[static_cast<std::size_t>(c)] - pts[static_cast<std::size_t>(d)];
    return pa.squaredNorm() * (pb.x() * pc.y() - pb.y() * pc.x()) - pb.squaredNorm() * (pa.x() * pc.y() - pa.y() * pc.x()) +
           pc.squaredNorm() * (pa.x() * pb.y() - pa.y() * pb.x());
  };
  std::vector<Tri> tris;
  tris.reserve(static_cast<std::size_t>(8 * np));

  // Seed with the first three non-collinear points and their three ghosts.
  int c0 = 2;
  while (c0 < np && std::abs(orient(0, 1, c0)) < 1e-300) ++c0;
  if (c0 == np) throw Error("delaunay_2d: all points collinear");
  std::array<int, 3> s{0, 1, c0};
  if (orient(0, 1, c0) < 0) std::swap(s[1], s[2]);
  tris.push_back({{s[0], s[1], s[2]}, {1, 2, 3}});
  // ghost k sits across the edge opposite s[k]: finite edge (s[k+2], s[k+1])
  tris.push_back({{s[2], s[1], -1}, {3, 2, 0}});
  tris.push_back({{s[0], s[2], -1}, {1, 3, 0}});
  tris.push_back({{s[1], s[0], -1}, {2, 1, 0}});

  auto ghost_slot = [](const Tri& t) { return t.v[0] < 0 ? 0 : t.v[1] < 0 ? 1 : t.v[2] < 0 ? 2 : -1; };
  auto conflicts = [&](const Tri& t, int p) {
    const int g = ghost_slot(t);
    if (g < 0) return incircle(t.v[0], t.v[1], t.v[2], p) > 0.0;
    const int a = t.v[static_cast<std::size_t>((g + 1) % 3)], b = t.v[static_cast<std::size_t>((g + 2) % 3)];
    const double o = orient(a, b, p);
    if (o != 0.0) return o > 0.0;
    // on the hull line: in conflict only strictly inside the edge
    const Eigen::Vector2d ab = pts[static_cast<std::size_t>(b)] - pts[static_cast<std::size_t>(a)];
    const double along = ab.dot(pts[static_cast<std::size_t>(p)] - pts[static_cast<std::size_t>(a)]);
    return along > 0.0 && along < ab.squaredNorm();
  };

  int last = 0;
  std::vector<int> bad, stack, mark(tris.capacity(), 0);
  int stamp = 0;
  for (int p = 0; p < np; ++p) {
    if (p == s[0] || p == s[1] || p == s[2]) continue;
    // visibility walk to a triangle that contains p or a ghost that sees it
    int t = last;
    while (!tris[static_cast<std::size_t>(t)].alive) --t;
    if (const int g = ghost_slot(tris[static_cast<std::size_t>(t)]); g >= 0) t = tris[static_cast<std::size_t>(t)].nb[static_cast<std::size_t>(g)];
    for (int guard = 0;; ++guard) {
      if (guard > 4 * static_cast<int>(tris.size()) + 16) throw Error("delaunay_2d: point walk did not terminate");
      const Tri& T = tris[static_cast<std::size_t>(t)];
      if (ghost_slot(T) >= 0) break;
      int next = -1;
      for (int k = 0; k < 3 && next < 0; ++k) {
        if (orient(T.v[static_cast<std::size_t>((k + 1) % 3)], T.v[static_cast<std::size_t>((k + 2) % 3)], p) < 0.0) next = T.nb[static_cast<std::size_t>(k)];
      }
      if (next < 0) break;
      t = next;
    }
    if (!conflicts(tris[static_cast<std::size_t>(t)], p)) {
      // the walk stopped on a ghost that does not see p (p on a hull line); scan the hull
      t = -1;
      for (std::size_t u = 0; u < tris.size() && t < 0; ++u) {
        if (tris[u].alive && ghost_slot(tris[u]) >= 0 && conflicts(tris[u], p)) t = static_cast<int>(u);
      }
      if (t < 0) throw Error("delaunay_2d: duplicate point");
    }
    // cavity of all triangles in conflict with p
    ++stamp;
    if (mark.size() < tris.size() + 64) mark.resize(2 * tris.size() + 64, 0);
    bad.clear();
    stack.assign(1, t);
    mark[static_cast<std::size_t>(t)] = stamp;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      bad.push_back(u);
      for (int nb : tris[static_cast<std::size_t>(u)].nb) {
        if (mark[static_cast<std::size_t>(nb)] == stamp) continue;
        if (conflicts(tris[static_cast<std::size_t>(nb)], p)) {
          mark[static_cast<std::size_t>(nb)] = stamp;
          stack.push_back(nb);
        }
      }
    }
    // fan p to every cavity boundary edge
    std::unordered_map<int, int> by_start, by_end;
    std::vector<int> created;
    for (int u : bad) {
      for (int k = 0; k < 3; ++k) {
        const int out = tris[static_cast<std::size_t>(u)].nb[static_cast<std::size_t>(k)];
        if (mark[static_cast<std::size_t>(out)] == stamp) continue;
        const int a = tris[static_cast<std::size_t>(u)].v[static_cast<std::size_t>((k + 1) % 3)];
        const int b = tris[static_cast<std::size_t>(u)].v[static_cast<std::size_t>((k + 2) % 3)];
        const int id = static_cast<int>(tris.size());
        tris.push_back({{a, b, p}, {-1, -1, out}});
        Tri& O = tris[static_cast<std::size_t>(out)];
        for (int j = 0; j < 3; ++j)
          if (O.nb[static_cast<std::size_t>(j)] == u) O.nb[static_cast<std::size_t>(j)] = id;
        by_start[a] = id;
        by_end[b] = id;
        created.push_back(id);
      }
    }
    for (int id : created) {
      Tri& T = tris[static_cast<std::size_t>(id)];
      T.nb[0] = by_start.at(T.v[1]);  // across edge (b, p)
      T.nb[1] = by_end.at(T.v[0]);    // across edge (p, a)
    }
    for (int u : bad) tris[static_cast<std::size_t>(u)].alive = false;
    last = created.back();
  }

  std::vector<int> cells;
  for (const Tri& T : tris) {
    if (!T.alive || T.v[0] < 0 || T.v[1] < 0 || T.v[2] < 0) continue;
    cells.insert(cells.end(), T.v.begin(), T.v.end());
  }
  return cells;
}

}  // namespace detail

/// Triangulates the parameter domain (res intervals per box axis; for full disks a
/// lattice of spacing r1/res; for annuli with r0 > 0 a log-polar grid with res
/// radial layers; for disk sectors res rings of about arc/step nodes) and places every
/// vertex exactly on the immersion. Cells are oriented positively in parameter space.
inline SurfaceMesh mesh_from_parametric(const ParametricSurface& S, int res) {
  if (res < 2) throw Error("mesh_from_parametric: res must be >= 2");
  const Domain& D = S.domain();
  const int n = D.dim();
  std::vector<Vec> params;
  std::vector<int> cells;

  if (D.is_box()) {
    const auto& b = D.box();
    std::vector<int> counts(static_cast<std::size_t>(n));
    for (int a = 0; a < n; ++a) counts[static_cast<std::size_t>(a)] = b.periodic[static_cast<std::size_t>(a)] ? res : res + 1;
    auto index = [&](const std::vector<int>& ijk) {
      int id = 0, stride = 1;
      for (int a = 0; a < n; ++a) {
        id += ijk[static_cast<std::size_t>(a)] * stride;
        stride *= counts[static_cast<std::size_t>(a)];
      }
      return id;
    };
    std::vector<int> ijk(static_cast<std::size_t>(n), 0);
    while (true) {
      Vec s(n);
      for (int a = 0; a < n; ++a) s[a] = b.lo[a] + (b.hi[a] - b.lo[a]) * ijk[static_cast<std::size_t>(a)] / res;
      params.push_back(s);
      int a = 0;
      while (a < n && ++ijk[static_cast<std::size_t>(a)] == counts[static_cast<std::size_t>(a)]) ijk[static_cast<std::size_t>(a++)] = 0;
      if (a == n) break;
    }
    detail::kuhn_cells(counts, b.periodic, res, index, cells);
  } else if (D.annulus().full_turn() && D.annulus().r0 == 0.0) {
    // Full disk: triangular lattice of spacing r1/res clipped half a step inside
    // the rim, plus equally spaced rim nodes, Delaunay-triangulated. The mesh has
    // no distinguished centre or spokes, which keeps max-norm FEM errors at O(h^2).
    const auto& an = D.annulus();
    const double h = an.r1 / res;
    const int rows = static_cast<int>(std::ceil(2.0 * res / std::sqrt(3.0))) + 1;
    std::vector<Eigen::Vector2d> pts;
    for (int j = -rows; j <= rows; ++j) {
      for (int i = -res - rows; i <= res + rows; ++i) {
        const Eigen::Vector2d q{h * (i + 0.5 * j), h * j * std::sqrt(3.0) / 2.0};
        if (q.norm() < an.r1 - 0.5 * h) pts.push_back(q);
      }
    }
    const int N = std::max(6, static_cast<int>(std::lround(2.0 * std::numbers::pi * res)));
    for (int j = 0; j < N; ++j) {
      const double th = an.theta0 + 2.0 * std::numbers::pi * j / N;
      pts.emplace_back(an.r1 * std::cos(th), an.r1 * std::sin(th));
    }
    cells = detail::delaunay_2d(pts);
    for (const auto& q : pts) params.push_back(Vec{{q.x(), q.y()}});
  } else if (D.annulus().r0 > 0.0) {
    // Annuli: log-polar grid (radii in geometric progression, a fixed number of
    // angular nodes), so every quad is close to square and the grading is smooth.
    const auto& an = D.annulus();
    const bool full = an.full_turn();
    const double span = an.theta1 - an.theta0;
    const double drho = std::log(an.r1 / an.r0) / res;
    const int ns = std::max(full ? 3 : 1, static_cast<int>(std::lround(span / drho)));
    const int nodes = full ? ns : ns + 1;
    for (int i = 0; i <= res; ++i) {
      const double r = i == res ? an.r1 : an.r0 * std::exp(drho * i);
      for (int j = 0; j < nodes; ++j) {
        const double th = an.theta0 + span * j / ns;
        params.push_back(Vec{{r * std::cos(th), r * std::sin(th)}});
      }
    }
    auto node = [&](int i, int j) { return i * nodes + (full ? j % ns : j); };
    for (int i = 0; i < res; ++i) {
      for (int j = 0; j < ns; ++j) {
        cells.insert(cells.end(), {node(i, j), node(i + 1, j), node(i + 1, j + 1)});
        cells.insert(cells.end(), {node(i, j), node(i + 1, j + 1), node(i, j + 1)});
      }
    }
  } else {
    // Sectors of a disk: concentric rings with about (arc length / radial step) nodes each, zipped
    // together by angle, so cells stay close to equilateral in parameter space.
    const auto& an = D.annulus();
    const bool full = an.full_turn();
    const double span = an.theta1 - an.theta0;
    const double dr = (an.r1 - an.r0) / res;
    std::vector<int> first, count;  // first vertex id and node count of each ring
    std::vector<int> segs;
    for (int i = 0; i <= res; ++i) {
      const double r = an.r0 + dr * i;
      first.push_back(static_cast<int>(params.size()));
      if (r == 0.0) {
        params.push_back(Vec::Zero(2));
        count.push_back(1);
        segs.push_back(0);
        continue;
      }
      const int ns = std::max(full ? 3 : 1, static_cast<int>(std::lround(span * r / dr)));
      segs.push_back(ns);
      const int nodes = full ? ns : ns + 1;
      count.push_back(nodes);
      for (int j = 0; j < nodes; ++j) {
        const double th = an.theta0 + span * j / ns;
        params.push_back(Vec{{r * std::cos(th), r * std::sin(th)}});
      }
    }
    auto node = [&](int ring, int j) {
      if (full) j %= segs[static_cast<std::size_t>(ring)];
      return first[static_cast<std::size_t>(ring)] + j;
    };
    for (int i = 0; i < res; ++i) {
      const int na = segs[static_cast<std::size_t>(i)], nb = segs[static_cast<std::size_t>(i + 1)];
      if (na == 0) {
        for (int j = 0; j < nb; ++j) cells.insert(cells.end(), {first[static_cast<std::size_t>(i)], node(i + 1, j), node(i + 1, j + 1)});
        continue;
      }
      int a = 0, b = 0;
      while (a < na || b < nb) {
        const bool advance_b = a == na || (b < nb && static_cast<double>(b + 1) / nb <= static_cast<double>(a + 1) / na);
        if (advance_b) {
          cells.insert(cells.end(), {node(i, a), node(i + 1, b), node(i + 1, b + 1)});
          ++b;
        } else {
          cells.insert(cells.end(), {node(i, a), node(i + 1, b), node(i, a + 1)});
          ++a;
        }
      }
    }
  }

  Mat V(S.sig().dim(), static_cast<Eigen::Index>(params.size()));
  Mat P(n, static_cast<Eigen::Index>(params.size()));
  for (std::size_t i = 0; i < params.size(); ++i) {
    V.col(static_cast<Eigen::Index>(i)) = S.position(params[i]);
    P.col(static_cast<Eigen::Index>(i)) = params[i];
  }
  // Positive orientation in parameter space.
  const std::size_t stride = static_cast<std::size_t>(n + 1);
  for (std::size_t c = 0; c < cells.size() / stride; ++c) {
    Mat E(n, n);
    for (int a = 0; a < n; ++a) E.col(a) = P.col(cells[c * stride + static_cast<std::size_t>(a) + 1]) - P.col(cells[c * stride]);
    const double det = E.determinant();
    if (std::abs(det) < 1e-300) throw MeshDegenerate("mesh_from_parametric: degenerate parameter cell");
    if (det < 0) {
      if (n >= 2) std::swap(cells[c * stride + 1], cells[c * stride + 2]);
      else std::swap(cells[c * stride], cells[c * stride + 1]);
    }
  }
  SurfaceMesh M(S.sig(), n, std::move(V), std::move(cells));
  M.set_params(std::move(P));
  return M;
}

// ---------------------------------------------------------------------------
// Nearest-vertex lookup in parameter space.

class VertexLocator {
 public:
  explicit VertexLocator(const Mat& points, int buckets_per_axis = 0) : pts_(points) {
    const int d = static_cast<int>(pts_.rows());
    const int N = static_cast<int>(pts_.cols());
    if (buckets_per_axis <= 0) {
      buckets_per_axis = std::max(1, static_cast<int>(std::pow(static_cast<double>(N) / 2.0, 1.0 / d)));
    }
    nb_ = buckets_per_axis;
    lo_ = pts_.rowwise().minCoeff();
    hi_ = pts_.rowwise().maxCoeff();
    width_ = ((hi_ - lo_).array() / nb_).max(1e-300).matrix();
    std::size_t total = 1;
    for (int a = 0; a < d; ++a) total *= static_cast<std::size_t>(nb_);
    buckets_.assign(total, {});
    for (int i = 0; i < N; ++i) buckets_[flat(coords(pts_.col(i)))].push_back(i);
  }

  [[nodiscard]] int nearest(const Vec& q) const {
    const std::vector<int> c = coords(q);
    int best = -1;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (int ring = 0; ring <= nb_; ++ring) {
      visit_shell(c, ring, [&](std::size_t b) {
        for (int i : buckets_[b]) {
          const double d2 = (pts_.col(i) - q).squaredNorm();
          if (d2 < best_d2) {
            best_d2 = d2;
            best = i;
          }
        }
      });
      // Every point outside the searched block is farther than ring * min width.
      if (best >= 0) {
        const double reach = ring * width_.minCoeff();
        if (reach * reach >= best_d2) break;
      }
    }
    return best;
  }

 private:
  [[nodiscard]] std::vector<int> coords(const Eigen::Ref<const Vec>& p) const {
    std::vector<int> c(static_cast<std::size_t>(p.size()));
    for (int a = 0; a < p.size(); ++a) {
      int v = static_cast<int>(std::floor((p[a] - lo_[a]) / width_[a]));
      c[static_cast<std::size_t>(a)] = std::clamp(v, 0, nb_ - 1);
    }
    return c;
  }
  [[nodiscard]] std::size_t flat(const std::vector<int>& c) const {
    std::size_t id = 0, stride = 1;
    for (int v : c) {
      id += static_cast<std::size_t>(v) * stride;
      stride *= static_cast<std::size_t>(nb_);
    }
    return id;
  }
  template <class F>
  void visit_shell(const std::vector<int>& c, int ring, F&& f) const {
    const int d = static_cast<int>(c.size());
    std::vector<int> off(static_cast<std::size_t>(d), -ring);
    while (true) {
      int maxabs = 0;
      bool inside = true;
      std::vector<int> b(static_cast<std::size_t>(d));
      for (int a = 0; a < d; ++a) {
        maxabs = std::max(maxabs, std::abs(off[static_cast<std::size_t>(a)]));
        b[static_cast<std::size_t>(a)] = c[static_cast<std::size_t>(a)] + off[static_cast<std::size_t>(a)];
        if (b[static_cast<std::size_t>(a)] < 0 || b[static_cast<std::size_t>(a)] >= nb_) inside = false;
      }
      if (inside && maxabs == ring) f(flat(b));
      int a = 0;
      while (a < d && ++off[static_cast<std::size_t>(a)] > ring) off[static_cast<std::size_t>(a++)] = -ring;
      if (a == d) break;
    }
  }

  Mat pts_;
  int nb_ = 1;
  Vec lo_, hi_, width_;
  std::vector<std::vector<int>> buckets_;
};

// ---------------------------------------------------------------------------
// Discrete curvature.

/// Vertices within `rings` edge hops of v (excluding v).
inline std::vector<int> k_ring(const SurfaceMesh& M, int v, int rings) {
  std::vector<int> frontier{v}, out;
  std::vector<int> seen{v};
  for (int r = 0; r < rings; ++r) {
    std::vector<int> next;
    for (int u : frontier)
      for (int w : M.neighbors(u))
        if (std::find(seen.begin(), seen.end(), w) == seen.end()) {
          seen.push_back(w);
          next.push_back(w);
          out.push_back(w);
        }
    frontier = std::move(next);
  }
  return out;
}

/// Minkowski Gram-Schmidt of spacelike columns.
inline Mat orthonormalize_spacelike(const Signature& sig, Mat B) {
  for (int i = 0; i < B.cols(); ++i) {
    for (int j = 0; j < i; ++j) B.col(i) -= metric::inner(sig, B.col(i), B.col(j)) * B.col(j);
    const double q = metric::inner(sig, B.col(i), B.col(i));
    if (!(q > 0)) throw NotSpacelike("orthonormalize_spacelike: non-spacelike direction");
    B.col(i) /= std::sqrt(q);
  }
  return B;
}

/// Osculating quadratic patch p0 + A xi + Q(xi, xi)/2 fitted by least squares
/// to the neighbors of v, in tangent coordinates xi. Returned as a jet at xi = 0.
inline Jet fit_quadratic_patch(const SurfaceMesh& M, int v, int passes = 2) {
  const Signature& sig = M.sig();
  const int n = M.n();
  const int nq = n * (n + 1) / 2;
  std::vector<int> nb = M.neighbors(v);
  if (static_cast<int>(nb.size()) < n + nq + 1) nb = k_ring(M, v, 2);
  if (static_cast<int>(nb.size()) < n + nq) throw InvalidMesh("fit_quadratic_patch: too few neighbors");
  const Vec p0 = M.vertex(v);

  Mat E0 = M.cell_edges(M.vertex_cells(v).front());
  // Re-root the edges at v.
  {
    const auto idx = M.cell(M.vertex_cells(v).front());
    Mat Ev(sig.dim(), n);
    int col = 0;
    for (int w : idx)
      if (w != v && col < n) Ev.col(col++) = M.vertex(w) - p0;
    E0 = Ev;
  }
  Mat T = orthonormalize_spacelike(sig, E0);

  Jet jet;
  for (int pass = 0; pass < passes; ++pass) {
    const int J = static_cast<int>(nb.size());
    Mat X(J, n + nq);
    Mat Y(J, sig.dim());
    for (int r = 0; r < J; ++r) {
      const Vec d = M.vertex(nb[static_cast<std::size_t>(r)]) - p0;
      Vec xi(n);
      for (int a = 0; a < n; ++a) xi[a] = metric::inner(sig, d, T.col(a));
      X.row(r).head(n) = xi.transpose();
      int q = n;
      for (int a = 0; a < n; ++a)
        for (int b = a; b < n; ++b) X(r, q++) = a == b ? 0.5 * xi[a] * xi[a] : xi[a] * xi[b];
      Y.row(r) = d.transpose();
    }
    const Mat C = X.colPivHouseholderQr().solve(Y);
    jet.x = p0;
    jet.d1 = C.topRows(n).transpose();
    jet.d2.assign(static_cast<std::size_t>(n * n), Vec());
    int q = n;
    for (int a = 0; a < n; ++a)
      for (int b = a; b < n; ++b) {
        const Vec col = C.row(q++).transpose();
        jet.d2[static_cast<std::size_t>(a * n + b)] = col;
        jet.d2[static_cast<std::size_t>(b * n + a)] = col;
      }
    T = orthonormalize_spacelike(sig, jet.d1);
  }
  return jet;
}

/// Second fundamental form at an interior vertex from the fitted patch.
inline CurvatureData second_fundamental_form(const SurfaceMesh& M, int v) {
  if (M.is_boundary_vertex(v)) {
    throw BoundaryCurvatureUnavailable("second_fundamental_form: vertex " + std::to_string(v) + " is on the boundary");
  }
  return curvature_from_jet(M.sig(), fit_quadratic_patch(M, v));
}

/// Interior angles of a triangle cell in the induced metric, by local vertex.
inline std::array<double, 3> cell_angles(const SurfaceMesh& M, int c) {
  const auto idx = M.cell(c);
  std::array<double, 3> ang{};
  for (int i = 0; i < 3; ++i) {
    const Vec a = M.vertex(idx[static_cast<std::size_t>((i + 1) % 3)]) - M.vertex(idx[static_cast<std::size_t>(i)]);
    const Vec b = M.vertex(idx[static_cast<std::size_t>((i + 2) % 3)]) - M.vertex(idx[static_cast<std::size_t>(i)]);
    const double ab = metric::inner(M.sig(), a, b);
    const double aa = metric::inner(M.sig(), a, a);
    const double bb = metric::inner(M.sig(), b, b);
    ang[static_cast<std::size_t>(i)] = std::acos(std::clamp(ab / std::sqrt(aa * bb), -1.0, 1.0));
  }
  return ang;
}

inline double angle_sum(const SurfaceMesh& M, int v) {
  double s = 0;
  for (int c : M.vertex_cells(v)) {
    const auto idx = M.cell(c);
    const auto ang = cell_angles(M, c);
    for (int i = 0; i < 3; ++i)
      if (idx[static_cast<std::size_t>(i)] == v) s += ang[static_cast<std::size_t>(i)];
  }
  return s;
}

/// Angle defect divided by a third of the incident area (interior vertices).
inline double gauss_curvature(const SurfaceMesh& M, int v) {
  if (M.n() != 2) throw Unsupported("gauss_curvature: n = 2 only");
  if (M.is_boundary_vertex(v)) {
    throw BoundaryCurvatureUnavailable("gauss_curvature: vertex " + std::to_string(v) + " is on the boundary");
  }
  double area = 0;
  for (int c : M.vertex_cells(v)) area += M.cell_volume(c);
  return (2.0 * std::numbers::pi - angle_sum(M, v)) / (area / 3.0);
}

/// Discrete Gauss-Bonnet pieces: total angle defect over interior vertices and
/// total turning (pi minus angle sum) over boundary vertices.
struct GaussBonnet {
  double interior_curvature = 0;
  double boundary_turning = 0;
  [[nodiscard]] double total() const { return interior_curvature + boundary_turning; }
};

inline GaussBonnet gauss_bonnet(const SurfaceMesh& M) {
  if (M.n() != 2) throw Unsupported("gauss_bonnet: n = 2 only");
  GaussBonnet gb;
  for (int v = 0; v < M.num_vertices(); ++v) {
    if (M.vertex_cells(v).empty()) continue;
    if (M.is_boundary_vertex(v)) {
      gb.boundary_turning += std::numbers::pi - angle_sum(M, v);
    } else {
      gb.interior_curvature += 2.0 * std::numbers::pi - angle_sum(M, v);
    }
  }
  return gb;
}

}  // namespace mkiso
