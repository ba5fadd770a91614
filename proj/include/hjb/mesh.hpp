#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "hjb/geometry.hpp"

namespace hjb {

enum class BoundaryKind { polygon, circle };

/// Geometry of the continuous boundary. New boundary vertices created by
/// refinement are snapped onto it (a no-op for polygons).
struct BoundaryGeometry {
  BoundaryKind kind = BoundaryKind::polygon;
  Vec2 center{};
  double radius = 1.0;

  static BoundaryGeometry polygon() { return {}; }
  static BoundaryGeometry circle(Vec2 c, double r) { return {BoundaryKind::circle, c, r}; }

  Vec2 snap(const Vec2& p) const {
    if (kind == BoundaryKind::polygon) return p;
    const Vec2 d = p - center;
    return center + (radius / norm(d)) * d;
  }
};

struct BoundaryEdge {
  std::array<int, 2> v{};  // oriented counterclockwise with respect to `cell`
  int cell = -1;
  int local_edge = -1;     // edge i of a cell is opposite its vertex i
  Vec2 normal{};           // outward unit normal
  Vec2 tangent{};          // unit tangent, v[0] -> v[1]
  double length = 0.0;
};

/// Conforming triangulation. Cells are counterclockwise vertex triples.
/// `refinement_edge[c]` is the local index of the edge bisected by
/// newest-vertex bisection; `parent[c]` is the index of the cell in the
/// mesh this one was refined from (-1 for root cells).
struct TriMesh {
  std::vector<Vec2> vertices;
  std::vector<std::array<int, 3>> cells;
  std::vector<BoundaryEdge> boundary_edges;
  BoundaryGeometry geometry;
  std::vector<int> refinement_edge;
  std::vector<int> parent;

  std::size_t n_cells() const { return cells.size(); }
  std::size_t n_vertices() const { return vertices.size(); }

  Vec2 vertex(int cell, int local) const { return vertices[cells[cell][local]]; }

  std::array<int, 2> local_edge(int cell, int e) const {
    return {cells[cell][(e + 1) % 3], cells[cell][(e + 2) % 3]};
  }

  double signed_area(int cell) const {
    const Vec2 a = vertex(cell, 0), b = vertex(cell, 1), c = vertex(cell, 2);
    return 0.5 * cross(b - a, c - a);
  }

  double diameter(int cell) const {
    const Vec2 a = vertex(cell, 0), b = vertex(cell, 1), c = vertex(cell, 2);
    return std::max({norm(b - a), norm(c - b), norm(a - c)});
  }

  double max_diameter() const {
    double h = 0.0;
    for (std::size_t c = 0; c < n_cells(); ++c) h = std::max(h, diameter(static_cast<int>(c)));
    return h;
  }

  double total_area() const {
    double a = 0.0;
    for (std::size_t c = 0; c < n_cells(); ++c) a += signed_area(static_cast<int>(c));
    return a;
  }

  /// Smallest interior angle of a cell, radians.
  double min_angle(int cell) const {
    double m = std::numbers::pi;
    for (int i = 0; i < 3; ++i) {
      const Vec2 p = vertex(cell, i);
      const Vec2 u = vertex(cell, (i + 1) % 3) - p, w = vertex(cell, (i + 2) % 3) - p;
      m = std::min(m, std::atan2(std::abs(cross(u, w)), dot(u, w)));
    }
    return m;
  }

  double min_angle() const {
    double m = std::numbers::pi;
    for (std::size_t c = 0; c < n_cells(); ++c) m = std::min(m, min_angle(static_cast<int>(c)));
    return m;
  }
};

namespace detail {

inline double edge_length(const TriMesh& mesh, int cell, int e) {
  const auto [a, b] = mesh.local_edge(cell, e);
  return norm(mesh.vertices[b] - mesh.vertices[a]);
}

/// Longest edge, ties broken by the smallest global index of the opposite vertex.
inline int longest_edge(const TriMesh& mesh, int cell) {
  int best = 0;
  double best_len = edge_length(mesh, cell, 0);
  for (int e = 1; e < 3; ++e) {
    const double len = edge_length(mesh, cell, e);
    const double tol = 1e-12 * std::max(len, best_len);
    if (len > best_len + tol ||
        (std::abs(len - best_len) <= tol && mesh.cells[cell][e] < mesh.cells[cell][best])) {
      best = e;
      best_len = len;
    }
  }
  return best;
}

inline void compute_boundary_edges(TriMesh& mesh) {
  std::unordered_map<std::uint64_t, int> count;
  count.reserve(mesh.n_cells() * 3);
  for (const auto& c : mesh.cells)
    for (int e = 0; e < 3; ++e) ++count[edge_key(c[(e + 1) % 3], c[(e + 2) % 3])];
  mesh.boundary_edges.clear();
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    for (int e = 0; e < 3; ++e) {
      const auto [a, b] = mesh.local_edge(static_cast<int>(c), e);
      if (count[edge_key(a, b)] != 1) continue;
      BoundaryEdge be;
      be.v = {a, b};
      be.cell = static_cast<int>(c);
      be.local_edge = e;
      const Vec2 d = mesh.vertices[b] - mesh.vertices[a];
      be.length = norm(d);
      be.tangent = (1.0 / be.length) * d;
      be.normal = {be.tangent.y, -be.tangent.x};
      mesh.boundary_edges.push_back(be);
    }
  }
}

}  // namespace detail

/// Builds a mesh from raw data: fixes orientation, computes boundary edges
/// and initializes refinement edges with the longest-edge rule.
inline TriMesh make_mesh(std::vector<Vec2> vertices, std::vector<std::array<int, 3>> cells,
                         BoundaryGeometry geometry = BoundaryGeometry::polygon()) {
  TriMesh mesh;
  mesh.vertices = std::move(vertices);
  mesh.cells = std::move(cells);
  mesh.geometry = geometry;
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    for (int v : mesh.cells[c])
      if (v < 0 || static_cast<std::size_t>(v) >= mesh.n_vertices())
        throw std::invalid_argument("make_mesh: vertex index out of range");
    const double a = mesh.signed_area(static_cast<int>(c));
    if (a == 0.0) throw std::invalid_argument("make_mesh: degenerate cell");
    if (a < 0.0) std::swap(mesh.cells[c][1], mesh.cells[c][2]);
  }
  mesh.refinement_edge.resize(mesh.n_cells());
  for (std::size_t c = 0; c < mesh.n_cells(); ++c)
    mesh.refinement_edge[c] = detail::longest_edge(mesh, static_cast<int>(c));
  mesh.parent.assign(mesh.n_cells(), -1);
  detail::compute_boundary_edges(mesh);
  return mesh;
}

/// Structured mesh of (-1,1)^2: n x n squares, each split along the
/// diagonal from its lower-left to its upper-right corner.
inline TriMesh unit_square_mesh(int n) {
  if (n < 1) throw std::invalid_argument("unit_square_mesh: n must be >= 1");
  const int np = n + 1;
  std::vector<Vec2> verts;
  verts.reserve(np * np);
  for (int j = 0; j < np; ++j)
    for (int i = 0; i < np; ++i) verts.push_back({-1.0 + 2.0 * i / n, -1.0 + 2.0 * j / n});
  auto vid = [np](int i, int j) { return j * np + i; };
  std::vector<std::array<int, 3>> cells;
  cells.reserve(2 * n * n);
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      cells.push_back({vid(i, j), vid(i + 1, j), vid(i + 1, j + 1)});
      cells.push_back({vid(i, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  }
  return make_mesh(std::move(verts), std::move(cells));
}

/// Quasi-uniform mesh of the unit disk with `m` vertices on the circle.
/// Vertices sit on concentric rings (radius j/L, L ~ m / 2pi) and adjacent
/// rings are stitched by an angular sweep; the innermost ring is a fan
/// around the origin.
inline TriMesh unit_disk_mesh(int m) {
  if (m < 6) throw std::invalid_argument("unit_disk_mesh: need at least 6 boundary vertices");
  const double two_pi = 2.0 * std::numbers::pi;
  const int rings = std::max(1, static_cast<int>(std::lround(m / two_pi)));
  std::vector<Vec2> verts{{0.0, 0.0}};
  std::vector<std::vector<int>> ring_ids(rings + 1);
  std::vector<std::vector<double>> ring_angles(rings + 1);
  ring_ids[0] = {0};
  for (int j = 1; j <= rings; ++j) {
    const int count = j == rings ? m : std::max(6, static_cast<int>(std::lround(double(m) * j / rings)));
    const double radius = double(j) / rings;
    const double offset = (j == rings || j % 2 == 0) ? 0.0 : 0.5 * two_pi / count;
    for (int i = 0; i < count; ++i) {
      const double ang = offset + two_pi * i / count;
      ring_ids[j].push_back(static_cast<int>(verts.size()));
      ring_angles[j].push_back(ang);
      if (j == rings)
        verts.push_back({std::cos(ang), std::sin(ang)});
      else
        verts.push_back({radius * std::cos(ang), radius * std::sin(ang)});
    }
  }
  std::vector<std::array<int, 3>> cells;
  const auto& first = ring_ids[1];
  for (std::size_t i = 0; i < first.size(); ++i)
    cells.push_back({0, first[i], first[(i + 1) % first.size()]});
  for (int j = 1; j < rings; ++j) {
    const auto& in = ring_ids[j];
    const auto& out = ring_ids[j + 1];
    const auto& ain = ring_angles[j];
    const auto& aout = ring_angles[j + 1];
    const int n1 = static_cast<int>(in.size()), n2 = static_cast<int>(out.size());
    // Start the outer sweep at the outer vertex angularly closest to inner vertex 0.
    int j0 = 0;
    double best = two_pi;
    for (int k = 0; k < n2; ++k) {
      const double d = std::abs(std::remainder(aout[k] - ain[0], two_pi));
      if (d < best) {
        best = d;
        j0 = k;
      }
    }
    // Unwrapped, increasing angles; index n closes the loop.
    std::vector<double> ti(n1 + 1), to(n2 + 1);
    for (int k = 0; k <= n1; ++k) ti[k] = ain[0] + two_pi * k / n1;
    to[0] = ain[0] + std::remainder(aout[j0] - ain[0], two_pi);
    for (int k = 1; k <= n2; ++k) to[k] = to[0] + two_pi * k / n2;
    int si = 0, so = 0;
    while (si < n1 || so < n2) {
      const int ci = in[si % n1], co = out[(j0 + so) % n2];
      const bool advance_in = so >= n2 || (si < n1 && ti[si + 1] <= to[so + 1]);
      if (advance_in) {
        cells.push_back({ci, co, in[(si + 1) % n1]});
        ++si;
      } else {
        cells.push_back({ci, co, out[(j0 + so + 1) % n2]});
        ++so;
      }
    }
  }
  return make_mesh(std::move(verts), std::move(cells), BoundaryGeometry::circle({0.0, 0.0}, 1.0));
}

/// Red refinement: every cell is split into four similar children.
/// Midpoints of boundary edges are snapped onto the boundary geometry.
inline TriMesh refine_uniform(const TriMesh& mesh) {
  TriMesh out;
  out.geometry = mesh.geometry;
  out.vertices = mesh.vertices;
  std::unordered_set<std::uint64_t> boundary;
  for (const auto& be : mesh.boundary_edges) boundary.insert(edge_key(be.v[0], be.v[1]));
  std::unordered_map<std::uint64_t, int> midpoint;
  midpoint.reserve(mesh.n_cells() * 2);
  auto mid = [&](int a, int b) {
    const auto key = edge_key(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    Vec2 p = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
    if (boundary.count(key)) p = mesh.geometry.snap(p);
    const int id = static_cast<int>(out.vertices.size());
    out.vertices.push_back(p);
    midpoint.emplace(key, id);
    return id;
  };
  out.cells.reserve(4 * mesh.n_cells());
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    const auto [a, b, d] = mesh.cells[c];
    const int mab = mid(a, b), mbd = mid(b, d), mda = mid(d, a);
    // Children are similar to the parent with matching local numbering,
    // so each inherits the parent's refinement edge index.
    out.cells.push_back({a, mab, mda});
    out.cells.push_back({mab, b, mbd});
    out.cells.push_back({mda, mbd, d});
    out.cells.push_back({mbd, mda, mab});
    for (int k = 0; k < 4; ++k) {
      out.refinement_edge.push_back(mesh.refinement_edge[c]);
      out.parent.push_back(static_cast<int>(c));
    }
  }
  detail::compute_boundary_edges(out);
  return out;
}

/// Newest-vertex bisection of the marked cells with recursive closure.
/// Every marked cell is bisected at least once; the result is conforming.
inline TriMesh refine_marked(const TriMesh& mesh, const std::vector<int>& marked) {
  if (marked.empty()) throw std::invalid_argument("refine_marked: empty marked set");
  {
    std::vector<int> sorted = marked;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
      throw std::invalid_argument("refine_marked: duplicate cell index");
    if (sorted.front() < 0 || static_cast<std::size_t>(sorted.back()) >= mesh.n_cells())
      throw std::invalid_argument("refine_marked: cell index out of range");
  }
  auto ref_key = [&](std::size_t c) {
    const auto [a, b] = mesh.local_edge(static_cast<int>(c), mesh.refinement_edge[c]);
    return edge_key(a, b);
  };
  std::unordered_set<std::uint64_t> to_split;
  for (int c : marked) to_split.insert(ref_key(c));
  // Closure: a cell with any split edge must split its refinement edge.
  for (bool changed = true; changed;) {
    changed = false;
    for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
      const auto rk = ref_key(c);
      if (to_split.count(rk)) continue;
      for (int e = 0; e < 3; ++e) {
        const auto [a, b] = mesh.local_edge(static_cast<int>(c), e);
        if (to_split.count(edge_key(a, b))) {
          to_split.insert(rk);
          changed = true;
          break;
        }
      }
    }
  }

  std::unordered_set<std::uint64_t> boundary;
  for (const auto& be : mesh.boundary_edges) boundary.insert(edge_key(be.v[0], be.v[1]));

  TriMesh out;
  out.geometry = mesh.geometry;
  out.vertices = mesh.vertices;
  std::unordered_map<std::uint64_t, int> midpoint;
  auto mid = [&](int a, int b) {
    const auto key = edge_key(a, b);
    auto it = midpoint.find(key);
    if (it != midpoint.end()) return it->second;
    Vec2 p = 0.5 * (mesh.vertices[a] + mesh.vertices[b]);
    if (boundary.count(key)) p = mesh.geometry.snap(p);
    const int id = static_cast<int>(out.vertices.size());
    out.vertices.push_back(p);
    midpoint.emplace(key, id);
    return id;
  };

  struct Pending {
    std::array<int, 3> v;
    int ref;
  };
  std::vector<Pending> stack;
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    stack.push_back({mesh.cells[c], mesh.refinement_edge[c]});
    while (!stack.empty()) {
      const Pending p = stack.back();
      stack.pop_back();
      const int newest = p.v[p.ref];
      const int a = p.v[(p.ref + 1) % 3], b = p.v[(p.ref + 2) % 3];
      if (!to_split.count(edge_key(a, b))) {
        out.cells.push_back(p.v);
        out.refinement_edge.push_back(p.ref);
        out.parent.push_back(static_cast<int>(c));
        continue;
      }
      const int m = mid(a, b);
      // (newest, a, b) is counterclockwise; children keep m as newest vertex.
      stack.push_back({{m, b, newest}, 0});
      stack.push_back({{m, newest, a}, 0});
    }
  }
  detail::compute_boundary_edges(out);
  return out;
}

/// Edge multiplicities keyed by vertex pair.
inline std::map<std::uint64_t, int> edge_census(const TriMesh& mesh) {
  std::map<std::uint64_t, int> count;
  for (const auto& c : mesh.cells)
    for (int e = 0; e < 3; ++e) ++count[edge_key(c[(e + 1) % 3], c[(e + 2) % 3])];
  return count;
}

/// Checks the structural invariants; returns an empty string when all hold.
inline std::string check_mesh(const TriMesh& mesh) {
  std::ostringstream err;
  for (std::size_t c = 0; c < mesh.n_cells(); ++c)
    if (!(mesh.signed_area(static_cast<int>(c)) > 0.0)) err << "cell " << c << " not positively oriented; ";
  const auto census = edge_census(mesh);
  std::unordered_set<std::uint64_t> bset;
  for (const auto& be : mesh.boundary_edges) bset.insert(edge_key(be.v[0], be.v[1]));
  std::size_t nboundary = 0;
  for (const auto& [key, n] : census) {
    if (n > 2) err << "edge shared by " << n << " cells; ";
    if (n == 1) {
      ++nboundary;
      if (!bset.count(key)) err << "unlisted boundary edge; ";
    }
  }
  if (nboundary != mesh.boundary_edges.size()) err << "boundary edge list mismatch; ";
  // Closed loops: every boundary vertex starts exactly one and ends exactly one edge.
  std::unordered_map<int, int> starts, ends;
  for (const auto& be : mesh.boundary_edges) {
    ++starts[be.v[0]];
    ++ends[be.v[1]];
    if (std::abs(dot(be.normal, be.tangent)) > 1e-14 || std::abs(norm(be.normal) - 1.0) > 1e-14 ||
        std::abs(norm(be.tangent) - 1.0) > 1e-14)
      err << "bad boundary frame; ";
    if (mesh.geometry.kind == BoundaryKind::circle) {
      for (int v : be.v)
        if (std::abs(norm(mesh.vertices[v] - mesh.geometry.center) - mesh.geometry.radius) > 1e-12)
          err << "boundary vertex off circle; ";
    }
  }
  for (const auto& [v, n] : starts)
    if (n != 1 || ends[v] != 1) err << "boundary not a union of closed loops; ";
  if (mesh.refinement_edge.size() != mesh.n_cells() || mesh.parent.size() != mesh.n_cells())
    err << "per-cell arrays have wrong length; ";
  return err.str();
}

/// Writes the plain-text mesh format: "ncells nvertices nboundaryedges",
/// then vertex coordinates, cell vertex triples, boundary edge pairs.
inline void write_mesh(const TriMesh& mesh, std::ostream& os) {
  os << mesh.n_cells() << ' ' << mesh.n_vertices() << ' ' << mesh.boundary_edges.size() << '\n';
  os << std::setprecision(17);
  for (const auto& v : mesh.vertices) os << v.x << ' ' << v.y << '\n';
  for (const auto& c : mesh.cells) os << c[0] << ' ' << c[1] << ' ' << c[2] << '\n';
  for (const auto& be : mesh.boundary_edges) os << be.v[0] << ' ' << be.v[1] << '\n';
}

inline void write_mesh(const TriMesh& mesh, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("write_mesh: cannot open " + path);
  write_mesh(mesh, os);
}

inline TriMesh read_mesh(std::istream& is, BoundaryGeometry geometry = BoundaryGeometry::polygon()) {
  long nc = -1, nv = -1, nb = -1;
  if (!(is >> nc >> nv >> nb) || nc < 1 || nv < 3 || nb < 0)
    throw std::runtime_error("read_mesh: malformed header");
  std::vector<Vec2> verts(nv);
  for (auto& v : verts)
    if (!(is >> v.x >> v.y)) throw std::runtime_error("read_mesh: truncated vertex list");
  std::vector<std::array<int, 3>> cells(nc);
  for (auto& c : cells)
    if (!(is >> c[0] >> c[1] >> c[2])) throw std::runtime_error("read_mesh: truncated cell list");
  for (long i = 0; i < nb; ++i) {
    int a, b;
    if (!(is >> a >> b)) throw std::runtime_error("read_mesh: truncated boundary edge list");
  }
  TriMesh mesh = make_mesh(std::move(verts), std::move(cells), geometry);
  if (static_cast<long>(mesh.boundary_edges.size()) != nb)
    throw std::runtime_error("read_mesh: boundary edge count does not match topology");
  return mesh;
}

inline TriMesh read_mesh(const std::string& path, BoundaryGeometry geometry = BoundaryGeometry::polygon()) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("read_mesh: cannot open " + path);
  return read_mesh(is, geometry);
}

}  // namespace hjb
