#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "hjb/geometry.hpp"
#include "hjb/mesh.hpp"
#include "hjb/quadrature.hpp"

namespace hjb {

/// Affine map from the reference triangle onto a mesh cell.
struct CellMap {
  Vec2 origin;
  Mat2 jacobian;       // columns are the edge vectors p1-p0, p2-p0
  Mat2 inv_transpose;  // maps reference gradients to physical gradients
  double det = 0.0;

  Vec2 to_physical(double s, double t) const { return origin + jacobian * Vec2{s, t}; }
};

inline CellMap cell_map(const TriMesh& mesh, int cell) {
  const Vec2 p0 = mesh.vertex(cell, 0), p1 = mesh.vertex(cell, 1), p2 = mesh.vertex(cell, 2);
  CellMap m;
  m.origin = p0;
  m.jacobian = Mat2::from_rows(p1.x - p0.x, p2.x - p0.x, p1.y - p0.y, p2.y - p0.y);
  m.det = det(m.jacobian);
  const double scale = std::max(norm(p1 - p0), norm(p2 - p0));
  if (!(std::abs(m.det) > 1e-14 * scale * scale)) throw std::domain_error("cell_map: degenerate cell");
  m.inv_transpose = transpose(inverse(m.jacobian));
  return m;
}

/// Number of local shape functions of the scalar Pk element.
inline int local_dof_count(int degree) { return degree == 1 ? 3 : 6; }

/// Lagrange shape functions on the reference triangle. Local order:
/// vertices 0,1,2, then (P2) edge midpoints 3+e where edge e is opposite vertex e.
inline void reference_shape(int degree, double s, double t, std::span<double> values,
                            std::span<Vec2> grads) {
  const double lam[3] = {1.0 - s - t, s, t};
  const Vec2 dlam[3] = {{-1.0, -1.0}, {1.0, 0.0}, {0.0, 1.0}};
  if (degree == 1) {
    for (int i = 0; i < 3; ++i) {
      values[i] = lam[i];
      grads[i] = dlam[i];
    }
    return;
  }
  for (int i = 0; i < 3; ++i) {
    values[i] = lam[i] * (2.0 * lam[i] - 1.0);
    grads[i] = (4.0 * lam[i] - 1.0) * dlam[i];
  }
  for (int e = 0; e < 3; ++e) {
    const int a = (e + 1) % 3, b = (e + 2) % 3;
    values[3 + e] = 4.0 * lam[a] * lam[b];
    grads[3 + e] = 4.0 * (lam[b] * dlam[a] + lam[a] * dlam[b]);
  }
}

/// Reference coordinates of the local nodes.
inline std::array<double, 2> reference_node(int local) {
  static constexpr double nodes[6][2] = {{0, 0}, {1, 0}, {0, 1}, {0.5, 0.5}, {0, 0.5}, {0.5, 0}};
  return {nodes[local][0], nodes[local][1]};
}

/// Continuous Pk Lagrange space (k = 1, 2) with one or two components.
/// Scalar dofs are numbered vertices first, then edges in ascending order of
/// their sorted vertex pair. Component c of a vector space occupies the
/// global range [c * n_scalar_dofs(), (c+1) * n_scalar_dofs()).
class FeSpace {
 public:
  FeSpace(std::shared_ptr<const TriMesh> mesh, int degree, int components)
      : mesh_(std::move(mesh)), degree_(degree), components_(components) {
    if (degree != 1 && degree != 2) throw std::invalid_argument("FeSpace: unsupported degree");
    if (components != 1 && components != 2) throw std::invalid_argument("FeSpace: components must be 1 or 2");
    const TriMesh& m = *mesh_;
    const int nloc = local_dof_count(degree);
    const int nv = static_cast<int>(m.n_vertices());
    dof_map_.resize(m.n_cells() * nloc);
    nodes_ = m.vertices;
    std::unordered_map<std::uint64_t, int> edge_index;
    if (degree == 2) {
      std::vector<std::uint64_t> edges;
      edges.reserve(m.n_cells() * 3);
      for (const auto& c : m.cells)
        for (int e = 0; e < 3; ++e) edges.push_back(edge_key(c[(e + 1) % 3], c[(e + 2) % 3]));
      std::sort(edges.begin(), edges.end());
      edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
      edge_index.reserve(edges.size());
      for (std::size_t i = 0; i < edges.size(); ++i) {
        edge_index.emplace(edges[i], nv + static_cast<int>(i));
        const auto [a, b] = edge_vertices(edges[i]);
        nodes_.push_back(0.5 * (m.vertices[a] + m.vertices[b]));
      }
    }
    n_scalar_ = static_cast<int>(nodes_.size());
    for (std::size_t c = 0; c < m.n_cells(); ++c) {
      int* d = &dof_map_[c * nloc];
      for (int i = 0; i < 3; ++i) d[i] = m.cells[c][i];
      if (degree == 2)
        for (int e = 0; e < 3; ++e) {
          const auto [a, b] = m.local_edge(static_cast<int>(c), e);
          d[3 + e] = edge_index.at(edge_key(a, b));
        }
    }
    std::vector<char> on_boundary(n_scalar_, 0);
    for (const auto& be : m.boundary_edges) {
      on_boundary[be.v[0]] = on_boundary[be.v[1]] = 1;
      if (degree == 2) on_boundary[edge_index.at(edge_key(be.v[0], be.v[1]))] = 1;
    }
    for (int i = 0; i < n_scalar_; ++i)
      if (on_boundary[i]) boundary_scalar_.push_back(i);
  }

  const TriMesh& mesh() const { return *mesh_; }
  std::shared_ptr<const TriMesh> mesh_ptr() const { return mesh_; }
  int degree() const { return degree_; }
  int components() const { return components_; }
  int n_local() const { return local_dof_count(degree_); }
  int n_scalar_dofs() const { return n_scalar_; }
  int n_dofs() const { return components_ * n_scalar_; }

  /// Scalar dof indices of a cell in local order.
  std::span<const int> cell_dofs(int cell) const {
    return {dof_map_.data() + static_cast<std::size_t>(cell) * n_local(), static_cast<std::size_t>(n_local())};
  }
  int global_dof(int component, int scalar_dof) const { return component * n_scalar_ + scalar_dof; }

  const std::vector<Vec2>& nodes() const { return nodes_; }
  const std::vector<int>& boundary_scalar_dofs() const { return boundary_scalar_; }

  /// All boundary dofs, every component.
  std::vector<int> boundary_dofs() const {
    std::vector<int> out;
    for (int c = 0; c < components_; ++c)
      for (int d : boundary_scalar_) out.push_back(global_dof(c, d));
    return out;
  }

 private:
  std::shared_ptr<const TriMesh> mesh_;
  int degree_;
  int components_;
  int n_scalar_ = 0;
  std::vector<int> dof_map_;
  std::vector<Vec2> nodes_;
  std::vector<int> boundary_scalar_;
};

inline std::shared_ptr<const FeSpace> build_space(std::shared_ptr<const TriMesh> mesh, int degree, int components) {
  return std::make_shared<const FeSpace>(std::move(mesh), degree, components);
}

/// Scalar shape function values and physical gradients at the points of a rule.
struct CellValues {
  int n_local = 0;
  std::vector<Vec2> points;   // physical
  std::vector<double> jxw;    // weight times |det J|
  std::vector<double> values; // [q * n_local + j]
  std::vector<Vec2> grads;

  double value(std::size_t q, int j) const { return values[q * n_local + j]; }
  const Vec2& grad(std::size_t q, int j) const { return grads[q * n_local + j]; }
  std::size_t size() const { return jxw.size(); }
};

inline CellValues eval_basis(const TriMesh& mesh, int degree, int cell, const QuadRule& rule) {
  const CellMap map = cell_map(mesh, cell);
  CellValues cv;
  cv.n_local = local_dof_count(degree);
  const std::size_t nq = rule.size();
  cv.points.resize(nq);
  cv.jxw.resize(nq);
  cv.values.resize(nq * cv.n_local);
  cv.grads.resize(nq * cv.n_local);
  std::array<Vec2, 6> ref_grads;
  for (std::size_t q = 0; q < nq; ++q) {
    const auto [s, t] = rule.points[q];
    cv.points[q] = map.to_physical(s, t);
    cv.jxw[q] = rule.weights[q] * std::abs(map.det);
    reference_shape(degree, s, t, std::span<double>(&cv.values[q * cv.n_local], cv.n_local),
                    std::span<Vec2>(ref_grads.data(), cv.n_local));
    for (int j = 0; j < cv.n_local; ++j) cv.grads[q * cv.n_local + j] = map.inv_transpose * ref_grads[j];
  }
  return cv;
}

inline CellValues eval_basis(const FeSpace& space, int cell, const QuadRule& rule) {
  return eval_basis(space.mesh(), space.degree(), cell, rule);
}

/// Values along one edge of a cell, parametrized from its first to its second vertex.
inline CellValues eval_basis_on_edge(const TriMesh& mesh, int degree, int cell, int local_edge,
                                     const EdgeRule& rule) {
  static constexpr double corner[3][2] = {{0, 0}, {1, 0}, {0, 1}};
  const int a = (local_edge + 1) % 3, b = (local_edge + 2) % 3;
  QuadRule mapped;
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double x = rule.points[q];
    mapped.points.push_back({(1 - x) * corner[a][0] + x * corner[b][0], (1 - x) * corner[a][1] + x * corner[b][1]});
    mapped.weights.push_back(rule.weights[q]);
  }
  CellValues cv = eval_basis(mesh, degree, cell, mapped);
  const auto [va, vb] = mesh.local_edge(cell, local_edge);
  const double len = norm(mesh.vertices[vb] - mesh.vertices[va]);
  for (std::size_t q = 0; q < rule.size(); ++q) cv.jxw[q] = rule.weights[q] * len;
  return cv;
}

/// Coefficient vector over a space.
struct DiscreteFunction {
  std::shared_ptr<const FeSpace> space;
  std::vector<double> coefficients;

  DiscreteFunction() = default;
  explicit DiscreteFunction(std::shared_ptr<const FeSpace> s)
      : space(std::move(s)), coefficients(space->n_dofs(), 0.0) {}

  /// Scalar value at point q of `cv` on `cell` (component c).
  double value(int cell, const CellValues& cv, std::size_t q, int c = 0) const {
    const auto dofs = space->cell_dofs(cell);
    double v = 0.0;
    for (int j = 0; j < cv.n_local; ++j) v += coefficients[space->global_dof(c, dofs[j])] * cv.value(q, j);
    return v;
  }
  Vec2 gradient(int cell, const CellValues& cv, std::size_t q, int c = 0) const {
    const auto dofs = space->cell_dofs(cell);
    Vec2 g;
    for (int j = 0; j < cv.n_local; ++j) g += coefficients[space->global_dof(c, dofs[j])] * cv.grad(q, j);
    return g;
  }
  Vec2 vector_value(int cell, const CellValues& cv, std::size_t q) const {
    return {value(cell, cv, q, 0), value(cell, cv, q, 1)};
  }
  /// Jacobian of a vector field: row i is the gradient of component i.
  Mat2 jacobian(int cell, const CellValues& cv, std::size_t q) const {
    const Vec2 g0 = gradient(cell, cv, q, 0), g1 = gradient(cell, cv, q, 1);
    return Mat2::from_rows(g0.x, g0.y, g1.x, g1.y);
  }
};

using ScalarField = std::function<double(const Vec2&)>;
using VectorField = std::function<Vec2(const Vec2&)>;
using TensorField = std::function<Mat2(const Vec2&)>;

inline DiscreteFunction interpolate(std::shared_ptr<const FeSpace> space, const ScalarField& f) {
  if (space->components() != 1) throw std::invalid_argument("interpolate: scalar field on vector space");
  DiscreteFunction u(space);
  const auto& nodes = space->nodes();
  for (std::size_t i = 0; i < nodes.size(); ++i) u.coefficients[i] = f(nodes[i]);
  return u;
}

inline DiscreteFunction interpolate(std::shared_ptr<const FeSpace> space, const VectorField& f) {
  if (space->components() != 2) throw std::invalid_argument("interpolate: vector field on scalar space");
  DiscreteFunction g(space);
  const auto& nodes = space->nodes();
  const int n = space->n_scalar_dofs();
  for (int i = 0; i < n; ++i) {
    const Vec2 v = f(nodes[i]);
    g.coefficients[i] = v.x;
    g.coefficients[n + i] = v.y;
  }
  return g;
}

struct Norms {
  double l2 = 0.0;
  double h1_semi = 0.0;
  double h1 = 0.0;
};

/// Norm of a pair in H1 x H1(R^2): root of the sum of squared H1 norms.
inline double pair_norm(const Norms& u, const Norms& g) { return std::sqrt(u.h1 * u.h1 + g.h1 * g.h1); }

struct NormOptions {
  int extra_degree = 4;                // rule exact to 2k + extra_degree
  std::optional<Vec2> singular_point;  // cells touching it get a subdivided rule
  int singular_levels = 2;
};

namespace detail {

inline bool touches(const TriMesh& mesh, int cell, const std::optional<Vec2>& p) {
  if (!p) return false;
  for (int i = 0; i < 3; ++i)
    if (norm(mesh.vertex(cell, i) - *p) < 1e-13) return true;
  return false;
}

template <class Integrand>
Norms accumulate_norms(const FeSpace& space, const NormOptions& opt, Integrand&& integrand) {
  const TriMesh& mesh = space.mesh();
  const QuadRule rule = triangle_rule(2 * space.degree() + opt.extra_degree);
  const QuadRule fine = subdivided_rule(rule, opt.singular_levels);
  double l2 = 0.0, semi = 0.0;
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    const int cell = static_cast<int>(c);
    const CellValues cv = eval_basis(space, cell, touches(mesh, cell, opt.singular_point) ? fine : rule);
    for (std::size_t q = 0; q < cv.size(); ++q) {
      const auto [v2, g2] = integrand(cell, cv, q);
      l2 += cv.jxw[q] * v2;
      semi += cv.jxw[q] * g2;
    }
  }
  return {std::sqrt(l2), std::sqrt(semi), std::sqrt(l2 + semi)};
}

}  // namespace detail

/// Norms of a discrete function (scalar or vector).
inline Norms norms(const DiscreteFunction& u, const NormOptions& opt = {}) {
  const FeSpace& space = *u.space;
  return detail::accumulate_norms(space, opt, [&](int cell, const CellValues& cv, std::size_t q) {
    double v2 = 0.0, g2 = 0.0;
    for (int c = 0; c < space.components(); ++c) {
      const double v = u.value(cell, cv, q, c);
      const Vec2 g = u.gradient(cell, cv, q, c);
      v2 += v * v;
      g2 += dot(g, g);
    }
    return std::pair{v2, g2};
  });
}

/// Norms of u - u_h for a scalar u_h.
inline Norms error_norms(const DiscreteFunction& uh, const ScalarField& u, const VectorField& grad_u,
                         const NormOptions& opt = {}) {
  return detail::accumulate_norms(*uh.space, opt, [&](int cell, const CellValues& cv, std::size_t q) {
    const Vec2& x = cv.points[q];
    const double e = u(x) - uh.value(cell, cv, q);
    const Vec2 ge = grad_u(x) - uh.gradient(cell, cv, q);
    return std::pair{e * e, dot(ge, ge)};
  });
}

/// Norms of g - g_h for a vector g_h; `jac_g` has rows = gradients of components.
inline Norms error_norms(const DiscreteFunction& gh, const VectorField& g, const TensorField& jac_g,
                         const NormOptions& opt = {}) {
  return detail::accumulate_norms(*gh.space, opt, [&](int cell, const CellValues& cv, std::size_t q) {
    const Vec2& x = cv.points[q];
    const Vec2 e = g(x) - gh.vector_value(cell, cv, q);
    const Mat2 ge = jac_g(x) - gh.jacobian(cell, cv, q);
    return std::pair{dot(e, e), frobenius(ge, ge)};
  });
}

}  // namespace hjb
