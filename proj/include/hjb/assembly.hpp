#pragma once

#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <stdexcept>
#include <vector>

#include "hjb/fespace.hpp"
#include "hjb/mesh.hpp"
#include "hjb/problem.hpp"
#include "hjb/quadrature.hpp"
#include "hjb/sparse.hpp"

namespace hjb {

/// Piecewise-constant control map: one control value per cell.
struct ControlField {
  std::vector<double> alpha;

  ControlField() = default;
  explicit ControlField(std::size_t ncells, double value = 0.0) : alpha(ncells, value) {}
  std::size_t size() const { return alpha.size(); }
  double operator[](std::size_t c) const { return alpha[c]; }
};

/// Scalar space for u and vector space for g of the same degree on one mesh.
/// The combined unknown vector is [u dofs | g dofs].
struct PairSpaces {
  std::shared_ptr<const FeSpace> u;
  std::shared_ptr<const FeSpace> g;

  const TriMesh& mesh() const { return u->mesh(); }
  int degree() const { return u->degree(); }
  int n_u() const { return u->n_dofs(); }
  int n_g() const { return g->n_dofs(); }
  int size() const { return n_u() + n_g(); }
};

inline PairSpaces make_pair_spaces(std::shared_ptr<const TriMesh> mesh, int degree) {
  return {build_space(mesh, degree, 1), build_space(mesh, degree, 2)};
}

/// Discrete state u_h and recovered gradient g_h.
struct PairField {
  DiscreteFunction u;
  DiscreteFunction g;

  static PairField zero(const PairSpaces& s) { return {DiscreteFunction(s.u), DiscreteFunction(s.g)}; }

  std::vector<double> to_vector() const {
    std::vector<double> v(u.coefficients);
    v.insert(v.end(), g.coefficients.begin(), g.coefficients.end());
    return v;
  }

  static PairField from_vector(const PairSpaces& s, std::span<const double> v) {
    if (static_cast<int>(v.size()) != s.size()) throw std::invalid_argument("PairField: size mismatch");
    PairField p = zero(s);
    std::copy(v.begin(), v.begin() + s.n_u(), p.u.coefficients.begin());
    std::copy(v.begin() + s.n_u(), v.end(), p.g.coefficients.begin());
    return p;
  }
};

/// H1 x H1 norm of the difference of two pairs on the same spaces.
inline double pair_distance(const PairField& a, const PairField& b) {
  DiscreteFunction du(a.u.space), dg(a.g.space);
  for (std::size_t i = 0; i < du.coefficients.size(); ++i) du.coefficients[i] = a.u.coefficients[i] - b.u.coefficients[i];
  for (std::size_t i = 0; i < dg.coefficients.size(); ++i) dg.coefficients[i] = a.g.coefficients[i] - b.g.coefficients[i];
  return pair_norm(norms(du), norms(dg));
}

/// M_theta(phi, psi) = A : D psi + b . (theta psi + (1 - theta) grad phi) - c phi,
/// where (D psi)_{ij} = d_j psi_i.
inline double m_theta(const Coefficients& k, double theta, double phi, const Vec2& grad_phi, const Vec2& psi,
                      const Mat2& d_psi) {
  return frobenius(k.A, d_psi) + dot(k.b, theta * psi + (1.0 - theta) * grad_phi) - k.c * phi;
}

inline double m_theta_point(const HjbProblem& p, const Vec2& x, double alpha, double phi, const Vec2& grad_phi,
                            const Vec2& psi, const Mat2& d_psi) {
  return m_theta(p.coefficients(x, alpha), p.theta, phi, grad_phi, psi, d_psi);
}

/// 2D scalar curl d1 psi_2 - d2 psi_1.
inline double rot(const Mat2& d_psi) { return d_psi(1, 0) - d_psi(0, 1); }

/// Pair values at one quadrature point.
struct PairPoint {
  double u = 0.0;
  Vec2 grad_u;
  Vec2 g;
  Mat2 dg;
};

inline PairPoint evaluate_pair(const PairField& pair, int cell, const CellValues& cv, std::size_t q) {
  return {pair.u.value(cell, cv, q), pair.u.gradient(cell, cv, q), pair.g.vector_value(cell, cv, q),
          pair.g.jacobian(cell, cv, q)};
}

/// Quadrature order shared by assembly, residuals and indicators.
inline int assembly_degree(int k) { return 2 * k + 4; }

struct SparseSystem {
  CsrMatrix matrix;
  std::vector<double> rhs;
  std::vector<int> constrained;  // u dofs pinned to zero (homogeneous problems)
  /// Data part of the functional, so that E(v) = v.Av - 2 rhs.v + data_norm2
  /// for v vanishing on the constrained dofs.
  double data_norm2 = 0.0;
};

struct AssembleOptions {
  bool apply_constraints = true;
};

namespace detail {

/// Per-point least-squares features of each local basis function of the
/// pair: (grad phi - psi, rot psi, M_theta(phi, psi)). Local order is
/// u dofs, then g_1 dofs, then g_2 dofs.
inline void point_features(const CellValues& cv, std::size_t q, const Coefficients& k, double theta,
                           std::vector<std::array<double, 4>>& feat) {
  const int nl = cv.n_local;
  feat.resize(3 * nl);
  for (int j = 0; j < nl; ++j) {
    const double n = cv.value(q, j);
    const Vec2& dn = cv.grad(q, j);
    feat[j] = {dn.x, dn.y, 0.0, (1.0 - theta) * dot(k.b, dn) - k.c * n};
    feat[nl + j] = {-n, 0.0, -dn.y, k.A(0, 0) * dn.x + k.A(0, 1) * dn.y + theta * k.b.x * n};
    feat[2 * nl + j] = {0.0, -n, dn.x, k.A(1, 0) * dn.x + k.A(1, 1) * dn.y + theta * k.b.y * n};
  }
}

inline std::vector<int> local_to_global(const PairSpaces& s, int cell) {
  const auto dofs = s.u->cell_dofs(cell);
  const int nl = static_cast<int>(dofs.size());
  std::vector<int> idx(3 * nl);
  for (int j = 0; j < nl; ++j) {
    idx[j] = dofs[j];
    idx[nl + j] = s.n_u() + s.g->global_dof(0, dofs[j]);
    idx[2 * nl + j] = s.n_u() + s.g->global_dof(1, dofs[j]);
  }
  return idx;
}

}  // namespace detail

/// Least-squares Galerkin system for a fixed control field:
///   (grad u - g, grad phi - psi) + (rot g, rot psi) + (M(u,g), M(phi,psi))
///   + (T g, T psi)_bdry [+ (u, phi)_bdry]
///   = (f, M(phi,psi)) [+ (r, phi)_bdry + (T grad r, T psi)_bdry],
/// with T psi = psi . t on boundary edges and the bracketed terms present for
/// nonhomogeneous problems. Homogeneous problems pin the boundary u dofs.
inline SparseSystem assemble(const HjbProblem& p, const PairSpaces& s, const ControlField& q,
                             const AssembleOptions& opt = {}) {
  const TriMesh& mesh = s.mesh();
  if (q.size() != mesh.n_cells()) throw std::invalid_argument("assemble: control field length does not match mesh");
  const int k = s.degree();
  const QuadRule rule = triangle_rule(assembly_degree(k));
  const EdgeRule erule = edge_rule(assembly_degree(k));
  const int nl = local_dof_count(k);
  const int nt = 3 * nl;

  SparseSystem sys;
  sys.rhs.assign(s.size(), 0.0);
  std::vector<Triplet> trip;
  trip.reserve(mesh.n_cells() * nt * nt + mesh.boundary_edges.size() * nt * nt);
  std::vector<double> local(nt * nt), local_rhs(nt);
  std::vector<std::array<double, 4>> feat;

  auto scatter = [&](const std::vector<int>& idx) {
    for (int i = 0; i < nt; ++i) {
      sys.rhs[idx[i]] += local_rhs[i];
      for (int j = 0; j < nt; ++j)
        if (local[i * nt + j] != 0.0) trip.push_back({idx[i], idx[j], local[i * nt + j]});
    }
  };

  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    const int cell = static_cast<int>(c);
    const CellValues cv = eval_basis(mesh, k, cell, rule);
    std::fill(local.begin(), local.end(), 0.0);
    std::fill(local_rhs.begin(), local_rhs.end(), 0.0);
    for (std::size_t qp = 0; qp < cv.size(); ++qp) {
      const Coefficients co = p.coefficients(cv.points[qp], q[c]);
      detail::point_features(cv, qp, co, p.theta, feat);
      const double w = cv.jxw[qp];
      for (int i = 0; i < nt; ++i) {
        const auto& fi = feat[i];
        local_rhs[i] += w * co.f * fi[3];
        for (int j = i; j < nt; ++j) {
          const auto& fj = feat[j];
          local[i * nt + j] += w * (fi[0] * fj[0] + fi[1] * fj[1] + fi[2] * fj[2] + fi[3] * fj[3]);
        }
      }
      sys.data_norm2 += w * co.f * co.f;
    }
    for (int i = 0; i < nt; ++i)
      for (int j = 0; j < i; ++j) local[i * nt + j] = local[j * nt + i];
    scatter(detail::local_to_global(s, cell));
  }

  for (const BoundaryEdge& be : mesh.boundary_edges) {
    const CellValues cv = eval_basis_on_edge(mesh, k, be.cell, be.local_edge, erule);
    std::fill(local.begin(), local.end(), 0.0);
    std::fill(local_rhs.begin(), local_rhs.end(), 0.0);
    const Vec2 t = be.tangent;
    for (std::size_t qp = 0; qp < cv.size(); ++qp) {
      const double w = cv.jxw[qp];
      const Vec2& x = cv.points[qp];
      const double r = p.homogeneous ? 0.0 : p.boundary_value(x);
      const double tr = p.homogeneous ? 0.0 : dot(p.boundary_gradient(x), t);
      std::vector<double> tang(nt, 0.0), val(nt, 0.0);
      for (int j = 0; j < nl; ++j) {
        const double n = cv.value(qp, j);
        if (!p.homogeneous) val[j] = n;
        tang[nl + j] = n * t.x;
        tang[2 * nl + j] = n * t.y;
      }
      for (int i = 0; i < nt; ++i) {
        local_rhs[i] += w * (tr * tang[i] + r * val[i]);
        for (int j = 0; j < nt; ++j) local[i * nt + j] += w * (tang[i] * tang[j] + val[i] * val[j]);
      }
      sys.data_norm2 += w * (r * r + tr * tr);
    }
    scatter(detail::local_to_global(s, be.cell));
  }

  sys.matrix = build_csr(s.size(), s.size(), std::move(trip));

  if (p.homogeneous && opt.apply_constraints) {
    sys.constrained = s.u->boundary_scalar_dofs();
    std::vector<char> pinned(s.size(), 0);
    for (int d : sys.constrained) pinned[d] = 1;
    CsrMatrix& A = sys.matrix;
    for (int i = 0; i < A.rows; ++i) {
      for (int kk = A.row_ptr[i]; kk < A.row_ptr[i + 1]; ++kk) {
        const int j = A.col_idx[kk];
        if (pinned[i] || pinned[j]) A.values[kk] = (i == j) ? 1.0 : 0.0;
      }
      if (pinned[i]) sys.rhs[i] = 0.0;
    }
  }
  return sys;
}

/// Terms of the least-squares functional at a pair.
struct ResidualTerms {
  double gradient_mismatch = 0.0;  // ||grad u - g||^2
  double curl = 0.0;               // ||rot g||^2
  double operator_residual = 0.0;  // ||M(u, g) - f||^2
  double tangential = 0.0;         // ||T (g - grad r)||^2 on the boundary
  double boundary_value = 0.0;     // ||u - r||^2 on the boundary (nonhomogeneous only)

  double total() const { return gradient_mismatch + curl + operator_residual + tangential + boundary_value; }
};

/// Least-squares functional E_theta (homogeneous) or its extension with
/// boundary data (nonhomogeneous) at the pair, for the control field q.
inline ResidualTerms residual_terms(const HjbProblem& p, const PairSpaces& s, const PairField& pair,
                                    const ControlField& q) {
  const TriMesh& mesh = s.mesh();
  if (q.size() != mesh.n_cells()) throw std::invalid_argument("residual_functional: control field length mismatch");
  const int k = s.degree();
  const QuadRule rule = triangle_rule(assembly_degree(k));
  const EdgeRule erule = edge_rule(assembly_degree(k));
  ResidualTerms t;
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    const int cell = static_cast<int>(c);
    const CellValues cv = eval_basis(mesh, k, cell, rule);
    for (std::size_t qp = 0; qp < cv.size(); ++qp) {
      const PairPoint v = evaluate_pair(pair, cell, cv, qp);
      const Coefficients co = p.coefficients(cv.points[qp], q[c]);
      const Vec2 mis = v.grad_u - v.g;
      const double rt = rot(v.dg);
      const double m = m_theta(co, p.theta, v.u, v.grad_u, v.g, v.dg) - co.f;
      t.gradient_mismatch += cv.jxw[qp] * dot(mis, mis);
      t.curl += cv.jxw[qp] * rt * rt;
      t.operator_residual += cv.jxw[qp] * m * m;
    }
  }
  for (const BoundaryEdge& be : mesh.boundary_edges) {
    const CellValues cv = eval_basis_on_edge(mesh, k, be.cell, be.local_edge, erule);
    for (std::size_t qp = 0; qp < cv.size(); ++qp) {
      const Vec2& x = cv.points[qp];
      const Vec2 g = pair.g.vector_value(be.cell, cv, qp);
      if (p.homogeneous) {
        const double tg = dot(g, be.tangent);
        t.tangential += cv.jxw[qp] * tg * tg;
      } else {
        const double tg = dot(g - p.boundary_gradient(x), be.tangent);
        const double du = pair.u.value(be.cell, cv, qp) - p.boundary_value(x);
        t.tangential += cv.jxw[qp] * tg * tg;
        t.boundary_value += cv.jxw[qp] * du * du;
      }
    }
  }
  return t;
}

inline double residual_functional(const HjbProblem& p, const PairSpaces& s, const PairField& pair,
                                  const ControlField& q) {
  return residual_terms(p, s, pair, q).total();
}

}  // namespace hjb
