#pragma once

#include <algorithm>
#include <cmath>
#include <memory>
#include <numeric>
#include <optional>
#include <stdexcept>
#include <vector>

#include "hjb/assembly.hpp"
#include "hjb/howard.hpp"
#include "hjb/mesh.hpp"

namespace hjb {

struct Indicators {
  std::vector<double> eta2;  // per cell
  double total = 0.0;        // global eta^2

  double eta() const { return std::sqrt(total); }
};

/// Residual indicators eta(K)^2: the cell's share of the least-squares
/// functional (volume terms on K, boundary terms on the edges of K that lie
/// on the boundary). Same quadrature as assembly.
inline Indicators compute_indicators(const HjbProblem& p, const PairSpaces& s, const PairField& pair,
                                     const ControlField& q) {
  const TriMesh& mesh = s.mesh();
  if (q.size() != mesh.n_cells()) throw std::invalid_argument("compute_indicators: control field length mismatch");
  const int k = s.degree();
  const QuadRule rule = triangle_rule(assembly_degree(k));
  const EdgeRule erule = edge_rule(assembly_degree(k));
  std::vector<std::vector<int>> cell_edges(mesh.n_cells());
  for (std::size_t i = 0; i < mesh.boundary_edges.size(); ++i)
    cell_edges[mesh.boundary_edges[i].cell].push_back(static_cast<int>(i));

  Indicators ind;
  ind.eta2.assign(mesh.n_cells(), 0.0);
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    const int cell = static_cast<int>(c);
    double e = 0.0;
    const CellValues cv = eval_basis(mesh, k, cell, rule);
    for (std::size_t qp = 0; qp < cv.size(); ++qp) {
      const PairPoint v = evaluate_pair(pair, cell, cv, qp);
      const Coefficients co = p.coefficients(cv.points[qp], q[c]);
      const Vec2 mis = v.grad_u - v.g;
      const double rt = rot(v.dg);
      const double m = m_theta(co, p.theta, v.u, v.grad_u, v.g, v.dg) - co.f;
      e += cv.jxw[qp] * (dot(mis, mis) + rt * rt + m * m);
    }
    for (int i : cell_edges[c]) {
      const BoundaryEdge& be = mesh.boundary_edges[i];
      const CellValues ev = eval_basis_on_edge(mesh, k, cell, be.local_edge, erule);
      for (std::size_t qp = 0; qp < ev.size(); ++qp) {
        const Vec2& x = ev.points[qp];
        Vec2 g = pair.g.vector_value(cell, ev, qp);
        double du = 0.0;
        if (!p.homogeneous) {
          g = g - p.boundary_gradient(x);
          du = pair.u.value(cell, ev, qp) - p.boundary_value(x);
        }
        const double tg = dot(g, be.tangent);
        e += ev.jxw[qp] * (tg * tg + du * du);
      }
    }
    ind.eta2[c] = e;
    ind.total += e;
  }
  return ind;
}

/// The ceil(beta * N) cells with the largest indicators, ties to the smaller
/// index, in ranking order.
inline std::vector<int> mark_fraction(const Indicators& ind, double beta) {
  if (!(beta > 0.0 && beta < 1.0)) throw std::invalid_argument("mark_fraction: beta must lie in (0, 1)");
  const std::size_t n = ind.eta2.size();
  const auto count = static_cast<std::size_t>(std::ceil(beta * static_cast<double>(n)));
  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ind.eta2[a] > ind.eta2[b]; });
  order.resize(std::min(count, n));
  return order;
}

/// Interpolates a function on a coarse mesh into a space on a mesh refined
/// from it (uses TriMesh::parent to locate nodes).
inline DiscreteFunction transfer(const DiscreteFunction& coarse, std::shared_ptr<const FeSpace> fine) {
  const TriMesh& cm = coarse.space->mesh();
  const TriMesh& fm = fine->mesh();
  if (fine->components() != coarse.space->components() || fine->degree() != coarse.space->degree())
    throw std::invalid_argument("transfer: incompatible spaces");
  DiscreteFunction out(fine);
  const int k = fine->degree(), nl = local_dof_count(k);
  std::vector<double> vals(nl);
  std::vector<Vec2> grads(nl);
  for (std::size_t c = 0; c < fm.n_cells(); ++c) {
    const int parent = fm.parent[c];
    if (parent < 0 || static_cast<std::size_t>(parent) >= cm.n_cells())
      throw std::invalid_argument("transfer: fine mesh has no parent cell information");
    const CellMap fmap = cell_map(fm, static_cast<int>(c));
    const CellMap pmap = cell_map(cm, parent);
    const Mat2 pinv = inverse(pmap.jacobian);
    const auto fdofs = fine->cell_dofs(static_cast<int>(c));
    const auto cdofs = coarse.space->cell_dofs(parent);
    for (int j = 0; j < nl; ++j) {
      const auto [s0, t0] = reference_node(j);
      const Vec2 ref = pinv * (fmap.to_physical(s0, t0) - pmap.origin);
      reference_shape(k, ref.x, ref.y, vals, grads);
      for (int comp = 0; comp < fine->components(); ++comp) {
        double v = 0.0;
        for (int i = 0; i < nl; ++i) v += coarse.coefficients[coarse.space->global_dof(comp, cdofs[i])] * vals[i];
        out.coefficients[fine->global_dof(comp, fdofs[j])] = v;
      }
    }
  }
  return out;
}

struct AdaptiveOptions {
  double beta = 0.3;
  double tol_a = 0.0;  // stop once eta^2 <= tol_a^2
  int levels = 8;      // maximum number of solves
  bool warm_start = false;
  HowardOptions howard;
};

struct LevelRecord {
  std::shared_ptr<const TriMesh> mesh;
  PairSpaces spaces;
  HowardResult solution;
  Indicators indicators;
};

/// Solve - estimate - mark - refine (newest-vertex bisection) until eta is
/// below tol_a or `levels` solves were done. `on_level` (optional) sees each
/// level as it completes.
template <class Callback>
std::vector<LevelRecord> adaptive_solve(const HjbProblem& p, const TriMesh& initial, int degree,
                                        const AdaptiveOptions& opt, Callback&& on_level) {
  if (!(opt.beta > 0.0 && opt.beta < 1.0)) throw std::invalid_argument("adaptive_solve: beta must lie in (0, 1)");
  if (opt.levels < 1) throw std::invalid_argument("adaptive_solve: need at least one level");
  std::vector<LevelRecord> out;
  auto mesh = std::make_shared<const TriMesh>(initial);
  for (int l = 0; l < opt.levels; ++l) {
    LevelRecord rec{mesh, make_pair_spaces(mesh, degree), {}, {}};
    std::optional<PairField> init;
    if (opt.warm_start && !out.empty()) {
      const PairField& prev = out.back().solution.pair;
      init = PairField{transfer(prev.u, rec.spaces.u), transfer(prev.g, rec.spaces.g)};
      if (p.homogeneous)
        for (int d : rec.spaces.u->boundary_scalar_dofs()) init->u.coefficients[d] = 0.0;
    }
    try {
      rec.solution = howard_solve(p, rec.spaces, opt.howard, std::move(init));
    } catch (const HowardError& e) {
      throw HowardError(std::string(e.what()) + " at adaptive level " + std::to_string(l), e.iteration);
    }
    rec.indicators = compute_indicators(p, rec.spaces, rec.solution.pair, rec.solution.control);
    on_level(static_cast<const LevelRecord&>(rec), l);
    const bool done = rec.indicators.total <= opt.tol_a * opt.tol_a || l + 1 == opt.levels;
    const std::vector<int> marked = done ? std::vector<int>{} : mark_fraction(rec.indicators, opt.beta);
    out.push_back(std::move(rec));
    if (done) break;
    mesh = std::make_shared<const TriMesh>(refine_marked(*mesh, marked));
  }
  return out;
}

inline std::vector<LevelRecord> adaptive_solve(const HjbProblem& p, const TriMesh& initial, int degree,
                                               const AdaptiveOptions& opt) {
  return adaptive_solve(p, initial, degree, opt, [](const LevelRecord&, int) {});
}

}  // namespace hjb
