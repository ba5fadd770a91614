#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hjb/assembly.hpp"
#include "hjb/linsolve.hpp"

namespace hjb {

/// Per-cell objective alpha -> int_K (M_theta^alpha(u, g) - f^alpha). The
/// pair is evaluated once at the quadrature points; only the coefficients
/// depend on alpha.
class CellObjective {
 public:
  CellObjective(const HjbProblem& p, const PairField& pair, int cell, const QuadRule& rule) : p_(&p) {
    const CellValues cv = eval_basis(*pair.u.space, cell, rule);
    points_ = cv.points;
    jxw_ = cv.jxw;
    state_.reserve(cv.size());
    for (std::size_t q = 0; q < cv.size(); ++q) state_.push_back(evaluate_pair(pair, cell, cv, q));
  }

  double operator()(double alpha) const {
    double s = 0.0;
    for (std::size_t q = 0; q < jxw_.size(); ++q) {
      const Coefficients k = p_->coefficients(points_[q], alpha);
      const PairPoint& v = state_[q];
      s += jxw_[q] * (m_theta(k, p_->theta, v.u, v.grad_u, v.g, v.dg) - k.f);
    }
    return s;
  }

  /// Magnitude of the integrand at alpha, int_K |M| + |f|; used for relative
  /// tolerances.
  double scale(double alpha) const {
    double s = 0.0;
    for (std::size_t q = 0; q < jxw_.size(); ++q) {
      const Coefficients k = p_->coefficients(points_[q], alpha);
      const PairPoint& v = state_[q];
      s += jxw_[q] * (std::abs(m_theta(k, p_->theta, v.u, v.grad_u, v.g, v.dg)) + std::abs(k.f));
    }
    return s;
  }

 private:
  const HjbProblem* p_;
  std::vector<Vec2> points_;
  std::vector<double> jxw_;
  std::vector<PairPoint> state_;
};

inline double control_objective(const HjbProblem& p, int cell, double alpha, const PairField& pair) {
  return CellObjective(p, pair, cell, triangle_rule(assembly_degree(pair.u.space->degree())))(alpha);
}

struct ControlSearch {
  int grid = 64;
  double width = 1e-10;    // golden-section stops at this bracket width
  double tie_rel = 1e-12;  // values within tie_rel * scale count as equal
};

namespace detail {

/// Golden-section maximization on [a, b]; returns (argmax, value).
template <class F>
std::pair<double, double> golden_max(F&& f, double a, double b, double width) {
  const double r = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = b - r * (b - a), x2 = a + r * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > width) {
    if (f1 >= f2) {  // keep the left part on ties
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - r * (b - a);
      f1 = f(x1);
    } else {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + r * (b - a);
      f2 = f(x2);
    }
  }
  return f1 >= f2 ? std::pair{x1, f1} : std::pair{x2, f2};
}

inline double wrap_angle(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a, two_pi);
  if (a < 0.0) a += two_pi;
  if (a >= two_pi) a = 0.0;
  return a;
}

}  // namespace detail

/// Maximizer of a 2pi-periodic objective on [0, 2pi): uniform grid, then
/// golden-section refinement around every grid local maximum near the top.
/// Among (numerically) equal maxima the smallest angle wins; a flat
/// objective yields 0.
template <class F>
double maximize_angle(F&& f, double scale, const ControlSearch& opt = {}) {
  const double two_pi = 2.0 * std::numbers::pi;
  const int n = opt.grid;
  const double step = two_pi / n;
  std::vector<double> v(n);
  for (int i = 0; i < n; ++i) v[i] = f(i * step);
  const double hi = *std::max_element(v.begin(), v.end());
  const double lo = *std::min_element(v.begin(), v.end());
  const double tie = opt.tie_rel * std::max(scale, std::abs(hi));
  if (hi - lo <= tie) return 0.0;

  std::vector<std::pair<double, double>> cand;  // (alpha, value)
  for (int i = 0; i < n; ++i) {
    const double l = v[(i + n - 1) % n], r = v[(i + 1) % n];
    if (v[i] < l || v[i] < r) continue;
    if (v[i] < hi - 0.25 * (hi - lo)) continue;
    const auto [a, fa] = detail::golden_max(f, (i - 1) * step, (i + 1) * step, opt.width);
    if (fa > v[i]) cand.emplace_back(detail::wrap_angle(a), fa);
    else cand.emplace_back(i * step, v[i]);
  }
  double best = -std::numeric_limits<double>::infinity();
  for (const auto& c : cand) best = std::max(best, c.second);
  double alpha = two_pi;
  for (const auto& c : cand)
    if (c.second >= best - tie) alpha = std::min(alpha, c.first);
  return alpha;
}

/// Elementwise control update q(K) in Argmax_alpha int_K (M^alpha(u, g) - f^alpha).
inline ControlField optimize_control(const HjbProblem& p, const PairField& pair, const ControlSearch& opt = {}) {
  const TriMesh& mesh = pair.u.space->mesh();
  ControlField q(mesh.n_cells(), 0.0);
  if (p.controls.is_singleton()) return q;
  const QuadRule rule = triangle_rule(assembly_degree(pair.u.space->degree()));
  for (std::size_t c = 0; c < mesh.n_cells(); ++c) {
    const CellObjective obj(p, pair, static_cast<int>(c), rule);
    q.alpha[c] = maximize_angle(obj, obj.scale(0.0), opt);
  }
  return q;
}

struct HowardOptions {
  double tol = 1e-7;
  int max_iter = 8;
  SolveOptions solver;
  bool direct = false;            // sparse Cholesky instead of CG
  bool track_functional = false;  // record E before/after each solve
  ControlSearch search;
};

struct HowardStep {
  double res = 0.0;             // pair H1 distance to the previous iterate
  double control_change = 0.0;  // fraction of cells whose control moved > 1e-10
  SolveReport solve;
  double functional_before = 0.0;  // E(pair_{n-1}, q_n), when tracked
  double functional_after = 0.0;   // E(pair_n, q_n), when tracked
};

struct HowardHistory {
  std::vector<HowardStep> steps;
  bool converged = false;

  int iterations() const { return static_cast<int>(steps.size()); }
};

struct HowardResult {
  PairField pair;
  ControlField control;      // the control the returned pair was solved with
  PairField control_source;  // the iterate `control` was optimized for
  HowardHistory history;
};

class HowardError : public std::runtime_error {
 public:
  HowardError(const std::string& what, int iteration) : std::runtime_error(what), iteration(iteration) {}
  int iteration;
};

inline double control_change(const ControlSet& set, const ControlField& a, const ControlField& b) {
  if (a.size() == 0) return 0.0;
  std::size_t moved = 0;
  for (std::size_t c = 0; c < a.size(); ++c)
    if (set.distance(a[c], b[c]) > 1e-10) ++moved;
  return static_cast<double>(moved) / static_cast<double>(a.size());
}

/// Policy iteration: q_n from the previous pair, then the least-squares
/// solve at fixed q_n, until the pair moves less than `tol` in H1 or
/// `max_iter` solves were done. Stalling is reported via history.converged.
inline HowardResult howard_solve(const HjbProblem& p, const PairSpaces& s, const HowardOptions& opt = {},
                                 std::optional<PairField> init = std::nullopt) {
  if (!(opt.tol > 0.0) || opt.max_iter < 1) throw std::invalid_argument("howard_solve: need tol > 0, max_iter >= 1");
  HowardResult out;
  out.pair = init ? std::move(*init) : PairField::zero(s);
  ControlField q = optimize_control(p, out.pair, opt.search);
  ControlField q_prev = q;
  PairField source = out.pair;
  for (int n = 1; n <= opt.max_iter; ++n) {
    HowardStep step;
    step.control_change = n == 1 ? 0.0 : control_change(p.controls, q, q_prev);
    const SparseSystem sys = assemble(p, s, q);
    std::vector<double> x = out.pair.to_vector();
    for (int d : sys.constrained) x[d] = 0.0;
    try {
      step.solve = opt.direct ? solve_cholesky(sys.matrix, sys.rhs, x) : solve_spd(sys.matrix, sys.rhs, x, opt.solver);
    } catch (const SolverError& e) {
      throw HowardError(std::string(e.what()) + " (Howard iteration " + std::to_string(n) + ")", n);
    }
    PairField next = PairField::from_vector(s, x);
    if (opt.track_functional) {
      step.functional_before = residual_functional(p, s, out.pair, q);
      step.functional_after = residual_functional(p, s, next, q);
    }
    step.res = pair_distance(next, out.pair);
    out.pair = std::move(next);
    out.control = q;
    out.control_source = source;
    out.history.steps.push_back(step);
    if (step.res <= opt.tol) {
      out.history.converged = true;
      break;
    }
    if (n < opt.max_iter) {
      q_prev = q;
      q = optimize_control(p, out.pair, opt.search);
      source = out.pair;
    }
  }
  return out;
}

}  // namespace hjb
