#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace hjb {

/// Quadrature on the reference triangle {(s,t): s,t >= 0, s+t <= 1}.
/// Points are stored as reference coordinates (s,t); the barycentric
/// coordinates are (1-s-t, s, t). Weights sum to 1/2.
struct QuadRule {
  std::vector<std::array<double, 2>> points;
  std::vector<double> weights;
  int degree = 0;

  std::size_t size() const { return weights.size(); }
};

/// Gauss rule on [0,1].
struct EdgeRule {
  std::vector<double> points;
  std::vector<double> weights;
  int degree = 0;

  std::size_t size() const { return weights.size(); }
};

/// n-point Gauss-Legendre rule mapped to [0,1]; exact to degree 2n-1.
inline EdgeRule gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  EdgeRule rule;
  rule.degree = 2 * n - 1;
  rule.points.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < n; ++i) {
    // Newton on P_n from the Chebyshev-like initial guess; roots ordered descending in x.
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      const double p = std::legendre(n, x);
      const double pm1 = n > 1 ? std::legendre(n - 1, x) : 1.0;
      dp = n * (x * p - pm1) / (x * x - 1.0);
      const double dx = p / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    {
      const double p = std::legendre(n, x);
      const double pm1 = n > 1 ? std::legendre(n - 1, x) : 1.0;
      dp = n * (x * p - pm1) / (x * x - 1.0);
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    // ascending order on [0,1]
    rule.points[n - 1 - i] = 0.5 * (1.0 + x);
    rule.weights[n - 1 - i] = 0.5 * w;
  }
  return rule;
}

/// Edge rule exact for polynomials up to `degree`.
inline EdgeRule edge_rule(int degree) { return gauss_legendre(std::max(1, (degree + 2) / 2)); }

/// Collapsed (Duffy) tensor Gauss rule on the reference triangle, exact
/// to `degree`. All points are interior and all weights positive.
inline QuadRule triangle_rule(int degree) {
  if (degree < 0) throw std::invalid_argument("triangle_rule: negative degree");
  // The collapsed integrand has degree+1 in the first variable.
  const int n = std::max(1, (degree + 3) / 2);
  const EdgeRule g = gauss_legendre(n);
  QuadRule rule;
  rule.degree = degree;
  rule.points.reserve(n * n);
  rule.weights.reserve(n * n);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < n; ++j) {
      const double s = g.points[i];
      const double t = g.points[j] * (1.0 - s);
      rule.points.push_back({s, t});
      rule.weights.push_back(g.weights[i] * g.weights[j] * (1.0 - s));
    }
  }
  return rule;
}

/// Rule obtained by splitting the reference triangle `levels` times into
/// four similar children and applying `base` on each child.
inline QuadRule subdivided_rule(const QuadRule& base, int levels) {
  using Tri = std::array<std::array<double, 2>, 3>;
  std::vector<Tri> tris{Tri{{{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}}}};
  for (int l = 0; l < levels; ++l) {
    std::vector<Tri> next;
    next.reserve(tris.size() * 4);
    for (const Tri& t : tris) {
      auto mid = [](const std::array<double, 2>& a, const std::array<double, 2>& b) {
        return std::array<double, 2>{0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])};
      };
      const auto m01 = mid(t[0], t[1]), m12 = mid(t[1], t[2]), m20 = mid(t[2], t[0]);
      next.push_back({t[0], m01, m20});
      next.push_back({m01, t[1], m12});
      next.push_back({m20, m12, t[2]});
      next.push_back({m12, m20, m01});
    }
    tris = std::move(next);
  }
  QuadRule rule;
  rule.degree = base.degree;
  for (const Tri& t : tris) {
    const double e1s = t[1][0] - t[0][0], e1t = t[1][1] - t[0][1];
    const double e2s = t[2][0] - t[0][0], e2t = t[2][1] - t[0][1];
    const double jac = std::abs(e1s * e2t - e1t * e2s);
    for (std::size_t q = 0; q < base.size(); ++q) {
      const double a = base.points[q][0], b = base.points[q][1];
      rule.points.push_back({t[0][0] + a * e1s + b * e2s, t[0][1] + a * e1t + b * e2t});
      rule.weights.push_back(base.weights[q] * jac);
    }
  }
  return rule;
}

}  // namespace hjb
