#include <cmath>
#include <map>
#include <numbers>
#include <random>
#include <set>

#include <gtest/gtest.h>

#include "hjb/fespace.hpp"

using namespace hjb;

namespace {

std::shared_ptr<const TriMesh> square(int n) { return std::make_shared<const TriMesh>(unit_square_mesh(n)); }

std::size_t edge_count(const TriMesh& m) { return edge_census(m).size(); }

// Reference coordinates of a physical point with respect to a cell.
std::array<double, 2> to_reference(const TriMesh& m, int cell, const Vec2& x) {
  const CellMap map = cell_map(m, cell);
  const Vec2 r = inverse(map.jacobian) * (x - map.origin);
  return {r.x, r.y};
}

}  // namespace

TEST(FeSpace, DofCounts) {
  const auto m = square(4);
  const FeSpace p1(m, 1, 1), p2(m, 2, 1), p2v(m, 2, 2);
  EXPECT_EQ(p1.n_dofs(), 25);
  EXPECT_EQ(p2.n_dofs(), static_cast<int>(25 + edge_count(*m)));
  EXPECT_EQ(p2.n_dofs(), 81);  // (2n+1)^2
  EXPECT_EQ(p2v.n_dofs(), 2 * 81);
  EXPECT_EQ(p1.boundary_scalar_dofs().size(), 16u);
  EXPECT_EQ(p2.boundary_scalar_dofs().size(), 32u);
  EXPECT_EQ(p2v.boundary_dofs().size(), 64u);
  EXPECT_EQ(p2v.global_dof(1, 3), 81 + 3);
  EXPECT_THROW(FeSpace(m, 3, 1), std::invalid_argument);
  EXPECT_THROW(FeSpace(m, 1, 3), std::invalid_argument);
}

TEST(FeSpace, NodesMatchDofMap) {
  const auto m = square(3);
  const FeSpace s(m, 2, 1);
  for (std::size_t c = 0; c < m->n_cells(); ++c) {
    const CellMap map = cell_map(*m, static_cast<int>(c));
    const auto dofs = s.cell_dofs(static_cast<int>(c));
    for (int j = 0; j < 6; ++j) {
      const auto [r0, r1] = reference_node(j);
      const Vec2 x = map.to_physical(r0, r1);
      EXPECT_NEAR(norm(x - s.nodes()[dofs[j]]), 0.0, 1e-15);
    }
  }
  for (int d : s.boundary_scalar_dofs()) {
    const Vec2 x = s.nodes()[d];
    EXPECT_NEAR(std::max(std::abs(x.x), std::abs(x.y)), 1.0, 1e-15);
  }
}

TEST(FeSpace, ReferenceShapeFunctions) {
  for (int k : {1, 2}) {
    const int n = local_dof_count(k);
    std::vector<double> v(n);
    std::vector<Vec2> g(n);
    // Kronecker property at the nodes.
    for (int i = 0; i < n; ++i) {
      const auto [s, t] = reference_node(i);
      reference_shape(k, s, t, v, g);
      for (int j = 0; j < n; ++j) EXPECT_NEAR(v[j], i == j ? 1.0 : 0.0, 1e-15);
    }
    // Partition of unity and finite-difference gradients at interior points.
    std::mt19937 rng(7);
    std::uniform_real_distribution<double> u(0.05, 0.45);
    for (int trial = 0; trial < 10; ++trial) {
      const double s = u(rng), t = u(rng), h = 1e-6;
      reference_shape(k, s, t, v, g);
      double sum = 0.0;
      Vec2 gsum;
      std::vector<double> vp(n), vm(n), vq(n), vn(n);
      std::vector<Vec2> dummy(n);
      reference_shape(k, s + h, t, vp, dummy);
      reference_shape(k, s - h, t, vm, dummy);
      reference_shape(k, s, t + h, vq, dummy);
      reference_shape(k, s, t - h, vn, dummy);
      for (int j = 0; j < n; ++j) {
        sum += v[j];
        gsum += g[j];
        EXPECT_NEAR(g[j].x, (vp[j] - vm[j]) / (2 * h), 1e-8);
        EXPECT_NEAR(g[j].y, (vq[j] - vn[j]) / (2 * h), 1e-8);
      }
      EXPECT_NEAR(sum, 1.0, 1e-15);
      EXPECT_NEAR(norm(gsum), 0.0, 1e-14);
    }
  }
}

TEST(FeSpace, ContinuityAcrossEdges) {
  auto m = std::make_shared<const TriMesh>(refine_marked(unit_disk_mesh(16), {0, 3, 9}));
  for (int k : {1, 2}) {
    const auto s = build_space(m, k, 1);
    DiscreteFunction f(s);
    std::mt19937 rng(11);
    std::normal_distribution<double> gauss;
    for (double& c : f.coefficients) c = gauss(rng);
    // Evaluate at Gauss points of each interior edge from both sides.
    std::map<std::uint64_t, std::vector<std::pair<int, int>>> owners;
    for (std::size_t c = 0; c < m->n_cells(); ++c)
      for (int e = 0; e < 3; ++e) {
        const auto [a, b] = m->local_edge(static_cast<int>(c), e);
        owners[edge_key(a, b)].push_back({static_cast<int>(c), e});
      }
    const EdgeRule er = edge_rule(4);
    int checked = 0;
    for (const auto& [key, own] : owners) {
      if (own.size() != 2) continue;
      const auto [c0, e0] = own[0];
      const CellValues ev = eval_basis_on_edge(*m, k, c0, e0, er);
      QuadRule other;
      for (std::size_t q = 0; q < ev.size(); ++q) {
        other.points.push_back(to_reference(*m, own[1].first, ev.points[q]));
        other.weights.push_back(1.0);
      }
      const CellValues ov = eval_basis(*s, own[1].first, other);
      for (std::size_t q = 0; q < ev.size(); ++q)
        EXPECT_NEAR(f.value(c0, ev, q), f.value(own[1].first, ov, q), 1e-13);
      ++checked;
    }
    EXPECT_GT(checked, 0);
  }
}

TEST(FeSpace, InterpolationIsExactOnPolynomials) {
  auto m = square(3);
  auto p = [](const Vec2& x) { return 0.3 - x.x + 2.0 * x.y + 0.5 * x.x * x.x - x.x * x.y + 0.7 * x.y * x.y; };
  auto dp = [](const Vec2& x) { return Vec2{-1.0 + x.x - x.y, 2.0 - x.x + 1.4 * x.y}; };
  const DiscreteFunction u2 = interpolate(build_space(m, 2, 1), p);
  const Norms e2 = error_norms(u2, p, dp);
  EXPECT_LT(e2.h1, 1e-13);

  auto l = [](const Vec2& x) { return 1.0 + 2.0 * x.x - 3.0 * x.y; };
  auto dl = [](const Vec2&) { return Vec2{2.0, -3.0}; };
  EXPECT_LT(error_norms(interpolate(build_space(m, 1, 1), l), l, dl).h1, 1e-13);

  auto vf = [](const Vec2& x) { return Vec2{x.x * x.y, 1.0 - x.y * x.y}; };
  auto jf = [](const Vec2& x) { return Mat2::from_rows(x.y, x.x, 0.0, -2.0 * x.y); };
  EXPECT_LT(error_norms(interpolate(build_space(m, 2, 2), vf), vf, jf).h1, 1e-13);
  EXPECT_THROW(interpolate(build_space(m, 2, 2), p), std::invalid_argument);
}

TEST(FeSpace, NormsOfKnownFunctions) {
  auto m = square(4);
  // u = x on (-1,1)^2: ||u||^2 = 4/3, |u|_1^2 = 4.
  const DiscreteFunction u = interpolate(build_space(m, 1, 1), [](const Vec2& x) { return x.x; });
  const Norms n = norms(u);
  EXPECT_NEAR(n.l2, std::sqrt(4.0 / 3.0), 1e-14);
  EXPECT_NEAR(n.h1_semi, 2.0, 1e-14);
  EXPECT_NEAR(n.h1, std::sqrt(4.0 / 3.0 + 4.0), 1e-14);
  // Vector field (1, x): ||.||^2 = 4 + 4/3, |.|_1^2 = 4.
  const DiscreteFunction g = interpolate(build_space(m, 2, 2), [](const Vec2& x) { return Vec2{1.0, x.x}; });
  const Norms ng = norms(g);
  EXPECT_NEAR(ng.l2, std::sqrt(4.0 + 4.0 / 3.0), 1e-14);
  EXPECT_NEAR(ng.h1_semi, 2.0, 1e-14);
}

TEST(FeSpace, InterpolationRates) {
  const double pi = std::numbers::pi;
  auto f = [pi](const Vec2& x) { return std::sin(pi * x.x) * std::cos(0.5 * pi * x.y); };
  auto df = [pi](const Vec2& x) {
    return Vec2{pi * std::cos(pi * x.x) * std::cos(0.5 * pi * x.y), -0.5 * pi * std::sin(pi * x.x) * std::sin(0.5 * pi * x.y)};
  };
  for (int k : {1, 2}) {
    std::vector<Norms> e;
    for (int n : {8, 16, 32}) e.push_back(error_norms(interpolate(build_space(square(n), k, 1), f), f, df));
    for (int i = 0; i + 1 < 3; ++i) {
      EXPECT_NEAR(std::log2(e[i].l2 / e[i + 1].l2), k + 1, 0.15) << "k=" << k;
      EXPECT_NEAR(std::log2(e[i].h1_semi / e[i + 1].h1_semi), k, 0.15) << "k=" << k;
    }
  }
}

TEST(FeSpace, SingularPointRuleIsMoreAccurate) {
  // |x|^{1/2} has an integrable gradient singularity at the origin.
  auto m = std::make_shared<const TriMesh>(unit_disk_mesh(16));
  auto f = [](const Vec2& x) { return std::pow(norm(x), 0.5); };
  auto df = [](const Vec2& x) {
    const double r = norm(x);
    return r == 0.0 ? Vec2{} : (0.5 * std::pow(r, -1.5)) * x;
  };
  const DiscreteFunction zero(build_space(m, 1, 1));
  // ||grad f||^2 over the inscribed polygon is close to int_0^1 (1/4) r^{-1} r dr 2pi = pi/2.
  NormOptions plain, refined;
  refined.singular_point = Vec2{0.0, 0.0};
  const double a = error_norms(zero, f, df, plain).h1_semi;
  const double b = error_norms(zero, f, df, refined).h1_semi;
  const double reference = error_norms(zero, f, df, NormOptions{4, Vec2{0.0, 0.0}, 6}).h1_semi;
  EXPECT_LT(std::abs(b - reference), std::abs(a - reference));
}

TEST(FeSpace, CellMapRejectsDegenerate) {
  TriMesh m = unit_square_mesh(1);
  m.vertices[2] = m.vertices[0];
  EXPECT_NO_THROW(cell_map(m, 0));
  EXPECT_THROW(cell_map(m, 1), std::domain_error);
}
