#pragma once

#include <cmath>
#include <functional>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <string>

#include "hjb/fespace.hpp"
#include "hjb/geometry.hpp"

namespace hjb {

/// Coefficients of L^alpha = A : D^2 + b . grad - c and the forcing f^alpha
/// at one (x, alpha).
struct Coefficients {
  Mat2 A;
  Vec2 b;
  double c = 0.0;
  double f = 0.0;
};

enum class ControlKind { singleton, angle };

/// Compact control set: a single control, or SO(2) parametrized by [0, 2pi).
struct ControlSet {
  ControlKind kind = ControlKind::singleton;

  static ControlSet singleton() { return {ControlKind::singleton}; }
  static ControlSet angle() { return {ControlKind::angle}; }

  bool is_singleton() const { return kind == ControlKind::singleton; }

  /// Chordal distance |e^{i a} - e^{i b}| between rotations; 0 for a singleton.
  double distance(double a, double b) const {
    if (is_singleton()) return 0.0;
    return 2.0 * std::abs(std::sin(0.5 * (a - b)));
  }
};

enum class DomainKind { square, disk };

/// Continuous domain: (-1,1)^2 or the unit disk.
struct Domain {
  DomainKind kind = DomainKind::square;

  bool contains(const Vec2& x) const {
    if (kind == DomainKind::square) return std::abs(x.x) <= 1.0 && std::abs(x.y) <= 1.0;
    return x.x * x.x + x.y * x.y <= 1.0 + 1e-14;
  }
};

struct ExactSolution {
  ScalarField u;
  VectorField grad;
  TensorField hessian;
};

/// A Dirichlet HJB problem sup_alpha (L^alpha u - f^alpha) = 0, u = r on the boundary.
struct HjbProblem {
  std::string name;
  ControlSet controls;
  Domain domain;
  std::function<Coefficients(const Vec2&, double)> coefficients;
  ScalarField boundary_value;
  VectorField boundary_gradient;
  double lambda = 0.0;
  double eps = 0.5;
  double theta = 0.5;
  std::optional<ExactSolution> exact;
  bool homogeneous = true;
  /// Point where the exact solution is singular; error norms subdivide cells touching it.
  std::optional<Vec2> singular_point;

  Mat2 A(const Vec2& x, double alpha) const { return coefficients(x, alpha).A; }
  Vec2 b(const Vec2& x, double alpha) const { return coefficients(x, alpha).b; }
  double c(const Vec2& x, double alpha) const { return coefficients(x, alpha).c; }
  double f(const Vec2& x, double alpha) const { return coefficients(x, alpha).f; }
};

/// Cordes quotient at (x, alpha). With lambda > 0:
///   (|A|^2 + |b|^2/(2 lambda) + (c/lambda)^2) / (tr A + c/lambda)^2,
/// with lambda = 0 (requires b = 0, c = 0): |A|^2 / (tr A)^2. Frobenius norm.
inline double cordes_ratio(const Coefficients& k, double lambda) {
  const double a2 = frobenius(k.A, k.A);
  const double tr = trace(k.A);
  if (lambda == 0.0) {
    if (k.b.x != 0.0 || k.b.y != 0.0 || k.c != 0.0)
      throw std::invalid_argument("cordes_ratio: lambda = 0 requires b = 0 and c = 0");
    return a2 / (tr * tr);
  }
  if (lambda < 0.0) throw std::invalid_argument("cordes_ratio: lambda must be nonnegative");
  const double cl = k.c / lambda;
  return (a2 + dot(k.b, k.b) / (2.0 * lambda) + cl * cl) / ((tr + cl) * (tr + cl));
}

inline double cordes_ratio(const HjbProblem& p, const Vec2& x, double alpha) {
  return cordes_ratio(p.coefficients(x, alpha), p.lambda);
}

struct CordesCertificate {
  double lambda = 0.0;
  double max_ratio = 0.0;
  double certified_eps = 0.0;
  int nx = 0;
  int nalpha = 0;
  bool success = false;
  Vec2 worst_x;
  double worst_alpha = 0.0;
};

/// Samples the Cordes quotient on a uniform (x1, x2, alpha) grid over the
/// domain's bounding box (points outside the domain skipped) and returns the
/// largest epsilon consistent with the observed maximum.
inline CordesCertificate verify_cordes(const HjbProblem& p, int nx = 128, int nalpha = 256) {
  if (nx < 32 || nalpha < 32) throw std::invalid_argument("verify_cordes: grids need at least 32 points per axis");
  constexpr int d = 2;
  CordesCertificate cert;
  cert.lambda = p.lambda;
  cert.nx = nx;
  cert.nalpha = p.controls.is_singleton() ? 1 : nalpha;
  for (int i = 0; i < nx; ++i) {
    for (int j = 0; j < nx; ++j) {
      const Vec2 x{-1.0 + 2.0 * i / (nx - 1), -1.0 + 2.0 * j / (nx - 1)};
      if (!p.domain.contains(x)) continue;
      for (int k = 0; k < cert.nalpha; ++k) {
        const double alpha = 2.0 * std::numbers::pi * k / cert.nalpha;
        const double r = cordes_ratio(p, x, alpha);
        if (r > cert.max_ratio) {
          cert.max_ratio = r;
          cert.worst_x = x;
          cert.worst_alpha = alpha;
        }
      }
    }
  }
  const double eps = 1.0 / cert.max_ratio - (p.lambda > 0.0 ? d : d - 1);
  // The condition with eps = 1 implies it for every smaller eps.
  cert.certified_eps = std::min(eps, 1.0);
  cert.success = eps > 0.0;
  return cert;
}

// ---------------------------------------------------------------------------
// Built-in manufactured problems.

namespace detail {

inline Mat2 rotated(const Mat2& base, double alpha) {
  const Mat2 r = Mat2::from_rows(std::cos(alpha), std::sin(alpha), -std::sin(alpha), std::cos(alpha));
  return r * base * transpose(r);
}

/// Forcing that makes u_ex a solution with optimal control 2 alpha = pi (x1 + x2).
/// `flip_bump` flips the cosine term, which leaves sup_alpha(L u - f) = 2.
inline double manufactured_forcing(const Coefficients& k, double u, const Vec2& grad, const Mat2& hess,
                                   const Vec2& x, double alpha, bool flip_bump) {
  const double lu = frobenius(k.A, hess) + dot(k.b, grad) - k.c * u;
  const double bump = 1.0 - std::cos(2.0 * alpha - std::numbers::pi * (x.x + x.y));
  return flip_bump ? lu - bump : lu + bump;
}

struct SquareExact {
  static double u(const Vec2& x) {
    const double pi = std::numbers::pi;
    return std::sin(pi * x.x) * std::sin(pi * x.y) + std::sin(pi * (x.x + x.y));
  }
  static Vec2 grad(const Vec2& x) {
    const double pi = std::numbers::pi;
    const double sx = std::sin(pi * x.x), cx = std::cos(pi * x.x), sy = std::sin(pi * x.y), cy = std::cos(pi * x.y);
    const double cs = std::cos(pi * (x.x + x.y));
    return {pi * (cx * sy + cs), pi * (sx * cy + cs)};
  }
  static Mat2 hessian(const Vec2& x) {
    const double pi2 = std::numbers::pi * std::numbers::pi;
    const double sx = std::sin(std::numbers::pi * x.x), cx = std::cos(std::numbers::pi * x.x);
    const double sy = std::sin(std::numbers::pi * x.y), cy = std::cos(std::numbers::pi * x.y);
    const double ss = std::sin(std::numbers::pi * (x.x + x.y));
    const double d11 = -pi2 * (sx * sy + ss);
    const double d12 = pi2 * (cx * cy - ss);
    return Mat2::from_rows(d11, d12, d12, d11);
  }
};

/// u = r^{5/3} (1-r)^{5/2} sin(2 phi / 3)^{5/2} on 0 < phi < 3 pi / 2, zero elsewhere.
struct DiskExact {
  static constexpr double ea = 5.0 / 3.0, eb = 2.5, ec = 2.5;

  struct Polar {
    bool inside = false;
    double r = 0, phi = 0;
    double R = 0, dR = 0, ddR = 0;  // radial factor and derivatives
    double P = 0, dP = 0, ddP = 0;  // angular factor and derivatives
  };

  static Polar polar(const Vec2& x) {
    Polar p;
    p.r = norm(x);
    if (p.r <= 0.0 || p.r > 1.0) return p;
    p.phi = std::atan2(x.y, x.x);
    if (p.phi < 0.0) p.phi += 2.0 * std::numbers::pi;
    if (!(p.phi > 0.0 && p.phi < 1.5 * std::numbers::pi)) return p;
    p.inside = true;
    const double r = p.r, s = 1.0 - r;
    p.R = std::pow(r, ea) * std::pow(s, eb);
    p.dR = ea * std::pow(r, ea - 1) * std::pow(s, eb) - eb * std::pow(r, ea) * std::pow(s, eb - 1);
    p.ddR = ea * (ea - 1) * std::pow(r, ea - 2) * std::pow(s, eb) -
            2 * ea * eb * std::pow(r, ea - 1) * std::pow(s, eb - 1) +
            eb * (eb - 1) * std::pow(r, ea) * std::pow(s, eb - 2);
    const double sn = std::sin(2.0 * p.phi / 3.0), cs = std::cos(2.0 * p.phi / 3.0);
    p.P = std::pow(sn, ec);
    p.dP = ec * std::pow(sn, ec - 1) * (2.0 / 3.0) * cs;
    p.ddP = (4.0 / 9.0) * ec * ((ec - 1) * std::pow(sn, ec - 2) * cs * cs - std::pow(sn, ec));
    return p;
  }

  static double u(const Polar& p) { return p.inside ? p.R * p.P : 0.0; }
  static Vec2 grad(const Polar& p) {
    if (!p.inside) return {};
    const double ur = p.dR * p.P, uphi = p.R * p.dP;
    const double c = std::cos(p.phi), s = std::sin(p.phi);
    return {c * ur - s * uphi / p.r, s * ur + c * uphi / p.r};
  }
  static Mat2 hessian(const Polar& p) {
    if (!p.inside) return {};
    const double r = p.r;
    const double ur = p.dR * p.P, urr = p.ddR * p.P, uphi = p.R * p.dP, upp = p.R * p.ddP, urp = p.dR * p.dP;
    const double c = std::cos(p.phi), s = std::sin(p.phi);
    const double lap_t = ur / r + upp / (r * r);  // tangential part
    const double mix = urp / r - uphi / (r * r);
    const double xx = c * c * urr + s * s * lap_t - 2 * s * c * mix;
    const double yy = s * s * urr + c * c * lap_t + 2 * s * c * mix;
    const double xy = s * c * (urr - lap_t) + (c * c - s * s) * mix;
    return Mat2::from_rows(xx, xy, xy, yy);
  }

  static double u(const Vec2& x) { return u(polar(x)); }
  static Vec2 grad(const Vec2& x) { return grad(polar(x)); }
  static Mat2 hessian(const Vec2& x) { return hessian(polar(x)); }
};

}  // namespace detail

/// Test problem on (-1,1)^2 with nonzero boundary data and smooth solution
/// u = sin(pi x1) sin(pi x2) + sin(pi (x1 + x2)).
inline HjbProblem make_square_hjb(bool flip_bump = false) {
  HjbProblem p;
  p.name = "square-hjb";
  p.controls = ControlSet::angle();
  p.domain = {DomainKind::square};
  const Mat2 base = Mat2::from_rows(2.0, 0.5, 0.5, 1.0);
  p.coefficients = [base, flip_bump](const Vec2& x, double alpha) {
    Coefficients k;
    k.A = detail::rotated(base, alpha);
    k.b = {0.0, 0.0};
    k.c = 2.0 - 0.5 * (std::cos(2.0 * alpha) + std::sin(2.0 * alpha));
    using E = detail::SquareExact;
    k.f = detail::manufactured_forcing(k, E::u(x), E::grad(x), E::hessian(x), x, alpha, flip_bump);
    return k;
  };
  p.exact = ExactSolution{detail::SquareExact::u, detail::SquareExact::grad, detail::SquareExact::hessian};
  p.boundary_value = detail::SquareExact::u;
  p.boundary_gradient = detail::SquareExact::grad;
  p.homogeneous = false;
  p.lambda = 1.0;
  p.eps = 0.45;
  p.theta = 0.5;
  return p;
}

/// Test problem on the unit disk with a near-degenerate diffusion and a
/// solution singular at the origin (u in H^s for s < 8/3).
inline HjbProblem make_disk_hjb(bool flip_bump = false) {
  HjbProblem p;
  p.name = "disk-hjb";
  p.controls = ControlSet::angle();
  p.domain = {DomainKind::disk};
  p.coefficients = [flip_bump](const Vec2& x, double alpha) {
    const double r2 = x.x * x.x + x.y * x.y;
    Coefficients k;
    k.A = detail::rotated(Mat2::from_rows(1.0 + r2, 0.005, 0.005, 1.01 - r2), alpha);
    k.b = {0.0, 0.0};
    k.c = 0.0;
    using E = detail::DiskExact;
    const auto pol = E::polar(x);
    k.f = detail::manufactured_forcing(k, E::u(pol), E::grad(pol), E::hessian(pol), x, alpha, flip_bump);
    return k;
  };
  p.exact = ExactSolution{[](const Vec2& x) { return detail::DiskExact::u(x); },
                          [](const Vec2& x) { return detail::DiskExact::grad(x); },
                          [](const Vec2& x) { return detail::DiskExact::hessian(x); }};
  p.boundary_value = [](const Vec2&) { return 0.0; };
  p.boundary_gradient = [](const Vec2&) { return Vec2{}; };
  p.homogeneous = true;
  p.lambda = 0.0;
  p.eps = 0.008;
  p.theta = 0.5;
  p.singular_point = Vec2{0.0, 0.0};
  return p;
}

/// Coefficients of a linear nondivergence-form operator A : D^2 u + b . grad u - c u = f.
struct LinearCoefficients {
  TensorField A;
  VectorField b;
  ScalarField c;
  ScalarField f;
};

/// Linear problem as an HJB problem over a singleton control set.
/// With lambda = 0 the drift and reaction must vanish; this is checked on a
/// sample grid of the domain.
inline HjbProblem make_linear_nondiv(std::string name, Domain domain, LinearCoefficients k,
                                     ScalarField boundary_value, VectorField boundary_gradient,
                                     std::optional<ExactSolution> exact, double lambda, double eps,
                                     double theta = 0.5, bool homogeneous = false) {
  if (lambda == 0.0) {
    for (int i = 0; i <= 32; ++i)
      for (int j = 0; j <= 32; ++j) {
        const Vec2 x{-1.0 + i / 16.0, -1.0 + j / 16.0};
        if (!domain.contains(x)) continue;
        const Vec2 b = k.b(x);
        if (b.x != 0.0 || b.y != 0.0 || k.c(x) != 0.0)
          throw std::invalid_argument("make_linear_nondiv: lambda = 0 requires b = 0 and c = 0");
      }
  }
  HjbProblem p;
  p.name = std::move(name);
  p.controls = ControlSet::singleton();
  p.domain = domain;
  p.coefficients = [k](const Vec2& x, double) { return Coefficients{k.A(x), k.b(x), k.c(x), k.f(x)}; };
  p.boundary_value = std::move(boundary_value);
  p.boundary_gradient = std::move(boundary_gradient);
  p.exact = std::move(exact);
  p.lambda = lambda;
  p.eps = eps;
  p.theta = theta;
  p.homogeneous = homogeneous;
  return p;
}

/// Poisson problem Delta u = -2 pi^2 sin(pi x1) sin(pi x2) on (-1,1)^2, u = 0 on the boundary.
inline HjbProblem make_poisson() {
  const double pi = std::numbers::pi;
  LinearCoefficients k{
      [](const Vec2&) { return Mat2::identity(); },
      [](const Vec2&) { return Vec2{}; },
      [](const Vec2&) { return 0.0; },
      [pi](const Vec2& x) { return -2.0 * pi * pi * std::sin(pi * x.x) * std::sin(pi * x.y); },
  };
  ExactSolution ex{
      [pi](const Vec2& x) { return std::sin(pi * x.x) * std::sin(pi * x.y); },
      [pi](const Vec2& x) {
        return Vec2{pi * std::cos(pi * x.x) * std::sin(pi * x.y), pi * std::sin(pi * x.x) * std::cos(pi * x.y)};
      },
      [pi](const Vec2& x) {
        const double s = -pi * pi * std::sin(pi * x.x) * std::sin(pi * x.y);
        const double m = pi * pi * std::cos(pi * x.x) * std::cos(pi * x.y);
        return Mat2::from_rows(s, m, m, s);
      },
  };
  return make_linear_nondiv("poisson", {DomainKind::square}, std::move(k), [](const Vec2&) { return 0.0; },
                            [](const Vec2&) { return Vec2{}; }, std::move(ex), 0.0, 0.5, 0.5, true);
}

}  // namespace hjb
