#pragma once

#include <cmath>
#include <cstdint>
#include <utility>

namespace hjb {

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  Vec2& operator+=(const Vec2& o) {
    x += o.x;
    y += o.y;
    return *this;
  }
  Vec2& operator-=(const Vec2& o) {
    x -= o.x;
    y -= o.y;
    return *this;
  }
  Vec2& operator*=(double s) {
    x *= s;
    y *= s;
    return *this;
  }
  double operator[](int i) const { return i == 0 ? x : y; }
  double& operator[](int i) { return i == 0 ? x : y; }
};

inline Vec2 operator+(Vec2 a, const Vec2& b) { return a += b; }
inline Vec2 operator-(Vec2 a, const Vec2& b) { return a -= b; }
inline Vec2 operator-(const Vec2& a) { return {-a.x, -a.y}; }
inline Vec2 operator*(double s, Vec2 a) { return a *= s; }
inline Vec2 operator*(Vec2 a, double s) { return a *= s; }
inline bool operator==(const Vec2& a, const Vec2& b) { return a.x == b.x && a.y == b.y; }

inline double dot(const Vec2& a, const Vec2& b) { return a.x * b.x + a.y * b.y; }
inline double cross(const Vec2& a, const Vec2& b) { return a.x * b.y - a.y * b.x; }
inline double norm(const Vec2& a) { return std::hypot(a.x, a.y); }

/// Row-major 2x2 matrix; m[i][j] is row i, column j.
struct Mat2 {
  double m[2][2] = {{0.0, 0.0}, {0.0, 0.0}};

  double operator()(int i, int j) const { return m[i][j]; }
  double& operator()(int i, int j) { return m[i][j]; }

  static Mat2 identity() { return Mat2{{{1.0, 0.0}, {0.0, 1.0}}}; }
  static Mat2 from_rows(double a11, double a12, double a21, double a22) {
    return Mat2{{{a11, a12}, {a21, a22}}};
  }
  /// Counterclockwise rotation [[cos, -sin], [sin, cos]].
  static Mat2 rotation(double angle) {
    const double c = std::cos(angle), s = std::sin(angle);
    return from_rows(c, -s, s, c);
  }
};

inline Mat2 operator+(const Mat2& a, const Mat2& b) {
  return Mat2::from_rows(a(0, 0) + b(0, 0), a(0, 1) + b(0, 1), a(1, 0) + b(1, 0), a(1, 1) + b(1, 1));
}
inline Mat2 operator-(const Mat2& a, const Mat2& b) {
  return Mat2::from_rows(a(0, 0) - b(0, 0), a(0, 1) - b(0, 1), a(1, 0) - b(1, 0), a(1, 1) - b(1, 1));
}
inline Mat2 operator*(double s, const Mat2& a) {
  return Mat2::from_rows(s * a(0, 0), s * a(0, 1), s * a(1, 0), s * a(1, 1));
}
inline Mat2 operator*(const Mat2& a, const Mat2& b) {
  Mat2 r;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) r(i, j) = a(i, 0) * b(0, j) + a(i, 1) * b(1, j);
  return r;
}
inline Vec2 operator*(const Mat2& a, const Vec2& v) {
  return {a(0, 0) * v.x + a(0, 1) * v.y, a(1, 0) * v.x + a(1, 1) * v.y};
}

inline Mat2 transpose(const Mat2& a) { return Mat2::from_rows(a(0, 0), a(1, 0), a(0, 1), a(1, 1)); }
inline double trace(const Mat2& a) { return a(0, 0) + a(1, 1); }
inline double det(const Mat2& a) { return a(0, 0) * a(1, 1) - a(0, 1) * a(1, 0); }
inline double frobenius(const Mat2& a, const Mat2& b) {
  return a(0, 0) * b(0, 0) + a(0, 1) * b(0, 1) + a(1, 0) * b(1, 0) + a(1, 1) * b(1, 1);
}
inline double frobenius_norm(const Mat2& a) { return std::sqrt(frobenius(a, a)); }
inline Mat2 inverse(const Mat2& a) {
  const double d = det(a);
  return Mat2::from_rows(a(1, 1) / d, -a(0, 1) / d, -a(1, 0) / d, a(0, 0) / d);
}

/// Order-independent key for the edge between two vertices.
inline std::uint64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
         static_cast<std::uint32_t>(b);
}

inline std::pair<int, int> edge_vertices(std::uint64_t key) {
  return {static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffffu)};
}

}  // namespace hjb
