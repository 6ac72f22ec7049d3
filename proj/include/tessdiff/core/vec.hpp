#pragma once

#include <array>
#include <cmath>
#include <cstddef>

namespace tessdiff {

/// Fixed-size Cartesian vector, d in {2, 3}.
template <int D>
struct Vec {
  static_assert(D == 2 || D == 3, "only two- and three-dimensional clouds are supported");
  std::array<double, D> c{};

  constexpr double& operator[](std::size_t i) noexcept { return c[i]; }
  constexpr double operator[](std::size_t i) const noexcept { return c[i]; }

  constexpr Vec& operator+=(const Vec& o) noexcept {
    for (int i = 0; i < D; ++i) c[i] += o.c[i];
    return *this;
  }
  constexpr Vec& operator-=(const Vec& o) noexcept {
    for (int i = 0; i < D; ++i) c[i] -= o.c[i];
    return *this;
  }
  constexpr Vec& operator*=(double s) noexcept {
    for (int i = 0; i < D; ++i) c[i] *= s;
    return *this;
  }
  friend constexpr Vec operator+(Vec a, const Vec& b) noexcept { return a += b; }
  friend constexpr Vec operator-(Vec a, const Vec& b) noexcept { return a -= b; }
  friend constexpr Vec operator*(Vec a, double s) noexcept { return a *= s; }
  friend constexpr Vec operator*(double s, Vec a) noexcept { return a *= s; }
  friend constexpr Vec operator-(Vec a) noexcept { return a *= -1.0; }
  friend constexpr bool operator==(const Vec&, const Vec&) = default;
};

using Vec2 = Vec<2>;
using Vec3 = Vec<3>;

template <int D>
constexpr double dot(const Vec<D>& a, const Vec<D>& b) noexcept {
  double s = 0.0;
  for (int i = 0; i < D; ++i) s += a[i] * b[i];
  return s;
}

template <int D>
inline double norm(const Vec<D>& a) noexcept {
  return std::sqrt(dot(a, a));
}

constexpr Vec3 cross(const Vec3& a, const Vec3& b) noexcept {
  return {{a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]}};
}

/// Scalar z-component of the planar cross product.
constexpr double cross(const Vec2& a, const Vec2& b) noexcept { return a[0] * b[1] - a[1] * b[0]; }

/// Row-major d x d matrix; `(i, j)` is row i, column j.
template <int D>
struct Mat {
  std::array<double, D * D> a{};

  constexpr double& operator()(int i, int j) noexcept { return a[i * D + j]; }
  constexpr double operator()(int i, int j) const noexcept { return a[i * D + j]; }

  static constexpr Mat identity() noexcept {
    Mat m;
    for (int i = 0; i < D; ++i) m(i, i) = 1.0;
    return m;
  }
  constexpr Mat& operator+=(const Mat& o) noexcept {
    for (int i = 0; i < D * D; ++i) a[i] += o.a[i];
    return *this;
  }
  constexpr Mat& operator*=(double s) noexcept {
    for (auto& x : a) x *= s;
    return *this;
  }
  friend constexpr Mat operator+(Mat x, const Mat& y) noexcept { return x += y; }
  friend constexpr Mat operator*(Mat x, double s) noexcept { return x *= s; }
  friend constexpr Mat operator*(double s, Mat x) noexcept { return x *= s; }
  friend constexpr Vec<D> operator*(const Mat& m, const Vec<D>& v) noexcept {
    Vec<D> r;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) r[i] += m(i, j) * v[j];
    return r;
  }
  friend constexpr Mat operator*(const Mat& x, const Mat& y) noexcept {
    Mat r;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j)
        for (int k = 0; k < D; ++k) r(i, j) += x(i, k) * y(k, j);
    return r;
  }
};

template <int D>
constexpr double trace(const Mat<D>& m) noexcept {
  double t = 0.0;
  for (int i = 0; i < D; ++i) t += m(i, i);
  return t;
}

constexpr double det(const Mat<2>& m) noexcept { return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0); }

constexpr double det(const Mat<3>& m) noexcept {
  return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
         m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
         m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
}

/// Inverse via the adjugate; the caller guarantees det != 0.
constexpr Mat<2> inverse(const Mat<2>& m) noexcept {
  const double inv = 1.0 / det(m);
  Mat<2> r;
  r(0, 0) = m(1, 1) * inv;
  r(0, 1) = -m(0, 1) * inv;
  r(1, 0) = -m(1, 0) * inv;
  r(1, 1) = m(0, 0) * inv;
  return r;
}

constexpr Mat<3> inverse(const Mat<3>& m) noexcept {
  const double inv = 1.0 / det(m);
  Mat<3> r;
  r(0, 0) = (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) * inv;
  r(0, 1) = (m(0, 2) * m(2, 1) - m(0, 1) * m(2, 2)) * inv;
  r(0, 2) = (m(0, 1) * m(1, 2) - m(0, 2) * m(1, 1)) * inv;
  r(1, 0) = (m(1, 2) * m(2, 0) - m(1, 0) * m(2, 2)) * inv;
  r(1, 1) = (m(0, 0) * m(2, 2) - m(0, 2) * m(2, 0)) * inv;
  r(1, 2) = (m(0, 2) * m(1, 0) - m(0, 0) * m(1, 2)) * inv;
  r(2, 0) = (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0)) * inv;
  r(2, 1) = (m(0, 1) * m(2, 0) - m(0, 0) * m(2, 1)) * inv;
  r(2, 2) = (m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0)) * inv;
  return r;
}

/// Signed volume of the simplex with vertices p[0..D] (positive for right-handed order).
template <int D>
inline double simplex_volume(const std::array<Vec<D>, D + 1>& p) noexcept {
  if constexpr (D == 2) {
    return 0.5 * cross(p[1] - p[0], p[2] - p[0]);
  } else {
    return dot(cross(p[1] - p[0], p[2] - p[0]), p[3] - p[0]) / 6.0;
  }
}

template <int D>
inline Vec<D> centroid(const std::array<Vec<D>, D + 1>& p) noexcept {
  Vec<D> c;
  for (const auto& q : p) c += q;
  return c * (1.0 / (D + 1));
}

/// Circumcenter of a non-degenerate simplex (relative-coordinate linear solve).
template <int D>
inline Vec<D> circumcenter(const std::array<Vec<D>, D + 1>& p) noexcept {
  if constexpr (D == 2) {
    const Vec2 b = p[1] - p[0];
    const Vec2 c = p[2] - p[0];
    const double d = 2.0 * cross(b, c);
    const double b2 = dot(b, b);
    const double c2 = dot(c, c);
    return p[0] + Vec2{{(c[1] * b2 - b[1] * c2) / d, (b[0] * c2 - c[0] * b2) / d}};
  } else {
    const Vec3 a = p[1] - p[0];
    const Vec3 b = p[2] - p[0];
    const Vec3 c = p[3] - p[0];
    const double d = 2.0 * dot(a, cross(b, c));
    const Vec3 num = dot(a, a) * cross(b, c) + dot(b, b) * cross(c, a) + dot(c, c) * cross(a, b);
    return p[0] + num * (1.0 / d);
  }
}

/// Circumcenter of a triangle embedded in 3D (lies in the triangle's plane).
inline Vec3 triangle_circumcenter(const Vec3& p0, const Vec3& p1, const Vec3& p2) noexcept {
  const Vec3 a = p1 - p0;
  const Vec3 b = p2 - p0;
  const Vec3 axb = cross(a, b);
  const double d = 2.0 * dot(axb, axb);
  const Vec3 num = cross(dot(a, a) * b - dot(b, b) * a, axb);
  return p0 + num * (1.0 / d);
}

}  // namespace tessdiff
