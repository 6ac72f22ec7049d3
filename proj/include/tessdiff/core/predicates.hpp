#pragma once

// Adaptive orientation and in-sphere predicates.
//
// Each predicate first evaluates its determinant in double precision together
// with a forward error bound (Shewchuk's stage-A bounds). When the bound cannot
// certify the sign, the determinant is recomputed exactly on integers: every
// input coordinate is a dyadic rational, so scaling all of them by a common
// power of two turns the homogeneous determinant into an integer polynomial
// with the same sign.

#include <algorithm>
#include <array>
#include <climits>
#include <cmath>
#include <initializer_list>

#include <boost/multiprecision/cpp_int.hpp>

#include "tessdiff/core/vec.hpp"

namespace tessdiff::predicates {

namespace detail {

inline constexpr double kEps = 0x1p-53;
inline constexpr double kCcwBound = (3.0 + 16.0 * kEps) * kEps;
inline constexpr double kO3dBound = (7.0 + 56.0 * kEps) * kEps;
inline constexpr double kIccBound = (10.0 + 96.0 * kEps) * kEps;
inline constexpr double kIspBound = (16.0 + 224.0 * kEps) * kEps;

using BigInt = boost::multiprecision::cpp_int;

inline int sign_of(const BigInt& v) { return v.sign(); }

/// Maps a set of doubles onto integers sharing one power-of-two scale.
class DyadicScaler {
 public:
  explicit DyadicScaler(std::initializer_list<double> values) {
    for (double v : values) {
      if (v == 0.0) continue;
      int e = 0;
      std::frexp(v, &e);
      emin_ = std::min(emin_, e - 53);
    }
    if (emin_ == INT_MAX) emin_ = 0;
  }
  BigInt operator()(double v) const {
    if (v == 0.0) return BigInt(0);
    int e = 0;
    const double f = std::frexp(v, &e);
    const auto mant = static_cast<long long>(std::ldexp(f, 53));
    BigInt r(mant);
    r <<= static_cast<unsigned>(e - 53 - emin_);
    return r;
  }

 private:
  int emin_ = INT_MAX;
};

template <class T>
T orient2d_expr(const T& ax, const T& ay, const T& bx, const T& by, const T& cx, const T& cy) {
  return (ax - cx) * (by - cy) - (ay - cy) * (bx - cx);
}

template <class T>
T orient3d_expr(const T* a, const T* b, const T* c, const T* d) {
  const T adx = a[0] - d[0], bdx = b[0] - d[0], cdx = c[0] - d[0];
  const T ady = a[1] - d[1], bdy = b[1] - d[1], cdy = c[1] - d[1];
  const T adz = a[2] - d[2], bdz = b[2] - d[2], cdz = c[2] - d[2];
  return adx * (bdy * cdz - bdz * cdy) + bdx * (cdy * adz - cdz * ady) + cdx * (ady * bdz - adz * bdy);
}

template <class T>
T incircle_expr(const T* a, const T* b, const T* c, const T* d) {
  const T adx = a[0] - d[0], bdx = b[0] - d[0], cdx = c[0] - d[0];
  const T ady = a[1] - d[1], bdy = b[1] - d[1], cdy = c[1] - d[1];
  const T alift = adx * adx + ady * ady;
  const T blift = bdx * bdx + bdy * bdy;
  const T clift = cdx * cdx + cdy * cdy;
  return alift * (bdx * cdy - cdx * bdy) + blift * (cdx * ady - adx * cdy) + clift * (adx * bdy - bdx * ady);
}

template <class T>
T insphere_expr(const T* a, const T* b, const T* c, const T* d, const T* e) {
  const T aex = a[0] - e[0], bex = b[0] - e[0], cex = c[0] - e[0], dex = d[0] - e[0];
  const T aey = a[1] - e[1], bey = b[1] - e[1], cey = c[1] - e[1], dey = d[1] - e[1];
  const T aez = a[2] - e[2], bez = b[2] - e[2], cez = c[2] - e[2], dez = d[2] - e[2];
  const T ab = aex * bey - bex * aey;
  const T bc = bex * cey - cex * bey;
  const T cd = cex * dey - dex * cey;
  const T da = dex * aey - aex * dey;
  const T ac = aex * cey - cex * aey;
  const T bd = bex * dey - dex * bey;
  const T abc = aez * bc - bez * ac + cez * ab;
  const T bcd = bez * cd - cez * bd + dez * bc;
  const T cda = cez * da + dez * ac + aez * cd;
  const T dab = dez * ab + aez * bd + bez * da;
  const T alift = aex * aex + aey * aey + aez * aez;
  const T blift = bex * bex + bey * bey + bez * bez;
  const T clift = cex * cex + cey * cey + cez * cez;
  const T dlift = dex * dex + dey * dey + dez * dez;
  return (dlift * abc - clift * dab) + (blift * cda - alift * bcd);
}

inline int sgn(double v) { return (v > 0.0) - (v < 0.0); }

/// Shewchuk convention: positive when a, b, c are counter-clockwise.
inline int orient2d(const double* a, const double* b, const double* c) {
  const double detleft = (a[0] - c[0]) * (b[1] - c[1]);
  const double detright = (a[1] - c[1]) * (b[0] - c[0]);
  const double det = detleft - detright;
  const double bound = kCcwBound * (std::fabs(detleft) + std::fabs(detright));
  if (det > bound || -det > bound) return sgn(det);
  const DyadicScaler s{a[0], a[1], b[0], b[1], c[0], c[1]};
  return sign_of(orient2d_expr<BigInt>(s(a[0]), s(a[1]), s(b[0]), s(b[1]), s(c[0]), s(c[1])));
}

/// Shewchuk convention: positive when d lies below the plane of counter-clockwise a, b, c.
inline int orient3d(const double* a, const double* b, const double* c, const double* d) {
  const double adx = a[0] - d[0], bdx = b[0] - d[0], cdx = c[0] - d[0];
  const double ady = a[1] - d[1], bdy = b[1] - d[1], cdy = c[1] - d[1];
  const double adz = a[2] - d[2], bdz = b[2] - d[2], cdz = c[2] - d[2];
  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double det = adz * (bdxcdy - cdxbdy) + bdz * (cdxady - adxcdy) + cdz * (adxbdy - bdxady);
  const double permanent = (std::fabs(bdxcdy) + std::fabs(cdxbdy)) * std::fabs(adz) +
                           (std::fabs(cdxady) + std::fabs(adxcdy)) * std::fabs(bdz) +
                           (std::fabs(adxbdy) + std::fabs(bdxady)) * std::fabs(cdz);
  const double bound = kO3dBound * permanent;
  if (det > bound || -det > bound) return sgn(det);
  const DyadicScaler s{a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2], d[0], d[1], d[2]};
  const BigInt A[3] = {s(a[0]), s(a[1]), s(a[2])}, B[3] = {s(b[0]), s(b[1]), s(b[2])};
  const BigInt C[3] = {s(c[0]), s(c[1]), s(c[2])}, E[3] = {s(d[0]), s(d[1]), s(d[2])};
  return sign_of(orient3d_expr<BigInt>(A, B, C, E));
}

/// Positive when d is strictly inside the circle through counter-clockwise a, b, c.
inline int incircle(const double* a, const double* b, const double* c, const double* d) {
  const double adx = a[0] - d[0], bdx = b[0] - d[0], cdx = c[0] - d[0];
  const double ady = a[1] - d[1], bdy = b[1] - d[1], cdy = c[1] - d[1];
  const double bdxcdy = bdx * cdy, cdxbdy = cdx * bdy;
  const double cdxady = cdx * ady, adxcdy = adx * cdy;
  const double adxbdy = adx * bdy, bdxady = bdx * ady;
  const double alift = adx * adx + ady * ady;
  const double blift = bdx * bdx + bdy * bdy;
  const double clift = cdx * cdx + cdy * cdy;
  const double det = alift * (bdxcdy - cdxbdy) + blift * (cdxady - adxcdy) + clift * (adxbdy - bdxady);
  const double permanent = (std::fabs(bdxcdy) + std::fabs(cdxbdy)) * alift +
                           (std::fabs(cdxady) + std::fabs(adxcdy)) * blift +
                           (std::fabs(adxbdy) + std::fabs(bdxady)) * clift;
  const double bound = kIccBound * permanent;
  if (det > bound || -det > bound) return sgn(det);
  const DyadicScaler s{a[0], a[1], b[0], b[1], c[0], c[1], d[0], d[1]};
  const BigInt A[2] = {s(a[0]), s(a[1])}, B[2] = {s(b[0]), s(b[1])};
  const BigInt C[2] = {s(c[0]), s(c[1])}, E[2] = {s(d[0]), s(d[1])};
  return sign_of(incircle_expr<BigInt>(A, B, C, E));
}

/// Positive when e is strictly inside the sphere through a, b, c, d with orient3d(a,b,c,d) > 0.
inline int insphere(const double* a, const double* b, const double* c, const double* d, const double* e) {
  const double aex = a[0] - e[0], bex = b[0] - e[0], cex = c[0] - e[0], dex = d[0] - e[0];
  const double aey = a[1] - e[1], bey = b[1] - e[1], cey = c[1] - e[1], dey = d[1] - e[1];
  const double aez = a[2] - e[2], bez = b[2] - e[2], cez = c[2] - e[2], dez = d[2] - e[2];
  const double aexbey = aex * bey, bexaey = bex * aey;
  const double bexcey = bex * cey, cexbey = cex * bey;
  const double cexdey = cex * dey, dexcey = dex * cey;
  const double dexaey = dex * aey, aexdey = aex * dey;
  const double aexcey = aex * cey, cexaey = cex * aey;
  const double bexdey = bex * dey, dexbey = dex * bey;
  const double ab = aexbey - bexaey, bc = bexcey - cexbey, cd = cexdey - dexcey;
  const double da = dexaey - aexdey, ac = aexcey - cexaey, bd = bexdey - dexbey;
  const double abc = aez * bc - bez * ac + cez * ab;
  const double bcd = bez * cd - cez * bd + dez * bc;
  const double cda = cez * da + dez * ac + aez * cd;
  const double dab = dez * ab + aez * bd + bez * da;
  const double alift = aex * aex + aey * aey + aez * aez;
  const double blift = bex * bex + bey * bey + bez * bez;
  const double clift = cex * cex + cey * cey + cez * cez;
  const double dlift = dex * dex + dey * dey + dez * dez;
  const double det = (dlift * abc - clift * dab) + (blift * cda - alift * bcd);
  const double az = std::fabs(aez), bz = std::fabs(bez), cz = std::fabs(cez), dz = std::fabs(dez);
  const double p_ab = std::fabs(aexbey) + std::fabs(bexaey);
  const double p_bc = std::fabs(bexcey) + std::fabs(cexbey);
  const double p_cd = std::fabs(cexdey) + std::fabs(dexcey);
  const double p_da = std::fabs(dexaey) + std::fabs(aexdey);
  const double p_ac = std::fabs(aexcey) + std::fabs(cexaey);
  const double p_bd = std::fabs(bexdey) + std::fabs(dexbey);
  const double permanent = (p_cd * bz + p_bd * cz + p_bc * dz) * alift +
                           (p_da * cz + p_ac * dz + p_cd * az) * blift +
                           (p_ab * dz + p_bd * az + p_da * bz) * clift +
                           (p_bc * az + p_ac * bz + p_ab * cz) * dlift;
  const double bound = kIspBound * permanent;
  if (det > bound || -det > bound) return sgn(det);
  const DyadicScaler s{a[0], a[1], a[2], b[0], b[1], b[2], c[0], c[1], c[2],
                       d[0], d[1], d[2], e[0], e[1], e[2]};
  const BigInt A[3] = {s(a[0]), s(a[1]), s(a[2])}, B[3] = {s(b[0]), s(b[1]), s(b[2])};
  const BigInt C[3] = {s(c[0]), s(c[1]), s(c[2])}, E1[3] = {s(d[0]), s(d[1]), s(d[2])};
  const BigInt E2[3] = {s(e[0]), s(e[1]), s(e[2])};
  return sign_of(insphere_expr<BigInt>(A, B, C, E1, E2));
}

}  // namespace detail

/// Sign of the signed volume of simplex p[0..D]; +1 for right-handed (counter-clockwise) order.
template <int D>
inline int orientation(const std::array<const Vec<D>*, D + 1>& p) {
  if constexpr (D == 2) {
    return detail::orient2d(p[0]->c.data(), p[1]->c.data(), p[2]->c.data());
  } else {
    return detail::orient3d(p[0]->c.data(), p[1]->c.data(), p[3]->c.data(), p[2]->c.data());
  }
}

/// +1 if q lies strictly inside the circumsphere of the positively oriented simplex p, 0 if on it.
template <int D>
inline int in_sphere(const std::array<const Vec<D>*, D + 1>& p, const Vec<D>& q) {
  if constexpr (D == 2) {
    return detail::incircle(p[0]->c.data(), p[1]->c.data(), p[2]->c.data(), q.c.data());
  } else {
    return detail::insphere(p[0]->c.data(), p[1]->c.data(), p[3]->c.data(), p[2]->c.data(), q.c.data());
  }
}

/// True when the three points are collinear (exact).
inline bool collinear(const Vec3& a, const Vec3& b, const Vec3& c) {
  const double axy[2] = {a[0], a[1]}, bxy[2] = {b[0], b[1]}, cxy[2] = {c[0], c[1]};
  const double ayz[2] = {a[1], a[2]}, byz[2] = {b[1], b[2]}, cyz[2] = {c[1], c[2]};
  const double axz[2] = {a[0], a[2]}, bxz[2] = {b[0], b[2]}, cxz[2] = {c[0], c[2]};
  return detail::orient2d(axy, bxy, cxy) == 0 && detail::orient2d(ayz, byz, cyz) == 0 &&
         detail::orient2d(axz, bxz, cxz) == 0;
}

}  // namespace tessdiff::predicates
