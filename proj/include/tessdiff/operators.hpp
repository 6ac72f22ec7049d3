#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tessdiff/core/tessellation.hpp"
#include "tessdiff/dual_cells.hpp"
#include "tessdiff/errors.hpp"
#include "tessdiff/fields.hpp"
#include "tessdiff/parallel.hpp"
#include "tessdiff/time_pair.hpp"

namespace tessdiff {

/// Finite-time rate of volume change.
enum class Scheme {
  D,      ///< (2/dt) (V1 - V0) / (V1 + V0)
  D_lin,  ///< (1/(2 dt)) (1/V1 + 1/V0) (V1 - V0)
  D_log,  ///< (1/dt) ln(V1 / V0)
};

inline std::string_view to_string(Scheme s) {
  switch (s) {
    case Scheme::D: return "D";
    case Scheme::D_lin: return "D_lin";
    case Scheme::D_log: return "D_log";
  }
  return "?";
}

inline Scheme parse_scheme(std::string_view s) {
  if (s == "D") return Scheme::D;
  if (s == "D_lin") return Scheme::D_lin;
  if (s == "D_log") return Scheme::D_log;
  throw ConfigError("unknown scheme '" + std::string(s) + "' (expected D, D_lin or D_log)");
}

inline double volume_rate(Scheme s, double v0, double v1, double dt) {
  switch (s) {
    case Scheme::D: return (2.0 / dt) * (v1 - v0) / (v1 + v0);
    case Scheme::D_lin: return (0.5 / dt) * (1.0 / v1 + 1.0 / v0) * (v1 - v0);
    case Scheme::D_log: return std::log(v1 / v0) / dt;
  }
  return 0.0;
}

enum class OperatorKind { divergence, curl, gradient, helicity };

inline std::string_view to_string(OperatorKind k) {
  switch (k) {
    case OperatorKind::divergence: return "divergence";
    case OperatorKind::curl: return "curl";
    case OperatorKind::gradient: return "gradient";
    case OperatorKind::helicity: return "helicity";
  }
  return "?";
}

/// Per-particle operator values (row-major, `components` per particle) with validity flags.
template <int D>
struct OperatorField {
  struct Meta {
    std::string method;  ///< "lagrangian", "eulerian" or "wtli"
    double dt = 0.0;
    Scheme scheme = Scheme::D;
    DualKind dual = default_modified_kind<D>();
    RetessellationMode mode = RetessellationMode::frozen_connectivity;
  };

  OperatorKind kind = OperatorKind::divergence;
  int components = 1;
  std::vector<double> values;
  std::vector<std::uint8_t> valid;
  Meta meta;

  static OperatorField make(OperatorKind kind, int components, std::size_t n) {
    OperatorField f;
    f.kind = kind;
    f.components = components;
    f.values.assign(n * static_cast<std::size_t>(components), 0.0);
    f.valid.assign(n, 1);
    return f;
  }

  std::size_t size() const noexcept { return valid.size(); }
  std::size_t num_valid() const noexcept {
    std::size_t n = 0;
    for (auto v : valid) n += v;
    return n;
  }
  double& at(std::size_t p, int c = 0) { return values[p * static_cast<std::size_t>(components) + c]; }
  double at(std::size_t p, int c = 0) const { return values[p * static_cast<std::size_t>(components) + c]; }

  /// Component c of every particle.
  std::vector<double> component(int c) const {
    std::vector<double> out(size());
    for (std::size_t p = 0; p < size(); ++p) out[p] = at(p, c);
    return out;
  }

  Mat<D> gradient(std::size_t p) const {
    Mat<D> g;
    for (int i = 0; i < D * D; ++i) g.a[i] = at(p, i);
    return g;
  }
};

/// Number of curl components: 1 in 2D, 3 in 3D.
template <int D>
constexpr int curl_components() {
  return D == 2 ? 1 : 3;
}

/// Velocity data rotated so that its divergence is curl component c: -v_perp in 2D, -L_c v in 3D.
template <int D>
Vec<D> curl_auxiliary(const Vec<D>& v, int c) {
  if constexpr (D == 2) {
    // v_perp = (-v_y, v_x)
    return Vec2{{v[1], -v[0]}};
  } else {
    switch (c) {
      case 0: return Vec3{{0.0, v[2], -v[1]}};
      case 1: return Vec3{{-v[2], 0.0, v[0]}};
      default: return Vec3{{v[1], -v[0], 0.0}};
    }
  }
}

/// Velocity data whose divergence is the gradient entry (i, j): v_i e_j.
template <int D>
Vec<D> gradient_auxiliary(const Vec<D>& v, int i, int j) {
  Vec<D> w{};
  w[j] = v[i];
  return w;
}

/// Lagrangian operators for one time pair, sharing the t^k tessellation and volumes.
///
/// The velocity data are the measured displacements divided by dt, so the same path serves
/// advected clouds and two-snapshot (tracking) data. Auxiliary fields (rotated or projected
/// velocities) are advected from t^k with the same dt.
template <int D>
class LagrangianOperators {
 public:
  LagrangianOperators(const TimePair<D>& pair, DualKind dual = default_modified_kind<D>(), Scheme scheme = Scheme::D,
                      const BuildOptions& build = {})
      : pair_(pair), dual_(dual), scheme_(scheme), build_(build) {
    pair_.validate();
    tess_.emplace(build_delaunay<D>(std::span<const Vec<D>>(pair_.before.positions), pair_.domain, build_));
    init({});
  }

  /// Reuses a tessellation of `pair.before` (and optionally its dual volumes) across sweeps.
  LagrangianOperators(const TimePair<D>& pair, Tessellation<D> tess, DualKind dual, Scheme scheme,
                      std::optional<DualCellField<D>> volumes_before = std::nullopt, const BuildOptions& build = {})
      : pair_(pair), dual_(dual), scheme_(scheme), build_(build) {
    pair_.validate();
    if (tess.num_particles() != static_cast<int>(pair_.before.size()))
      throw ConfigError("tessellation has " + std::to_string(tess.num_particles()) + " particles, pair has " +
                        std::to_string(pair_.before.size()));
    tess_.emplace(std::move(tess));
    init(std::move(volumes_before));
  }

  const Tessellation<D>& tessellation() const { return *tess_; }
  const DualCellField<D>& volumes_before() const { return vol0_; }
  /// Displacement-implied particle velocities.
  const std::vector<Vec<D>>& velocities() const { return velocity_; }

  OperatorField<D> divergence() const {
    auto f = OperatorField<D>::make(OperatorKind::divergence, 1, velocity_.size());
    fill_meta(f);
    rates(after_, f, 0);
    return f;
  }

  /// Divergence under several schemes from one pair of volume sets.
  std::vector<OperatorField<D>> divergence(std::span<const Scheme> schemes) const {
    const auto vol1 = volumes_at(after_);
    std::vector<OperatorField<D>> out;
    for (Scheme s : schemes) {
      auto f = OperatorField<D>::make(OperatorKind::divergence, 1, velocity_.size());
      fill_meta(f);
      f.meta.scheme = s;
      rates_from(vol1, s, f, 0);
      out.push_back(std::move(f));
    }
    return out;
  }

  OperatorField<D> curl() const {
    constexpr int nc = curl_components<D>();
    auto f = OperatorField<D>::make(OperatorKind::curl, nc, velocity_.size());
    fill_meta(f);
    for (int c = 0; c < nc; ++c) rates(advect([c](const Vec<D>& v) { return curl_auxiliary<D>(v, c); }), f, c);
    return f;
  }

  OperatorField<D> gradient() const {
    auto f = OperatorField<D>::make(OperatorKind::gradient, D * D, velocity_.size());
    fill_meta(f);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j)
        rates(advect([i, j](const Vec<D>& v) { return gradient_auxiliary<D>(v, i, j); }), f, i * D + j);
    return f;
  }

  /// Divergence of arbitrary per-particle velocity data advected from t^k.
  OperatorField<D> divergence_of(const std::vector<Vec<D>>& w) const {
    if (w.size() != velocity_.size()) throw ConfigError("velocity data length does not match the particle count");
    auto f = OperatorField<D>::make(OperatorKind::divergence, 1, velocity_.size());
    fill_meta(f);
    std::vector<Vec<D>> x1(w.size());
    for (std::size_t i = 0; i < w.size(); ++i) x1[i] = x0_[i] + pair_.dt * w[i];
    rates(x1, f, 0);
    return f;
  }

 private:
  void init(std::optional<DualCellField<D>> volumes_before) {
    if (volumes_before) {
      if (volumes_before->size() != pair_.before.size() || volumes_before->kind != dual_)
        throw ConfigError("precomputed volumes do not match the pair or dual kind");
      vol0_ = std::move(*volumes_before);
    } else {
      vol0_ = dual_cells(*tess_, dual_);
    }
    const auto x1 = pair_.unwrapped_after();
    x0_.resize(x1.size());
    velocity_.resize(x1.size());
    for (std::size_t i = 0; i < x1.size(); ++i) {
      x0_[i] = tess_->point(static_cast<int>(i));
      velocity_[i] = (x1[i] - x0_[i]) * (1.0 / pair_.dt);
    }
    after_ = x1;
  }

  void fill_meta(OperatorField<D>& f) const {
    f.meta.method = "lagrangian";
    f.meta.dt = pair_.dt;
    f.meta.scheme = scheme_;
    f.meta.dual = dual_;
    f.meta.mode = pair_.mode;
  }

  template <class Map>
  std::vector<Vec<D>> advect(Map&& m) const {
    std::vector<Vec<D>> x1(velocity_.size());
    for (std::size_t i = 0; i < x1.size(); ++i) x1[i] = x0_[i] + pair_.dt * m(velocity_[i]);
    return x1;
  }

  DualCellField<D> volumes_at(const std::vector<Vec<D>>& x1) const {
    if (pair_.mode == RetessellationMode::frozen_connectivity) return dual_cells(tess_->with_positions(x1), dual_);
    std::vector<Vec<D>> wrapped(x1.size());
    for (std::size_t i = 0; i < x1.size(); ++i) wrapped[i] = pair_.domain.wrap(x1[i]);
    const auto t1 = build_delaunay<D>(std::span<const Vec<D>>(wrapped), pair_.domain, build_);
    auto v = dual_cells(t1, dual_);
    for (std::size_t i = 0; i < v.size(); ++i)
      if (!v.valid[i] && t1.closed(static_cast<int>(i)))
        throw InvariantViolation("positive-dual-volume",
                                 "particle " + std::to_string(i) + " has a non-positive dual volume after retessellation");
    return v;
  }

  void rates(const std::vector<Vec<D>>& x1, OperatorField<D>& f, int c) const {
    rates_from(volumes_at(x1), scheme_, f, c);
  }

  void rates_from(const DualCellField<D>& vol1, Scheme scheme, OperatorField<D>& f, int c) const {
    for (std::size_t p = 0; p < f.size(); ++p) {
      if (!vol0_.valid[p] || !vol1.valid[p]) {
        f.valid[p] = 0;
        f.at(p, c) = 0.0;
        continue;
      }
      f.at(p, c) = volume_rate(scheme, vol0_.volume[p], vol1.volume[p], pair_.dt);
    }
  }

  TimePair<D> pair_;
  DualKind dual_;
  Scheme scheme_;
  BuildOptions build_;
  std::optional<Tessellation<D>> tess_;
  DualCellField<D> vol0_;
  std::vector<Vec<D>> x0_, after_, velocity_;
};

template <int D>
OperatorField<D> divergence_lagrangian(const TimePair<D>& pair, DualKind dual = default_modified_kind<D>(),
                                       Scheme scheme = Scheme::D) {
  return LagrangianOperators<D>(pair, dual, scheme).divergence();
}

template <int D>
OperatorField<D> curl_lagrangian(const TimePair<D>& pair, DualKind dual = default_modified_kind<D>(),
                                 Scheme scheme = Scheme::D) {
  return LagrangianOperators<D>(pair, dual, scheme).curl();
}

template <int D>
OperatorField<D> gradient_lagrangian(const TimePair<D>& pair, DualKind dual = default_modified_kind<D>(),
                                     Scheme scheme = Scheme::D) {
  return LagrangianOperators<D>(pair, dual, scheme).gradient();
}

namespace detail {

/// Divergence of the linear interpolant of w over one simplex:
/// (1/V) [w1 . (r2 x r3) + w2 . (r3 x r1) + w3 . (r1 x r2)], with r3 the unit normal and w3 = 0 in 2D.
template <int D>
double simplex_divergence(const std::array<Vec<D>, D + 1>& x, const std::array<Vec<D>, D + 1>& v) {
  if constexpr (D == 2) {
    const Vec2 r1 = x[1] - x[0], r2 = x[2] - x[0];
    const Vec2 w1 = v[1] - v[0], w2 = v[2] - v[0];
    const double vol = cross(r1, r2);
    // r2 x n = (r2_y, -r2_x), n x r1 = (-r1_y, r1_x) for n = e_z.
    return (w1[0] * r2[1] - w1[1] * r2[0] - w2[0] * r1[1] + w2[1] * r1[0]) / vol;
  } else {
    const Vec3 r1 = x[1] - x[0], r2 = x[2] - x[0], r3 = x[3] - x[0];
    const Vec3 w1 = v[1] - v[0], w2 = v[2] - v[0], w3 = v[3] - v[0];
    const double vol = dot(r1, cross(r2, r3));
    return (dot(w1, cross(r2, r3)) + dot(w2, cross(r3, r1)) + dot(w3, cross(r1, r2))) / vol;
  }
}

}  // namespace detail

/// Eulerian (dt -> 0) operators on one tessellation: per-simplex divergence of the linear
/// interpolant, averaged over each particle's incident simplices with volume weights.
template <int D>
class EulerianOperators {
 public:
  EulerianOperators(const Tessellation<D>& tess, std::vector<Vec<D>> velocities)
      : tess_(tess), v_(std::move(velocities)) {
    if (v_.size() != static_cast<std::size_t>(tess.num_particles()))
      throw ConfigError("velocity count " + std::to_string(v_.size()) + " does not match particle count " +
                        std::to_string(tess.num_particles()));
    vol_.resize(tess.num_simplices());
    for (std::size_t s = 0; s < vol_.size(); ++s) vol_[s] = simplex_volume<D>(tess.simplex_points(s));
  }

  OperatorField<D> divergence() const {
    auto f = OperatorField<D>::make(OperatorKind::divergence, 1, v_.size());
    fill(f, v_, 0);
    return f;
  }

  OperatorField<D> curl() const {
    constexpr int nc = curl_components<D>();
    auto f = OperatorField<D>::make(OperatorKind::curl, nc, v_.size());
    for (int c = 0; c < nc; ++c) fill(f, transformed([c](const Vec<D>& v) { return curl_auxiliary<D>(v, c); }), c);
    return f;
  }

  OperatorField<D> gradient() const {
    auto f = OperatorField<D>::make(OperatorKind::gradient, D * D, v_.size());
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j)
        fill(f, transformed([i, j](const Vec<D>& v) { return gradient_auxiliary<D>(v, i, j); }), i * D + j);
    return f;
  }

  /// Divergence of arbitrary per-particle velocity data.
  OperatorField<D> divergence_of(const std::vector<Vec<D>>& w) const {
    if (w.size() != v_.size()) throw ConfigError("velocity data length does not match the particle count");
    auto f = OperatorField<D>::make(OperatorKind::divergence, 1, v_.size());
    fill(f, w, 0);
    return f;
  }

  /// Per-simplex divergence of velocity data w.
  std::vector<double> simplex_divergences(const std::vector<Vec<D>>& w) const {
    std::vector<double> d(tess_.num_simplices());
    parallel_for(d.size(), [&](std::size_t s) {
      const auto& sv = tess_.simplex(s);
      std::array<Vec<D>, D + 1> vv;
      for (int i = 0; i <= D; ++i) vv[i] = w[static_cast<std::size_t>(tess_.primary_of(sv[i]))];
      d[s] = detail::simplex_divergence<D>(tess_.simplex_points(s), vv);
    });
    return d;
  }

 private:
  template <class Map>
  std::vector<Vec<D>> transformed(Map&& m) const {
    std::vector<Vec<D>> w(v_.size());
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = m(v_[i]);
    return w;
  }

  void fill(OperatorField<D>& f, const std::vector<Vec<D>>& w, int c) const {
    f.meta.method = "eulerian";
    const auto d = simplex_divergences(w);
    parallel_for(f.size(), [&](std::size_t p) {
      if (!tess_.closed(static_cast<int>(p))) {
        f.valid[p] = 0;
        return;
      }
      double num = 0.0, den = 0.0;
      for (int s : tess_.incident(static_cast<int>(p))) {
        num += d[static_cast<std::size_t>(s)] * vol_[static_cast<std::size_t>(s)];
        den += vol_[static_cast<std::size_t>(s)];
      }
      f.at(p, c) = num / den;
    });
  }

  const Tessellation<D>& tess_;
  std::vector<Vec<D>> v_;
  std::vector<double> vol_;
};

template <int D>
OperatorField<D> divergence_eulerian(const Tessellation<D>& tess, const ParticleCloud<D>& cloud) {
  return EulerianOperators<D>(tess, cloud.velocities).divergence();
}

template <int D>
OperatorField<D> curl_eulerian(const Tessellation<D>& tess, const ParticleCloud<D>& cloud) {
  return EulerianOperators<D>(tess, cloud.velocities).curl();
}

template <int D>
OperatorField<D> gradient_eulerian(const Tessellation<D>& tess, const ParticleCloud<D>& cloud) {
  return EulerianOperators<D>(tess, cloud.velocities).gradient();
}

/// Walks from simplex `start` to the simplex containing q; returns -1 if the walk leaves the
/// tessellation. `bary` receives the barycentric coordinates of q.
template <int D>
int locate_simplex(const Tessellation<D>& tess, int start, const Vec<D>& q, std::array<double, D + 1>& bary) {
  int s = start;
  const std::size_t limit = 4 * tess.num_simplices() + 16;
  for (std::size_t step = 0; step < limit && s >= 0; ++step) {
    const auto x = tess.simplex_points(static_cast<std::size_t>(s));
    const double vol = simplex_volume<D>(x);
    int worst = -1;
    double most_negative = 0.0;
    for (int i = 0; i <= D; ++i) {
      auto y = x;
      y[i] = q;
      bary[i] = simplex_volume<D>(y) / vol;
      if (bary[i] < most_negative) {
        most_negative = bary[i];
        worst = i;
      }
    }
    if (worst < 0 || most_negative > -1e-12) return s;
    s = tess.neighbors(static_cast<std::size_t>(s))[worst];
  }
  return -1;
}

/// Green-Gauss gradient over each particle's centroid-dual polygon (2D). Face values are the
/// linear (barycentric) interpolation of the velocity at each dual-edge midpoint in the Delaunay
/// triangle that contains it.
inline OperatorField<2> wtli_gradient_2d(const Tessellation<2>& tess, const std::vector<Vec2>& velocities) {
  const std::size_t n = static_cast<std::size_t>(tess.num_particles());
  if (velocities.size() != n)
    throw ConfigError("velocity count " + std::to_string(velocities.size()) + " does not match particle count " +
                      std::to_string(n));
  auto f = OperatorField<2>::make(OperatorKind::gradient, 4, n);
  f.meta.method = "wtli";
  f.meta.dual = DualKind::modified_centroid;
  std::vector<Vec2> g(tess.num_simplices());
  for (std::size_t s = 0; s < g.size(); ++s) g[s] = centroid<2>(tess.simplex_points(s));
  parallel_for(n, [&](std::size_t pi) {
    const int p = static_cast<int>(pi);
    if (!tess.closed(p)) {
      f.valid[pi] = 0;
      return;
    }
    const auto ring = tess.incident(p);
    Mat<2> sum{};
    double area = 0.0;
    const Vec2 xp = tess.point(p);
    for (std::size_t k = 0; k < ring.size(); ++k) {
      const int s0 = ring[k];
      const Vec2 a = g[static_cast<std::size_t>(s0)];
      const Vec2 b = g[static_cast<std::size_t>(ring[(k + 1) % ring.size()])];
      area += 0.5 * cross(a - xp, b - xp);
      const Vec2 mid = 0.5 * (a + b);
      std::array<double, 3> bary{};
      const int s = locate_simplex<2>(tess, s0, mid, bary);
      if (s < 0) {
        f.valid[pi] = 0;
        return;
      }
      Vec2 u{};
      const auto& sv = tess.simplex(static_cast<std::size_t>(s));
      for (int i = 0; i < 3; ++i) u += bary[i] * velocities[static_cast<std::size_t>(tess.primary_of(sv[i]))];
      // Outward normal times edge length of a counter-clockwise polygon edge a -> b.
      const Vec2 nA{{b[1] - a[1], a[0] - b[0]}};
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) sum(i, j) += u[i] * nA[j];
    }
    if (!(area > 0.0)) {
      f.valid[pi] = 0;
      return;
    }
    for (int i = 0; i < 4; ++i) f.at(pi, i) = sum.a[i] / area;
  });
  return f;
}

/// Cosine of the angle between velocity and curl. Particles whose velocity or curl norm is
/// below 1e-12 times the RMS of the respective field are flagged invalid.
inline OperatorField<3> relative_helicity(const std::vector<Vec3>& velocity, const OperatorField<3>& curl) {
  if (curl.components != 3 || curl.size() != velocity.size())
    throw ConfigError("helicity needs a 3-component curl field matching the velocity count");
  auto h = OperatorField<3>::make(OperatorKind::helicity, 1, velocity.size());
  h.meta = curl.meta;
  double su = 0.0, sc = 0.0;
  std::size_t nv = 0;
  for (std::size_t p = 0; p < velocity.size(); ++p) {
    if (!curl.valid[p]) continue;
    ++nv;
    su += dot(velocity[p], velocity[p]);
    for (int c = 0; c < 3; ++c) sc += curl.at(p, c) * curl.at(p, c);
  }
  const double eu = nv ? 1e-12 * std::sqrt(su / static_cast<double>(nv)) : 0.0;
  const double ec = nv ? 1e-12 * std::sqrt(sc / static_cast<double>(nv)) : 0.0;
  for (std::size_t p = 0; p < velocity.size(); ++p) {
    const Vec3 w{{curl.at(p, 0), curl.at(p, 1), curl.at(p, 2)}};
    const double nu = norm(velocity[p]), nw = norm(w);
    if (!curl.valid[p] || !(nu > eu) || !(nw > ec) || nu < 1e-300 || nw < 1e-300) {
      h.valid[p] = 0;
      continue;
    }
    h.at(p) = std::clamp(dot(velocity[p], w) / (nu * nw), -1.0, 1.0);
  }
  return h;
}

}  // namespace tessdiff
