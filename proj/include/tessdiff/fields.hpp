#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <numbers>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "tessdiff/core/domain.hpp"
#include "tessdiff/core/vec.hpp"
#include "tessdiff/errors.hpp"
#include "tessdiff/parallel.hpp"
#include "tessdiff/random.hpp"
#include "tessdiff/time_pair.hpp"

namespace tessdiff {

/// Curl value type: pseudo-scalar in 2D, vector in 3D.
template <int D>
using CurlValue = std::conditional_t<D == 2, double, Vec3>;

/// Curl from a velocity gradient g(i, j) = du_i/dx_j.
template <int D>
CurlValue<D> curl_from_gradient(const Mat<D>& g) {
  if constexpr (D == 2) {
    return g(1, 0) - g(0, 1);
  } else {
    return Vec3{{g(2, 1) - g(1, 2), g(0, 2) - g(2, 0), g(1, 0) - g(0, 1)}};
  }
}

/// Velocity field with closed-form gradient.
template <int D>
struct AnalyticField {
  std::string id;
  /// Writes u(x) and/or the gradient du_i/dx_j at x; either output may be null.
  std::function<void(const Vec<D>&, Vec<D>*, Mat<D>*)> eval;

  Vec<D> velocity(const Vec<D>& x) const {
    Vec<D> u;
    eval(x, &u, nullptr);
    return u;
  }
  Mat<D> gradient(const Vec<D>& x) const {
    Mat<D> g;
    eval(x, nullptr, &g);
    return g;
  }
  double divergence(const Vec<D>& x) const { return trace(gradient(x)); }
  CurlValue<D> curl(const Vec<D>& x) const { return curl_from_gradient<D>(gradient(x)); }
};

namespace fields {

/// u = (cos x cos y, 0); du_x/dx = -sin x cos y.
inline AnalyticField<2> cos_cos_2d() {
  return {"cos_cos_2d", [](const Vec2& x, Vec2* u, Mat<2>* g) {
            const double cx = std::cos(x[0]), sx = std::sin(x[0]), cy = std::cos(x[1]), sy = std::sin(x[1]);
            if (u) *u = {{cx * cy, 0.0}};
            if (g) {
              *g = {};
              (*g)(0, 0) = -sx * cy;
              (*g)(0, 1) = -cx * sy;
            }
          }};
}

/// u = (sin x cos y cos z, 0, 0); du_x/dx = cos x cos y cos z.
inline AnalyticField<3> sin_cos_cos_3d() {
  return {"sin_cos_cos_3d", [](const Vec3& x, Vec3* u, Mat<3>* g) {
            const double cx = std::cos(x[0]), sx = std::sin(x[0]), cy = std::cos(x[1]), sy = std::sin(x[1]);
            const double cz = std::cos(x[2]), sz = std::sin(x[2]);
            if (u) *u = {{sx * cy * cz, 0.0, 0.0}};
            if (g) {
              *g = {};
              (*g)(0, 0) = cx * cy * cz;
              (*g)(0, 1) = -sx * sy * cz;
              (*g)(0, 2) = -sx * cy * sz;
            }
          }};
}

/// 2D: (cos x cos y, -sin x sin y), divergence -2 sin x cos y.
/// 3D: (sin x cos y cos z, cos x sin y cos z, cos x cos y sin z), divergence 3 cos x cos y cos z.
template <int D>
AnalyticField<D> divergence_field() {
  if constexpr (D == 2) {
    return {"divergence_2d", [](const Vec2& x, Vec2* u, Mat<2>* g) {
              const double cx = std::cos(x[0]), sx = std::sin(x[0]), cy = std::cos(x[1]), sy = std::sin(x[1]);
              if (u) *u = {{cx * cy, -sx * sy}};
              if (g) {
                (*g)(0, 0) = -sx * cy;
                (*g)(0, 1) = -cx * sy;
                (*g)(1, 0) = -cx * sy;
                (*g)(1, 1) = -sx * cy;
              }
            }};
  } else {
    return {"divergence_3d", [](const Vec3& x, Vec3* u, Mat<3>* g) {
              const double c[3] = {std::cos(x[0]), std::cos(x[1]), std::cos(x[2])};
              const double s[3] = {std::sin(x[0]), std::sin(x[1]), std::sin(x[2])};
              if (u) *u = {{s[0] * c[1] * c[2], c[0] * s[1] * c[2], c[0] * c[1] * s[2]}};
              if (g) {
                // u_i = sin(x_i) prod_{j != i} cos(x_j)
                for (int i = 0; i < 3; ++i)
                  for (int j = 0; j < 3; ++j) {
                    double v = 1.0;
                    for (int k = 0; k < 3; ++k) {
                      const bool sine = k == i;
                      if (k == j) v *= sine ? c[k] : -s[k];
                      else v *= sine ? s[k] : c[k];
                    }
                    (*g)(i, j) = v;
                  }
              }
            }};
  }
}

/// Linear shear u = (y, 0[, 0]); not periodic, for open boxes.
template <int D>
AnalyticField<D> shear() {
  return {"shear", [](const Vec<D>& x, Vec<D>* u, Mat<D>* g) {
            if (u) {
              *u = {};
              (*u)[0] = x[1];
            }
            if (g) {
              *g = {};
              (*g)(0, 1) = 1.0;
            }
          }};
}

/// Single sine wave u = (sin kx, 0[, 0]).
template <int D>
AnalyticField<D> sine_wave(double k) {
  return {"sine_wave", [k](const Vec<D>& x, Vec<D>* u, Mat<D>* g) {
            if (u) {
              *u = {};
              (*u)[0] = std::sin(k * x[0]);
            }
            if (g) {
              *g = {};
              (*g)(0, 0) = k * std::cos(k * x[0]);
            }
          }};
}

/// Linear field u = A x + b.
template <int D>
AnalyticField<D> linear(const Mat<D>& a, const Vec<D>& b = {}) {
  return {"linear", [a, b](const Vec<D>& x, Vec<D>* u, Mat<D>* g) {
            if (u) *u = a * x + b;
            if (g) *g = a;
          }};
}

template <int D>
AnalyticField<D> uniform(const Vec<D>& v) {
  return linear<D>(Mat<D>{}, v);
}

}  // namespace fields

/// Sum of axis-aligned sines with random phases and amplitudes E(k)^{1/2}:
/// u_i = sum_k sum_a E(k)^{1/2} sin(k x_a + r_{k, i d + a}).
template <int D>
class SyntheticSpectrumField {
 public:
  SyntheticSpectrumField(int k_max, double exponent, std::uint64_t seed) : k_max_(k_max), exponent_(exponent) {
    if (k_max < 1) throw ConfigError("k_max must be at least 1, got " + std::to_string(k_max));
    auto rng = make_rng(seed, Stream::phases);
    amp_.resize(static_cast<std::size_t>(k_max));
    rot_.resize(static_cast<std::size_t>(k_max) * D * D);
    phase_.resize(rot_.size());
    for (int k = 1; k <= k_max; ++k) {
      amp_[static_cast<std::size_t>(k - 1)] = std::pow(static_cast<double>(k), 0.5 * exponent);
      for (int j = 0; j < D * D; ++j) {
        const double r = 2.0 * std::numbers::pi * uniform01(rng);
        const auto idx = static_cast<std::size_t>((k - 1) * D * D + j);
        phase_[idx] = r;
        rot_[idx] = std::polar(1.0, r);
      }
    }
  }

  /// Default exponent: -3 in 2D, -5/3 in 3D.
  static constexpr double default_exponent() { return D == 2 ? -3.0 : -5.0 / 3.0; }

  int k_max() const noexcept { return k_max_; }
  double exponent() const noexcept { return exponent_; }
  double amplitude(int k) const { return amp_.at(static_cast<std::size_t>(k - 1)); }
  /// Phase r_{k,j}, j = i d + a for component i and axis a.
  double phase(int k, int j) const { return phase_.at(static_cast<std::size_t>((k - 1) * D * D + j)); }

  void eval(const Vec<D>& x, Vec<D>* u, Mat<D>* g) const {
    if (u) *u = {};
    if (g) *g = {};
    for (int a = 0; a < D; ++a) {
      const std::complex<double> z1 = std::polar(1.0, x[a]);
      std::complex<double> z = 1.0;
      for (int k = 1; k <= k_max_; ++k) {
        // Power recurrence for exp(i k x), re-anchored periodically to bound round-off growth.
        z = (k % 64 == 0) ? std::polar(1.0, k * x[a]) : z * z1;
        const double ak = amp_[static_cast<std::size_t>(k - 1)];
        const std::complex<double>* w = &rot_[static_cast<std::size_t>((k - 1) * D * D)];
        for (int i = 0; i < D; ++i) {
          const std::complex<double> e = z * w[i * D + a];
          if (u) (*u)[i] += ak * e.imag();
          if (g) (*g)(i, a) += ak * k * e.real();
        }
      }
    }
  }

  AnalyticField<D> as_field() const {
    auto self = std::make_shared<SyntheticSpectrumField>(*this);
    return {"synthetic", [self](const Vec<D>& x, Vec<D>* u, Mat<D>* g) { self->eval(x, u, g); }};
  }

 private:
  int k_max_;
  double exponent_;
  std::vector<double> amp_;
  std::vector<double> phase_;
  std::vector<std::complex<double>> rot_;
};

/// N i.i.d. uniform positions in the box; reproducible for a fixed seed.
template <int D>
ParticleCloud<D> seed_uniform(std::size_t n, const Domain<D>& domain, std::uint64_t seed) {
  domain.validate();
  if (n < static_cast<std::size_t>(D + 1))
    throw ConfigError("need at least " + std::to_string(D + 1) + " particles, got " + std::to_string(n));
  auto rng = make_rng(seed, Stream::positions);
  ParticleCloud<D> c;
  c.positions.resize(n);
  for (auto& x : c.positions)
    for (int i = 0; i < D; ++i) x[i] = domain.lower[i] + domain.extent[i] * uniform01(rng);
  return c;
}

/// Copy of `cloud` with velocities u(x_p).
template <int D>
ParticleCloud<D> sample_field(const AnalyticField<D>& field, const ParticleCloud<D>& cloud) {
  ParticleCloud<D> out;
  out.positions = cloud.positions;
  out.velocities.resize(cloud.size());
  parallel_for(cloud.size(), [&](std::size_t i) { field.eval(cloud.positions[i], &out.velocities[i], nullptr); });
  return out;
}

/// Exact velocity gradients at the particle positions.
template <int D>
std::vector<Mat<D>> exact_gradients(const AnalyticField<D>& field, std::span<const Vec<D>> x) {
  std::vector<Mat<D>> g(x.size());
  parallel_for(x.size(), [&](std::size_t i) { field.eval(x[i], nullptr, &g[i]); });
  return g;
}

/// Explicit Euler step x + dt v of a cloud with velocities, wrapped into the box.
template <int D>
TimePair<D> advect_euler(const ParticleCloud<D>& cloud, double dt, const Domain<D>& domain,
                         RetessellationMode mode = RetessellationMode::frozen_connectivity) {
  if (!cloud.has_velocities()) throw ConfigError("cloud has no velocities to advect");
  TimePair<D> tp;
  tp.domain = domain;
  tp.before = cloud;
  tp.dt = dt;
  tp.mode = mode;
  tp.after.resize(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i)
    tp.after[i] = domain.wrap(cloud.positions[i] + dt * cloud.velocities[i]);
  tp.validate();
  return tp;
}

/// Inertial particles relaxing towards the carrier velocity with time constant tau_p.
template <int D>
struct InertialState {
  std::vector<Vec<D>> positions;
  std::vector<Vec<D>> velocities;
  double tau_p = 1.0;
  double time = 0.0;

  /// Stokes number for a given Kolmogorov time.
  double stokes(double tau_eta) const { return tau_p / tau_eta; }
};

template <int D>
struct InertialTrajectory {
  std::vector<InertialState<D>> states;  ///< initial state followed by one entry per step
  bool unstable_step = false;            ///< dt > tau_p / 2
};

/// Explicit Euler for dx/dt = v, dv/dt = -(v - u(x)) / tau_p, with periodic wrap.
template <int D>
InertialTrajectory<D> integrate_inertial(const InertialState<D>& start, const AnalyticField<D>& carrier,
                                         const Domain<D>& domain, double dt, int steps) {
  if (!(start.tau_p > 0.0)) throw ConfigError("relaxation time must be positive");
  if (!(dt > 0.0) || steps < 0) throw ConfigError("time step must be positive and step count non-negative");
  if (start.positions.size() != start.velocities.size())
    throw ConfigError("inertial state has mismatched position and velocity counts");
  InertialTrajectory<D> tr;
  tr.unstable_step = dt > 0.5 * start.tau_p;
  tr.states.reserve(static_cast<std::size_t>(steps) + 1);
  tr.states.push_back(start);
  for (int n = 0; n < steps; ++n) {
    const InertialState<D>& s = tr.states.back();
    InertialState<D> next;
    next.tau_p = s.tau_p;
    next.time = s.time + dt;
    next.positions.resize(s.positions.size());
    next.velocities.resize(s.positions.size());
    parallel_for(s.positions.size(), [&](std::size_t i) {
      const Vec<D> u = carrier.velocity(s.positions[i]);
      next.positions[i] = domain.wrap(s.positions[i] + dt * s.velocities[i]);
      next.velocities[i] = s.velocities[i] - (dt / s.tau_p) * (s.velocities[i] - u);
    });
    tr.states.push_back(std::move(next));
  }
  return tr;
}

}  // namespace tessdiff
