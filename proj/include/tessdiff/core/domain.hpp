#pragma once

#include <array>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "tessdiff/core/vec.hpp"
#include "tessdiff/errors.hpp"

namespace tessdiff {

/// Axis-aligned box, periodic or open along each axis.
template <int D>
struct Domain {
  Vec<D> lower{};
  Vec<D> extent{};
  std::array<bool, D> periodic{};

  /// Fully periodic cube [0, L)^d; the default L is 2*pi.
  static Domain periodic_box(double length = 2.0 * std::numbers::pi) {
    Domain d;
    for (int i = 0; i < D; ++i) {
      d.extent[i] = length;
      d.periodic[i] = true;
    }
    d.validate();
    return d;
  }

  /// Open box with the given corner and edge length (points may also lie outside it).
  static Domain open_box(double length = 1.0, Vec<D> corner = {}) {
    Domain d;
    d.lower = corner;
    for (int i = 0; i < D; ++i) d.extent[i] = length;
    d.validate();
    return d;
  }

  void validate() const {
    for (int i = 0; i < D; ++i)
      if (!(extent[i] > 0.0) || !std::isfinite(extent[i]))
        throw ConfigError("domain edge length must be positive, got " + std::to_string(extent[i]));
  }

  bool any_periodic() const {
    for (bool p : periodic)
      if (p) return true;
    return false;
  }
  bool fully_periodic() const {
    for (bool p : periodic)
      if (!p) return false;
    return true;
  }

  double volume() const {
    double v = 1.0;
    for (int i = 0; i < D; ++i) v *= extent[i];
    return v;
  }

  /// Mean particle distance (V/N)^(1/d); equals 2*pi / N^(1/d) for the 2*pi box.
  double mean_spacing(std::size_t n) const {
    return std::pow(volume() / static_cast<double>(n), 1.0 / D);
  }

  /// Reduces periodic coordinates into [lower, lower + extent).
  Vec<D> wrap(Vec<D> x) const {
    for (int i = 0; i < D; ++i) {
      if (!periodic[i]) continue;
      double t = std::fmod(x[i] - lower[i], extent[i]);
      if (t < 0.0) t += extent[i];
      if (t >= extent[i]) t = 0.0;
      x[i] = lower[i] + t;
    }
    return x;
  }

  /// Shortest periodic representative of a displacement.
  Vec<D> minimum_image(Vec<D> dx) const {
    for (int i = 0; i < D; ++i)
      if (periodic[i]) dx[i] -= extent[i] * std::nearbyint(dx[i] / extent[i]);
    return dx;
  }
};

/// One snapshot of N particles: positions and (optionally) velocities.
template <int D>
struct ParticleCloud {
  std::vector<Vec<D>> positions;
  std::vector<Vec<D>> velocities;

  std::size_t size() const noexcept { return positions.size(); }
  bool has_velocities() const noexcept { return velocities.size() == positions.size(); }

  /// Mean particle distance in `domain`, recomputed from the current count.
  double delta(const Domain<D>& domain) const { return domain.mean_spacing(size()); }

  void check_consistent() const {
    if (!velocities.empty() && velocities.size() != positions.size())
      throw ConfigError("cloud has " + std::to_string(positions.size()) + " positions but " +
                        std::to_string(velocities.size()) + " velocities");
  }
};

}  // namespace tessdiff
