#pragma once

#include <fftw3.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tessdiff/core/domain.hpp"
#include "tessdiff/errors.hpp"

namespace tessdiff {

// ---------------------------------------------------------------------------
// Error metrics and correlation

namespace detail {

inline void check_lengths(std::size_t a, std::size_t b, std::span<const std::uint8_t> valid) {
  if (a != b) throw ConfigError("length mismatch: " + std::to_string(a) + " vs " + std::to_string(b));
  if (!valid.empty() && valid.size() != a)
    throw ConfigError("validity mask length " + std::to_string(valid.size()) + " does not match " + std::to_string(a));
}

inline bool use(std::span<const std::uint8_t> valid, std::size_t i) { return valid.empty() || valid[i] != 0; }

}  // namespace detail

/// Root-mean-square difference over valid entries.
inline double rms_error(std::span<const double> computed, std::span<const double> exact,
                        std::span<const std::uint8_t> valid = {}) {
  detail::check_lengths(computed.size(), exact.size(), valid);
  double s = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < computed.size(); ++i) {
    if (!detail::use(valid, i)) continue;
    s += (computed[i] - exact[i]) * (computed[i] - exact[i]);
    ++n;
  }
  return n ? std::sqrt(s / static_cast<double>(n)) : std::numeric_limits<double>::quiet_NaN();
}

/// RMS difference normalized by the RMS of the exact values (absolute RMS if the exact field is zero).
inline double l2_error(std::span<const double> computed, std::span<const double> exact,
                       std::span<const std::uint8_t> valid = {}) {
  detail::check_lengths(computed.size(), exact.size(), valid);
  double num = 0.0, den = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < computed.size(); ++i) {
    if (!detail::use(valid, i)) continue;
    num += (computed[i] - exact[i]) * (computed[i] - exact[i]);
    den += exact[i] * exact[i];
    ++n;
  }
  if (n == 0) return std::numeric_limits<double>::quiet_NaN();
  return den > 0.0 ? std::sqrt(num / den) : std::sqrt(num / static_cast<double>(n));
}

/// Pearson correlation coefficient over valid entries (NaN when either side is constant).
inline double pearson(std::span<const double> a, std::span<const double> b, std::span<const std::uint8_t> valid = {}) {
  detail::check_lengths(a.size(), b.size(), valid);
  double ma = 0.0, mb = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (detail::use(valid, i)) {
      ma += a[i];
      mb += b[i];
      ++n;
    }
  if (n < 2) return std::numeric_limits<double>::quiet_NaN();
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double sab = 0.0, saa = 0.0, sbb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!detail::use(valid, i)) continue;
    const double x = a[i] - ma, y = b[i] - mb;
    sab += x * y;
    saa += x * x;
    sbb += y * y;
  }
  if (!(saa > 0.0) || !(sbb > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

// ---------------------------------------------------------------------------
// Log-log slope fitting

struct ScaleError {
  double scale;
  double error;
};

/// Selection of the points entering a log-log fit.
struct SlopeWindow {
  /// Explicit scale range (inclusive); when unset, the pre-plateau rule is used.
  std::optional<double> scale_min, scale_max;
  /// Pre-plateau rule: keep points whose error is at least this multiple of the smallest error.
  double plateau_factor = 3.0;
};

struct LogLogFit {
  double slope = std::numeric_limits<double>::quiet_NaN();
  double intercept = std::numeric_limits<double>::quiet_NaN();
  std::vector<std::size_t> used;  ///< indices of the fitted points
};

/// Least-squares slope of log(error) against log(scale) over the selected window.
inline LogLogFit fit_loglog_slope(std::span<const ScaleError> pts, const SlopeWindow& w = {}) {
  LogLogFit fit;
  double emin = std::numeric_limits<double>::infinity();
  for (const auto& p : pts)
    if (p.error > 0.0 && std::isfinite(p.error)) emin = std::min(emin, p.error);
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const auto& p = pts[i];
    if (!(p.error > 0.0) || !(p.scale > 0.0) || !std::isfinite(p.error)) continue;
    if (w.scale_min || w.scale_max) {
      if (w.scale_min && p.scale < *w.scale_min) continue;
      if (w.scale_max && p.scale > *w.scale_max) continue;
    } else if (p.error < w.plateau_factor * emin) {
      continue;
    }
    fit.used.push_back(i);
  }
  if (fit.used.size() < 2) return fit;
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (auto i : fit.used) {
    const double x = std::log(pts[i].scale), y = std::log(pts[i].error);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const double n = static_cast<double>(fit.used.size());
  fit.slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
  fit.intercept = (sy - fit.slope * sx) / n;
  return fit;
}

// ---------------------------------------------------------------------------
// PDFs and moments

struct BinSpec {
  int bins = 401;
  double sigmas = 10.0;              ///< half-width in standard deviations around the mean
  std::optional<double> lo, hi;      ///< explicit range overrides the sigma rule
};

struct Histogram {
  std::vector<double> edges;    ///< bins + 1 edges
  std::vector<double> centers;
  std::vector<std::size_t> counts;
  std::vector<double> density;  ///< count / (total * width), total includes out-of-range samples
  std::vector<double> log10_density;  ///< -inf for empty bins
  std::size_t total = 0;
  std::size_t outside = 0;
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  ///< population variance
  double skewness = 0.0;
  double flatness = 0.0;  ///< fourth central moment over variance squared
  std::size_t count = 0;
};

inline Moments moments(std::span<const double> v, std::span<const std::uint8_t> valid = {}) {
  detail::check_lengths(v.size(), v.size(), valid);
  Moments m;
  double s = 0.0;
  for (std::size_t i = 0; i < v.size(); ++i)
    if (detail::use(valid, i)) {
      s += v[i];
      ++m.count;
    }
  if (m.count == 0) return m;
  m.mean = s / static_cast<double>(m.count);
  double m2 = 0, m3 = 0, m4 = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!detail::use(valid, i)) continue;
    const double d = v[i] - m.mean, d2 = d * d;
    m2 += d2;
    m3 += d2 * d;
    m4 += d2 * d2;
  }
  const double n = static_cast<double>(m.count);
  m.variance = m2 / n;
  m.skewness = m.variance > 0 ? (m3 / n) / std::pow(m.variance, 1.5) : std::numeric_limits<double>::quiet_NaN();
  m.flatness = m.variance > 0 ? (m4 / n) / (m.variance * m.variance) : std::numeric_limits<double>::quiet_NaN();
  return m;
}

/// Normalized histogram; by default 401 uniform bins over mean +- 10 standard deviations.
inline Histogram pdf(std::span<const double> v, const BinSpec& spec = {}, std::span<const std::uint8_t> valid = {}) {
  if (spec.bins < 1) throw ConfigError("pdf needs at least one bin");
  const Moments m = moments(v, valid);
  double lo, hi;
  if (spec.lo && spec.hi) {
    lo = *spec.lo;
    hi = *spec.hi;
  } else {
    const double sd = std::sqrt(m.variance);
    const double half = sd > 0.0 ? spec.sigmas * sd : 0.5 * std::max(1.0, std::fabs(m.mean));
    lo = m.mean - half;
    hi = m.mean + half;
  }
  if (!(hi > lo)) throw ConfigError("pdf range is empty");
  Histogram h;
  const auto nb = static_cast<std::size_t>(spec.bins);
  const double width = (hi - lo) / spec.bins;
  h.edges.resize(nb + 1);
  for (std::size_t i = 0; i <= nb; ++i) h.edges[i] = lo + width * static_cast<double>(i);
  h.edges[nb] = hi;
  h.centers.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) h.centers[i] = 0.5 * (h.edges[i] + h.edges[i + 1]);
  h.counts.assign(nb, 0);
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (!detail::use(valid, i)) continue;
    ++h.total;
    const double x = v[i];
    if (!(x >= lo && x <= hi)) {
      ++h.outside;
      continue;
    }
    auto b = static_cast<std::size_t>((x - lo) / width);
    if (b >= nb) b = nb - 1;
    ++h.counts[b];
  }
  h.density.resize(nb);
  h.log10_density.resize(nb);
  for (std::size_t i = 0; i < nb; ++i) {
    h.density[i] = h.total ? static_cast<double>(h.counts[i]) / (static_cast<double>(h.total) * width) : 0.0;
    h.log10_density[i] = h.counts[i] ? std::log10(h.density[i]) : -std::numeric_limits<double>::infinity();
  }
  return h;
}

/// Kolmogorov time nu^{1/2} eps^{-1/2}; 1 when either is missing.
inline double kolmogorov_time(std::optional<double> nu, std::optional<double> eps) {
  if (!nu || !eps || !(*nu > 0.0) || !(*eps > 0.0)) return 1.0;
  return std::sqrt(*nu / *eps);
}

// ---------------------------------------------------------------------------
// Grid projection and spectra

/// Scalar field on an M^d equidistant periodic grid (x-major: index = (i0 * M + i1) [* M + i2]).
template <int D>
struct GridField {
  int m = 0;
  std::vector<double> values;
  std::vector<std::size_t> counts;  ///< particles averaged into each cell; 0 marks a missing (zero-filled) cell

  std::size_t cells() const noexcept { return values.size(); }
  std::size_t empty_cells() const noexcept {
    return static_cast<std::size_t>(std::count(counts.begin(), counts.end(), std::size_t{0}));
  }
};

/// Box-kernel projection: each cell holds the mean of the valid particle values inside it.
/// Empty cells are zero-filled, which biases the spectrum low by about the empty fraction.
template <int D>
GridField<D> project_box(std::span<const Vec<D>> positions, std::span<const double> values, const Domain<D>& domain,
                         int m, std::span<const std::uint8_t> valid = {}) {
  detail::check_lengths(positions.size(), values.size(), valid);
  if (m < 1) throw ConfigError("grid size must be positive");
  GridField<D> g;
  g.m = m;
  std::size_t cells = 1;
  for (int i = 0; i < D; ++i) cells *= static_cast<std::size_t>(m);
  g.values.assign(cells, 0.0);
  g.counts.assign(cells, 0);
  for (std::size_t p = 0; p < positions.size(); ++p) {
    if (!detail::use(valid, p)) continue;
    const Vec<D> x = domain.wrap(positions[p]);
    std::size_t idx = 0;
    for (int i = 0; i < D; ++i) {
      int c = static_cast<int>(std::floor((x[i] - domain.lower[i]) / domain.extent[i] * m));
      c = std::clamp(c, 0, m - 1);
      idx = idx * static_cast<std::size_t>(m) + static_cast<std::size_t>(c);
    }
    g.values[idx] += values[p];
    ++g.counts[idx];
  }
  for (std::size_t c = 0; c < cells; ++c)
    if (g.counts[c]) g.values[c] /= static_cast<double>(g.counts[c]);
  return g;
}

enum class SpectrumKind {
  energy,     ///< sum over the given grids of |f_k|^2
  enstrophy,  ///< grids are velocity components; |k x u_k|^2
};

struct SpectrumResult {
  std::vector<int> k;         ///< integer shell index, |k| in [k - 1/2, k + 1/2)
  std::vector<double> e;      ///< shell-summed spectral density
  std::vector<std::size_t> modes;  ///< lattice modes per shell
  int grid = 0;
  int dimension = 0;
  double poisson_coefficient = 0.0;
  bool noise_removed = false;
  std::vector<std::uint8_t> clipped;  ///< shells set to zero after noise subtraction

  double total() const { return std::accumulate(e.begin(), e.end(), 0.0); }
};

namespace detail {

inline std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

// Forward r2c transform normalized by the cell count, so sum |F_k|^2 over all k = mean f^2.
template <int D>
std::vector<std::complex<double>> forward_fft(const GridField<D>& g) {
  const int m = g.m;
  const int half = m / 2 + 1;
  std::size_t out_size = static_cast<std::size_t>(half);
  for (int i = 1; i < D; ++i) out_size *= static_cast<std::size_t>(m);
  std::vector<double> in(g.values);
  std::vector<std::complex<double>> out(out_size);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    if constexpr (D == 2) {
      plan = fftw_plan_dft_r2c_2d(m, m, in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    } else {
      plan = fftw_plan_dft_r2c_3d(m, m, m, in.data(), reinterpret_cast<fftw_complex*>(out.data()), FFTW_ESTIMATE);
    }
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
  }
  const double scale = 1.0 / static_cast<double>(g.values.size());
  for (auto& c : out) c *= scale;
  return out;
}

inline int wavenumber(int i, int m) { return i <= m / 2 ? i : i - m; }

}  // namespace detail

/// Shell-summed spectrum of one or more periodic grids (all of the same size).
/// Normalization: sum over all shells of E(k) equals the grid mean of sum_c f_c^2
/// (so sin(4x) with amplitude a contributes a^2/2 in shell 4).
template <int D>
SpectrumResult spectrum(std::span<const GridField<D>> grids, SpectrumKind kind = SpectrumKind::energy) {
  if (grids.empty()) throw ConfigError("spectrum needs at least one grid");
  const int m = grids[0].m;
  for (const auto& g : grids)
    if (g.m != m) throw ConfigError("spectrum grids differ in size");
  if (kind == SpectrumKind::enstrophy && static_cast<int>(grids.size()) != D)
    throw ConfigError("enstrophy spectrum needs one velocity grid per dimension");
  const int half = m / 2 + 1;
  const int kmax_shell = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(D)) * (m / 2))) + 1;
  SpectrumResult r;
  r.grid = m;
  r.dimension = D;
  r.k.resize(static_cast<std::size_t>(kmax_shell) + 1);
  std::iota(r.k.begin(), r.k.end(), 0);
  r.e.assign(r.k.size(), 0.0);
  r.modes.assign(r.k.size(), 0);

  std::vector<std::vector<std::complex<double>>> f;
  for (const auto& g : grids) f.push_back(detail::forward_fft<D>(g));

  for (int i0 = 0; i0 < m; ++i0)
    for (int i1 = 0; i1 < (D == 3 ? m : half); ++i1)
      for (int i2 = 0; i2 < (D == 3 ? half : 1); ++i2) {
        // Last axis is the half-spectrum axis; its interior modes stand for two conjugate modes.
        const int last = D == 3 ? i2 : i1;
        const double weight = (last == 0 || (m % 2 == 0 && last == m / 2)) ? 1.0 : 2.0;
        std::array<int, 3> kv{detail::wavenumber(i0, m), D == 3 ? detail::wavenumber(i1, m) : last, D == 3 ? last : 0};
        const std::size_t idx = D == 3 ? (static_cast<std::size_t>(i0) * m + i1) * half + i2
                                       : static_cast<std::size_t>(i0) * half + i1;
        double k2 = 0.0;
        for (int a = 0; a < D; ++a) k2 += static_cast<double>(kv[a]) * kv[a];
        const auto shell = static_cast<std::size_t>(std::floor(std::sqrt(k2) + 0.5));
        double amp = 0.0;
        if (kind == SpectrumKind::energy) {
          for (const auto& fc : f) amp += std::norm(fc[idx]);
        } else if constexpr (D == 2) {
          amp = std::norm(static_cast<double>(kv[0]) * f[1][idx] - static_cast<double>(kv[1]) * f[0][idx]);
        } else {
          for (int c = 0; c < 3; ++c) {
            const int a = (c + 1) % 3, b = (c + 2) % 3;
            amp += std::norm(static_cast<double>(kv[a]) * f[b][idx] - static_cast<double>(kv[b]) * f[a][idx]);
          }
        }
        r.e[shell] += weight * amp;
        r.modes[shell] += static_cast<std::size_t>(weight);
      }
  r.clipped.assign(r.e.size(), 0);
  return r;
}

template <int D>
SpectrumResult spectrum(const GridField<D>& grid) {
  return spectrum<D>(std::span<const GridField<D>>(&grid, 1), SpectrumKind::energy);
}

struct FitBand {
  double k_lo = 0.0;  ///< 0 selects 0.7 * M/2
  double k_hi = 0.0;  ///< 0 selects M/2
};

/// Subtracts the particle-noise floor C_N k^{d-1} (C_N k^2 in 3D), with C_N fitted by least squares on
/// the band. Negative shells are clipped to zero and flagged.
inline SpectrumResult remove_poisson_noise(const SpectrumResult& in, FitBand band = {}) {
  const double kg = in.grid / 2;
  const double lo = band.k_lo > 0.0 ? band.k_lo : 0.7 * kg;
  const double hi = band.k_hi > 0.0 ? band.k_hi : kg;
  const int p = in.dimension - 1;
  double num = 0.0, den = 0.0;
  int shells = 0;
  for (std::size_t i = 0; i < in.k.size(); ++i) {
    const double k = in.k[i];
    if (k < lo || k > hi || k == 0) continue;
    const double b = std::pow(k, p);
    num += in.e[i] * b;
    den += b * b;
    ++shells;
  }
  if (shells < 5)
    throw ConfigError("noise fit band too narrow: " + std::to_string(shells) + " shells in [" + std::to_string(lo) +
                      ", " + std::to_string(hi) + "], need at least 5");
  SpectrumResult out = in;
  out.poisson_coefficient = num / den;
  out.noise_removed = true;
  out.clipped.assign(in.e.size(), 0);
  for (std::size_t i = 0; i < out.e.size(); ++i) {
    if (out.k[i] == 0) continue;
    out.e[i] -= out.poisson_coefficient * std::pow(static_cast<double>(out.k[i]), p);
    if (out.e[i] < 0.0) {
      out.e[i] = 0.0;
      out.clipped[i] = 1;
    }
  }
  return out;
}

}  // namespace tessdiff
