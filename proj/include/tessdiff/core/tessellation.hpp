#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "tessdiff/core/delaunay_kernel.hpp"
#include "tessdiff/core/domain.hpp"
#include "tessdiff/core/predicates.hpp"
#include "tessdiff/core/vec.hpp"
#include "tessdiff/errors.hpp"

namespace tessdiff {

/// Connectivity shared between a tessellation and its frozen-connectivity copies.
template <int D>
struct TessellationTopology {
  Domain<D> domain;
  int n_primary = 0;
  double margin = 0.0;
  std::vector<int> ghost_primary;                 ///< indexed by (vertex - n_primary)
  std::vector<std::array<int, D>> ghost_shift;    ///< lattice shift of each ghost copy
  std::vector<std::array<int, D + 1>> simplices;  ///< positively oriented at build time
  std::vector<std::array<int, D + 1>> neighbors;  ///< -1 across the hull
  std::vector<std::uint8_t> owned;
  std::vector<int> incidence_offset;              ///< CSR over primary particles
  std::vector<int> incidence;                     ///< ring-ordered in 2D when the ring closes
  std::vector<std::uint8_t> closed;               ///< primary star is a closed neighbourhood
  std::size_t below_volume_floor = 0;
};

/// Delaunay tessellation of a particle cloud, with ghost copies across periodic faces.
///
/// Vertices [0, N) are the particles themselves; vertices >= N are ghost copies
/// `position(primary) + shift * extent`. Every simplex incident to a particle is
/// a simplex of the periodic Delaunay tessellation, and its coordinates are the
/// unwrapped (ghost) coordinates, so measures can be taken directly.
template <int D>
class Tessellation {
 public:
  static constexpr int kV = D + 1;

  Tessellation(std::shared_ptr<const TessellationTopology<D>> topo, std::vector<Vec<D>> points)
      : topo_(std::move(topo)), points_(std::move(points)) {}

  const Domain<D>& domain() const noexcept { return topo_->domain; }
  int num_particles() const noexcept { return topo_->n_primary; }
  int num_points() const noexcept { return static_cast<int>(points_.size()); }
  std::span<const Vec<D>> points() const noexcept { return points_; }
  const Vec<D>& point(int v) const noexcept { return points_[static_cast<std::size_t>(v)]; }
  double margin() const noexcept { return topo_->margin; }

  int primary_of(int v) const noexcept {
    return v < topo_->n_primary ? v : topo_->ghost_primary[static_cast<std::size_t>(v - topo_->n_primary)];
  }
  std::array<int, D> shift_of(int v) const noexcept {
    if (v < topo_->n_primary) return {};
    return topo_->ghost_shift[static_cast<std::size_t>(v - topo_->n_primary)];
  }

  std::size_t num_simplices() const noexcept { return topo_->simplices.size(); }
  const std::array<int, D + 1>& simplex(std::size_t s) const noexcept { return topo_->simplices[s]; }
  const std::array<int, D + 1>& neighbors(std::size_t s) const noexcept { return topo_->neighbors[s]; }
  const std::vector<std::array<int, D + 1>>& simplices() const noexcept { return topo_->simplices; }
  bool owned(std::size_t s) const noexcept { return topo_->owned[s] != 0; }

  /// Simplices incident to particle p (ring-ordered counter-clockwise in 2D when closed).
  std::span<const int> incident(int p) const noexcept {
    const auto b = topo_->incidence_offset[static_cast<std::size_t>(p)];
    const auto e = topo_->incidence_offset[static_cast<std::size_t>(p) + 1];
    return {topo_->incidence.data() + b, static_cast<std::size_t>(e - b)};
  }
  /// False for particles on the hull of an open domain.
  bool closed(int p) const noexcept { return topo_->closed[static_cast<std::size_t>(p)] != 0; }
  std::size_t below_volume_floor() const noexcept { return topo_->below_volume_floor; }

  std::array<Vec<D>, D + 1> simplex_points(std::size_t s) const noexcept {
    std::array<Vec<D>, D + 1> p;
    for (int i = 0; i < kV; ++i) p[i] = point(topo_->simplices[s][i]);
    return p;
  }

  /// Ghost-extended coordinates for new particle positions (not wrapped; ghosts follow their primary).
  std::vector<Vec<D>> extend_positions(std::span<const Vec<D>> primary) const {
    if (primary.size() != static_cast<std::size_t>(topo_->n_primary))
      throw ConfigError("position count " + std::to_string(primary.size()) +
                        " does not match tessellation particle count " + std::to_string(topo_->n_primary));
    std::vector<Vec<D>> out(primary.begin(), primary.end());
    out.reserve(points_.size());
    for (std::size_t g = 0; g < topo_->ghost_primary.size(); ++g) {
      Vec<D> x = primary[static_cast<std::size_t>(topo_->ghost_primary[g])];
      for (int i = 0; i < D; ++i) x[i] += topo_->ghost_shift[g][i] * topo_->domain.extent[i];
      out.push_back(x);
    }
    return out;
  }

  /// Same connectivity, vertices moved to `primary` (frozen-connectivity mode).
  Tessellation with_positions(std::span<const Vec<D>> primary) const {
    return Tessellation(topo_, extend_positions(primary));
  }

  const std::shared_ptr<const TessellationTopology<D>>& topology() const noexcept { return topo_; }

 private:
  std::shared_ptr<const TessellationTopology<D>> topo_;
  std::vector<Vec<D>> points_;
};

struct BuildOptions {
  /// Ghost margin; <= 0 selects max(6 delta, L/16).
  double margin = 0.0;
  /// Doublings of the margin allowed before giving up.
  int max_margin_doublings = 6;
};

namespace detail {

template <int D>
void generate_ghosts(const Domain<D>& dom, std::span<const Vec<D>> prim, double m, std::vector<Vec<D>>& pts,
                     std::vector<int>& gp, std::vector<std::array<int, D>>& gs) {
  std::array<int, D> reach{};
  for (int i = 0; i < D; ++i) reach[i] = dom.periodic[i] ? static_cast<int>(std::ceil(m / dom.extent[i])) : 0;
  std::array<int, D> s{};
  const auto visit = [&](const auto& self, int axis) -> void {
    if (axis == D) {
      bool zero = true;
      for (int v : s) zero = zero && v == 0;
      if (zero) return;
      for (std::size_t p = 0; p < prim.size(); ++p) {
        Vec<D> x = prim[p];
        bool keep = true;
        for (int i = 0; i < D && keep; ++i) {
          x[i] += s[i] * dom.extent[i];
          if (dom.periodic[i]) keep = x[i] >= dom.lower[i] - m && x[i] < dom.lower[i] + dom.extent[i] + m;
        }
        if (!keep) continue;
        pts.push_back(x);
        gp.push_back(static_cast<int>(p));
        gs.push_back(s);
      }
      return;
    }
    for (int k = -reach[axis]; k <= reach[axis]; ++k) {
      s[axis] = k;
      self(self, axis + 1);
    }
  };
  visit(visit, 0);
}

/// Every particle's star must be determined by points inside the ghost layer.
template <int D>
bool margin_sufficient(const Domain<D>& dom, double m, int n_primary, const std::vector<Vec<D>>& pts,
                       const DelaunayResult<D>& dr) {
  for (std::size_t s = 0; s < dr.simplices.size(); ++s) {
    const auto& v = dr.simplices[s];
    bool touches = false;
    for (int x : v) touches = touches || x < n_primary;
    if (!touches) continue;
    std::array<Vec<D>, D + 1> p;
    for (int i = 0; i <= D; ++i) p[i] = pts[static_cast<std::size_t>(v[i])];
    const Vec<D> cc = circumcenter<D>(p);
    const double r = norm(cc - p[0]);
    if (!std::isfinite(r)) return false;
    for (int i = 0; i < D; ++i) {
      if (!dom.periodic[i]) continue;
      if (cc[i] - r <= dom.lower[i] - m || cc[i] + r >= dom.lower[i] + dom.extent[i] + m) return false;
    }
  }
  if (dom.fully_periodic())
    for (int p = 0; p < n_primary; ++p)
      if (dr.on_hull[static_cast<std::size_t>(p)]) return false;
  return true;
}

template <int D>
bool lexicographically_less(const std::array<int, D>& a, const std::array<int, D>& b) {
  return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end());
}

/// Orders the star of p counter-clockwise by rotating across shared edges; returns true if closed.
inline bool order_ring_2d(int p, std::vector<int>& star, const std::vector<std::array<int, 3>>& simp,
                          const std::vector<std::array<int, 3>>& nbr) {
  if (star.empty()) return false;
  const auto slot_of = [&](int s, int v) {
    for (int i = 0; i < 3; ++i)
      if (simp[static_cast<std::size_t>(s)][i] == v) return i;
    return -1;
  };
  // Counter-clockwise successor of s around p: across the edge (p, b) where (p, a, b) is ccw.
  const auto ccw_next = [&](int s) {
    const int i = slot_of(s, p);
    return nbr[static_cast<std::size_t>(s)][(i + 1) % 3];
  };
  const auto cw_next = [&](int s) {
    const int i = slot_of(s, p);
    return nbr[static_cast<std::size_t>(s)][(i + 2) % 3];
  };
  int first = star.front();
  // Rewind clockwise to the hull edge (if any).
  for (std::size_t guard = 0; guard <= star.size(); ++guard) {
    const int prev = cw_next(first);
    if (prev < 0 || prev == star.front()) break;
    first = prev;
  }
  std::vector<int> ring;
  ring.reserve(star.size());
  int cur = first;
  bool closed = false;
  for (std::size_t guard = 0; guard <= star.size(); ++guard) {
    ring.push_back(cur);
    const int nx = ccw_next(cur);
    if (nx < 0) break;
    if (nx == first) {
      closed = true;
      break;
    }
    cur = nx;
  }
  if (ring.size() == star.size()) star = std::move(ring);
  else closed = false;
  return closed;
}

}  // namespace detail

/// Delaunay tessellation of `positions` in `domain` (periodic axes handled by ghost replication).
///
/// Throws GeometryError for fewer than d+1 points or affinely dependent input.
template <int D>
Tessellation<D> build_delaunay(std::span<const Vec<D>> positions, const Domain<D>& domain,
                               const BuildOptions& opt = {}) {
  domain.validate();
  const std::size_t n = positions.size();
  if (n < static_cast<std::size_t>(D + 1))
    throw GeometryError("too few points: need at least " + std::to_string(D + 1) + ", got " + std::to_string(n));

  std::vector<Vec<D>> prim(positions.begin(), positions.end());
  for (auto& x : prim) x = domain.wrap(x);

  double m = 0.0;
  if (domain.any_periodic()) {
    double lmin = domain.extent[0];
    for (int i = 1; i < D; ++i) lmin = std::min(lmin, domain.extent[i]);
    m = opt.margin > 0.0 ? opt.margin : std::max(6.0 * domain.mean_spacing(n), lmin / 16.0);
  }

  for (int attempt = 0;; ++attempt) {
    auto topo = std::make_shared<TessellationTopology<D>>();
    topo->domain = domain;
    topo->n_primary = static_cast<int>(n);
    topo->margin = m;
    std::vector<Vec<D>> pts = prim;
    if (domain.any_periodic()) detail::generate_ghosts<D>(domain, prim, m, pts, topo->ghost_primary, topo->ghost_shift);

    DelaunayResult<D> dr;
    {
      DelaunayKernel<D> kernel(pts);
      dr = kernel.result();
    }
    if (domain.any_periodic() && !detail::margin_sufficient<D>(domain, m, topo->n_primary, pts, dr)) {
      if (attempt >= opt.max_margin_doublings)
        throw InvariantViolation("ghost-margin", "periodic neighbourhoods not resolved with margin " +
                                                     std::to_string(m));
      m *= 2.0;
      continue;
    }

    // Keep simplices that touch a particle, plus one layer for point location.
    const int np = topo->n_primary;
    std::vector<std::uint8_t> keep(dr.simplices.size(), 0);
    for (std::size_t s = 0; s < dr.simplices.size(); ++s)
      for (int v : dr.simplices[s])
        if (v < np) keep[s] = 1;
    std::vector<std::uint8_t> keep2 = keep;
    for (std::size_t s = 0; s < dr.simplices.size(); ++s)
      if (keep[s])
        for (int nb : dr.neighbors[s])
          if (nb >= 0) keep2[static_cast<std::size_t>(nb)] = 1;
    std::vector<int> remap(dr.simplices.size(), -1);
    int count = 0;
    for (std::size_t s = 0; s < dr.simplices.size(); ++s)
      if (keep2[s]) remap[s] = count++;
    topo->simplices.reserve(count);
    topo->neighbors.reserve(count);
    for (std::size_t s = 0; s < dr.simplices.size(); ++s) {
      if (!keep2[s]) continue;
      topo->simplices.push_back(dr.simplices[s]);
      std::array<int, D + 1> nb;
      for (int i = 0; i <= D; ++i) nb[i] = dr.neighbors[s][i] < 0 ? -1 : remap[dr.neighbors[s][i]];
      topo->neighbors.push_back(nb);
    }
    dr = {};

    // Ownership: the representative vertex (smallest particle id, then smallest shift) is an original.
    topo->owned.assign(topo->simplices.size(), 0);
    const double floor = 1e-14 * domain.volume() / static_cast<double>(n);
    for (std::size_t s = 0; s < topo->simplices.size(); ++s) {
      int best = -1;
      std::array<int, D> best_shift{};
      for (int v : topo->simplices[s]) {
        const int pv = v < np ? v : topo->ghost_primary[static_cast<std::size_t>(v - np)];
        const std::array<int, D> sh = v < np ? std::array<int, D>{} : topo->ghost_shift[static_cast<std::size_t>(v - np)];
        if (best < 0 || pv < best || (pv == best && detail::lexicographically_less<D>(sh, best_shift))) {
          best = pv;
          best_shift = sh;
        }
      }
      bool zero = true;
      for (int x : best_shift) zero = zero && x == 0;
      topo->owned[s] = zero ? 1 : 0;
      std::array<Vec<D>, D + 1> p;
      for (int i = 0; i <= D; ++i) p[i] = pts[static_cast<std::size_t>(topo->simplices[s][i])];
      if (zero && simplex_volume<D>(p) < floor) ++topo->below_volume_floor;
    }

    // Particle -> incident simplices.
    topo->incidence_offset.assign(static_cast<std::size_t>(np) + 1, 0);
    for (const auto& sv : topo->simplices)
      for (int v : sv)
        if (v < np) ++topo->incidence_offset[static_cast<std::size_t>(v) + 1];
    for (int p = 0; p < np; ++p) topo->incidence_offset[p + 1] += topo->incidence_offset[p];
    topo->incidence.resize(static_cast<std::size_t>(topo->incidence_offset[np]));
    {
      std::vector<int> fill(topo->incidence_offset.begin(), topo->incidence_offset.end() - 1);
      for (std::size_t s = 0; s < topo->simplices.size(); ++s)
        for (int v : topo->simplices[s])
          if (v < np) topo->incidence[static_cast<std::size_t>(fill[v]++)] = static_cast<int>(s);
    }
    topo->closed.assign(static_cast<std::size_t>(np), 1);
    for (int p = 0; p < np; ++p) {
      const auto b = topo->incidence.begin() + topo->incidence_offset[p];
      const auto e = topo->incidence.begin() + topo->incidence_offset[p + 1];
      if constexpr (D == 2) {
        std::vector<int> star(b, e);
        const bool closed = detail::order_ring_2d(p, star, topo->simplices, topo->neighbors);
        std::copy(star.begin(), star.end(), b);
        topo->closed[p] = closed ? 1 : 0;
      }
    }
    if constexpr (D == 3) {
      // p is on the hull when one of its simplices has a hull facet containing p.
      for (int p = 0; p < np; ++p) {
        bool on_hull = false;
        for (int k = topo->incidence_offset[p]; k < topo->incidence_offset[p + 1]; ++k) {
          const auto s = static_cast<std::size_t>(topo->incidence[static_cast<std::size_t>(k)]);
          for (int i = 0; i < 4; ++i)
            if (topo->neighbors[s][i] < 0 && topo->simplices[s][i] != p) on_hull = true;
        }
        topo->closed[p] = on_hull ? 0 : 1;
      }
    }
    return Tessellation<D>(std::move(topo), std::move(pts));
  }
}

template <int D>
Tessellation<D> build_delaunay(const ParticleCloud<D>& cloud, const Domain<D>& domain, const BuildOptions& opt = {}) {
  return build_delaunay<D>(std::span<const Vec<D>>(cloud.positions), domain, opt);
}

/// Per-simplex volume, centroid and circumcenter.
template <int D>
struct SimplexMeasures {
  std::vector<double> volume;
  std::vector<Vec<D>> centroid;
  std::vector<Vec<D>> circumcenter;
  std::vector<std::uint8_t> near_degenerate;  ///< circumradius / shortest edge above the threshold
};

inline constexpr double kNearDegenerateRatio = 1e3;

template <int D>
SimplexMeasures<D> simplex_measures(const Tessellation<D>& tess, double ratio_threshold = kNearDegenerateRatio) {
  SimplexMeasures<D> m;
  const std::size_t ns = tess.num_simplices();
  m.volume.resize(ns);
  m.centroid.resize(ns);
  m.circumcenter.resize(ns);
  m.near_degenerate.assign(ns, 0);
  for (std::size_t s = 0; s < ns; ++s) {
    const auto p = tess.simplex_points(s);
    m.volume[s] = simplex_volume<D>(p);
    m.centroid[s] = centroid<D>(p);
    m.circumcenter[s] = circumcenter<D>(p);
    double shortest = INFINITY;
    for (int i = 0; i <= D; ++i)
      for (int j = i + 1; j <= D; ++j) shortest = std::min(shortest, norm(p[i] - p[j]));
    const double r = norm(m.circumcenter[s] - p[0]);
    if (!(r / shortest <= ratio_threshold)) m.near_degenerate[s] = 1;
  }
  return m;
}

}  // namespace tessdiff
