#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "tessdiff/core/tessellation.hpp"
#include "tessdiff/errors.hpp"
#include "tessdiff/parallel.hpp"

namespace tessdiff {

/// How a particle's dual cell is built from its incident simplices.
enum class DualKind {
  classic_circumcenter,  ///< Voronoi cell: vertices at circumcenters
  modified_centroid,     ///< vertices at simplex centroids (3D: centroid polyhedron)
  incident_simplex_sum,  ///< sum of incident simplex volumes
};

inline std::string_view to_string(DualKind k) {
  switch (k) {
    case DualKind::classic_circumcenter: return "classic_circumcenter";
    case DualKind::modified_centroid: return "modified_centroid";
    case DualKind::incident_simplex_sum: return "incident_simplex_sum";
  }
  return "?";
}

inline DualKind parse_dual_kind(std::string_view s) {
  if (s == "classic_circumcenter" || s == "classic") return DualKind::classic_circumcenter;
  if (s == "modified_centroid" || s == "modified") return DualKind::modified_centroid;
  if (s == "incident_simplex_sum") return DualKind::incident_simplex_sum;
  throw ConfigError("unknown dual kind '" + std::string(s) + "'");
}

/// The modified-cell default: centroid polygon in 2D, incident-simplex sum in 3D.
template <int D>
constexpr DualKind default_modified_kind() {
  return D == 2 ? DualKind::modified_centroid : DualKind::incident_simplex_sum;
}

/// Per-particle dual-cell volumes at one configuration.
template <int D>
struct DualCellField {
  DualKind kind = DualKind::modified_centroid;
  std::vector<double> volume;
  std::vector<std::uint8_t> valid;
  std::shared_ptr<const TessellationTopology<D>> tessellation;

  std::size_t size() const noexcept { return volume.size(); }
  std::size_t num_valid() const noexcept {
    std::size_t n = 0;
    for (auto v : valid) n += v;
    return n;
  }
};

namespace detail {

// Vertex slots of a positively oriented simplex listed so that (v_k, a, b, c) stays positive.
inline constexpr std::array<std::array<int, 3>, 4> kPositiveOpposite{{{1, 2, 3}, {0, 3, 2}, {0, 1, 3}, {0, 2, 1}}};

inline double tet_volume(const Vec3& p, const Vec3& a, const Vec3& b, const Vec3& c) {
  return dot(cross(a - p, b - p), c - p) / 6.0;
}

inline int slot_in(const std::array<int, 4>& s, int v) {
  for (int i = 0; i < 4; ++i)
    if (s[i] == v) return i;
  return -1;
}

// Classic or centroid polygon area as the shoelace over the ring-ordered simplex points.
inline double ring_area(const Tessellation<2>& t, int p, const std::vector<Vec2>& vertex) {
  const auto ring = t.incident(p);
  const Vec2& x = t.point(p);
  double a = 0.0;
  for (std::size_t i = 0; i < ring.size(); ++i) {
    const Vec2 u = vertex[static_cast<std::size_t>(ring[i])] - x;
    const Vec2 w = vertex[static_cast<std::size_t>(ring[(i + 1) % ring.size()])] - x;
    a += cross(u, w);
  }
  return 0.5 * a;
}

// Signed pyramid decomposition of the 3D dual cell inside each incident tetrahedron.
// For every edge (p, a) and face (p, a, b) of tet T, the pieces (p, e_pa, f_pab, c_T) and
// (p, f_pab, e_pb, c_T) are summed; the choice of e, f, c selects the dual.
template <class EdgePoint, class FacePoint>
double pyramid_sum_3d(const Tessellation<3>& t, int p, const std::vector<Vec3>& cell_point, EdgePoint&& edge_point,
                      FacePoint&& face_point) {
  const Vec3& x = t.point(p);
  double vol = 0.0;
  for (int s : t.incident(p)) {
    const auto& v = t.simplex(static_cast<std::size_t>(s));
    const int k = slot_in(v, p);
    const auto& o = kPositiveOpposite[static_cast<std::size_t>(k)];
    const Vec3& c = cell_point[static_cast<std::size_t>(s)];
    for (int j = 0; j < 3; ++j) {
      const int sa = o[j], sb = o[(j + 1) % 3], sc = o[(j + 2) % 3];
      const Vec3 ea = edge_point(s, v[sa]);
      const Vec3 eb = edge_point(s, v[sb]);
      const Vec3 f = face_point(s, sc);
      vol += tet_volume(x, ea, f, c) + tet_volume(x, f, eb, c);
    }
  }
  return vol;
}

}  // namespace detail

/// Dual-cell volumes of every particle of `tess` for the given construction.
///
/// Cells whose star is not closed (hull particles of an open box) are flagged invalid, as are
/// cells with a non-positive volume, which can occur only for moved (frozen-connectivity) vertices.
template <int D>
DualCellField<D> dual_cells(const Tessellation<D>& tess, DualKind kind) {
  DualCellField<D> out;
  out.kind = kind;
  out.tessellation = tess.topology();
  const int n = tess.num_particles();
  out.volume.assign(static_cast<std::size_t>(n), 0.0);
  out.valid.assign(static_cast<std::size_t>(n), 0);

  const std::size_t ns = tess.num_simplices();
  std::vector<Vec<D>> cell_point;
  std::vector<double> simplex_vol;
  if (kind == DualKind::incident_simplex_sum) {
    simplex_vol.resize(ns);
    parallel_for(ns, [&](std::size_t s) { simplex_vol[s] = simplex_volume<D>(tess.simplex_points(s)); });
  } else {
    cell_point.resize(ns);
    parallel_for(ns, [&](std::size_t s) {
      const auto pts = tess.simplex_points(s);
      cell_point[s] = kind == DualKind::classic_circumcenter ? circumcenter<D>(pts) : centroid<D>(pts);
    });
  }

  parallel_for(static_cast<std::size_t>(n), [&](std::size_t pi) {
    const int p = static_cast<int>(pi);
    if (!tess.closed(p)) return;
    double v = 0.0;
    if (kind == DualKind::incident_simplex_sum) {
      for (int s : tess.incident(p)) v += simplex_vol[static_cast<std::size_t>(s)];
    } else if constexpr (D == 2) {
      v = detail::ring_area(tess, p, cell_point);
    } else if (kind == DualKind::classic_circumcenter) {
      v = detail::pyramid_sum_3d(
          tess, p, cell_point,
          [&](int, int q) { return 0.5 * (tess.point(p) + tess.point(q)); },
          [&](int s, int opposite_slot) {
            const auto& sv = tess.simplex(static_cast<std::size_t>(s));
            std::array<int, 3> f{};
            int m = 0;
            for (int i = 0; i < 4; ++i)
              if (i != opposite_slot) f[m++] = sv[i];
            return triangle_circumcenter(tess.point(f[0]), tess.point(f[1]), tess.point(f[2]));
          });
    } else {
      // Centroid polyhedron: faces are the centroid rings around each incident edge, fanned
      // about the mean of the ring; face pieces split at the midpoint of adjacent centroids.
      std::vector<std::pair<int, Vec3>> edge_sum;
      std::vector<int> edge_cnt;
      for (int s : tess.incident(p))
        for (int q : tess.simplex(static_cast<std::size_t>(s))) {
          if (q == p) continue;
          std::size_t j = 0;
          while (j < edge_sum.size() && edge_sum[j].first != q) ++j;
          if (j == edge_sum.size()) {
            edge_sum.push_back({q, Vec3{}});
            edge_cnt.push_back(0);
          }
          edge_sum[j].second += cell_point[static_cast<std::size_t>(s)];
          ++edge_cnt[j];
        }
      bool ok = true;
      v = detail::pyramid_sum_3d(
          tess, p, cell_point,
          [&](int, int q) {
            for (std::size_t j = 0; j < edge_sum.size(); ++j)
              if (edge_sum[j].first == q) return edge_sum[j].second * (1.0 / edge_cnt[j]);
            return Vec3{};
          },
          [&](int s, int opposite_slot) {
            const int nb = tess.neighbors(static_cast<std::size_t>(s))[opposite_slot];
            if (nb < 0) {
              ok = false;
              return cell_point[static_cast<std::size_t>(s)];
            }
            return 0.5 * (cell_point[static_cast<std::size_t>(s)] + cell_point[static_cast<std::size_t>(nb)]);
          });
      if (!ok) return;
    }
    out.volume[pi] = v;
    out.valid[pi] = v > 0.0 && std::isfinite(v) ? 1 : 0;
  });
  return out;
}

/// Voronoi (circumcenter-dual) cell volumes.
template <int D>
DualCellField<D> classic_voronoi_volumes(const Tessellation<D>& tess) {
  return dual_cells(tess, DualKind::classic_circumcenter);
}

/// Modified (centroid-dual) cell volumes; 3D defaults to the incident-simplex sum.
template <int D>
DualCellField<D> modified_voronoi_volumes(const Tessellation<D>& tess, DualKind kind = default_modified_kind<D>()) {
  return dual_cells(tess, kind);
}

}  // namespace tessdiff
