#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "tessdiff/core/predicates.hpp"
#include "tessdiff/core/spatial_sort.hpp"
#include "tessdiff/core/vec.hpp"
#include "tessdiff/errors.hpp"

namespace tessdiff {

/// Finite simplices of a Delaunay triangulation, as produced by DelaunayKernel.
template <int D>
struct DelaunayResult {
  std::vector<std::array<int, D + 1>> simplices;  ///< positively oriented vertex tuples
  std::vector<std::array<int, D + 1>> neighbors;  ///< neighbors[s][i] is opposite vertex i; -1 on the hull
  std::vector<std::uint8_t> on_hull;              ///< per input point
};

/// Incremental Bowyer-Watson insertion over an infinite-vertex triangulation.
///
/// The convex hull is closed by "infinite" cells that share a single symbolic
/// vertex. A finite cell conflicts with a new point when the point lies strictly
/// inside its circumsphere; an infinite cell conflicts when the point lies
/// strictly beyond its hull facet, or on the facet's hyperplane and strictly
/// inside the facet's circumsphere. Cospherical ties are therefore resolved by
/// keeping the existing simplices, which makes the output a deterministic
/// function of the insertion order.
template <int D>
class DelaunayKernel {
 public:
  static constexpr int kV = D + 1;
  static constexpr int kInfinite = -1;

  explicit DelaunayKernel(std::span<const Vec<D>> points) : pts_(points) {
    if (points.size() < static_cast<std::size_t>(kV))
      throw GeometryError("too few points: need at least " + std::to_string(kV) + ", got " +
                          std::to_string(points.size()));
    const std::vector<int> order = morton_order<D>(points);
    const std::array<int, kV> seed = pick_initial_simplex(order);
    make_initial(seed);
    for (int p : order) {
      if (std::find(seed.begin(), seed.end(), p) != seed.end()) continue;
      insert(p);
    }
  }

  DelaunayResult<D> result() const {
    DelaunayResult<D> out;
    out.on_hull.assign(pts_.size(), 0);
    std::vector<int> remap(cells_.size(), -1);
    int count = 0;
    for (std::size_t c = 0; c < cells_.size(); ++c)
      if (alive_[c] && !is_infinite(cells_[c])) remap[c] = count++;
    out.simplices.reserve(count);
    out.neighbors.reserve(count);
    for (std::size_t c = 0; c < cells_.size(); ++c) {
      if (!alive_[c]) continue;
      const Cell& cell = cells_[c];
      if (is_infinite(cell)) {
        for (int v : cell.v)
          if (v != kInfinite) out.on_hull[v] = 1;
        continue;
      }
      out.simplices.push_back(cell.v);
      std::array<int, kV> nb;
      for (int i = 0; i < kV; ++i) nb[i] = remap[cell.n[i]];
      out.neighbors.push_back(nb);
    }
    return out;
  }

 private:
  struct Cell {
    std::array<int, kV> v;
    std::array<int, kV> n;
  };
  enum : std::uint8_t { kUnseen = 0, kInCavity = 1, kOutside = 2 };

  static bool is_infinite(const Cell& c) {
    return std::find(c.v.begin(), c.v.end(), kInfinite) != c.v.end();
  }

  const Vec<D>& pt(int i) const { return pts_[static_cast<std::size_t>(i)]; }

  int orient_with(const Cell& c, int slot, const Vec<D>& q) const {
    std::array<const Vec<D>*, kV> p;
    for (int i = 0; i < kV; ++i) p[i] = i == slot ? &q : &pt(c.v[i]);
    return predicates::orientation<D>(p);
  }

  int in_sphere_of(const Cell& c, const Vec<D>& q) const {
    std::array<const Vec<D>*, kV> p;
    for (int i = 0; i < kV; ++i) p[i] = &pt(c.v[i]);
    return predicates::in_sphere<D>(p, q);
  }

  std::array<int, kV> pick_initial_simplex(const std::vector<int>& order) const {
    std::array<int, kV> s{};
    std::size_t k = 0;
    s[0] = order[0];
    auto next = [&](auto&& accept) -> int {
      for (; k < order.size(); ++k)
        if (accept(order[k])) return order[k++];
      throw GeometryError("degenerate input: all points are affinely dependent");
    };
    s[1] = next([&](int i) { return !(pt(i) == pt(s[0])); });
    if constexpr (D == 2) {
      s[2] = next([&](int i) {
        return predicates::orientation<2>({&pt(s[0]), &pt(s[1]), &pt(i)}) != 0;
      });
    } else {
      s[2] = next([&](int i) { return !predicates::collinear(pt(s[0]), pt(s[1]), pt(i)); });
      s[3] = next([&](int i) {
        return predicates::orientation<3>({&pt(s[0]), &pt(s[1]), &pt(s[2]), &pt(i)}) != 0;
      });
    }
    std::array<const Vec<D>*, kV> p;
    for (int i = 0; i < kV; ++i) p[i] = &pt(s[i]);
    if (predicates::orientation<D>(p) < 0) std::swap(s[0], s[1]);
    return s;
  }

  int alloc(const Cell& c) {
    if (!free_.empty()) {
      const int id = free_.back();
      free_.pop_back();
      cells_[id] = c;
      alive_[id] = 1;
      return id;
    }
    cells_.push_back(c);
    alive_.push_back(1);
    stamp_.push_back(0);
    state_.push_back(kUnseen);
    return static_cast<int>(cells_.size()) - 1;
  }

  void make_initial(const std::array<int, kV>& s) {
    const std::size_t reserve = pts_.size() * (D == 2 ? 2 : 7) + 16;
    cells_.reserve(reserve);
    alive_.reserve(reserve);
    stamp_.reserve(reserve);
    state_.reserve(reserve);

    std::array<int, kV + 1> ids{};
    Cell root{s, {}};
    root.n.fill(-1);
    ids[0] = alloc(root);
    for (int i = 0; i < kV; ++i) {
      Cell inf{s, {}};
      inf.n.fill(-1);
      inf.v[i] = kInfinite;
      std::swap(inf.v[(i + 1) % kV], inf.v[(i + 2) % kV]);
      ids[i + 1] = alloc(inf);
    }
    // Pairwise facet matching; only kV + 1 cells.
    for (int a = 0; a <= kV; ++a)
      for (int b = 0; b <= kV; ++b) {
        if (a == b) continue;
        Cell& ca = cells_[ids[a]];
        const Cell& cb = cells_[ids[b]];
        int shared = 0, missing_slot = -1;
        for (int i = 0; i < kV; ++i) {
          if (std::find(cb.v.begin(), cb.v.end(), ca.v[i]) != cb.v.end())
            ++shared;
          else
            missing_slot = i;
        }
        if (shared == D) ca.n[missing_slot] = ids[b];
      }
    last_ = ids[0];
  }

  /// Visibility walk; returns a finite cell containing q or an infinite cell whose facet sees q.
  int locate(const Vec<D>& q) {
    int c = last_;
    if (!alive_[c]) c = first_alive_finite();
    if (is_infinite(cells_[c])) c = finite_neighbor_of_infinite(c);
    int prev = -1;
    for (;;) {
      const Cell& cell = cells_[c];
      if (is_infinite(cell)) return c;
      const int start = static_cast<int>(next_random() % kV);
      bool moved = false;
      for (int j = 0; j < kV; ++j) {
        const int i = (start + j) % kV;
        const int nb = cell.n[i];
        if (nb == prev) continue;
        if (orient_with(cell, i, q) < 0) {
          prev = c;
          c = nb;
          moved = true;
          break;
        }
      }
      if (!moved) return c;
    }
  }

  int first_alive_finite() const {
    for (std::size_t c = 0; c < cells_.size(); ++c)
      if (alive_[c] && !is_infinite(cells_[c])) return static_cast<int>(c);
    return 0;
  }

  int finite_neighbor_of_infinite(int c) const {
    const Cell& cell = cells_[c];
    for (int i = 0; i < kV; ++i)
      if (cell.v[i] == kInfinite) return cell.n[i];
    return c;
  }

  bool conflicts(int c, const Vec<D>& q) const {
    const Cell& cell = cells_[c];
    for (int i = 0; i < kV; ++i) {
      if (cell.v[i] != kInfinite) continue;
      const int o = orient_with(cell, i, q);
      if (o != 0) return o > 0;
      return in_sphere_of(cells_[cell.n[i]], q) > 0;
    }
    return in_sphere_of(cell, q) > 0;
  }

  std::uint64_t next_random() {
    rng_ ^= rng_ << 13;
    rng_ ^= rng_ >> 7;
    rng_ ^= rng_ << 17;
    return rng_;
  }

  static std::uint64_t ridge_key(const Cell& c, int skip_a, int skip_b) {
    std::array<std::uint32_t, D - 1> k{};
    int m = 0;
    for (int i = 0; i < kV; ++i)
      if (i != skip_a && i != skip_b) k[m++] = static_cast<std::uint32_t>(c.v[i] + 1);
    if constexpr (D == 2) {
      return k[0];
    } else {
      if (k[0] > k[1]) std::swap(k[0], k[1]);
      return (static_cast<std::uint64_t>(k[0]) << 32) | k[1];
    }
  }

  void insert(int p) {
    const Vec<D>& q = pt(p);
    const int start = locate(q);
    {
      const Cell& cell = cells_[start];
      if (!is_infinite(cell))
        for (int v : cell.v)
          if (pt(v) == q)
            throw GeometryError("duplicate particle position at index " + std::to_string(p) +
                                " (same as " + std::to_string(v) + ")");
    }
    if (++gen_ == 0) {
      std::fill(stamp_.begin(), stamp_.end(), 0);
      gen_ = 1;
    }
    cavity_.clear();
    boundary_.clear();
    stack_.clear();
    stamp_[start] = gen_;
    state_[start] = kInCavity;
    stack_.push_back(start);
    while (!stack_.empty()) {
      const int c = stack_.back();
      stack_.pop_back();
      cavity_.push_back(c);
      for (int i = 0; i < kV; ++i) {
        const int nb = cells_[c].n[i];
        if (stamp_[nb] == gen_) {
          if (state_[nb] == kOutside) boundary_.push_back({c, i});
          continue;
        }
        stamp_[nb] = gen_;
        if (conflicts(nb, q)) {
          state_[nb] = kInCavity;
          stack_.push_back(nb);
        } else {
          state_[nb] = kOutside;
          boundary_.push_back({c, i});
        }
      }
    }

    ridges_.clear();
    int some_finite = -1;
    for (const auto& [c, slot] : boundary_) {
      Cell nc = cells_[c];
      const int outside = nc.n[slot];
      nc.v[slot] = p;
      nc.n.fill(-1);
      nc.n[slot] = outside;
      const int id = alloc(nc);
      Cell& out = cells_[outside];
      for (int k = 0; k < kV; ++k)
        if (out.n[k] == c) {
          out.n[k] = id;
          break;
        }
      for (int s = 0; s < kV; ++s)
        if (s != slot) ridges_.push_back({ridge_key(cells_[id], s, slot), id, s});
      if (some_finite < 0 && !is_infinite(cells_[id])) some_finite = id;
    }
    std::sort(ridges_.begin(), ridges_.end(),
              [](const Ridge& a, const Ridge& b) { return a.key < b.key; });
    for (std::size_t r = 0; r + 1 < ridges_.size(); r += 2) {
      const Ridge& a = ridges_[r];
      const Ridge& b = ridges_[r + 1];
      if (a.key != b.key)
        throw InvariantViolation("delaunay-cavity", "unmatched ridge while re-linking cavity");
      cells_[a.cell].n[a.slot] = b.cell;
      cells_[b.cell].n[b.slot] = a.cell;
    }
    for (int c : cavity_) {
      alive_[c] = 0;
      free_.push_back(c);
    }
    last_ = some_finite >= 0 ? some_finite : cells_.empty() ? 0 : last_;
  }

  struct Facet {
    int cell;
    int slot;
  };
  struct Ridge {
    std::uint64_t key;
    int cell;
    int slot;
  };

  std::span<const Vec<D>> pts_;
  std::vector<Cell> cells_;
  std::vector<std::uint8_t> alive_;
  std::vector<std::uint32_t> stamp_;
  std::vector<std::uint8_t> state_;
  std::vector<int> free_;
  std::vector<int> cavity_;
  std::vector<int> stack_;
  std::vector<Facet> boundary_;
  std::vector<Ridge> ridges_;
  std::uint32_t gen_ = 0;
  std::uint64_t rng_ = 0x9E3779B97F4A7C15ULL;
  int last_ = 0;
};

}  // namespace tessdiff
