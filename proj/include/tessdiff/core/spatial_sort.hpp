#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "tessdiff/core/vec.hpp"

namespace tessdiff {

namespace detail {

inline std::uint64_t spread_bits_2(std::uint64_t x) {
  x &= 0xffffffffULL;
  x = (x | (x << 16)) & 0x0000ffff0000ffffULL;
  x = (x | (x << 8)) & 0x00ff00ff00ff00ffULL;
  x = (x | (x << 4)) & 0x0f0f0f0f0f0f0f0fULL;
  x = (x | (x << 2)) & 0x3333333333333333ULL;
  x = (x | (x << 1)) & 0x5555555555555555ULL;
  return x;
}

inline std::uint64_t spread_bits_3(std::uint64_t x) {
  x &= 0x1fffffULL;
  x = (x | (x << 32)) & 0x1f00000000ffffULL;
  x = (x | (x << 16)) & 0x1f0000ff0000ffULL;
  x = (x | (x << 8)) & 0x100f00f00f00f00fULL;
  x = (x | (x << 4)) & 0x10c30c30c30c30c3ULL;
  x = (x | (x << 2)) & 0x1249249249249249ULL;
  return x;
}

}  // namespace detail

/// Permutation of `points` along the Morton (Z-order) curve of their bounding box.
/// Ties keep input order, so the result is deterministic.
template <int D>
std::vector<int> morton_order(std::span<const Vec<D>> points) {
  std::vector<int> order(points.size());
  std::iota(order.begin(), order.end(), 0);
  if (points.empty()) return order;

  Vec<D> lo = points[0], hi = points[0];
  for (const auto& p : points)
    for (int i = 0; i < D; ++i) {
      lo[i] = std::min(lo[i], p[i]);
      hi[i] = std::max(hi[i], p[i]);
    }
  constexpr int kBits = D == 2 ? 31 : 21;
  constexpr double kCells = static_cast<double>((1ULL << kBits) - 1);
  std::vector<std::uint64_t> key(points.size());
  for (std::size_t n = 0; n < points.size(); ++n) {
    std::uint64_t code = 0;
    for (int i = 0; i < D; ++i) {
      const double extent = hi[i] - lo[i];
      const double t = extent > 0.0 ? (points[n][i] - lo[i]) / extent : 0.0;
      const auto q = static_cast<std::uint64_t>(t * kCells);
      if constexpr (D == 2) {
        code |= detail::spread_bits_2(q) << i;
      } else {
        code |= detail::spread_bits_3(q) << i;
      }
    }
    key[n] = code;
  }
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return key[a] < key[b]; });
  return order;
}

}  // namespace tessdiff
