#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <random>
#include <set>
#include <vector>

#include "tessdiff/core/tessellation.hpp"

namespace tessdiff::oracle {

template <int D>
std::vector<Vec<D>> random_points(std::size_t n, double lo, double hi, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  std::vector<Vec<D>> p(n);
  for (auto& x : p)
    for (int i = 0; i < D; ++i) x[i] = u(rng);
  return p;
}

// Circumsphere test in long double with a relative slack; independent of the library predicates.
template <int D>
bool strictly_inside_circumsphere(const std::array<Vec<D>, D + 1>& s, const Vec<D>& q) {
  // Solve for the centre by 2 (p_i - p_0) . c = |p_i|^2 - |p_0|^2 in long double.
  long double a[3][4] = {};
  for (int i = 1; i <= D; ++i) {
    long double rhs = 0;
    for (int j = 0; j < D; ++j) {
      a[i - 1][j] = 2.0L * (static_cast<long double>(s[i][j]) - s[0][j]);
      rhs += static_cast<long double>(s[i][j]) * s[i][j] - static_cast<long double>(s[0][j]) * s[0][j];
    }
    a[i - 1][D] = rhs;
  }
  for (int c = 0; c < D; ++c) {
    int piv = c;
    for (int r = c + 1; r < D; ++r)
      if (std::fabs(a[r][c]) > std::fabs(a[piv][c])) piv = r;
    for (int k = 0; k <= D; ++k) std::swap(a[c][k], a[piv][k]);
    for (int r = 0; r < D; ++r) {
      if (r == c) continue;
      const long double f = a[r][c] / a[c][c];
      for (int k = c; k <= D; ++k) a[r][k] -= f * a[c][k];
    }
  }
  long double cc[3], r2 = 0, d2 = 0;
  for (int j = 0; j < D; ++j) cc[j] = a[j][D] / a[j][j];
  for (int j = 0; j < D; ++j) {
    r2 += (s[0][j] - cc[j]) * (s[0][j] - cc[j]);
    d2 += (q[j] - cc[j]) * (q[j] - cc[j]);
  }
  return d2 < r2 * (1.0L - 1e-9L);
}

template <int D>
std::set<std::array<int, D + 1>> sorted_simplices(const Tessellation<D>& t) {
  std::set<std::array<int, D + 1>> out;
  for (const auto& s : t.simplices()) {
    auto c = s;
    std::sort(c.begin(), c.end());
    out.insert(c);
  }
  return out;
}

// Every non-degenerate (D+1)-subset with an empty circumsphere. O(N^(D+2)).
template <int D>
std::set<std::array<int, D + 1>> brute_force_delaunay(const std::vector<Vec<D>>& p) {
  const int n = static_cast<int>(p.size());
  std::set<std::array<int, D + 1>> out;
  std::array<int, D + 1> idx{};
  auto visit = [&](auto&& self, int depth, int first) -> void {
    if (depth == D + 1) {
      std::array<Vec<D>, D + 1> s;
      for (int i = 0; i <= D; ++i) s[i] = p[idx[i]];
      if (std::fabs(simplex_volume<D>(s)) < 1e-14) return;
      for (int q = 0; q < n; ++q) {
        if (std::find(idx.begin(), idx.end(), q) != idx.end()) continue;
        if (strictly_inside_circumsphere<D>(s, p[q])) return;
      }
      out.insert(idx);
      return;
    }
    for (int v = first; v < n; ++v) {
      idx[depth] = v;
      self(self, depth + 1, v + 1);
    }
  };
  visit(visit, 0, 0);
  return out;
}

}  // namespace tessdiff::oracle
