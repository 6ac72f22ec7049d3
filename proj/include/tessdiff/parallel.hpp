#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <string>
#include <thread>
#include <vector>

namespace tessdiff {

namespace detail {

inline int& thread_setting() {
  static int n = [] {
    if (const char* env = std::getenv("TESSDIFF_THREADS")) {
      const int v = std::atoi(env);
      if (v > 0) return v;
    }
    return std::max(1, static_cast<int>(std::thread::hardware_concurrency()));
  }();
  return n;
}

}  // namespace detail

/// Worker count used by parallel loops (TESSDIFF_THREADS, else hardware concurrency).
inline int thread_count() { return detail::thread_setting(); }
inline void set_thread_count(int n) { detail::thread_setting() = std::max(1, n); }

/// Runs f(i) for i in [0, n) over contiguous chunks. f must only write to slot i.
template <class F>
void parallel_for(std::size_t n, F&& f) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(thread_count()), n / 4096 + 1);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = n * w / workers, e = n * (w + 1) / workers;
    pool.emplace_back([&f, b, e] {
      for (std::size_t i = b; i < e; ++i) f(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace tessdiff
