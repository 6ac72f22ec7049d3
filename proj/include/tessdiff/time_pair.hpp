#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "tessdiff/core/domain.hpp"
#include "tessdiff/errors.hpp"

namespace tessdiff {

/// How the second instant of a pair is tessellated.
enum class RetessellationMode {
  retessellate,         ///< independent Delaunay build at t^{k+1}
  frozen_connectivity,  ///< t^k connectivity with moved vertices
};

inline std::string_view to_string(RetessellationMode m) {
  return m == RetessellationMode::retessellate ? "retessellate" : "frozen_connectivity";
}

inline RetessellationMode parse_retessellation_mode(std::string_view s) {
  if (s == "retessellate") return RetessellationMode::retessellate;
  if (s == "frozen_connectivity" || s == "frozen") return RetessellationMode::frozen_connectivity;
  throw ConfigError("unknown retessellation mode '" + std::string(s) + "'");
}

/// A cloud at t^k and its positions at t^{k+1} = t^k + dt.
template <int D>
struct TimePair {
  Domain<D> domain;
  ParticleCloud<D> before;            ///< positions and velocities at t^k
  std::vector<Vec<D>> after;          ///< positions at t^{k+1}, wrapped into the box
  double dt = 0.0;
  RetessellationMode mode = RetessellationMode::frozen_connectivity;

  void validate() const {
    before.check_consistent();
    if (after.size() != before.size())
      throw ConfigError("snapshot at t^k has " + std::to_string(before.size()) + " particles, snapshot at t^k+1 has " +
                        std::to_string(after.size()));
    if (!(dt > 0.0)) throw ConfigError("time step must be positive, got " + std::to_string(dt));
  }

  /// Positions at t^{k+1} continuous with t^k (minimum-image displacement on periodic axes).
  std::vector<Vec<D>> unwrapped_after() const {
    std::vector<Vec<D>> out(after.size());
    for (std::size_t i = 0; i < after.size(); ++i) {
      const Vec<D> x0 = domain.wrap(before.positions[i]);
      out[i] = x0 + domain.minimum_image(after[i] - x0);
    }
    return out;
  }
};

}  // namespace tessdiff
