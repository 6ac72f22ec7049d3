#pragma once

#include <cstdint>
#include <random>

namespace tessdiff {

/// Independent random streams derived from one experiment seed.
enum class Stream : std::uint64_t {
  positions = 1,
  phases = 2,
  velocities = 3,
  aux = 4,
};

/// Generator for (seed, stream); different streams are statistically independent.
inline std::mt19937_64 make_rng(std::uint64_t seed, Stream stream, std::uint64_t substream = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(substream),
                    static_cast<std::uint32_t>(substream >> 32)};
  return std::mt19937_64(seq);
}

/// Uniform double in [0, 1) from the top 53 bits; identical on every platform.
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace tessdiff
