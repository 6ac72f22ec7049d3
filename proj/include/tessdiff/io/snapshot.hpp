#pragma once

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "tessdiff/core/domain.hpp"
#include "tessdiff/errors.hpp"

namespace tessdiff::io {

// Binary snapshot layout, all little-endian:
//   0  char[8]  "TESSDIFF"
//   8  u32      version (1)
//  12  u32      dimension (2 or 3)
//  16  u64      particle count N
//  24  f64      box edge length L (box is [0, L)^d)
//  32  u32      flags: bit 0 periodic, bits 1..4 presence of nu, epsilon, tau_p, time
//  36  u32      reserved (0)
//  40  f64 x 4  nu, epsilon, tau_p, time (0 when absent)
//  72  N records of d position components followed by d velocity components (f64)
inline constexpr char kSnapshotMagic[8] = {'T', 'E', 'S', 'S', 'D', 'I', 'F', 'F'};
inline constexpr std::uint32_t kSnapshotVersion = 1;
inline constexpr std::size_t kSnapshotHeaderBytes = 72;

struct SnapshotHeader {
  int dimension = 3;
  std::uint64_t n = 0;
  double box_length = 2.0 * std::numbers::pi;
  bool periodic = true;
  std::optional<double> nu, epsilon, tau_p, time;
};

struct SnapshotFile {
  SnapshotHeader header;
  std::vector<double> positions;   ///< n * d, particle-major
  std::vector<double> velocities;  ///< n * d

  template <int D>
  Domain<D> domain() const {
    check_dimension(D);
    return header.periodic ? Domain<D>::periodic_box(header.box_length) : Domain<D>::open_box(header.box_length);
  }

  template <int D>
  ParticleCloud<D> cloud() const {
    check_dimension(D);
    const auto dom = domain<D>();
    ParticleCloud<D> c;
    c.positions.resize(header.n);
    c.velocities.resize(header.n);
    for (std::size_t p = 0; p < header.n; ++p)
      for (int a = 0; a < D; ++a) {
        c.positions[p][a] = positions[p * D + static_cast<std::size_t>(a)];
        c.velocities[p][a] = velocities[p * D + static_cast<std::size_t>(a)];
      }
    for (auto& x : c.positions) x = dom.wrap(x);
    return c;
  }

  template <int D>
  static SnapshotFile from_cloud(const ParticleCloud<D>& c, const Domain<D>& dom, SnapshotHeader meta = {}) {
    for (int a = 1; a < D; ++a)
      if (dom.extent[a] != dom.extent[0] || dom.periodic[a] != dom.periodic[0])
        throw ConfigError("snapshots store cubic boxes only");
    SnapshotFile f;
    f.header = meta;
    f.header.dimension = D;
    f.header.n = c.size();
    f.header.box_length = dom.extent[0];
    f.header.periodic = dom.periodic[0];
    f.positions.resize(c.size() * D);
    f.velocities.assign(c.size() * D, 0.0);
    for (std::size_t p = 0; p < c.size(); ++p)
      for (int a = 0; a < D; ++a) {
        f.positions[p * D + static_cast<std::size_t>(a)] = c.positions[p][a];
        if (c.has_velocities()) f.velocities[p * D + static_cast<std::size_t>(a)] = c.velocities[p][a];
      }
    return f;
  }

 private:
  void check_dimension(int d) const {
    if (header.dimension != d)
      throw DataFormatError("snapshot is " + std::to_string(header.dimension) + "D, expected " + std::to_string(d) +
                            "D");
  }
};

namespace detail {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    auto bytes = std::bit_cast<std::array<unsigned char, sizeof(T)>>(v);
    std::reverse(bytes.begin(), bytes.end());
    return std::bit_cast<T>(bytes);
  } else {
    return v;
  }
}

template <class T>
void put(std::vector<unsigned char>& buf, T v) {
  v = to_little(v);
  const auto* b = reinterpret_cast<const unsigned char*>(&v);
  buf.insert(buf.end(), b, b + sizeof(T));
}

template <class T>
T get(const std::vector<unsigned char>& buf, std::size_t off) {
  T v;
  std::memcpy(&v, buf.data() + off, sizeof(T));
  return to_little(v);
}

}  // namespace detail

inline void validate(const SnapshotFile& f) {
  const auto& h = f.header;
  if (h.dimension != 2 && h.dimension != 3)
    throw DataFormatError("snapshot dimension must be 2 or 3, got " + std::to_string(h.dimension));
  if (!(h.box_length > 0.0) || !std::isfinite(h.box_length)) throw DataFormatError("snapshot box length must be positive");
  const std::size_t want = h.n * static_cast<std::size_t>(h.dimension);
  if (f.positions.size() != want || f.velocities.size() != want)
    throw DataFormatError("snapshot record count does not match N = " + std::to_string(h.n));
  for (std::size_t i = 0; i < want; ++i) {
    if (!std::isfinite(f.positions[i]) || !std::isfinite(f.velocities[i]))
      throw DataFormatError("non-finite value in record " + std::to_string(i / static_cast<std::size_t>(h.dimension)));
    if (!h.periodic && (f.positions[i] < 0.0 || f.positions[i] > h.box_length))
      throw DataFormatError("record " + std::to_string(i / static_cast<std::size_t>(h.dimension)) +
                            " lies outside the open box");
  }
}

inline void write_snapshot(const std::filesystem::path& path, const SnapshotFile& f) {
  validate(f);
  const auto& h = f.header;
  std::vector<unsigned char> buf;
  buf.reserve(kSnapshotHeaderBytes + 2 * f.positions.size() * sizeof(double));
  buf.insert(buf.end(), std::begin(kSnapshotMagic), std::end(kSnapshotMagic));
  detail::put<std::uint32_t>(buf, kSnapshotVersion);
  detail::put<std::uint32_t>(buf, static_cast<std::uint32_t>(h.dimension));
  detail::put<std::uint64_t>(buf, h.n);
  detail::put<double>(buf, h.box_length);
  std::uint32_t flags = h.periodic ? 1u : 0u;
  if (h.nu) flags |= 2u;
  if (h.epsilon) flags |= 4u;
  if (h.tau_p) flags |= 8u;
  if (h.time) flags |= 16u;
  detail::put<std::uint32_t>(buf, flags);
  detail::put<std::uint32_t>(buf, 0u);
  for (const auto& o : {h.nu, h.epsilon, h.tau_p, h.time}) detail::put<double>(buf, o.value_or(0.0));
  const auto d = static_cast<std::size_t>(h.dimension);
  for (std::size_t p = 0; p < h.n; ++p) {
    for (std::size_t a = 0; a < d; ++a) detail::put<double>(buf, f.positions[p * d + a]);
    for (std::size_t a = 0; a < d; ++a) detail::put<double>(buf, f.velocities[p * d + a]);
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataFormatError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  if (!out) throw DataFormatError("write failed for " + path.string());
}

inline SnapshotFile read_snapshot(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataFormatError("cannot open snapshot " + path.string());
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string where = " in " + path.string();
  if (buf.size() < kSnapshotHeaderBytes)
    throw DataFormatError("truncated snapshot header (" + std::to_string(buf.size()) + " bytes)" + where);
  if (std::memcmp(buf.data(), kSnapshotMagic, sizeof kSnapshotMagic) != 0) throw DataFormatError("bad magic" + where);
  const auto version = detail::get<std::uint32_t>(buf, 8);
  if (version != kSnapshotVersion) throw DataFormatError("unsupported snapshot version " + std::to_string(version) + where);
  SnapshotFile f;
  auto& h = f.header;
  h.dimension = static_cast<int>(detail::get<std::uint32_t>(buf, 12));
  if (h.dimension != 2 && h.dimension != 3)
    throw DataFormatError("snapshot dimension must be 2 or 3, got " + std::to_string(h.dimension) + where);
  h.n = detail::get<std::uint64_t>(buf, 16);
  h.box_length = detail::get<double>(buf, 24);
  const auto flags = detail::get<std::uint32_t>(buf, 32);
  h.periodic = flags & 1u;
  std::array<std::optional<double>*, 4> opt{&h.nu, &h.epsilon, &h.tau_p, &h.time};
  for (std::size_t i = 0; i < 4; ++i)
    if (flags & (2u << i)) *opt[i] = detail::get<double>(buf, 40 + 8 * i);
  const auto d = static_cast<std::size_t>(h.dimension);
  const std::size_t record = 2 * d * sizeof(double);
  if (h.n > (buf.size() - kSnapshotHeaderBytes) / record || buf.size() != kSnapshotHeaderBytes + h.n * record)
    throw DataFormatError("snapshot holds " + std::to_string((buf.size() - kSnapshotHeaderBytes) / record) +
                          " complete records but the header declares N = " + std::to_string(h.n) + where);
  f.positions.resize(h.n * d);
  f.velocities.resize(h.n * d);
  std::size_t off = kSnapshotHeaderBytes;
  for (std::size_t p = 0; p < h.n; ++p) {
    for (std::size_t a = 0; a < d; ++a, off += 8) f.positions[p * d + a] = detail::get<double>(buf, off);
    for (std::size_t a = 0; a < d; ++a, off += 8) f.velocities[p * d + a] = detail::get<double>(buf, off);
  }
  validate(f);
  return f;
}

}  // namespace tessdiff::io
