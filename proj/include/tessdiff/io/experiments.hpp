#pragma once

#include <fftw3.h>

#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "tessdiff/analysis.hpp"
#include "tessdiff/fields.hpp"
#include "tessdiff/io/config.hpp"
#include "tessdiff/io/csv.hpp"
#include "tessdiff/io/snapshot.hpp"
#include "tessdiff/operators.hpp"
#include "tessdiff/parallel.hpp"
#include "tessdiff/version.hpp"

namespace tessdiff::io {

/// Process exit status for an error raised during a run.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return 2;
  if (dynamic_cast<const DataFormatError*>(&e)) return 3;
  if (dynamic_cast<const InvariantViolation*>(&e) || dynamic_cast<const GeometryError*>(&e)) return 4;
  return 1;
}

inline std::string describe_error(const std::exception& e) {
  if (const auto* iv = dynamic_cast<const InvariantViolation*>(&e))
    return "invariant violated: " + iv->invariant() + ": " + e.what();
  if (dynamic_cast<const ConfigError*>(&e)) return std::string("config error: ") + e.what();
  if (dynamic_cast<const DataFormatError*>(&e)) return std::string("data format error: ") + e.what();
  return std::string("error: ") + e.what();
}

/// Runs tasks 0..n-1 on up to `threads` workers. Results must be stored by index; the first
/// failing task in index order is rethrown.
inline void run_pool(std::size_t n, int threads, const std::function<void(std::size_t)>& task) {
  std::vector<std::exception_ptr> errors(n);
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, threads)));
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        task(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct RunResult {
  std::vector<std::filesystem::path> files;
  nlohmann::json manifest;
};

/// Error summary of one operator evaluation against exact values.
struct Metrics {
  double l2 = 0.0;
  double rms = 0.0;
  double pearson = 0.0;
  std::size_t valid = 0;
};

namespace detail {

inline double mean_spacing_of(std::size_t n, int d, double length = 2.0 * std::numbers::pi) {
  return length / std::pow(static_cast<double>(n), 1.0 / d);
}

template <int D>
AnalyticField<D> make_field(const FieldSpec& spec, std::uint64_t default_seed, double k = 0.0, int k_max = 0) {
  const std::string& name = spec.name;
  if (name == "derivative") {
    if constexpr (D == 2) return fields::cos_cos_2d();
    else return fields::sin_cos_cos_3d();
  }
  if (name == "cos_cos") {
    if constexpr (D == 2) return fields::cos_cos_2d();
  }
  if (name == "sin_cos_cos") {
    if constexpr (D == 3) return fields::sin_cos_cos_3d();
  }
  if (name == "divergence") return fields::divergence_field<D>();
  if (name == "sine") return fields::sine_wave<D>(k > 0.0 ? k : spec.k.at(0));
  if (name == "synthetic") {
    const int km = k_max > 0 ? k_max : spec.k_max.at(0);
    const double ex = spec.exponent.value_or(SyntheticSpectrumField<D>::default_exponent());
    return SyntheticSpectrumField<D>(km, ex, spec.seed.value_or(default_seed)).as_field();
  }
  throw ConfigError("field '" + name + "' is not available in " + std::to_string(D) + "D");
}

/// Exact per-particle values of the requested quantity, component-major within each particle.
template <int D>
std::vector<double> exact_values(const AnalyticField<D>& f, std::span<const Vec<D>> x, const std::string& quantity) {
  std::vector<double> out;
  out.reserve(x.size() * (quantity == "curl" ? static_cast<std::size_t>(curl_components<D>()) : 1));
  for (const auto& p : x) {
    const Mat<D> g = f.gradient(p);
    if (quantity == "divergence") {
      out.push_back(trace(g));
    } else {
      const auto c = curl_from_gradient<D>(g);
      if constexpr (D == 2) out.push_back(c);
      else
        for (int a = 0; a < 3; ++a) out.push_back(c[a]);
    }
  }
  return out;
}

/// Quantity values and per-value validity from an operator field; gradients are reduced to the quantity.
template <int D>
std::pair<std::vector<double>, std::vector<std::uint8_t>> reduce(const OperatorField<D>& f, const std::string& quantity) {
  std::vector<double> v;
  std::vector<std::uint8_t> m;
  if (f.kind == OperatorKind::gradient) {
    const int nc = quantity == "curl" ? curl_components<D>() : 1;
    for (std::size_t p = 0; p < f.size(); ++p) {
      const Mat<D> g = f.gradient(p);
      if (quantity == "divergence") {
        v.push_back(trace(g));
      } else {
        const auto c = curl_from_gradient<D>(g);
        if constexpr (D == 2) v.push_back(c);
        else
          for (int a = 0; a < 3; ++a) v.push_back(c[a]);
      }
      for (int c = 0; c < nc; ++c) m.push_back(f.valid[p]);
    }
    return {v, m};
  }
  v = f.values;
  for (std::size_t p = 0; p < f.size(); ++p)
    for (int c = 0; c < f.components; ++c) m.push_back(f.valid[p]);
  return {v, m};
}

template <int D>
Metrics score(const OperatorField<D>& f, const std::vector<double>& exact, const std::string& quantity) {
  const auto [v, m] = reduce(f, quantity);
  Metrics s;
  s.l2 = l2_error(v, exact, m);
  s.rms = rms_error(v, exact, m);
  s.pearson = pearson(v, exact, m);
  s.valid = f.num_valid();
  return s;
}

template <int D>
ParticleCloud<D> make_cloud(const AnalyticField<D>& field, std::size_t n, const Domain<D>& dom, std::uint64_t seed) {
  return sample_field(field, seed_uniform<D>(n, dom, seed));
}

// One Lagrangian evaluation per scheme for a given pair, reusing tessellation and t^k volumes.
template <int D>
std::vector<OperatorField<D>> lagrangian_eval(const TimePair<D>& pair, const Tessellation<D>& tess, DualKind dual,
                                              const DualCellField<D>& vol0, std::span<const Scheme> schemes,
                                              const std::string& quantity) {
  if (quantity == "divergence") {
    const LagrangianOperators<D> ops(pair, tess, dual, schemes.front(), vol0);
    return ops.divergence(schemes);
  }
  std::vector<OperatorField<D>> out;
  for (Scheme s : schemes) out.push_back(LagrangianOperators<D>(pair, tess, dual, s, vol0).curl());
  return out;
}

inline void ensure_dir(const std::filesystem::path& p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec) throw ConfigError("cannot create output directory " + p.string() + ": " + ec.message());
}

inline nlohmann::json environment_json(int threads) {
  nlohmann::json j;
  j["tool"] = "tessdiff";
  j["version"] = std::string(kVersion);
  j["fftw"] = std::string(fftw_version);
#if defined(__VERSION__)
  j["compiler"] = std::string(__VERSION__);
#endif
  j["threads"] = threads;
  j["conventions"] = {
      {"l2_error", "rms(computed - exact) / rms(exact) over valid particles"},
      {"rms_error", "rms(computed - exact) over valid particles"},
      {"pearson", "over valid particles, curl components pooled"},
      {"delta", "L / N^(1/d)"},
      {"pdf", "uniform bins over mean +- sigmas * std unless a range is fixed; density = count / (total * width)"},
      {"spectrum", "F = FFT / M^d, shells |k| in [k - 1/2, k + 1/2), sum of shells = grid mean of sum_c f_c^2"},
      {"poisson_noise", "E(k) - C_N k^(d-1), C_N least squares on [0.7, 1] * M/2, negatives clipped to 0"},
      {"empty_cells", "zero-filled"},
  };
  return j;
}

// -------------------------------------------------------------------------------------------
// convergence, scheme-comparison, voronoi-vs-modified

template <int D>
void run_sweep(const ExperimentConfig& cfg, int threads, RunResult& res, nlohmann::json& timings) {
  const auto dom = Domain<D>::periodic_box();
  const auto field = make_field<D>(cfg.field, cfg.seed);
  std::vector<CsvTable> parts(cfg.n.size(), CsvTable({}));
  std::vector<double> seconds(cfg.n.size());
  const std::vector<std::string> header{"field",  "quantity", "method", "scheme",   "dual",     "mode",    "n",
                                        "delta",  "dt",       "l2_error", "rms_error", "pearson", "valid"};
  run_pool(cfg.n.size(), threads, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const std::size_t n = cfg.n[i];
    const double delta = mean_spacing_of(n, D);
    CsvTable t(header);
    const auto cloud = make_cloud(field, n, dom, cfg.seed);
    const auto exact = exact_values<D>(field, cloud.positions, cfg.quantity);
    const auto tess = build_delaunay<D>(cloud, dom);
    for (Method method : cfg.methods) {
      if (method == Method::lagrangian) {
        for (const auto& dual_name : cfg.duals) {
          const DualKind dual = resolve_dual<D>(dual_name);
          const auto vol0 = dual_cells(tess, dual);
          for (double dt : cfg.dt) {
            const auto pair = advect_euler(cloud, dt, dom, cfg.mode);
            const auto out = lagrangian_eval<D>(pair, tess, dual, vol0, cfg.schemes, cfg.quantity);
            for (std::size_t s = 0; s < out.size(); ++s) {
              const auto m = score(out[s], exact, cfg.quantity);
              t.row(field.id, cfg.quantity, "lagrangian", tessdiff::to_string(cfg.schemes[s]), tessdiff::to_string(dual),
                    tessdiff::to_string(cfg.mode), n, delta, dt, m.l2, m.rms, m.pearson, m.valid);
            }
          }
        }
      } else {
        OperatorField<D> f;
        if (method == Method::eulerian) {
          const EulerianOperators<D> eu(tess, cloud.velocities);
          f = cfg.quantity == "divergence" ? eu.divergence() : eu.curl();
        } else if constexpr (D == 2) {
          f = wtli_gradient_2d(tess, cloud.velocities);
        }
        const auto m = score(f, exact, cfg.quantity);
        t.row(field.id, cfg.quantity, to_string(method), "none", method == Method::wtli ? "modified_centroid" : "none",
              "none", n, delta, 0.0, m.l2, m.rms, m.pearson, m.valid);
      }
    }
    parts[i] = std::move(t);
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  CsvTable all(header);
  for (const auto& p : parts) all.append(p);
  const auto path = cfg.output / "results.csv";
  all.write(path);
  res.files.push_back(path);
  for (std::size_t i = 0; i < cfg.n.size(); ++i) timings.push_back({{"n", cfg.n[i]}, {"seconds", seconds[i]}});
}

// -------------------------------------------------------------------------------------------
// correlation-kdelta and correlation-synthetic

struct CorrelationPoint {
  double param = 0.0;   // k or k_max
  double target = 0.0;  // requested k delta (0 when N is given directly)
  std::size_t n = 0;
};

template <int D>
std::vector<CorrelationPoint> correlation_points(const ExperimentConfig& cfg, nlohmann::json& skipped) {
  const bool synthetic = cfg.kind == ExperimentKind::correlation_synthetic;
  std::vector<double> params;
  if (synthetic)
    for (int k : cfg.field.k_max) params.push_back(k);
  else
    params = cfg.field.k;
  const auto& targets = synthetic ? cfg.kmax_delta : cfg.kdelta;
  std::vector<CorrelationPoint> pts;
  for (double p : params) {
    if (targets.empty()) {
      for (auto n : cfg.n) pts.push_back({p, 0.0, n});
      continue;
    }
    for (double t : targets) {
      const double nf = std::pow(2.0 * std::numbers::pi * p / t, D);
      const auto n = static_cast<std::size_t>(std::llround(nf));
      if (n < static_cast<std::size_t>(D + 2) || (cfg.n_max && n > cfg.n_max)) {
        skipped.push_back({{"param", p}, {"target", t}, {"n", n}, {"reason", n > cfg.n_max ? "n_max" : "too few particles"}});
        continue;
      }
      pts.push_back({p, t, n});
    }
  }
  return pts;
}

template <int D>
void run_correlation(const ExperimentConfig& cfg, int threads, RunResult& res, nlohmann::json& timings,
                     nlohmann::json& extra) {
  const bool synthetic = cfg.kind == ExperimentKind::correlation_synthetic;
  const auto dom = Domain<D>::periodic_box();
  nlohmann::json skipped = nlohmann::json::array();
  const auto pts = correlation_points<D>(cfg, skipped);
  extra["skipped"] = skipped;
  const std::vector<std::string> header =
      synthetic ? std::vector<std::string>{"k_max", "exponent", "kmax_delta_target", "n", "delta", "kmax_delta", "dt",
                                           "dual", "scheme", "quantity", "pearson", "l2_error", "valid"}
                : std::vector<std::string>{"k", "kdelta_target", "n", "delta", "kdelta", "dt", "dual", "scheme",
                                           "quantity", "pearson", "l2_error", "valid"};
  const std::size_t per_point = cfg.dt.size() * cfg.duals.size() * cfg.schemes.size();
  std::vector<std::vector<std::vector<std::string>>> rows(pts.size());
  std::vector<double> seconds(pts.size());
  run_pool(pts.size(), threads, [&](std::size_t i) {
    const auto t0 = std::chrono::steady_clock::now();
    const auto& pt = pts[i];
    const auto field = synthetic ? make_field<D>(cfg.field, cfg.seed, 0.0, static_cast<int>(pt.param))
                                 : make_field<D>(cfg.field, cfg.seed, pt.param);
    const auto cloud = make_cloud(field, pt.n, dom, cfg.seed);
    const auto exact = exact_values<D>(field, cloud.positions, cfg.quantity);
    const auto tess = build_delaunay<D>(cloud, dom);
    const double delta = mean_spacing_of(pt.n, D);
    const double exponent = cfg.field.exponent.value_or(SyntheticSpectrumField<D>::default_exponent());
    rows[i].reserve(per_point);
    for (const auto& dual_name : cfg.duals) {
      const DualKind dual = resolve_dual<D>(dual_name);
      const auto vol0 = dual_cells(tess, dual);
      for (double dt : cfg.dt) {
        const auto pair = advect_euler(cloud, dt, dom, cfg.mode);
        const auto out = lagrangian_eval<D>(pair, tess, dual, vol0, cfg.schemes, cfg.quantity);
        for (std::size_t s = 0; s < out.size(); ++s) {
          const auto m = score(out[s], exact, cfg.quantity);
          std::vector<std::string> r;
          if (synthetic)
            r = {cell(static_cast<int>(pt.param)), cell(exponent), cell(pt.target), cell(pt.n), cell(delta),
                 cell(pt.param * delta), cell(dt), cell(tessdiff::to_string(dual)),
                 cell(tessdiff::to_string(cfg.schemes[s])), cell(cfg.quantity), cell(m.pearson), cell(m.l2),
                 cell(m.valid)};
          else
            r = {cell(pt.param), cell(pt.target), cell(pt.n), cell(delta), cell(pt.param * delta), cell(dt),
                 cell(tessdiff::to_string(dual)), cell(tessdiff::to_string(cfg.schemes[s])), cell(cfg.quantity),
                 cell(m.pearson), cell(m.l2), cell(m.valid)};
          rows[i].push_back(std::move(r));
        }
      }
    }
    seconds[i] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  });
  CsvTable all(header);
  for (auto& r : rows)
    for (auto& line : r) all.add(std::move(line));
  const auto path = cfg.output / "results.csv";
  all.write(path);
  res.files.push_back(path);
  for (std::size_t i = 0; i < pts.size(); ++i)
    timings.push_back({{"param", pts[i].param}, {"n", pts[i].n}, {"seconds", seconds[i]}});
}

}  // namespace detail

// -------------------------------------------------------------------------------------------
// Two-instant operators (shared by the in-memory pipeline and snapshot ingestion)

template <int D>
struct PairOperators {
  OperatorField<D> divergence;
  OperatorField<D> curl;
  std::optional<OperatorField<3>> helicity;  ///< 3D only
  std::vector<Vec<D>> velocity;              ///< velocity used for helicity
};

struct PairOptions {
  std::string dual = "modified";
  Scheme scheme = Scheme::D;
  RetessellationMode mode = RetessellationMode::frozen_connectivity;
};

/// Divergence, curl and (3D) relative helicity for one pair of instants. Helicity uses the recorded
/// velocities at t^k when present, else the displacement-implied ones.
template <int D>
PairOperators<D> pair_operators(const TimePair<D>& pair, const PairOptions& opt = {}) {
  const LagrangianOperators<D> ops(pair, resolve_dual<D>(opt.dual), opt.scheme);
  PairOperators<D> r;
  r.divergence = ops.divergence();
  r.curl = ops.curl();
  r.velocity = pair.before.has_velocities() ? pair.before.velocities : ops.velocities();
  if constexpr (D == 3) r.helicity = relative_helicity(r.velocity, r.curl);
  return r;
}

template <int D>
TimePair<D> pair_from_snapshots(const SnapshotFile& a, const SnapshotFile& b, double dt, RetessellationMode mode) {
  if (a.header.n != b.header.n)
    throw DataFormatError("snapshot particle counts differ: " + std::to_string(a.header.n) + " at t^k, " +
                          std::to_string(b.header.n) + " at t^k+1");
  if (a.header.dimension != b.header.dimension)
    throw DataFormatError("snapshot dimensions differ: " + std::to_string(a.header.dimension) + " vs " +
                          std::to_string(b.header.dimension));
  if (a.header.box_length != b.header.box_length || a.header.periodic != b.header.periodic)
    throw DataFormatError("snapshot boxes differ");
  if (!(dt > 0.0)) throw ConfigError("dt must be positive");
  TimePair<D> tp;
  tp.domain = a.domain<D>();
  tp.before = a.cloud<D>();
  tp.after = b.cloud<D>().positions;
  tp.dt = dt;
  tp.mode = mode;
  tp.validate();
  return tp;
}

template <int D>
CsvTable pair_table(const PairOperators<D>& r) {
  std::vector<std::string> header{"id", "divergence"};
  if constexpr (D == 2) header.push_back("curl");
  else {
    header.insert(header.end(), {"curl_x", "curl_y", "curl_z", "helicity", "helicity_valid"});
  }
  header.push_back("valid");
  CsvTable t(header);
  for (std::size_t p = 0; p < r.divergence.size(); ++p) {
    std::vector<std::string> line{cell(p), cell(r.divergence.at(p))};
    for (int c = 0; c < r.curl.components; ++c) line.push_back(cell(r.curl.at(p, c)));
    if constexpr (D == 3) {
      line.push_back(cell(r.helicity->valid[p] ? r.helicity->at(p) : 0.0));
      line.push_back(cell(static_cast<int>(r.helicity->valid[p])));
    }
    line.push_back(cell(static_cast<int>(r.divergence.valid[p] && r.curl.valid[p])));
    t.add(std::move(line));
  }
  return t;
}

struct TwoSnapshotResult {
  int dimension = 0;
  std::filesystem::path csv;
  std::size_t n = 0;
  std::size_t valid = 0;
};

/// Operators from two snapshot files with matching particle order; writes one CSV row per particle.
inline TwoSnapshotResult two_snapshot_operators(const std::filesystem::path& path_k, const std::filesystem::path& path_k1,
                                                double dt, const PairOptions& opt, const std::filesystem::path& out_csv) {
  const auto a = read_snapshot(path_k);
  const auto b = read_snapshot(path_k1);
  TwoSnapshotResult res;
  res.dimension = a.header.dimension;
  res.csv = out_csv;
  res.n = a.header.n;
  auto go = [&]<int D>() {
    const auto pair = pair_from_snapshots<D>(a, b, dt, opt.mode);
    const auto r = pair_operators<D>(pair, opt);
    res.valid = r.divergence.num_valid();
    if (out_csv.has_parent_path()) detail::ensure_dir(out_csv.parent_path());
    pair_table<D>(r).write(out_csv);
  };
  if (a.header.dimension == 2) go.template operator()<2>();
  else go.template operator()<3>();
  return res;
}

namespace detail {

// -------------------------------------------------------------------------------------------
// turbulence-stats

inline void write_pdf(const Histogram& h, const std::filesystem::path& path, RunResult& res) {
  CsvTable t({"bin_lo", "bin_hi", "center", "count", "density", "log10_density"});
  for (std::size_t i = 0; i < h.counts.size(); ++i)
    t.row(h.edges[i], h.edges[i + 1], h.centers[i], h.counts[i], h.density[i], h.log10_density[i]);
  t.write(path);
  res.files.push_back(path);
}

inline void add_stats_row(CsvTable& t, std::size_t n, double delta, double tau, const std::string& name,
                          std::span<const double> v, std::span<const std::uint8_t> m, double rms) {
  const auto mo = moments(v, m);
  t.row(n, delta, tau, name, mo.mean, mo.variance, mo.flatness, rms, mo.count);
}

inline void run_turbulence(const ExperimentConfig& cfg, RunResult& res, nlohmann::json& timings, nlohmann::json& extra) {
  constexpr int D = 3;
  std::optional<SnapshotFile> snap_a, snap_b;
  std::vector<std::size_t> ns = cfg.n;
  std::optional<double> nu = cfg.nu, eps = cfg.epsilon;
  if (cfg.before) {
    snap_a = read_snapshot(*cfg.before);
    snap_b = read_snapshot(*cfg.after);
    if (snap_a->header.dimension != 3) throw DataFormatError("turbulence statistics need 3D snapshots");
    if (!nu) nu = snap_a->header.nu;
    if (!eps) eps = snap_a->header.epsilon;
    if (ns.empty()) ns = {snap_a->header.n};
    for (auto n : ns)
      if (n > snap_a->header.n)
        throw ConfigError("requested n = " + std::to_string(n) + " exceeds the snapshot count " +
                          std::to_string(snap_a->header.n));
  }
  const double tau = kolmogorov_time(nu, eps);
  extra["tau_eta"] = tau;
  const double dt = cfg.dt.front();

  // Full-size pair; smaller N use the leading particles (a uniform random subset).
  TimePair<D> full;
  std::optional<AnalyticField<D>> field;
  if (snap_a) {
    full = pair_from_snapshots<D>(*snap_a, *snap_b, dt, cfg.mode);
  } else {
    const auto dom = Domain<D>::periodic_box();
    field = make_field<D>(cfg.field, cfg.seed);
    const std::size_t nmax = *std::max_element(ns.begin(), ns.end());
    const auto cloud = make_cloud(*field, nmax, dom, cfg.seed);
    if (cfg.tau_p > 0.0) {
      InertialState<D> s0{cloud.positions, cloud.velocities, cfg.tau_p, 0.0};
      const auto tr = integrate_inertial(s0, *field, dom, dt, cfg.steps);
      extra["inertial_unstable_step"] = tr.unstable_step;
      extra["stokes"] = cfg.tau_p / tau;
      const auto& prev = tr.states[tr.states.size() - 2];
      ParticleCloud<D> c{prev.positions, prev.velocities};
      full = advect_euler(c, dt, dom, cfg.mode);
      full.after = tr.states.back().positions;
    } else {
      full = advect_euler(cloud, dt, dom, cfg.mode);
    }
  }

  CsvTable stats({"n", "delta", "tau_eta", "quantity", "mean", "variance", "flatness", "rms_error", "valid"});
  nlohmann::json spectra = nlohmann::json::array();
  const PairOptions opt{cfg.duals.front(), cfg.schemes.front(), cfg.mode};
  const double length = full.domain.extent[0];
  for (auto n : ns) {
    const auto t0 = std::chrono::steady_clock::now();
    TimePair<D> pair = full;
    if (pair.before.has_velocities()) pair.before.velocities.resize(n);
    pair.before.positions.resize(n);
    pair.after.resize(n);
    const auto r = pair_operators<D>(pair, opt);
    const double delta = mean_spacing_of(n, D, length);
    const std::string tag = "_n" + std::to_string(n);

    std::vector<double> curl_all, div, hel, comp[3];
    std::vector<std::uint8_t> curl_mask, div_mask, hel_mask, comp_mask;
    for (std::size_t p = 0; p < n; ++p) {
      for (int c = 0; c < 3; ++c) {
        curl_all.push_back(tau * r.curl.at(p, c));
        comp[c].push_back(tau * r.curl.at(p, c));
        curl_mask.push_back(r.curl.valid[p]);
      }
      comp_mask.push_back(r.curl.valid[p]);
      div.push_back(tau * r.divergence.at(p));
      div_mask.push_back(r.divergence.valid[p]);
      hel.push_back(r.helicity->at(p));
      hel_mask.push_back(r.helicity->valid[p]);
    }
    double rms = std::numeric_limits<double>::quiet_NaN();
    if (field && cfg.tau_p == 0.0) {
      auto exact = exact_values<D>(*field, std::span<const Vec<D>>(pair.before.positions), "curl");
      for (auto& e : exact) e *= tau;
      rms = rms_error(curl_all, exact, curl_mask);
    }
    const char* names[3] = {"curl_x", "curl_y", "curl_z"};
    add_stats_row(stats, n, delta, tau, "curl", curl_all, curl_mask, rms);
    for (int c = 0; c < 3; ++c)
      add_stats_row(stats, n, delta, tau, names[c], comp[c], comp_mask, std::numeric_limits<double>::quiet_NaN());
    add_stats_row(stats, n, delta, tau, "divergence", div, div_mask, std::numeric_limits<double>::quiet_NaN());
    add_stats_row(stats, n, delta, tau, "helicity", hel, hel_mask, std::numeric_limits<double>::quiet_NaN());

    BinSpec bins;
    bins.bins = cfg.bins;
    bins.sigmas = cfg.sigmas;
    write_pdf(pdf(curl_all, bins, curl_mask), cfg.output / ("pdf_curl" + tag + ".csv"), res);
    write_pdf(pdf(div, bins, div_mask), cfg.output / ("pdf_divergence" + tag + ".csv"), res);
    BinSpec hb = bins;
    hb.lo = -1.0;
    hb.hi = 1.0;
    write_pdf(pdf(hel, hb, hel_mask), cfg.output / ("pdf_helicity" + tag + ".csv"), res);

    // Box-projected enstrophy (curl components) and energy (velocity components) spectra.
    std::vector<GridField<D>> wgrid, ugrid;
    std::vector<double> vals(n);
    for (int c = 0; c < 3; ++c) {
      for (std::size_t p = 0; p < n; ++p) vals[p] = comp[c][p];
      wgrid.push_back(project_box<D>(pair.before.positions, vals, pair.domain, cfg.grid, comp_mask));
      for (std::size_t p = 0; p < n; ++p) vals[p] = tau * r.velocity[p][c];
      ugrid.push_back(project_box<D>(pair.before.positions, vals, pair.domain, cfg.grid));
    }
    const auto ew = spectrum<D>(wgrid, SpectrumKind::energy);
    const auto eu = spectrum<D>(ugrid, SpectrumKind::energy);
    const auto ew_clean = remove_poisson_noise(ew);
    const auto eu_clean = remove_poisson_noise(eu);
    CsvTable sp({"k", "modes", "enstrophy", "enstrophy_clean", "enstrophy_clipped", "energy", "energy_clean",
                 "energy_clipped"});
    for (std::size_t i = 0; i < ew.k.size(); ++i)
      sp.row(ew.k[i], ew.modes[i], ew.e[i], ew_clean.e[i], static_cast<int>(ew_clean.clipped[i]), eu.e[i],
             eu_clean.e[i], static_cast<int>(eu_clean.clipped[i]));
    const auto sp_path = cfg.output / ("spectrum" + tag + ".csv");
    sp.write(sp_path);
    res.files.push_back(sp_path);
    spectra.push_back({{"n", n},
                       {"enstrophy_poisson_coefficient", ew_clean.poisson_coefficient},
                       {"energy_poisson_coefficient", eu_clean.poisson_coefficient},
                       {"empty_cells", wgrid[0].empty_cells()}});
    timings.push_back(
        {{"n", n}, {"seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()}});
  }
  const auto path = cfg.output / "stats.csv";
  stats.write(path);
  res.files.insert(res.files.begin(), path);
  extra["spectra"] = spectra;
}

}  // namespace detail

/// Executes one experiment and writes its CSV tables and manifest.json into cfg.output.
/// Throws ConfigError, DataFormatError, InvariantViolation or GeometryError (see exit_code_for).
inline RunResult run(const ExperimentConfig& cfg) {
  cfg.validate();
  detail::ensure_dir(cfg.output);
  if (cfg.threads > 0) set_thread_count(cfg.threads);
  const int threads = thread_count();
  const auto t0 = std::chrono::steady_clock::now();
  RunResult res;
  nlohmann::json timings = nlohmann::json::array();
  nlohmann::json extra = nlohmann::json::object();
  auto dispatch = [&]<int D>() {
    switch (cfg.kind) {
      case ExperimentKind::convergence:
      case ExperimentKind::scheme_comparison:
      case ExperimentKind::voronoi_vs_modified: detail::run_sweep<D>(cfg, threads, res, timings); break;
      case ExperimentKind::correlation_kdelta:
      case ExperimentKind::correlation_synthetic: detail::run_correlation<D>(cfg, threads, res, timings, extra); break;
      case ExperimentKind::turbulence_stats:
        if constexpr (D == 3) detail::run_turbulence(cfg, res, timings, extra);
        break;
    }
  };
  if (cfg.dimension == 2) dispatch.template operator()<2>();
  else dispatch.template operator()<3>();

  nlohmann::json m = detail::environment_json(threads);
  m["config"] = cfg.to_json();
  m["results"] = extra;
  std::vector<std::string> files;
  for (const auto& f : res.files) files.push_back(f.filename().string());
  m["outputs"] = files;
  m["timings"] = timings;
  m["total_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  const auto mpath = cfg.output / "manifest.json";
  std::ofstream(mpath) << m.dump(2) << '\n';
  res.files.push_back(mpath);
  res.manifest = std::move(m);
  return res;
}

/// Runs an experiment and maps failures to exit codes (2 config, 3 data format, 4 numerical invariant).
inline int run_with_status(const ExperimentConfig& cfg, std::ostream& err) {
  try {
    run(cfg);
    return 0;
  } catch (const std::exception& e) {
    err << describe_error(e) << '\n';
    return exit_code_for(e);
  }
}

}  // namespace tessdiff::io
