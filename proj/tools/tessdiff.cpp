#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "tessdiff/io/experiments.hpp"

namespace fs = std::filesystem;
using namespace tessdiff;
using namespace tessdiff::io;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::optional<std::string> out;
};

ExperimentConfig load_with_overrides(const std::string& path, const Globals& g,
                                     std::initializer_list<ExperimentKind> allowed, const char* command) {
  auto cfg = load_config(path);
  bool ok = false;
  for (auto k : allowed) ok = ok || cfg.kind == k;
  if (!ok) throw ConfigError("'" + std::string(command) + "' cannot run experiment kind " + std::string(to_string(cfg.kind)));
  if (g.seed) cfg.seed = *g.seed;
  if (g.threads > 0) cfg.threads = g.threads;
  if (g.out) cfg.output = *g.out;
  cfg.validate();
  return cfg;
}

void report(const RunResult& r) {
  for (const auto& f : r.files) std::cout << f.string() << '\n';
}

template <int D>
void tessellate(const ParticleCloud<D>& cloud, const Domain<D>& dom, const fs::path& out) {
  const auto tess = build_delaunay<D>(cloud, dom);
  const auto classic = dual_cells(tess, DualKind::classic_circumcenter);
  const auto centroid = dual_cells(tess, DualKind::modified_centroid);
  const auto incident = dual_cells(tess, DualKind::incident_simplex_sum);
  CsvTable t({"id", "classic_volume", "classic_valid", "centroid_volume", "centroid_valid", "incident_volume",
              "incident_valid", "incident_simplices"});
  double sc = 0.0, sm = 0.0;
  for (std::size_t p = 0; p < cloud.size(); ++p) {
    t.row(p, classic.volume[p], static_cast<int>(classic.valid[p]), centroid.volume[p],
          static_cast<int>(centroid.valid[p]), incident.volume[p], static_cast<int>(incident.valid[p]),
          tess.incident(static_cast<int>(p)).size());
    sc += classic.volume[p];
    sm += centroid.volume[p];
  }
  fs::create_directories(out);
  t.write(out / "cells.csv");
  nlohmann::json m = nlohmann::json::object();
  m["dimension"] = D;
  m["n"] = cloud.size();
  m["simplices"] = tess.num_simplices();
  m["ghost_points"] = tess.num_points() - tess.num_particles();
  m["sum_classic_volume"] = sc;
  m["sum_centroid_volume"] = sm;
  m["box_volume"] = dom.volume();
  std::ofstream(out / "tessellation.json") << m.dump(2) << '\n';
  std::cout << (out / "cells.csv").string() << '\n' << (out / "tessellation.json").string() << '\n';
}

template <int D>
void synth_field(std::size_t n, int k_max, std::optional<double> exponent, double dt, std::uint64_t seed,
                 const fs::path& out) {
  const auto dom = Domain<D>::periodic_box();
  const SyntheticSpectrumField<D> f(k_max, exponent.value_or(SyntheticSpectrumField<D>::default_exponent()), seed);
  const auto field = f.as_field();
  const auto cloud = sample_field(field, seed_uniform<D>(n, dom, seed));
  const auto pair = advect_euler(cloud, dt, dom);
  SnapshotHeader h;
  h.time = 0.0;
  fs::create_directories(out);
  write_snapshot(out / "snapshot_k.bin", SnapshotFile::from_cloud(cloud, dom, h));
  h.time = dt;
  ParticleCloud<D> after{pair.after, {}};
  for (const auto& x : pair.after) after.velocities.push_back(field.velocity(x));
  write_snapshot(out / "snapshot_k1.bin", SnapshotFile::from_cloud(after, dom, h));
  std::cout << (out / "snapshot_k.bin").string() << '\n' << (out / "snapshot_k1.bin").string() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tessellation-based finite-time differential operators for particle clouds"};
  app.require_subcommand(1);
  Globals g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Random seed (overrides config)")->envname("TESSDIFF_SEED");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware)")->envname("TESSDIFF_THREADS");
  std::string out_value;
  auto* out_opt = app.add_option("--out", out_value, "Output directory (overrides config)");

  std::string config;
  auto* convergence = app.add_subcommand("convergence", "Convergence, scheme-comparison or voronoi-vs-modified sweep");
  convergence->add_option("config", config, "INI experiment config")->required()->check(CLI::ExistingFile);
  auto* correlate = app.add_subcommand("correlate", "Pearson correlation sweeps (k delta or synthetic spectrum)");
  correlate->add_option("config", config, "INI experiment config")->required()->check(CLI::ExistingFile);
  auto* stats = app.add_subcommand("stats", "Turbulence statistics on a synthetic or ingested cloud");
  stats->add_option("config", config, "INI experiment config")->required()->check(CLI::ExistingFile);

  std::string input;
  int dim = 3;
  std::size_t n = 0;
  auto* tess_cmd = app.add_subcommand("tessellate", "Delaunay tessellation and dual-cell volumes");
  tess_cmd->add_option("--input", input, "Snapshot file")->check(CLI::ExistingFile);
  tess_cmd->add_option("--dim", dim, "Dimension for a random cloud")->check(CLI::IsMember({2, 3}));
  tess_cmd->add_option("--n", n, "Particle count for a random cloud");

  std::string before, after, dual = "modified", scheme = "D", mode = "frozen";
  double dt = 0.0;
  auto* ops = app.add_subcommand("operators", "Divergence, curl and helicity from two snapshots");
  ops->add_option("--before", before, "Snapshot at t^k")->required()->check(CLI::ExistingFile);
  ops->add_option("--after", after, "Snapshot at t^k+1 (same particle order)")->required()->check(CLI::ExistingFile);
  ops->add_option("--dt", dt, "Time between the snapshots")->required();
  ops->add_option("--dual", dual, "classic | modified | modified_centroid | incident_simplex_sum");
  ops->add_option("--scheme", scheme, "D | D_lin | D_log");
  ops->add_option("--mode", mode, "frozen | retessellate");

  int k_max = 16;
  std::optional<double> exponent;
  double synth_dt = 1e-3;
  auto* synth = app.add_subcommand("synth-field", "Write a snapshot pair advected by a synthetic power-law field");
  synth->add_option("--dim", dim, "Dimension")->check(CLI::IsMember({2, 3}));
  synth->add_option("--n", n, "Particle count")->required();
  synth->add_option("--k-max", k_max, "Largest wavenumber");
  synth->add_option("--exponent", exponent, "Spectral exponent (default -3 in 2D, -5/3 in 3D)");
  synth->add_option("--dt", synth_dt, "Advection step");

  int grid = 64;
  std::optional<double> nu, eps;
  auto* ingest = app.add_subcommand("ingest", "Turbulence statistics from a 3D snapshot pair");
  ingest->add_option("--before", before, "Snapshot at t^k")->required()->check(CLI::ExistingFile);
  ingest->add_option("--after", after, "Snapshot at t^k+1")->required()->check(CLI::ExistingFile);
  ingest->add_option("--dt", dt, "Time between the snapshots")->required();
  ingest->add_option("--grid", grid, "Projection grid size M");
  ingest->add_option("--nu", nu, "Kinematic viscosity (else from the snapshot header)");
  ingest->add_option("--epsilon", eps, "Dissipation rate (else from the snapshot header)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }
  if (seed_opt->count()) g.seed = seed_value;
  if (out_opt->count()) g.out = out_value;
  if (g.threads > 0) set_thread_count(g.threads);
  const fs::path out = g.out.value_or("results");
  const std::uint64_t seed = g.seed.value_or(1);

  try {
    if (convergence->parsed()) {
      report(run(load_with_overrides(config, g,
                                     {ExperimentKind::convergence, ExperimentKind::scheme_comparison,
                                      ExperimentKind::voronoi_vs_modified},
                                     "convergence")));
    } else if (correlate->parsed()) {
      report(run(load_with_overrides(
          config, g, {ExperimentKind::correlation_kdelta, ExperimentKind::correlation_synthetic}, "correlate")));
    } else if (stats->parsed()) {
      report(run(load_with_overrides(config, g, {ExperimentKind::turbulence_stats}, "stats")));
    } else if (tess_cmd->parsed()) {
      if (!input.empty()) {
        const auto s = read_snapshot(input);
        if (s.header.dimension == 2) tessellate<2>(s.cloud<2>(), s.domain<2>(), out);
        else tessellate<3>(s.cloud<3>(), s.domain<3>(), out);
      } else {
        if (n == 0) throw ConfigError("tessellate needs --input or --n");
        if (dim == 2) tessellate<2>(seed_uniform<2>(n, Domain<2>::periodic_box(), seed), Domain<2>::periodic_box(), out);
        else tessellate<3>(seed_uniform<3>(n, Domain<3>::periodic_box(), seed), Domain<3>::periodic_box(), out);
      }
    } else if (ops->parsed()) {
      PairOptions opt{dual, parse_scheme(scheme), parse_retessellation_mode(mode)};
      if (dual != "modified") parse_dual_kind(dual);
      const auto r = two_snapshot_operators(before, after, dt, opt, out / "operators.csv");
      std::cout << r.csv.string() << '\n';
      std::cerr << r.valid << " of " << r.n << " particles valid\n";
    } else if (synth->parsed()) {
      if (n == 0) throw ConfigError("synth-field needs --n");
      if (dim == 2) synth_field<2>(n, k_max, exponent, synth_dt, seed, out);
      else synth_field<3>(n, k_max, exponent, synth_dt, seed, out);
    } else if (ingest->parsed()) {
      ExperimentConfig cfg;
      cfg.kind = ExperimentKind::turbulence_stats;
      cfg.dimension = 3;
      cfg.seed = seed;
      cfg.output = out;
      cfg.threads = g.threads;
      cfg.field.name = "synthetic";
      cfg.dt = {dt};
      cfg.schemes = {Scheme::D};
      cfg.duals = {"modified"};
      cfg.methods = {Method::lagrangian};
      cfg.quantity = "curl";
      cfg.grid = grid;
      cfg.nu = nu;
      cfg.epsilon = eps;
      cfg.before = before;
      cfg.after = after;
      report(run(cfg));
    }
  } catch (const std::exception& e) {
    std::cerr << describe_error(e) << '\n';
    return exit_code_for(e);
  }
  return 0;
}
