#pragma once

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"
#include "tessdiff/dual_cells.hpp"
#include "tessdiff/errors.hpp"
#include "tessdiff/operators.hpp"
#include "tessdiff/time_pair.hpp"

namespace tessdiff::io {

enum class ExperimentKind {
  convergence,
  scheme_comparison,
  voronoi_vs_modified,
  correlation_kdelta,
  correlation_synthetic,
  turbulence_stats,
};

inline std::string_view to_string(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::convergence: return "convergence";
    case ExperimentKind::scheme_comparison: return "scheme-comparison";
    case ExperimentKind::voronoi_vs_modified: return "voronoi-vs-modified";
    case ExperimentKind::correlation_kdelta: return "correlation-kdelta";
    case ExperimentKind::correlation_synthetic: return "correlation-synthetic";
    case ExperimentKind::turbulence_stats: return "turbulence-stats";
  }
  return "?";
}

inline ExperimentKind parse_experiment_kind(std::string_view s) {
  for (auto k : {ExperimentKind::convergence, ExperimentKind::scheme_comparison, ExperimentKind::voronoi_vs_modified,
                 ExperimentKind::correlation_kdelta, ExperimentKind::correlation_synthetic,
                 ExperimentKind::turbulence_stats})
    if (s == to_string(k)) return k;
  throw ConfigError("unknown experiment kind '" + std::string(s) + "'");
}

/// Operator evaluation path.
enum class Method { lagrangian, eulerian, wtli };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::lagrangian: return "lagrangian";
    case Method::eulerian: return "eulerian";
    case Method::wtli: return "wtli";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "lagrangian") return Method::lagrangian;
  if (s == "eulerian") return Method::eulerian;
  if (s == "wtli") return Method::wtli;
  throw ConfigError("unknown method '" + std::string(s) + "'");
}

/// "modified" resolves to the dimension's modified-cell default.
template <int D>
DualKind resolve_dual(std::string_view s) {
  if (s == "modified") return default_modified_kind<D>();
  return parse_dual_kind(s);
}

struct FieldSpec {
  /// derivative | cos_cos | sin_cos_cos | divergence | sine | synthetic
  std::string name;
  std::vector<double> k;           ///< sine wavenumbers
  std::vector<int> k_max;          ///< synthetic cutoffs
  std::optional<double> exponent;  ///< synthetic spectral exponent
  std::optional<std::uint64_t> seed;
};

struct ExperimentConfig {
  ExperimentKind kind = ExperimentKind::convergence;
  int dimension = 2;
  std::uint64_t seed = 1;
  std::filesystem::path output = "results";
  int threads = 0;

  FieldSpec field;

  std::vector<std::size_t> n;
  std::vector<double> dt;
  std::vector<double> kdelta;
  std::vector<double> kmax_delta;
  std::size_t n_max = 0;  ///< 0 disables the cap
  std::vector<Scheme> schemes;
  std::vector<std::string> duals;
  RetessellationMode mode = RetessellationMode::frozen_connectivity;
  std::vector<Method> methods;
  std::string quantity = "divergence";  ///< divergence | curl

  int grid = 64;
  int bins = 401;
  double sigmas = 10.0;
  std::optional<double> nu, epsilon;
  double tau_p = 0.0;
  int steps = 0;
  std::optional<std::filesystem::path> before, after;

  void validate() const;
  nlohmann::json to_json() const;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

inline double parse_double(const std::string& key, const std::string& s) {
  double v = 0.0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size() || !std::isfinite(v))
    throw ConfigError("'" + key + "': expected a number, got '" + s + "'");
  return v;
}

inline std::int64_t parse_int(const std::string& key, const std::string& s) {
  // Accept integral values written in floating-point notation such as 1e5.
  const double v = parse_double(key, s);
  if (v != std::floor(v) || std::fabs(v) > 9.0e15) throw ConfigError("'" + key + "': expected an integer, got '" + s + "'");
  return static_cast<std::int64_t>(v);
}

inline std::vector<double> positive_list(const std::string& key, const std::string& s) {
  std::vector<double> out;
  for (const auto& item : split_list(s)) {
    const double v = parse_double(key, item);
    if (!(v > 0.0)) throw ConfigError("'" + key + "': entries must be positive, got " + item);
    out.push_back(v);
  }
  if (out.empty()) throw ConfigError("'" + key + "' is an empty list");
  return out;
}

inline std::vector<std::size_t> positive_int_list(const std::string& key, const std::string& s) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(s)) {
    const auto v = parse_int(key, item);
    if (v <= 0) throw ConfigError("'" + key + "': entries must be positive, got " + item);
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError("'" + key + "' is an empty list");
  return out;
}

}  // namespace detail

/// Parses INI text with sections [experiment], [field], [sweep] and [stats]. Unknown sections or keys are errors.
inline ExperimentConfig parse_config(const std::string& text) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  try {
    std::istringstream in(text);
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw ConfigError(std::string("malformed config: ") + e.what());
  }
  static const std::map<std::string, std::set<std::string>> allowed{
      {"experiment", {"kind", "dimension", "seed", "output", "threads"}},
      {"field", {"name", "k", "k_max", "exponent", "seed"}},
      {"sweep", {"n", "dt", "kdelta", "kmax_delta", "n_max", "scheme", "dual", "mode", "method", "quantity"}},
      {"stats", {"grid", "bins", "sigmas", "nu", "epsilon", "tau_p", "steps", "before", "after"}},
  };
  std::map<std::string, std::string> kv;
  for (const auto& [section, body] : tree) {
    const auto it = allowed.find(section);
    if (it == allowed.end()) {
      if (body.empty()) throw ConfigError("key '" + section + "' must be inside a section");
      throw ConfigError("unknown section [" + section + "]");
    }
    for (const auto& [key, value] : body) {
      if (!it->second.count(key)) throw ConfigError("unknown key '" + key + "' in [" + section + "]");
      kv[section + "." + key] = detail::trim(value.data());
    }
  }
  auto get = [&](const std::string& k) -> std::optional<std::string> {
    const auto it = kv.find(k);
    if (it == kv.end()) return std::nullopt;
    return it->second;
  };

  ExperimentConfig c;
  const auto kind = get("experiment.kind");
  if (!kind) throw ConfigError("missing 'kind' in [experiment]");
  c.kind = parse_experiment_kind(*kind);
  const auto dim = get("experiment.dimension");
  if (!dim) throw ConfigError("missing 'dimension' in [experiment]");
  c.dimension = static_cast<int>(detail::parse_int("dimension", *dim));
  if (auto v = get("experiment.seed")) {
    const auto s = detail::parse_int("seed", *v);
    if (s < 0) throw ConfigError("'seed' must be non-negative");
    c.seed = static_cast<std::uint64_t>(s);
  }
  if (auto v = get("experiment.output")) c.output = *v;
  if (auto v = get("experiment.threads")) c.threads = static_cast<int>(detail::parse_int("threads", *v));

  switch (c.kind) {
    case ExperimentKind::voronoi_vs_modified: c.field.name = "divergence"; break;
    case ExperimentKind::correlation_kdelta: c.field.name = "sine"; break;
    case ExperimentKind::correlation_synthetic:
    case ExperimentKind::turbulence_stats: c.field.name = "synthetic"; break;
    default: c.field.name = "derivative";
  }
  if (auto v = get("field.name")) c.field.name = *v;
  if (auto v = get("field.k")) c.field.k = detail::positive_list("k", *v);
  if (auto v = get("field.k_max"))
    for (auto k : detail::positive_int_list("k_max", *v)) c.field.k_max.push_back(static_cast<int>(k));
  if (auto v = get("field.exponent")) c.field.exponent = detail::parse_double("exponent", *v);
  if (auto v = get("field.seed")) c.field.seed = static_cast<std::uint64_t>(detail::parse_int("field seed", *v));

  if (auto v = get("sweep.n")) c.n = detail::positive_int_list("n", *v);
  if (auto v = get("sweep.dt")) c.dt = detail::positive_list("dt", *v);
  if (auto v = get("sweep.kdelta")) c.kdelta = detail::positive_list("kdelta", *v);
  if (auto v = get("sweep.kmax_delta")) c.kmax_delta = detail::positive_list("kmax_delta", *v);
  if (auto v = get("sweep.n_max")) c.n_max = detail::positive_int_list("n_max", *v).front();
  if (auto v = get("sweep.scheme"))
    for (const auto& s : detail::split_list(*v)) c.schemes.push_back(parse_scheme(s));
  if (auto v = get("sweep.dual"))
    for (const auto& s : detail::split_list(*v)) {
      if (s != "modified") parse_dual_kind(s);
      c.duals.push_back(s);
    }
  if (auto v = get("sweep.mode")) c.mode = parse_retessellation_mode(*v);
  if (auto v = get("sweep.method"))
    for (const auto& s : detail::split_list(*v)) c.methods.push_back(parse_method(s));
  if (auto v = get("sweep.quantity")) c.quantity = *v;

  if (auto v = get("stats.grid")) c.grid = static_cast<int>(detail::parse_int("grid", *v));
  if (auto v = get("stats.bins")) c.bins = static_cast<int>(detail::parse_int("bins", *v));
  if (auto v = get("stats.sigmas")) c.sigmas = detail::parse_double("sigmas", *v);
  if (auto v = get("stats.nu")) c.nu = detail::parse_double("nu", *v);
  if (auto v = get("stats.epsilon")) c.epsilon = detail::parse_double("epsilon", *v);
  if (auto v = get("stats.tau_p")) c.tau_p = detail::parse_double("tau_p", *v);
  if (auto v = get("stats.steps")) c.steps = static_cast<int>(detail::parse_int("steps", *v));
  if (auto v = get("stats.before")) c.before = *v;
  if (auto v = get("stats.after")) c.after = *v;

  // Kind-dependent defaults.
  if (c.schemes.empty()) {
    if (c.kind == ExperimentKind::scheme_comparison) c.schemes = {Scheme::D, Scheme::D_lin, Scheme::D_log};
    else c.schemes = {Scheme::D};
  }
  if (c.duals.empty()) {
    if (c.kind == ExperimentKind::voronoi_vs_modified) c.duals = {"classic", "modified"};
    else c.duals = {"modified"};
  }
  if (c.methods.empty()) c.methods = {Method::lagrangian};
  if (c.dt.empty() && (c.kind == ExperimentKind::correlation_kdelta || c.kind == ExperimentKind::correlation_synthetic ||
                       c.kind == ExperimentKind::turbulence_stats))
    c.dt = {1e-3};
  if (c.kind == ExperimentKind::correlation_synthetic && c.quantity == "divergence" && !get("sweep.quantity"))
    c.quantity = "curl";
  if (c.kind == ExperimentKind::turbulence_stats) c.quantity = "curl";
  c.validate();
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config " + path.string());
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config(ss.str());
}

inline void ExperimentConfig::validate() const {
  if (dimension != 2 && dimension != 3) throw ConfigError("dimension must be 2 or 3, got " + std::to_string(dimension));
  if (threads < 0) throw ConfigError("threads must be non-negative");
  static const std::set<std::string> names{"derivative", "cos_cos", "sin_cos_cos", "divergence", "sine", "synthetic"};
  if (!names.count(field.name)) throw ConfigError("unknown field '" + field.name + "'");
  if (field.name == "cos_cos" && dimension != 2) throw ConfigError("field cos_cos is two-dimensional");
  if (field.name == "sin_cos_cos" && dimension != 3) throw ConfigError("field sin_cos_cos is three-dimensional");
  if (field.name == "sine" && field.k.empty()) throw ConfigError("field 'sine' needs k");
  const bool ingested = kind == ExperimentKind::turbulence_stats && before.has_value();
  if (field.name == "synthetic" && field.k_max.empty() && !ingested) throw ConfigError("field 'synthetic' needs k_max");
  if (quantity != "divergence" && quantity != "curl") throw ConfigError("quantity must be divergence or curl");
  for (auto m : methods)
    if (m == Method::wtli && dimension != 2) throw ConfigError("method wtli is two-dimensional only");
  if (grid < 4) throw ConfigError("grid must be at least 4");
  if (bins < 1) throw ConfigError("bins must be positive");
  if (!(sigmas > 0.0)) throw ConfigError("sigmas must be positive");
  if (tau_p < 0.0) throw ConfigError("tau_p must be non-negative");
  if (steps < 0) throw ConfigError("steps must be non-negative");
  if (tau_p > 0.0 && steps < 1) throw ConfigError("inertial particles (tau_p > 0) need steps >= 1");

  auto need_n = [&] {
    if (n.empty()) throw ConfigError("experiment " + std::string(io::to_string(kind)) + " needs a non-empty n list");
  };
  auto need_dt = [&] {
    if (dt.empty()) throw ConfigError("experiment " + std::string(io::to_string(kind)) + " needs a non-empty dt list");
  };
  switch (kind) {
    case ExperimentKind::convergence:
    case ExperimentKind::scheme_comparison:
    case ExperimentKind::voronoi_vs_modified:
      need_n();
      need_dt();
      if (field.name == "sine" && field.k.size() != 1) throw ConfigError("sweep experiments take a single k");
      if (field.name == "synthetic" && field.k_max.size() != 1) throw ConfigError("sweep experiments take a single k_max");
      break;
    case ExperimentKind::correlation_kdelta:
      if (field.name != "sine") throw ConfigError("correlation-kdelta uses the sine field");
      if (kdelta.empty()) need_n();
      need_dt();
      break;
    case ExperimentKind::correlation_synthetic:
      if (field.name != "synthetic") throw ConfigError("correlation-synthetic uses the synthetic field");
      if (kmax_delta.empty()) need_n();
      need_dt();
      break;
    case ExperimentKind::turbulence_stats:
      if (dimension != 3) throw ConfigError("turbulence-stats is three-dimensional");
      if (before.has_value() != after.has_value()) throw ConfigError("snapshot input needs both 'before' and 'after'");
      if (!before) {
        need_n();
        if (field.name != "synthetic") throw ConfigError("turbulence-stats generates a synthetic field");
        if (field.k_max.size() != 1) throw ConfigError("turbulence-stats takes a single k_max");
      }
      if (dt.size() != 1) throw ConfigError("turbulence-stats takes a single dt");
      break;
  }
}

inline nlohmann::json ExperimentConfig::to_json() const {
  nlohmann::json j;
  j["kind"] = std::string(io::to_string(kind));
  j["dimension"] = dimension;
  j["seed"] = seed;
  j["output"] = output.string();
  j["threads"] = threads;
  nlohmann::json f;
  f["name"] = field.name;
  if (!field.k.empty()) f["k"] = field.k;
  if (!field.k_max.empty()) f["k_max"] = field.k_max;
  if (field.exponent) f["exponent"] = *field.exponent;
  f["seed"] = field.seed.value_or(seed);
  j["field"] = f;
  nlohmann::json s;
  s["n"] = n;
  s["dt"] = dt;
  if (!kdelta.empty()) s["kdelta"] = kdelta;
  if (!kmax_delta.empty()) s["kmax_delta"] = kmax_delta;
  s["n_max"] = n_max;
  std::vector<std::string> sch, meth;
  for (auto x : schemes) sch.emplace_back(tessdiff::to_string(x));
  for (auto x : methods) meth.emplace_back(io::to_string(x));
  s["scheme"] = sch;
  s["dual"] = duals;
  s["mode"] = std::string(tessdiff::to_string(mode));
  s["method"] = meth;
  s["quantity"] = quantity;
  j["sweep"] = s;
  if (kind == ExperimentKind::turbulence_stats) {
    nlohmann::json st;
    st["grid"] = grid;
    st["bins"] = bins;
    st["sigmas"] = sigmas;
    if (nu) st["nu"] = *nu;
    if (epsilon) st["epsilon"] = *epsilon;
    st["tau_p"] = tau_p;
    st["steps"] = steps;
    if (before) st["before"] = before->string();
    if (after) st["after"] = after->string();
    j["stats"] = st;
  }
  return j;
}

}  // namespace tessdiff::io
