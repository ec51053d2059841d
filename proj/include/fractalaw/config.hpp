#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "iteration.hpp"
#include "measure_io.hpp"
#include "prob_metric.hpp"
#include "scaling.hpp"
#include "scaling_io.hpp"

namespace fractalaw {

inline const std::vector<std::string>& experiment_names() {
  static const std::vector<std::string> names = {"tail-check", "moment-probe", "contract-check", "converge",
                                                 "selfsim",    "invariant-set", "fixed-point"};
  return names;
}

// A measure used as input to an experiment: either a fixed measure, or the
// depth-k iterate of the random law started from a fixed measure (which is
// then a random measure, one realization per construction tree).
struct MeasureSource {
  DiscreteMeasure start;
  std::size_t depth = 0;

  bool is_fixed() const { return depth == 0; }
};

struct Expectations {
  // converge: limit moments (1-D)
  std::optional<double> mean;
  std::optional<double> variance;
  double moment_tol = 1e-6;
  // converge: l_1 distance of mu_n to a 2^20-point discretization of U[0,1]
  std::optional<double> uniform_reference_tol;
  // converge: observed l_q*(mu_k, mu_n) against the a-priori bound
  bool error_bound = false;
  // converge: fitted ratio target
  std::optional<double> ratio;
  double ratio_tol = 1e-6;
  // tail-check
  std::optional<std::string> tail_oracle; // "reciprocal" or "inv_log"
  std::optional<std::pair<double, double>> gamma_range;
  std::optional<double> gamma_max;
  std::optional<bool> bounded_tail;
  // moment-probe
  std::optional<bool> divergent;
  std::optional<double> probe_mean;
  std::optional<double> probe_mean_tol;
};

struct FixedPointBlock {
  std::vector<double> omega;
  std::vector<AffineContraction> maps; // one per omega
  std::vector<Point> start;            // one per omega
  std::size_t steps = 50;
  double tolerance = 1e-10;
};

struct InvariantSetBlock {
  std::vector<double> omega;
  std::vector<std::vector<AffineContraction>> maps; // maps[i][w]
  std::vector<Point> start;
  std::size_t steps = 10;
  double epsilon = 0.0;
  std::size_t capacity = 1u << 16;
};

struct ExperimentConfig {
  std::string experiment;
  std::uint64_t seed = 0;
  double q = 1.0;
  std::optional<RandomScalingLawSpec> spec;
  Norm norm = Norm::euclidean;
  std::optional<MeasureSource> mu0, mu0_alt, alpha, mu, nu;
  std::size_t depth = 0;
  std::size_t ensemble_size = 1;
  std::vector<double> t_grid;
  PrunePolicy prune;
  std::size_t support_cap = 512;
  double delta = 1e-3;
  double ratio_slack = 0.05;
  double selfsim_factor = 3.0;
  bool geometric_slack = true;
  std::vector<std::size_t> schedule;
  Expectations expect;
  std::optional<FixedPointBlock> fixed_point;
  std::optional<InvariantSetBlock> invariant_set;
  std::size_t threads = 1;
  nlohmann::ordered_json raw; // the parsed document, used for the report echo

  const RandomScalingLawSpec& require_spec() const {
    if (!spec) throw ConfigError("config: '" + experiment + "' needs 'spec'");
    return *spec;
  }
  TransportOptions transport() const {
    TransportOptions o;
    o.support_cap = support_cap;
    o.norm = norm;
    o.threads = threads;
    return o;
  }
};

struct ConfigOverrides {
  std::optional<std::string> experiment;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> threads;
};

namespace detail {

using cjson = nlohmann::ordered_json;

inline void allow_keys(const cjson& j, const char* where, std::initializer_list<const char*> keys) {
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError(std::string("config: unknown key '") + it.key() + "' in " + where);
}

// Non-negative integer field; JSON -1 or 2.5 would otherwise convert silently.
template <class T = std::size_t>
T whole(const cjson& j, const char* what) {
  if (!j.is_number_unsigned()) throw ConfigError(std::string("config: '") + what + "' must be a non-negative integer");
  return j.get<T>();
}

template <class T = std::size_t>
T whole_or(const cjson& j, const char* key, T fallback) {
  return j.contains(key) ? whole<T>(j.at(key), key) : fallback;
}

inline double positive(double x, const char* what) {
  if (!(x > 0.0) || !std::isfinite(x)) throw ConfigError(std::string("config: '") + what + "' must be positive");
  return x;
}

inline Point point_from(const cjson& j, const char* what) {
  const auto v = number_or_array(j, what);
  if (v.empty() || v.size() > kMaxDimension) throw ConfigError(std::string("config: '") + what + "' must have 1 to 3 coordinates");
  Point p = Point::zero(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) p[i] = v[i];
  return p;
}

inline MeasureSource source_from(const cjson& j, const char* what, const std::optional<RandomScalingLawSpec>& spec) {
  const auto fallback = [&]() {
    if (!spec) throw ConfigError(std::string("config: '") + what + "' = \"default\" needs a spec");
    return default_mu0(*spec);
  };
  if (j.is_string()) {
    if (j.get<std::string>() != "default") throw ConfigError(std::string("config: '") + what + "' must be \"default\" or a measure");
    return {fallback(), 0};
  }
  if (j.is_number() || j.is_array()) return {DiscreteMeasure::dirac(point_from(j, what)), 0};
  if (!j.is_object()) throw ConfigError(std::string("config: bad measure descriptor '") + what + "'");
  if (j.contains("dirac")) {
    allow_keys(j, what, {"dirac"});
    return {DiscreteMeasure::dirac(point_from(j.at("dirac"), what)), 0};
  }
  if (j.contains("atoms")) {
    allow_keys(j, what, {"dimension", "atoms"});
    DiscreteMeasure m = measure_from_json(j);
    if (!m.is_unit_mass()) throw ConfigError(std::string("config: '") + what + "' must have unit mass");
    return {std::move(m), 0};
  }
  if (j.contains("iterate")) {
    allow_keys(j, what, {"iterate", "start"});
    MeasureSource s = j.contains("start") ? source_from(j.at("start"), what, spec) : MeasureSource{fallback(), 0};
    if (!s.is_fixed()) throw ConfigError(std::string("config: '") + what + "' start must be a fixed measure");
    s.depth = whole(j.at("iterate"), "iterate");
    return s;
  }
  throw ConfigError(std::string("config: measure descriptor '") + what + "' needs dirac, atoms or iterate");
}

inline std::vector<double> grid_from(const cjson& j) {
  std::vector<double> g;
  if (j.is_array()) {
    g = number_or_array(j, "t_grid");
  } else if (j.is_object() && (j.contains("log_space") || j.contains("linear"))) {
    allow_keys(j, "t_grid", {"log_space", "linear"});
    const bool log = j.contains("log_space");
    const auto& spec = log ? j.at("log_space") : j.at("linear");
    if (!spec.is_array() || spec.size() != 3) throw ConfigError("config: t_grid range must be [lo, hi, count]");
    const double lo = spec[0].get<double>(), hi = spec[1].get<double>();
    const auto count = whole(spec[2], "t_grid count");
    if (count < 2 || !(lo > 0.0) || !(hi > lo)) throw ConfigError("config: t_grid range needs 0 < lo < hi and count >= 2");
    for (std::size_t i = 0; i < count; ++i) {
      const double f = static_cast<double>(i) / static_cast<double>(count - 1);
      double t = log ? std::exp(std::log(lo) + f * (std::log(hi) - std::log(lo))) : lo + f * (hi - lo);
      if (i == 0) t = lo;
      if (i + 1 == count) t = hi;
      g.push_back(t);
    }
  } else {
    throw ConfigError("config: t_grid must be an array or {log_space|linear: [lo, hi, count]}");
  }
  if (g.empty()) throw ConfigError("config: t_grid is empty");
  for (std::size_t i = 0; i < g.size(); ++i) {
    if (!(g[i] > 0.0) || !std::isfinite(g[i])) throw ConfigError("config: t_grid values must be positive");
    if (i > 0 && !(g[i] > g[i - 1])) throw ConfigError("config: t_grid must be strictly increasing");
  }
  return g;
}

inline PrunePolicy prune_from(const cjson& j) {
  if (!j.is_object()) throw ConfigError("config: 'prune' must be an object");
  allow_keys(j, "prune", {"epsilon", "cap", "auto_threshold", "atom_limit"});
  PrunePolicy p;
  p.epsilon = j.value("epsilon", 0.0);
  if (p.epsilon < 0.0) throw ConfigError("config: prune.epsilon must be >= 0");
  if (j.contains("cap") && !j.at("cap").is_null()) p.cap = whole(j.at("cap"), "cap");
  if (p.cap == 0) throw ConfigError("config: prune.cap must be >= 1");
  p.auto_threshold = whole_or(j, "auto_threshold", p.auto_threshold);
  p.atom_limit = whole_or(j, "atom_limit", p.atom_limit);
  return p;
}

inline Expectations expect_from(const cjson& j) {
  if (!j.is_object()) throw ConfigError("config: 'expect' must be an object");
  allow_keys(j, "expect",
             {"mean", "variance", "moment_tol", "uniform_reference_tol", "error_bound", "ratio", "ratio_tol", "tail_oracle",
              "gamma_range", "gamma_max", "bounded_tail", "divergent", "probe_mean", "probe_mean_tol"});
  Expectations e;
  if (j.contains("mean")) e.mean = j.at("mean").get<double>();
  if (j.contains("variance")) e.variance = j.at("variance").get<double>();
  e.moment_tol = j.value("moment_tol", e.moment_tol);
  if (j.contains("uniform_reference_tol")) e.uniform_reference_tol = positive(j.at("uniform_reference_tol").get<double>(), "uniform_reference_tol");
  e.error_bound = j.value("error_bound", false);
  if (j.contains("ratio")) e.ratio = j.at("ratio").get<double>();
  e.ratio_tol = j.value("ratio_tol", e.ratio_tol);
  if (j.contains("tail_oracle")) {
    e.tail_oracle = j.at("tail_oracle").get<std::string>();
    if (*e.tail_oracle != "reciprocal" && *e.tail_oracle != "inv_log")
      throw ConfigError("config: expect.tail_oracle must be 'reciprocal' or 'inv_log'");
  }
  if (j.contains("gamma_range")) {
    const auto& g = j.at("gamma_range");
    if (!g.is_array() || g.size() != 2) throw ConfigError("config: expect.gamma_range must be [lo, hi]");
    e.gamma_range = std::make_pair(g[0].get<double>(), g[1].get<double>());
  }
  if (j.contains("gamma_max")) e.gamma_max = j.at("gamma_max").get<double>();
  if (j.contains("bounded_tail")) e.bounded_tail = j.at("bounded_tail").get<bool>();
  if (j.contains("divergent")) e.divergent = j.at("divergent").get<bool>();
  if (j.contains("probe_mean")) e.probe_mean = j.at("probe_mean").get<double>();
  if (j.contains("probe_mean_tol")) e.probe_mean_tol = positive(j.at("probe_mean_tol").get<double>(), "probe_mean_tol");
  return e;
}

inline std::vector<double> omega_from(const cjson& j) {
  auto p = number_or_array(j, "omega");
  double s = 0.0;
  for (double x : p) {
    if (!(x > 0.0)) throw ConfigError("config: omega probabilities must be positive");
    s += x;
  }
  if (std::abs(s - 1.0) > 1e-12) throw ConfigError("config: omega probabilities must sum to 1");
  return p;
}

inline AffineContraction map_from(const cjson& j) {
  if (!j.is_object() || !j.contains("linear") || !j.contains("offset")) throw ConfigError("config: a map is {linear, offset}");
  allow_keys(j, "map", {"linear", "offset"});
  const auto lin = number_or_array(j.at("linear"), "linear");
  const Point b = point_from(j.at("offset"), "offset");
  if (lin.size() != b.dim * b.dim) throw ConfigError("config: map 'linear' must have d*d entries");
  return AffineContraction(b.dim, lin, b);
}

inline std::vector<Point> start_from(const cjson& j, std::size_t k) {
  if (!j.is_array() || j.size() != k) throw ConfigError("config: 'start' needs one point per omega");
  std::vector<Point> out;
  for (const auto& x : j) out.push_back(point_from(x, "start"));
  return out;
}

inline std::vector<AffineContraction> per_omega_maps(const cjson& j, std::size_t k) {
  if (!j.is_array() || j.size() != k) throw ConfigError("config: maps need one entry per omega");
  std::vector<AffineContraction> out;
  for (const auto& m : j) out.push_back(map_from(m));
  return out;
}

inline FixedPointBlock fixed_point_from(const cjson& j) {
  if (!j.is_object()) throw ConfigError("config: 'fixed_point' must be an object");
  allow_keys(j, "fixed_point", {"omega", "maps", "start", "steps", "tolerance"});
  if (!j.contains("omega") || !j.contains("maps") || !j.contains("start"))
    throw ConfigError("config: fixed_point needs omega, maps and start");
  FixedPointBlock b;
  b.omega = omega_from(j.at("omega"));
  b.maps = per_omega_maps(j.at("maps"), b.omega.size());
  b.start = start_from(j.at("start"), b.omega.size());
  b.steps = whole_or(j, "steps", b.steps);
  b.tolerance = positive(j.value("tolerance", b.tolerance), "fixed_point.tolerance");
  return b;
}

inline InvariantSetBlock invariant_set_from(const cjson& j) {
  if (!j.is_object()) throw ConfigError("config: 'invariant_set' must be an object");
  allow_keys(j, "invariant_set", {"omega", "maps", "start", "steps", "epsilon", "capacity"});
  if (!j.contains("omega") || !j.contains("maps") || !j.contains("start"))
    throw ConfigError("config: invariant_set needs omega, maps and start");
  InvariantSetBlock b;
  b.omega = omega_from(j.at("omega"));
  if (!j.at("maps").is_array() || j.at("maps").empty()) throw ConfigError("config: invariant_set.maps must be a non-empty array");
  for (const auto& f : j.at("maps")) b.maps.push_back(per_omega_maps(f, b.omega.size()));
  b.start = start_from(j.at("start"), b.omega.size());
  b.steps = whole_or(j, "steps", b.steps);
  b.epsilon = j.value("epsilon", 0.0);
  if (b.epsilon < 0.0) throw ConfigError("config: invariant_set.epsilon must be >= 0");
  b.capacity = whole_or(j, "capacity", b.capacity);
  return b;
}

} // namespace detail

inline ExperimentConfig parse_config(const nlohmann::ordered_json& j, const ConfigOverrides& over = {}) {
  using namespace detail;
  ExperimentConfig c;
  try {
    if (!j.is_object()) throw ConfigError("config: top level must be an object");
    allow_keys(j, "config",
               {"experiment", "seed", "q", "spec", "norm", "mu0", "mu0_alt", "alpha", "mu", "nu", "depth", "ensemble_size",
                "t_grid", "prune", "support_cap", "delta", "ratio_slack", "selfsim_factor", "geometric_slack", "schedule",
                "expect", "fixed_point", "invariant_set", "threads"});
    c.experiment = over.experiment ? *over.experiment : j.value("experiment", std::string());
    if (over.experiment && j.contains("experiment") && j.at("experiment").get<std::string>() != *over.experiment)
      throw ConfigError("config: file is for experiment '" + j.at("experiment").get<std::string>() + "', not '" +
                        *over.experiment + "'");
    bool known = false;
    for (const auto& n : experiment_names()) known = known || n == c.experiment;
    if (!known) throw ConfigError("config: unknown or missing experiment '" + c.experiment + "'");

    c.seed = over.seed ? *over.seed : whole_or<std::uint64_t>(j, "seed", 0);
    c.q = positive(j.value("q", 1.0), "q");
    if (j.contains("spec")) c.spec = spec_from_json(j.at("spec"));
    if (j.contains("norm")) {
      try {
        c.norm = norm_from_string(j.at("norm").get<std::string>());
      } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("config: ") + e.what());
      }
    }
    const auto source = [&](const char* key, std::optional<MeasureSource>& dst) {
      if (!j.contains(key)) return;
      dst = source_from(j.at(key), key, c.spec);
      if (c.spec && dst->start.dimension() != dimension(*c.spec))
        throw ConfigError(std::string("config: '") + key + "' dimension does not match the scaling law");
    };
    source("mu0", c.mu0);
    source("mu0_alt", c.mu0_alt);
    source("alpha", c.alpha);
    source("mu", c.mu);
    source("nu", c.nu);
    c.depth = whole_or(j, "depth", std::size_t{0});
    c.ensemble_size = whole_or(j, "ensemble_size", std::size_t{1});
    if (c.ensemble_size < 1) throw ConfigError("config: ensemble_size must be >= 1");
    if (j.contains("t_grid")) c.t_grid = grid_from(j.at("t_grid"));
    if (j.contains("prune")) c.prune = prune_from(j.at("prune"));
    c.support_cap = whole_or(j, "support_cap", c.support_cap);
    c.delta = j.value("delta", c.delta);
    if (!(c.delta > 0.0 && c.delta < 1.0)) throw ConfigError("config: delta must lie in (0, 1)");
    c.ratio_slack = j.value("ratio_slack", c.ratio_slack);
    if (c.ratio_slack < 0.0) throw ConfigError("config: ratio_slack must be >= 0");
    c.selfsim_factor = positive(j.value("selfsim_factor", c.selfsim_factor), "selfsim_factor");
    c.geometric_slack = j.value("geometric_slack", true);
    if (j.contains("schedule")) {
      for (const auto& s : j.at("schedule")) c.schedule.push_back(whole(s, "schedule"));
      for (std::size_t i = 0; i < c.schedule.size(); ++i)
        if (c.schedule[i] == 0 || (i > 0 && c.schedule[i] <= c.schedule[i - 1]))
          throw ConfigError("config: schedule must be strictly increasing positive sample counts");
    }
    if (j.contains("expect")) c.expect = expect_from(j.at("expect"));
    if (j.contains("fixed_point")) c.fixed_point = fixed_point_from(j.at("fixed_point"));
    if (j.contains("invariant_set")) c.invariant_set = invariant_set_from(j.at("invariant_set"));
    c.threads = over.threads ? *over.threads : whole_or(j, "threads", std::size_t{1});
  } catch (const ConfigError&) {
    throw;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.raw = j;
  return c;
}

inline ExperimentConfig parse_config_text(const std::string& text, const ConfigOverrides& over = {}) {
  nlohmann::ordered_json j;
  try {
    j = nlohmann::ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(std::string("config: malformed JSON: ") + e.what());
  }
  return parse_config(j, over);
}

inline ExperimentConfig load_config(const std::string& path, const ConfigOverrides& over = {}) {
  std::ifstream f(path);
  if (!f) throw ConfigError("config: cannot read '" + path + "'");
  std::stringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str(), over);
}

// The inputs echoed into the report: the config as written, with the law
// expanded to canonical form and the effective seed. Thread count and output
// location are left out so reports do not depend on them.
inline nlohmann::ordered_json config_echo(const ExperimentConfig& c) {
  nlohmann::ordered_json e = c.raw;
  e.erase("threads");
  e["experiment"] = c.experiment;
  e["seed"] = c.seed;
  e["q"] = c.q;
  if (c.spec) {
    e["spec"] = spec_to_json(*c.spec);
    e["spec_hash"] = spec_hash(*c.spec);
  }
  return e;
}

} // namespace fractalaw
