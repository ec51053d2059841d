#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "measure_io.hpp"

namespace fractalaw {

struct Metric {
  std::string name;
  double value = 0.0;
  double std_error = 0.0;
};

// A pass/fail check of `observed <relation> threshold`. The threshold is
// assembled from a named tolerance plus the Monte Carlo term that applies
// (DKW half-width, standard-error multiple, pruning slack, or 0 when exact).
struct Verdict {
  std::string name;
  bool passed = false;
  double observed = 0.0;
  std::string relation = "<=";
  double threshold = 0.0;
  std::string tolerance_name;
  double tolerance = 0.0;
  std::string mc_term_name = "none";
  double mc_term = 0.0;
  std::string note;
};

inline Verdict check_at_most(std::string name, double observed, double limit, std::string tolerance_name,
                             double tolerance, std::string mc_term_name = "none", double mc_term = 0.0) {
  Verdict v;
  v.name = std::move(name);
  v.observed = observed;
  v.relation = "<=";
  v.threshold = limit;
  v.tolerance_name = std::move(tolerance_name);
  v.tolerance = tolerance;
  v.mc_term_name = std::move(mc_term_name);
  v.mc_term = mc_term;
  v.passed = observed <= limit;
  return v;
}

inline Verdict check_at_least(std::string name, double observed, double limit, std::string tolerance_name,
                              double tolerance, std::string mc_term_name = "none", double mc_term = 0.0) {
  Verdict v = check_at_most(std::move(name), observed, limit, std::move(tolerance_name), tolerance,
                            std::move(mc_term_name), mc_term);
  v.relation = ">=";
  v.passed = observed >= limit;
  return v;
}

struct CurvePoint {
  double x = 0.0;
  double value = 0.0;
  double std_error = std::numeric_limits<double>::quiet_NaN();
  double bound = std::numeric_limits<double>::quiet_NaN();
};

struct Report {
  std::string experiment;
  nlohmann::ordered_json inputs = nlohmann::ordered_json::object();
  std::vector<Metric> metrics;
  std::vector<Verdict> verdicts;
  std::string curve_axis = "k"; // "t" or "k"
  std::string curve_value;      // what the value column holds
  std::vector<CurvePoint> curve;
  nlohmann::ordered_json details = nlohmann::ordered_json::object();

  bool passed() const {
    for (const auto& v : verdicts)
      if (!v.passed) return false;
    return true;
  }
  void metric(std::string name, double value, double std_error = 0.0) {
    metrics.push_back({std::move(name), value, std_error});
  }
  const Metric* find_metric(const std::string& name) const {
    for (const auto& m : metrics)
      if (m.name == name) return &m;
    return nullptr;
  }
  const Verdict* find_verdict(const std::string& name) const {
    for (const auto& v : verdicts)
      if (v.name == name) return &v;
    return nullptr;
  }
};

// JSON has no inf/nan; those become null.
inline nlohmann::ordered_json json_number(double x) {
  if (!std::isfinite(x)) return nullptr;
  return x;
}

inline nlohmann::ordered_json json_numbers(const std::vector<double>& xs) {
  auto arr = nlohmann::ordered_json::array();
  for (double x : xs) arr.push_back(json_number(x));
  return arr;
}

inline nlohmann::ordered_json report_to_json(const Report& r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["experiment"] = r.experiment;
  j["passed"] = r.passed();
  j["inputs"] = r.inputs;
  auto metrics = ordered_json::array();
  for (const auto& m : r.metrics)
    metrics.push_back({{"name", m.name}, {"value", json_number(m.value)}, {"std_error", json_number(m.std_error)}});
  j["metrics"] = metrics;
  auto verdicts = ordered_json::array();
  for (const auto& v : r.verdicts) {
    ordered_json vj;
    vj["name"] = v.name;
    vj["passed"] = v.passed;
    vj["observed"] = json_number(v.observed);
    vj["relation"] = v.relation;
    vj["threshold"] = json_number(v.threshold);
    vj["tolerance"] = {{"name", v.tolerance_name}, {"value", json_number(v.tolerance)}};
    vj["mc_term"] = {{"name", v.mc_term_name}, {"value", json_number(v.mc_term)}};
    if (!v.note.empty()) vj["note"] = v.note;
    verdicts.push_back(vj);
  }
  j["verdicts"] = verdicts;
  j["curve"] = {{"axis", r.curve_axis}, {"value", r.curve_value}, {"points", r.curve.size()}};
  j["details"] = r.details;
  j["artifacts"] = {"report.json", "curves.csv"};
  return j;
}

inline std::string curves_to_csv(const Report& r) {
  const auto cell = [](double x) { return std::isfinite(x) ? detail::format_double(x) : std::string(); };
  std::string out = r.curve_axis + ",value,stderr,bound\n";
  for (const auto& p : r.curve) out += cell(p.x) + "," + cell(p.value) + "," + cell(p.std_error) + "," + cell(p.bound) + "\n";
  return out;
}

// Writes to a temporary file next to `path` and renames it into place.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& content) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
    f << content;
    f.flush();
    if (!f) throw std::runtime_error("write to " + tmp.string() + " failed");
  }
  std::filesystem::rename(tmp, path);
}

inline void write_report(const Report& r, const std::filesystem::path& out_dir) {
  std::filesystem::create_directories(out_dir);
  write_file_atomic(out_dir / "report.json", report_to_json(r).dump(2) + "\n");
  write_file_atomic(out_dir / "curves.csv", curves_to_csv(r));
}

} // namespace fractalaw
