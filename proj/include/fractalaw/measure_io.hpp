#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "measure.hpp"

namespace fractalaw {

namespace detail {

// Shortest round-trip representation is not available in GCC 11's <charconv>
// for all targets, so use %.17g which round-trips every double.
inline std::string format_double(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

} // namespace detail

// CSV layout: header `x1[,x2[,x3]],weight`, one atom per row.
inline std::string measure_to_csv(const DiscreteMeasure& mu) {
  std::string out;
  for (std::size_t i = 0; i < mu.dimension(); ++i) out += "x" + std::to_string(i + 1) + ",";
  out += "weight\n";
  for (const auto& a : mu.atoms()) {
    for (std::size_t i = 0; i < mu.dimension(); ++i) out += detail::format_double(a.point[i]) + ",";
    out += detail::format_double(a.weight) + "\n";
  }
  return out;
}

inline DiscreteMeasure measure_from_csv(const std::string& text) {
  std::stringstream ss(text);
  std::string line;
  if (!std::getline(ss, line)) throw std::invalid_argument("measure csv: missing header");
  const auto header = detail::split_csv_line(line);
  if (header.size() < 2 || header.size() > kMaxDimension + 1 || header.back() != "weight")
    throw std::invalid_argument("measure csv: header must be x1[,x2[,x3]],weight");
  const std::size_t d = header.size() - 1;
  for (std::size_t i = 0; i < d; ++i)
    if (header[i] != "x" + std::to_string(i + 1)) throw std::invalid_argument("measure csv: bad column name '" + header[i] + "'");

  std::vector<Atom> atoms;
  while (std::getline(ss, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = detail::split_csv_line(line);
    if (cells.size() != d + 1) throw std::invalid_argument("measure csv: wrong number of columns");
    Point p = Point::zero(d);
    try {
      for (std::size_t i = 0; i < d; ++i) p[i] = std::stod(cells[i]);
      atoms.push_back({p, std::stod(cells[d])});
    } catch (const std::logic_error&) {
      throw std::invalid_argument("measure csv: unparsable number in '" + line + "'");
    }
  }
  return make_measure(std::move(atoms));
}

// JSON layout: {"dimension": d, "atoms": [[[x1,...], w], ...]}.
inline nlohmann::ordered_json measure_to_json(const DiscreteMeasure& mu) {
  nlohmann::ordered_json j;
  j["dimension"] = mu.dimension();
  auto atoms = nlohmann::ordered_json::array();
  for (const auto& a : mu.atoms()) {
    auto coords = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < mu.dimension(); ++i) coords.push_back(a.point[i]);
    atoms.push_back(nlohmann::ordered_json::array({coords, a.weight}));
  }
  j["atoms"] = std::move(atoms);
  return j;
}

template <class Json>
DiscreteMeasure measure_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("dimension") || !j.contains("atoms"))
    throw std::invalid_argument("measure json: expected {dimension, atoms}");
  const auto d = j.at("dimension").template get<std::size_t>();
  if (d == 0 || d > kMaxDimension) throw std::invalid_argument("measure json: dimension must be 1, 2 or 3");
  std::vector<Atom> atoms;
  for (const auto& entry : j.at("atoms")) {
    if (!entry.is_array() || entry.size() != 2 || !entry[0].is_array() || entry[0].size() != d)
      throw std::invalid_argument("measure json: atom must be [[coords...], weight]");
    Point p = Point::zero(d);
    for (std::size_t i = 0; i < d; ++i) p[i] = entry[0][i].template get<double>();
    atoms.push_back({p, entry[1].template get<double>()});
  }
  return make_measure(std::move(atoms));
}

} // namespace fractalaw
