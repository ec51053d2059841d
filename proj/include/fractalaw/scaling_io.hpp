#pragma once

#include <cstdint>
#include <cstdio>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "scaling.hpp"

namespace fractalaw {

// JSON forms accepted for a random scaling law spec:
//   "uniform" | "cantor" | "random_ratio" | "reciprocal" | "exp_inv"
//   {"kind": "mixture", "laws": [[branch, ...], ...], "probs": [...]}
//   {"kind": "parametric", "dimension": d, "weights": [...],
//    "branches": [{"ratio": [lo, hi], "offset": [[lo, hi], ...]}, ...],
//    "esssup": "ratio_upper_bounds" | "none"}
//   {"kind": "heavy_tail", "variant": "reciprocal" | "exp_inv"}
// where branch = {"weight": p, "linear": a | [row-major d x d], "offset": b | [b1, ...]}.

namespace detail {

using ojson = nlohmann::ordered_json;

inline ojson branch_to_json(const Branch& b) {
  ojson j;
  j["weight"] = b.weight;
  const std::size_t d = b.map.dimension();
  ojson lin = ojson::array(), off = ojson::array();
  for (std::size_t i = 0; i < d; ++i) {
    for (std::size_t k = 0; k < d; ++k) lin.push_back(b.map.linear(i, k));
    off.push_back(b.map.offset()[i]);
  }
  j["linear"] = lin;
  j["offset"] = off;
  return j;
}

template <class Json>
std::vector<double> number_or_array(const Json& j, const char* what) {
  if (j.is_number()) return {j.template get<double>()};
  if (!j.is_array()) throw ConfigError(std::string("spec: '") + what + "' must be a number or an array");
  std::vector<double> v;
  for (const auto& x : j) {
    if (!x.is_number()) throw ConfigError(std::string("spec: '") + what + "' must contain numbers");
    v.push_back(x.template get<double>());
  }
  return v;
}

template <class Json>
Branch branch_from_json(const Json& j) {
  if (!j.is_object() || !j.contains("weight") || !j.contains("linear") || !j.contains("offset"))
    throw ConfigError("spec: branch must be {weight, linear, offset}");
  const auto lin = number_or_array(j.at("linear"), "linear");
  const auto off = number_or_array(j.at("offset"), "offset");
  const std::size_t d = off.size();
  if (d == 0 || d > kMaxDimension || lin.size() != d * d)
    throw ConfigError("spec: branch 'linear' must have d*d entries for an offset of length d <= 3");
  Point b = Point::zero(d);
  for (std::size_t i = 0; i < d; ++i) b[i] = off[i];
  return Branch{j.at("weight").template get<double>(), AffineContraction(d, lin, b)};
}

template <class Json>
Interval interval_from_json(const Json& j, const char* what) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(std::string("spec: '") + what + "' must be [lo, hi]");
  return {j[0].template get<double>(), j[1].template get<double>()};
}

} // namespace detail

inline nlohmann::ordered_json law_to_json(const ScalingLaw& law) {
  auto arr = nlohmann::ordered_json::array();
  for (const auto& b : law.branches()) arr.push_back(detail::branch_to_json(b));
  return arr;
}

template <class Json>
ScalingLaw law_from_json(const Json& j) {
  if (!j.is_array()) throw ConfigError("spec: a law is an array of branches");
  std::vector<Branch> branches;
  for (const auto& b : j) branches.push_back(detail::branch_from_json(b));
  try {
    return ScalingLaw(std::move(branches));
  } catch (const std::invalid_argument& e) {
    throw ConfigError(std::string("spec: ") + e.what());
  }
}

// Canonical JSON (presets are expanded), used for report echoes and hashing.
inline nlohmann::ordered_json spec_to_json(const RandomScalingLawSpec& spec) {
  using detail::ojson;
  ojson j;
  if (const auto* m = std::get_if<FiniteMixture>(&spec)) {
    j["kind"] = "mixture";
    ojson laws = ojson::array();
    for (const auto& l : m->laws) laws.push_back(law_to_json(l));
    j["laws"] = laws;
    j["probs"] = m->probs;
  } else if (const auto* p = std::get_if<ParametricAffine>(&spec)) {
    j["kind"] = "parametric";
    j["dimension"] = p->dimension;
    j["weights"] = p->weights;
    ojson branches = ojson::array();
    for (const auto& b : p->branches) {
      ojson bj;
      bj["ratio"] = {b.ratio.lo, b.ratio.hi};
      ojson off = ojson::array();
      for (const auto& iv : b.offset) off.push_back({iv.lo, iv.hi});
      bj["offset"] = off;
      branches.push_back(bj);
    }
    j["branches"] = branches;
    j["esssup"] = p->esssup == EssSupDeclaration::ratio_upper_bounds ? "ratio_upper_bounds" : "none";
  } else {
    j["kind"] = "heavy_tail";
    j["variant"] = to_string(std::get<HeavyTailExample>(spec).variant);
  }
  return j;
}

template <class Json>
RandomScalingLawSpec spec_from_json(const Json& j) {
  RandomScalingLawSpec spec;
  try {
    if (j.is_string()) {
      spec = preset_spec(j.template get<std::string>());
    } else {
      if (!j.is_object() || !j.contains("kind")) throw ConfigError("spec: expected a preset name or an object with 'kind'");
      const auto kind = j.at("kind").template get<std::string>();
      if (kind == "mixture") {
        FiniteMixture m;
        if (!j.contains("laws") || !j.at("laws").is_array()) throw ConfigError("spec: mixture needs 'laws'");
        for (const auto& l : j.at("laws")) m.laws.push_back(law_from_json(l));
        if (j.contains("probs"))
          m.probs = detail::number_or_array(j.at("probs"), "probs");
        else if (m.laws.size() == 1)
          m.probs = {1.0};
        else
          throw ConfigError("spec: mixture of several laws needs 'probs'");
        spec = std::move(m);
      } else if (kind == "parametric") {
        ParametricAffine p;
        p.dimension = j.value("dimension", std::size_t{1});
        if (!j.contains("weights") || !j.contains("branches")) throw ConfigError("spec: parametric needs 'weights' and 'branches'");
        p.weights = detail::number_or_array(j.at("weights"), "weights");
        for (const auto& b : j.at("branches")) {
          ParametricBranch pb;
          if (!b.is_object() || !b.contains("ratio") || !b.contains("offset"))
            throw ConfigError("spec: parametric branch must be {ratio, offset}");
          pb.ratio = detail::interval_from_json(b.at("ratio"), "ratio");
          for (const auto& iv : b.at("offset")) pb.offset.push_back(detail::interval_from_json(iv, "offset"));
          p.branches.push_back(pb);
        }
        const auto decl = j.value("esssup", std::string("none"));
        if (decl == "ratio_upper_bounds")
          p.esssup = EssSupDeclaration::ratio_upper_bounds;
        else if (decl != "none")
          throw ConfigError("spec: 'esssup' must be 'ratio_upper_bounds' or 'none'");
        spec = std::move(p);
      } else if (kind == "heavy_tail") {
        const auto v = j.value("variant", std::string());
        if (v == "reciprocal")
          spec = HeavyTailExample{HeavyTailExample::Variant::reciprocal};
        else if (v == "exp_inv")
          spec = HeavyTailExample{HeavyTailExample::Variant::exp_inv};
        else
          throw ConfigError("spec: heavy_tail 'variant' must be 'reciprocal' or 'exp_inv'");
      } else {
        throw ConfigError("spec: unknown kind '" + kind + "'");
      }
    }
    validate(spec);
  } catch (const ConfigError&) {
    throw;
  } catch (const std::exception& e) {
    throw ConfigError(std::string("spec: ") + e.what());
  }
  return spec;
}

// FNV-1a 64 over the canonical JSON text.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string spec_hash(const RandomScalingLawSpec& spec) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(spec_to_json(spec).dump())));
  return buf;
}

} // namespace fractalaw
