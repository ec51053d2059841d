#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "affine.hpp"
#include "numeric.hpp"
#include "point.hpp"

namespace fractalaw {

struct Atom {
  Point point;
  double weight = 0.0;
};

// Finitely supported measure on R^d. Atoms are kept in canonical order
// (lexicographic on coordinates) with pairwise distinct points, so two equal
// measures have identical atom arrays.
class DiscreteMeasure {
public:
  DiscreteMeasure() = default;

  static DiscreteMeasure dirac(const Point& a, double mass = 1.0);

  std::size_t dimension() const { return dim_; }
  std::size_t size() const { return atoms_.size(); }
  bool empty() const { return atoms_.empty(); }
  std::span<const Atom> atoms() const { return atoms_; }
  const Atom& operator[](std::size_t i) const { return atoms_[i]; }
  double mass() const { return mass_; }
  bool is_unit_mass(double tol = 1e-12) const { return std::abs(mass_ - 1.0) <= tol; }

  friend bool operator==(const DiscreteMeasure& a, const DiscreteMeasure& b) {
    if (a.dim_ != b.dim_ || a.atoms_.size() != b.atoms_.size()) return false;
    for (std::size_t i = 0; i < a.atoms_.size(); ++i)
      if (!(a.atoms_[i].point == b.atoms_[i].point) || a.atoms_[i].weight != b.atoms_[i].weight) return false;
    return true;
  }

private:
  friend DiscreteMeasure make_measure(std::vector<Atom> atoms);

  std::size_t dim_ = 0;
  std::vector<Atom> atoms_;
  double mass_ = 0.0;
};

// Builds a measure from raw atoms: validates, sorts, merges atoms whose points
// are bit-identical (weights summed) and computes the mass.
inline DiscreteMeasure make_measure(std::vector<Atom> atoms) {
  if (atoms.empty()) throw std::invalid_argument("make_measure: empty atom list");
  const std::size_t d = atoms.front().point.dimension();
  for (auto& a : atoms) {
    if (a.point.dimension() != d) throw std::invalid_argument("make_measure: dimension mismatch");
    if (!(a.weight > 0.0) || !std::isfinite(a.weight))
      throw std::invalid_argument("make_measure: weights must be positive and finite");
    a.point.validate();
    a.point.normalize_zeros();
  }
  const auto less = [](const Atom& x, const Atom& y) { return x.point < y.point; };
  if (!std::is_sorted(atoms.begin(), atoms.end(), less)) std::stable_sort(atoms.begin(), atoms.end(), less);

  std::size_t out = 0;
  for (std::size_t i = 1; i < atoms.size(); ++i) {
    if (atoms[i].point == atoms[out].point)
      atoms[out].weight += atoms[i].weight;
    else
      atoms[++out] = atoms[i];
  }
  atoms.resize(out + 1);

  DiscreteMeasure m;
  m.dim_ = d;
  CompensatedSum mass;
  for (const auto& a : atoms) mass.add(a.weight);
  m.mass_ = mass.value();
  m.atoms_ = std::move(atoms);
  return m;
}

inline DiscreteMeasure DiscreteMeasure::dirac(const Point& a, double mass) {
  return make_measure({Atom{a, mass}});
}

inline DiscreteMeasure make_measure(std::span<const std::pair<Point, double>> atoms) {
  std::vector<Atom> v;
  v.reserve(atoms.size());
  for (const auto& [p, w] : atoms) v.push_back({p, w});
  return make_measure(std::move(v));
}

// Image measure S mu: atom (x, w) becomes (S(x), w).
inline DiscreteMeasure pushforward(const AffineContraction& map, const DiscreteMeasure& mu) {
  if (map.dimension() != mu.dimension()) throw std::invalid_argument("pushforward: dimension mismatch");
  std::vector<Atom> out;
  out.reserve(mu.size());
  for (const auto& a : mu.atoms()) out.push_back({map(a.point), a.weight});
  return make_measure(std::move(out));
}

// sum_i weights[i] * measures[i]. Zero weights drop their measure.
inline DiscreteMeasure mix(std::span<const double> weights, std::span<const DiscreteMeasure> measures) {
  if (weights.size() != measures.size()) throw std::invalid_argument("mix: length mismatch");
  if (weights.empty()) throw std::invalid_argument("mix: empty mixture");
  std::size_t total = 0;
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) throw std::invalid_argument("mix: weights must be >= 0");
    if (measures[i].dimension() != measures[0].dimension()) throw std::invalid_argument("mix: dimension mismatch");
    total += measures[i].size();
  }
  std::vector<Atom> out;
  out.reserve(total);
  for (std::size_t i = 0; i < weights.size(); ++i) {
    if (weights[i] == 0.0) continue;
    for (const auto& a : measures[i].atoms()) out.push_back({a.point, weights[i] * a.weight});
  }
  if (out.empty()) throw std::invalid_argument("mix: all weights are zero");
  return make_measure(std::move(out));
}

inline DiscreteMeasure mix(std::initializer_list<double> weights, std::initializer_list<DiscreteMeasure> measures) {
  const std::vector<double> w(weights);
  const std::vector<DiscreteMeasure> m(measures);
  return mix(std::span<const double>(w), std::span<const DiscreteMeasure>(m));
}

// Sum of two measures (mix with unit weights).
inline DiscreteMeasure add(const DiscreteMeasure& a, const DiscreteMeasure& b) {
  return mix({1.0, 1.0}, {a, b});
}

inline DiscreteMeasure scale(const DiscreteMeasure& mu, double factor) {
  return mix({factor}, {mu});
}

// integral of d(x, a)^q dmu(x).
inline double q_moment(const DiscreteMeasure& mu, const Point& a, double q, Norm norm = Norm::euclidean) {
  if (!(q > 0.0)) throw std::invalid_argument("q_moment: q must be positive");
  CompensatedSum s;
  for (const auto& atom : mu.atoms()) s.add(atom.weight * std::pow(distance(atom.point, a, norm), q));
  return s.value();
}

inline double diameter(const DiscreteMeasure& mu, Norm norm = Norm::euclidean) {
  if (mu.empty()) return 0.0;
  if (mu.dimension() == 1) return mu.atoms().back().point[0] - mu.atoms().front().point[0];
  double diam = 0.0;
  const auto atoms = mu.atoms();
  for (std::size_t i = 0; i < atoms.size(); ++i)
    for (std::size_t j = i + 1; j < atoms.size(); ++j) diam = std::max(diam, distance(atoms[i].point, atoms[j].point, norm));
  return diam;
}

struct CoalesceResult {
  DiscreteMeasure measure;
  double displacement = 0.0; // max distance any unit of mass was moved
};

// Support control. Atoms are snapped to the grid eps * Z^d and merged; if more
// than `cap` atoms remain, the lowest-weight atoms are merged into their
// nearest surviving neighbour. Every atom moves by at most `displacement`, so
// l_q(mu, result) <= displacement^{min(1,q)} for every q > 0.
inline CoalesceResult coalesce_tracked(const DiscreteMeasure& mu, double eps,
                                       std::size_t cap = std::numeric_limits<std::size_t>::max(),
                                       Norm norm = Norm::euclidean) {
  if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::invalid_argument("coalesce: eps must be >= 0");
  if (cap == 0) throw std::invalid_argument("coalesce: cap must be >= 1");
  if (mu.empty()) return {mu, 0.0};

  CoalesceResult result{mu, 0.0};
  if (eps > 0.0) {
    std::vector<Atom> snapped;
    snapped.reserve(mu.size());
    for (const auto& a : mu.atoms()) {
      Point p = a.point;
      for (std::size_t i = 0; i < p.dimension(); ++i) p[i] = eps * std::nearbyint(p[i] / eps) + 0.0;
      result.displacement = std::max(result.displacement, distance(a.point, p, norm));
      snapped.push_back({p, a.weight});
    }
    result.measure = make_measure(std::move(snapped));
  }
  if (result.measure.size() <= cap) return result;

  const auto atoms = result.measure.atoms();
  const std::size_t n = atoms.size();
  std::vector<std::size_t> by_weight(n);
  std::iota(by_weight.begin(), by_weight.end(), std::size_t{0});
  std::stable_sort(by_weight.begin(), by_weight.end(),
                   [&](std::size_t i, std::size_t j) { return atoms[i].weight < atoms[j].weight; });
  std::vector<char> removed(n, 0);
  for (std::size_t k = 0; k < n - cap; ++k) removed[by_weight[k]] = 1;

  std::vector<std::size_t> survivors;
  survivors.reserve(cap);
  for (std::size_t i = 0; i < n; ++i)
    if (!removed[i]) survivors.push_back(i);

  double merge_max = 0.0;
  std::vector<double> weight(n, 0.0);
  for (std::size_t i : survivors) weight[i] = atoms[i].weight;
  for (std::size_t i = 0; i < n; ++i) {
    if (!removed[i]) continue;
    std::size_t best = survivors.front();
    double best_d = std::numeric_limits<double>::infinity();
    if (result.measure.dimension() == 1) {
      // survivors are sorted by coordinate; check the two bracketing ones
      auto it = std::lower_bound(survivors.begin(), survivors.end(), i);
      if (it != survivors.begin()) {
        best = *(it - 1);
        best_d = distance(atoms[i].point, atoms[best].point, norm);
      }
      if (it != survivors.end()) {
        const double dr = distance(atoms[i].point, atoms[*it].point, norm);
        if (dr < best_d) {
          best = *it;
          best_d = dr;
        }
      }
    } else {
      for (std::size_t s : survivors) {
        const double ds = distance(atoms[i].point, atoms[s].point, norm);
        if (ds < best_d) {
          best = s;
          best_d = ds;
        }
      }
    }
    weight[best] += atoms[i].weight;
    merge_max = std::max(merge_max, best_d);
  }
  std::vector<Atom> kept;
  kept.reserve(survivors.size());
  for (std::size_t s : survivors) kept.push_back({atoms[s].point, weight[s]});
  result.measure = make_measure(std::move(kept));
  result.displacement += merge_max; // a snapped atom may be merged afterwards
  return result;
}

inline DiscreteMeasure coalesce(const DiscreteMeasure& mu, double eps,
                                std::size_t cap = std::numeric_limits<std::size_t>::max(),
                                Norm norm = Norm::euclidean) {
  return coalesce_tracked(mu, eps, cap, norm).measure;
}

} // namespace fractalaw
