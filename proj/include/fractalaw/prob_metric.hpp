#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "affine.hpp"
#include "errors.hpp"
#include "numeric.hpp"
#include "point.hpp"

namespace fractalaw {

// Distribution function of a nonnegative (possibly +inf valued) random
// variable with finitely many values: eval(t) = P(X < t). Left-continuous,
// nondecreasing, eval(0) = 0.
class DistributionFunction {
public:
  // Step function with jumps of size `weights[k]` at `values[k]`.
  static DistributionFunction weighted(std::vector<double> values, std::vector<double> weights) {
    if (values.size() != weights.size() || values.empty())
      throw std::invalid_argument("DistributionFunction: need one weight per value");
    std::vector<std::size_t> order(values.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (!(values[i] >= 0.0)) throw std::invalid_argument("DistributionFunction: values must be >= 0");
      if (!(weights[i] >= 0.0) || !std::isfinite(weights[i])) throw std::invalid_argument("DistributionFunction: bad weight");
    }
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    DistributionFunction f;
    CompensatedSum acc;
    for (std::size_t i : order) {
      if (!f.values_.empty() && f.values_.back() == values[i]) {
        acc.add(weights[i]);
        f.cumulative_.back() = acc.value();
        continue;
      }
      acc.add(weights[i]);
      f.values_.push_back(values[i]);
      f.cumulative_.push_back(acc.value());
    }
    return f;
  }

  static DistributionFunction heaviside() { return weighted({0.0}, {1.0}); }

  // From strictly increasing jump locations and the value just after each.
  static DistributionFunction from_cumulative(std::vector<double> values, std::vector<double> cumulative) {
    if (values.size() != cumulative.size() || values.empty())
      throw std::invalid_argument("DistributionFunction: need one cumulative value per jump");
    for (std::size_t k = 0; k < values.size(); ++k) {
      if (!(values[k] >= 0.0) || (k > 0 && !(values[k] > values[k - 1])))
        throw std::invalid_argument("DistributionFunction: jumps must be nonnegative and increasing");
      if (!(cumulative[k] >= 0.0 && cumulative[k] <= 1.0 + 1e-12) || (k > 0 && cumulative[k] < cumulative[k - 1]))
        throw std::invalid_argument("DistributionFunction: cumulative values must be nondecreasing in [0, 1]");
    }
    DistributionFunction f;
    f.values_ = std::move(values);
    f.cumulative_ = std::move(cumulative);
    return f;
  }

  // P(X < t)
  double eval(double t) const {
    const auto it = std::lower_bound(values_.begin(), values_.end(), t);
    if (it == values_.begin()) return 0.0;
    return cumulative_[static_cast<std::size_t>(it - values_.begin()) - 1];
  }

  // Distinct values where the function jumps (just after each).
  const std::vector<double>& jumps() const { return values_; }

  // Total mass at finite values; 1 for a proper distribution without +inf.
  double sup() const {
    double s = 0.0;
    for (std::size_t k = 0; k < values_.size(); ++k)
      if (std::isfinite(values_[k])) s = cumulative_[k];
    return s;
  }

  bool is_heaviside(double tol = 0.0) const {
    return !values_.empty() && values_.front() == 0.0 && std::abs(cumulative_.front() - 1.0) <= tol;
  }

private:
  std::vector<double> values_;
  std::vector<double> cumulative_;
};

// Empirical distribution function of a sample, eval(t) = #{x_i < t} / m.
inline DistributionFunction ecdf(std::span<const double> samples) {
  if (samples.empty()) throw std::invalid_argument("ecdf: empty sample");
  for (double x : samples)
    if (!(x >= 0.0)) throw std::invalid_argument("ecdf: samples must be nonnegative");
  std::vector<double> sorted(samples.begin(), samples.end());
  std::sort(sorted.begin(), sorted.end());
  const double m = static_cast<double>(sorted.size());
  // Cumulative values are count / m exactly.
  std::vector<double> values, cumulative;
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j < sorted.size() && sorted[j] == sorted[i]) ++j;
    values.push_back(sorted[i]);
    cumulative.push_back(static_cast<double>(j) / m);
    i = j;
  }
  return DistributionFunction::from_cumulative(std::move(values), std::move(cumulative));
}

// Lukasiewicz t-norm T_m(a, b) = max(a + b - 1, 0).
inline double tmin(double a, double b) {
  if (!(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0)) throw std::invalid_argument("tmin: arguments must lie in [0, 1]");
  return std::max(a + b - 1.0, 0.0);
}

// Minimum t-norm, the strongest one; used as a comparison baseline.
inline double tnorm_min(double a, double b) {
  if (!(a >= 0.0 && a <= 1.0 && b >= 0.0 && b <= 1.0)) throw std::invalid_argument("tnorm_min: arguments must lie in [0, 1]");
  return std::min(a, b);
}

enum class TNorm {
  lukasiewicz, // T_m(a, b) = max(a + b - 1, 0)
  minimum,     // min(a, b)
};

inline double apply_tnorm(TNorm t, double a, double b) { return t == TNorm::lukasiewicz ? tmin(a, b) : tnorm_min(a, b); }

// Random variable on a finite sample space {omega_1..omega_k} with P(omega_j) = probs[j].
struct FiniteRandomVariable {
  std::vector<double> probs;
  std::vector<Point> values;

  FiniteRandomVariable() = default;
  FiniteRandomVariable(std::vector<double> p, std::vector<Point> v) : probs(std::move(p)), values(std::move(v)) {
    if (probs.empty() || probs.size() != values.size())
      throw std::invalid_argument("FiniteRandomVariable: need one value per sample point");
    CompensatedSum s;
    for (double x : probs) {
      if (!(x > 0.0)) throw std::invalid_argument("FiniteRandomVariable: probabilities must be positive");
      s.add(x);
    }
    if (std::abs(s.value() - 1.0) > 1e-12) throw std::invalid_argument("FiniteRandomVariable: probabilities must sum to 1");
    for (const auto& p : values)
      if (p.dimension() != values.front().dimension()) throw std::invalid_argument("FiniteRandomVariable: dimension mismatch");
  }

  static FiniteRandomVariable constant(std::vector<double> p, const Point& a) {
    std::vector<Point> v(p.size(), a);
    return FiniteRandomVariable(std::move(p), std::move(v));
  }

  std::size_t size() const { return probs.size(); }

  friend bool operator==(const FiniteRandomVariable& a, const FiniteRandomVariable& b) {
    return a.probs == b.probs && a.values == b.values;
  }
};

inline void require_same_space(const FiniteRandomVariable& x, const FiniteRandomVariable& y) {
  if (x.probs != y.probs) throw std::invalid_argument("random variables live on different sample spaces");
}

// F_{x,y}(t) = P(d(x(omega), y(omega)) < t), exact on the finite space.
inline DistributionFunction espace_distance(const FiniteRandomVariable& x, const FiniteRandomVariable& y,
                                            Norm norm = Norm::euclidean) {
  require_same_space(x, y);
  std::vector<double> d(x.size());
  for (std::size_t j = 0; j < x.size(); ++j) d[j] = distance(x.values[j], y.values[j], norm);
  return DistributionFunction::weighted(std::move(d), x.probs);
}

// sup over omega of d(x(omega), y(omega)).
inline double sup_distance(const FiniteRandomVariable& x, const FiniteRandomVariable& y, Norm norm = Norm::euclidean) {
  require_same_space(x, y);
  double m = 0.0;
  for (std::size_t j = 0; j < x.size(); ++j) m = std::max(m, distance(x.values[j], y.values[j], norm));
  return m;
}

// Map on the E-space acting pointwise: (f x)(omega_j) = g_j(x(omega_j)).
class EContraction {
public:
  explicit EContraction(std::vector<AffineContraction> maps) : maps_(std::move(maps)) {
    if (maps_.empty()) throw std::invalid_argument("EContraction: need one map per sample point");
    for (const auto& g : maps_) {
      if (g.dimension() != maps_.front().dimension()) throw std::invalid_argument("EContraction: dimension mismatch");
      ratio_ = std::max(ratio_, g.ratio());
    }
  }

  std::size_t size() const { return maps_.size(); }
  double ratio() const { return ratio_; }
  const std::vector<AffineContraction>& maps() const { return maps_; }

  FiniteRandomVariable operator()(const FiniteRandomVariable& x) const {
    if (x.size() != maps_.size()) throw std::invalid_argument("EContraction: sample space size mismatch");
    FiniteRandomVariable y = x;
    for (std::size_t j = 0; j < x.size(); ++j) y.values[j] = maps_[j](x.values[j]);
    return y;
  }

private:
  std::vector<AffineContraction> maps_;
  double ratio_ = 0.0;
};

struct MengerViolation {
  double s, t;
  double lhs; // F_{x,y}(s + t)
  double rhs; // T(F_{x,z}(s), F_{z,y}(t))
};

// Checks F_xy(s + t) >= T_m(F_xz(s), F_zy(t)) at each grid point for
// arbitrary callables, so that corrupted distribution functions can be fed in.
template <class Fxy, class Fxz, class Fzy>
std::vector<MengerViolation> menger_check_functions(const Fxy& fxy, const Fxz& fxz, const Fzy& fzy,
                                                    std::span<const std::pair<double, double>> grid, double tolerance = 0.0) {
  std::vector<MengerViolation> out;
  for (const auto& [s, t] : grid) {
    const double lhs = fxy(s + t);
    const double rhs = tmin(fxz(s), fzy(t));
    if (lhs < rhs - tolerance) out.push_back({s, t, lhs, rhs});
  }
  return out;
}

inline std::vector<MengerViolation> menger_check(const FiniteRandomVariable& x, const FiniteRandomVariable& y,
                                                 const FiniteRandomVariable& z,
                                                 std::span<const std::pair<double, double>> grid,
                                                 double tolerance = 0.0, Norm norm = Norm::euclidean) {
  require_same_space(x, z);
  require_same_space(z, y);
  const auto fxy = espace_distance(x, y, norm), fxz = espace_distance(x, z, norm), fzy = espace_distance(z, y, norm);
  return menger_check_functions([&](double t) { return fxy.eval(t); }, [&](double t) { return fxz.eval(t); },
                                [&](double t) { return fzy.eval(t); }, grid, tolerance);
}

struct SehgalViolation {
  double t;
  double lhs; // F_{f(x),f(y)}(r t)
  double rhs; // F_{x,y}(t)
};

// Checks F_{f(x),f(y)}(r t) >= F_{x,y}(t) on the grid.
inline std::vector<SehgalViolation> sehgal_check(const EContraction& f, const FiniteRandomVariable& x,
                                                 const FiniteRandomVariable& y, double r, std::span<const double> grid,
                                                 Norm norm = Norm::euclidean) {
  if (!(r > 0.0 && r < 1.0)) throw std::invalid_argument("sehgal_check: r must lie in (0, 1)");
  const auto before = espace_distance(x, y, norm);
  const auto after = espace_distance(f(x), f(y), norm);
  std::vector<SehgalViolation> out;
  for (double t : grid) {
    const double lhs = after.eval(r * t), rhs = before.eval(t);
    if (lhs < rhs) out.push_back({t, lhs, rhs});
  }
  return out;
}

// Probabilistic Hausdorff-Pompeiu distance (T = T_m unless chosen otherwise):
//   F_{A,B}(t) = sup_{s<t} T(inf_{x in A} sup_{y in B} F_xy(s), inf_{y in B} sup_{x in A} F_xy(s)).
// The bracket G(s) is a finite inf/sup of left-continuous nondecreasing step
// functions composed with a continuous nondecreasing t-norm, hence itself
// left-continuous and nondecreasing, so sup_{s<t} G(s) = G(t).
inline std::vector<double> prob_hausdorff(std::span<const FiniteRandomVariable> a, std::span<const FiniteRandomVariable> b,
                                          std::span<const double> grid, TNorm tnorm = TNorm::lukasiewicz,
                                          Norm norm = Norm::euclidean) {
  if (a.empty() || b.empty()) throw std::invalid_argument("prob_hausdorff: sets must be nonempty");
  const auto& probs = a.front().probs;
  for (const auto& x : a) require_same_space(x, a.front());
  for (const auto& y : b) require_same_space(y, a.front());
  const std::size_t na = a.size(), nb = b.size(), k = probs.size();

  // pairwise distances per sample point
  std::vector<double> d(na * nb * k);
  for (std::size_t i = 0; i < na; ++i)
    for (std::size_t j = 0; j < nb; ++j)
      for (std::size_t w = 0; w < k; ++w) d[(i * nb + j) * k + w] = distance(a[i].values[w], b[j].values[w], norm);

  std::vector<double> out;
  out.reserve(grid.size());
  std::vector<double> sup_over_a(nb);
  for (double t : grid) {
    if (!(t > 0.0)) {
      out.push_back(0.0);
      continue;
    }
    double inf_a = 1.0;
    std::fill(sup_over_a.begin(), sup_over_a.end(), 0.0);
    for (std::size_t i = 0; i < na; ++i) {
      double sup_b = 0.0;
      for (std::size_t j = 0; j < nb; ++j) {
        double f = 0.0;
        const double* dij = &d[(i * nb + j) * k];
        for (std::size_t w = 0; w < k; ++w)
          if (dij[w] < t) f += probs[w];
        f = std::min(f, 1.0);
        sup_b = std::max(sup_b, f);
        sup_over_a[j] = std::max(sup_over_a[j], f);
      }
      inf_a = std::min(inf_a, sup_b);
    }
    const double inf_b = *std::min_element(sup_over_a.begin(), sup_over_a.end());
    out.push_back(apply_tnorm(tnorm, inf_a, inf_b));
  }
  return out;
}

struct FixedPointResult {
  FiniteRandomVariable limit;
  std::vector<double> step_distances; // sup_omega d(x_j, x_{j+1}), j = 0..steps-1
  std::vector<double> step_ratios;    // successive quotients where defined
};

// x_{j+1} = f(x_j). Requires ratio(f) < 1 (Banach fixed point on the E-space).
inline FixedPointResult fixed_point_iterate(const EContraction& f, const FiniteRandomVariable& z, std::size_t steps,
                                            Norm norm = Norm::euclidean) {
  if (!(f.ratio() < 1.0))
    throw HypothesisError("fixed_point_iterate: contraction ratio " + std::to_string(f.ratio()) + " is not < 1");
  FixedPointResult r{z, {}, {}};
  for (std::size_t j = 0; j < steps; ++j) {
    auto next = f(r.limit);
    r.step_distances.push_back(sup_distance(r.limit, next, norm));
    r.limit = std::move(next);
  }
  for (std::size_t j = 1; j < r.step_distances.size(); ++j)
    if (r.step_distances[j - 1] > 0.0) r.step_ratios.push_back(r.step_distances[j] / r.step_distances[j - 1]);
  return r;
}

struct InvariantSetOptions {
  double epsilon = 0.0;           // epsilon-net radius in sup-over-Omega distance; 0 keeps all distinct points
  std::size_t capacity = 1u << 16; // maximum set size after pruning
  Norm norm = Norm::euclidean;
};

struct InvariantSetResult {
  std::vector<std::size_t> sizes;           // |K_j|, j = 0..steps
  std::vector<std::vector<double>> distance; // F_{K_j, K_{j+1}} on the grid, j = 0..steps-1
  std::vector<FiniteRandomVariable> last;    // K_steps
};

namespace detail {

inline bool lex_less(const FiniteRandomVariable& a, const FiniteRandomVariable& b) {
  return std::lexicographical_compare(a.values.begin(), a.values.end(), b.values.begin(), b.values.end());
}

// Canonical order, exact duplicates removed, then a greedy epsilon-net.
inline std::vector<FiniteRandomVariable> canonical_net(std::vector<FiniteRandomVariable> set, const InvariantSetOptions& o) {
  std::sort(set.begin(), set.end(), lex_less);
  set.erase(std::unique(set.begin(), set.end()), set.end());
  if (o.epsilon <= 0.0) return set;
  std::vector<FiniteRandomVariable> net;
  for (auto& x : set) {
    bool covered = false;
    for (auto it = net.rbegin(); it != net.rend(); ++it)
      if (sup_distance(x, *it, o.norm) <= o.epsilon) {
        covered = true;
        break;
      }
    if (!covered) net.push_back(std::move(x));
  }
  return net;
}

} // namespace detail

// K_0 = {z}, K_{j+1} = f_1(K_j) u ... u f_N(K_j), pruned to an epsilon-net.
inline InvariantSetResult invariant_set_iterate(std::span<const EContraction> maps, const FiniteRandomVariable& z,
                                                std::size_t steps, std::span<const double> grid,
                                                const InvariantSetOptions& opts = {}) {
  if (maps.empty()) throw std::invalid_argument("invariant_set_iterate: need at least one map");
  for (const auto& f : maps) {
    if (!(f.ratio() < 1.0))
      throw HypothesisError("invariant_set_iterate: contraction ratio " + std::to_string(f.ratio()) + " is not < 1");
    if (f.size() != z.size()) throw std::invalid_argument("invariant_set_iterate: sample space size mismatch");
  }
  InvariantSetResult r;
  std::vector<FiniteRandomVariable> k{z};
  r.sizes.push_back(1);
  for (std::size_t j = 0; j < steps; ++j) {
    std::vector<FiniteRandomVariable> next;
    next.reserve(k.size() * maps.size());
    for (const auto& f : maps)
      for (const auto& x : k) next.push_back(f(x));
    next = detail::canonical_net(std::move(next), opts);
    if (next.size() > opts.capacity)
      throw ResourceError("invariant_set_iterate: set size " + std::to_string(next.size()) + " exceeds capacity " +
                          std::to_string(opts.capacity));
    r.distance.push_back(prob_hausdorff(k, next, grid, TNorm::lukasiewicz, opts.norm));
    r.sizes.push_back(next.size());
    k = std::move(next);
  }
  r.last = std::move(k);
  return r;
}

} // namespace fractalaw
