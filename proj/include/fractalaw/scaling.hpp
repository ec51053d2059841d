#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "affine.hpp"
#include "errors.hpp"
#include "measure.hpp"
#include "numeric.hpp"
#include "rng.hpp"

namespace fractalaw {

struct Branch {
  double weight = 0.0;
  AffineContraction map;
};

// Scaling law with weights (p_1, S_1, ..., p_N, S_N): p_i > 0, sum p_i = 1.
class ScalingLaw {
public:
  ScalingLaw() = default;

  explicit ScalingLaw(std::vector<Branch> branches) : branches_(std::move(branches)) {
    if (branches_.empty()) throw std::invalid_argument("ScalingLaw: at least one branch required");
    CompensatedSum total;
    for (const auto& b : branches_) {
      if (!(b.weight > 0.0) || !std::isfinite(b.weight)) throw std::invalid_argument("ScalingLaw: weights must be > 0");
      if (b.map.dimension() != branches_.front().map.dimension())
        throw std::invalid_argument("ScalingLaw: branch dimension mismatch");
      total.add(b.weight);
    }
    if (std::abs(total.value() - 1.0) > 1e-12)
      throw std::invalid_argument("ScalingLaw: weights must sum to 1 (got " + std::to_string(total.value()) + ")");
  }

  std::size_t size() const { return branches_.size(); }
  std::size_t dimension() const { return branches_.front().map.dimension(); }
  const std::vector<Branch>& branches() const { return branches_; }
  const Branch& operator[](std::size_t i) const { return branches_[i]; }

  // sum_i p_i r_i^q
  double contraction_sum(double q) const {
    CompensatedSum s;
    for (const auto& b : branches_) s.add(b.weight * std::pow(b.map.ratio(), q));
    return s.value();
  }

  friend bool operator==(const ScalingLaw& a, const ScalingLaw& b) {
    if (a.branches_.size() != b.branches_.size()) return false;
    for (std::size_t i = 0; i < a.branches_.size(); ++i)
      if (a.branches_[i].weight != b.branches_[i].weight || !(a.branches_[i].map == b.branches_[i].map)) return false;
    return true;
  }

private:
  std::vector<Branch> branches_;
};

// S mu := sum_i p_i S_i mu^(i).
inline DiscreteMeasure apply_law(const ScalingLaw& law, std::span<const DiscreteMeasure> inputs) {
  if (inputs.size() != law.size())
    throw std::invalid_argument("apply_law: expected " + std::to_string(law.size()) + " input measures, got " +
                                std::to_string(inputs.size()));
  std::vector<Atom> atoms;
  std::size_t total = 0;
  for (const auto& mu : inputs) total += mu.size();
  atoms.reserve(total);
  for (std::size_t i = 0; i < law.size(); ++i) {
    const auto& b = law[i];
    if (inputs[i].dimension() != b.map.dimension()) throw std::invalid_argument("apply_law: dimension mismatch");
    for (const auto& a : inputs[i].atoms()) atoms.push_back({b.map(a.point), b.weight * a.weight});
  }
  return make_measure(std::move(atoms));
}

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

// Random law drawn from a finite list of laws.
struct FiniteMixture {
  std::vector<ScalingLaw> laws;
  std::vector<double> probs;
};

enum class EssSupDeclaration {
  none,
  // Ratios are independent uniforms on closed intervals, so
  // ess sup sum p_i r_i^q = sum p_i hi_i^q.
  ratio_upper_bounds,
};

// Branch i maps x -> r_i x + b_i with r_i ~ U[ratio.lo, ratio.hi] and each
// offset coordinate uniform on its interval, all independent.
struct ParametricBranch {
  Interval ratio;
  std::vector<Interval> offset; // one interval per coordinate
};

struct ParametricAffine {
  std::size_t dimension = 1;
  std::vector<double> weights;
  std::vector<ParametricBranch> branches;
  EssSupDeclaration esssup = EssSupDeclaration::none;
};

// One-branch 1-D law on Omega = (0, 1] with uniform omega:
//   exp_inv:    S(x) = x/2 + exp(1/omega)
//   reciprocal: S(x) = x/2 + 1/omega
struct HeavyTailExample {
  enum class Variant { exp_inv, reciprocal };
  Variant variant = Variant::reciprocal;
};

using RandomScalingLawSpec = std::variant<FiniteMixture, ParametricAffine, HeavyTailExample>;

inline std::string to_string(HeavyTailExample::Variant v) {
  return v == HeavyTailExample::Variant::exp_inv ? "exp_inv" : "reciprocal";
}

// ln of the offset added by a heavy-tail law at omega; finite for every omega
// in (0, 1] even when the offset itself overflows.
inline double heavy_tail_log_offset(HeavyTailExample::Variant v, double omega) {
  if (!(omega > 0.0 && omega <= 1.0)) throw std::invalid_argument("heavy tail: omega must lie in (0, 1]");
  return v == HeavyTailExample::Variant::exp_inv ? 1.0 / omega : -std::log(omega);
}

inline double heavy_tail_offset(HeavyTailExample::Variant v, double omega) {
  if (!(omega > 0.0 && omega <= 1.0)) throw std::invalid_argument("heavy tail: omega must lie in (0, 1]");
  return v == HeavyTailExample::Variant::exp_inv ? std::exp(1.0 / omega) : 1.0 / omega;
}

// The law S^omega of a heavy-tail example.
inline ScalingLaw law_at(const HeavyTailExample& h, double omega) {
  const double b = heavy_tail_offset(h.variant, omega);
  if (!std::isfinite(b))
    throw std::overflow_error("heavy tail: offset exp(1/omega) overflows a double at omega = " + std::to_string(omega));
  return ScalingLaw({Branch{1.0, AffineContraction(0.5, b)}});
}

namespace detail {

inline void validate_interval(const Interval& iv, const char* what) {
  if (!std::isfinite(iv.lo) || !std::isfinite(iv.hi) || iv.lo > iv.hi)
    throw std::invalid_argument(std::string("ParametricAffine: bad ") + what + " interval");
}

} // namespace detail

inline void validate(const RandomScalingLawSpec& spec) {
  if (const auto* m = std::get_if<FiniteMixture>(&spec)) {
    if (m->laws.empty() || m->laws.size() != m->probs.size())
      throw std::invalid_argument("FiniteMixture: need one probability per law");
    CompensatedSum total;
    for (std::size_t i = 0; i < m->laws.size(); ++i) {
      if (!(m->probs[i] >= 0.0)) throw std::invalid_argument("FiniteMixture: probabilities must be >= 0");
      if (m->laws[i].size() == 0) throw std::invalid_argument("FiniteMixture: empty law");
      if (m->laws[i].dimension() != m->laws[0].dimension()) throw std::invalid_argument("FiniteMixture: dimension mismatch");
      total.add(m->probs[i]);
    }
    if (std::abs(total.value() - 1.0) > 1e-12) throw std::invalid_argument("FiniteMixture: probabilities must sum to 1");
  } else if (const auto* p = std::get_if<ParametricAffine>(&spec)) {
    if (p->dimension == 0 || p->dimension > kMaxDimension) throw std::invalid_argument("ParametricAffine: bad dimension");
    if (p->branches.empty() || p->weights.size() != p->branches.size())
      throw std::invalid_argument("ParametricAffine: need one weight per branch");
    CompensatedSum total;
    for (std::size_t i = 0; i < p->branches.size(); ++i) {
      if (!(p->weights[i] > 0.0)) throw std::invalid_argument("ParametricAffine: weights must be > 0");
      total.add(p->weights[i]);
      const auto& b = p->branches[i];
      detail::validate_interval(b.ratio, "ratio");
      if (b.ratio.lo < 0.0) throw std::invalid_argument("ParametricAffine: ratios must be >= 0");
      if (b.offset.size() != p->dimension) throw std::invalid_argument("ParametricAffine: offset needs one interval per coordinate");
      for (const auto& iv : b.offset) detail::validate_interval(iv, "offset");
    }
    if (std::abs(total.value() - 1.0) > 1e-12) throw std::invalid_argument("ParametricAffine: weights must sum to 1");
  }
}

inline std::size_t dimension(const RandomScalingLawSpec& spec) {
  if (const auto* m = std::get_if<FiniteMixture>(&spec)) return m->laws.front().dimension();
  if (const auto* p = std::get_if<ParametricAffine>(&spec)) return p->dimension;
  return 1;
}

// Largest branch count of any law the random law can produce.
inline std::size_t max_branches(const RandomScalingLawSpec& spec) {
  if (const auto* m = std::get_if<FiniteMixture>(&spec)) {
    std::size_t n = 0;
    for (const auto& l : m->laws) n = std::max(n, l.size());
    return n;
  }
  if (const auto* p = std::get_if<ParametricAffine>(&spec)) return p->branches.size();
  return 1;
}

// True when every draw yields the same law.
inline bool is_deterministic(const RandomScalingLawSpec& spec) {
  if (const auto* m = std::get_if<FiniteMixture>(&spec)) {
    std::size_t support = 0;
    for (double p : m->probs) support += p > 0.0;
    return support <= 1;
  }
  if (const auto* p = std::get_if<ParametricAffine>(&spec)) {
    for (const auto& b : p->branches) {
      if (b.ratio.lo != b.ratio.hi) return false;
      for (const auto& iv : b.offset)
        if (iv.lo != iv.hi) return false;
    }
    return true;
  }
  return false;
}

// One law drawn from the random law using the caller's stream.
inline ScalingLaw sample_law(const RandomScalingLawSpec& spec, RngStream& stream) {
  if (const auto* m = std::get_if<FiniteMixture>(&spec)) {
    if (m->laws.size() == 1) return m->laws.front();
    const double u = stream.uniform();
    double acc = 0.0;
    std::size_t last = 0;
    for (std::size_t i = 0; i < m->laws.size(); ++i) {
      if (m->probs[i] <= 0.0) continue;
      last = i;
      acc += m->probs[i];
      if (u < acc) return m->laws[i];
    }
    return m->laws[last];
  }
  if (const auto* p = std::get_if<ParametricAffine>(&spec)) {
    std::vector<Branch> branches;
    branches.reserve(p->branches.size());
    for (std::size_t i = 0; i < p->branches.size(); ++i) {
      const auto& b = p->branches[i];
      const double r = stream.uniform(b.ratio.lo, b.ratio.hi);
      Point offset = Point::zero(p->dimension);
      for (std::size_t k = 0; k < p->dimension; ++k) offset[k] = stream.uniform(b.offset[k].lo, b.offset[k].hi);
      branches.push_back({p->weights[i], AffineContraction::scaled_identity(r, offset)});
    }
    return ScalingLaw(std::move(branches));
  }
  return law_at(std::get<HeavyTailExample>(spec), stream.uniform_open_closed());
}

// Deterministic stand-in: the first mixture component with positive
// probability, interval midpoints for parametric laws, omega = 1 for the
// heavy-tail examples.
inline ScalingLaw representative_law(const RandomScalingLawSpec& spec) {
  if (const auto* m = std::get_if<FiniteMixture>(&spec)) {
    for (std::size_t i = 0; i < m->laws.size(); ++i)
      if (m->probs[i] > 0.0) return m->laws[i];
    return m->laws.front();
  }
  if (const auto* p = std::get_if<ParametricAffine>(&spec)) {
    std::vector<Branch> branches;
    for (std::size_t i = 0; i < p->branches.size(); ++i) {
      const auto& b = p->branches[i];
      Point offset = Point::zero(p->dimension);
      for (std::size_t k = 0; k < p->dimension; ++k) offset[k] = 0.5 * (b.offset[k].lo + b.offset[k].hi);
      branches.push_back({p->weights[i], AffineContraction::scaled_identity(0.5 * (b.ratio.lo + b.ratio.hi), offset)});
    }
    return ScalingLaw(std::move(branches));
  }
  return law_at(std::get<HeavyTailExample>(spec), 1.0);
}

// Default starting measure: delta at the fixed point of the first branch of
// the representative law.
inline DiscreteMeasure default_mu0(const RandomScalingLawSpec& spec) {
  return DiscreteMeasure::dirac(representative_law(spec)[0].map.fixed_point());
}

// lambda_q = E_omega sum_i p_i r_i^q. Exact for mixtures and the heavy-tail
// examples (whose ratio is always 1/2); Monte Carlo over m draws from `stream`
// for parametric laws.
inline Estimate lambda_q_expected(const RandomScalingLawSpec& spec, double q, std::size_t m, RngStream stream) {
  if (!(q > 0.0)) throw std::invalid_argument("lambda_q_expected: q must be positive");
  if (const auto* mix = std::get_if<FiniteMixture>(&spec)) {
    CompensatedSum s;
    for (std::size_t i = 0; i < mix->laws.size(); ++i) s.add(mix->probs[i] * mix->laws[i].contraction_sum(q));
    return {s.value(), 0.0};
  }
  if (std::holds_alternative<HeavyTailExample>(spec)) return {std::pow(2.0, -q), 0.0};
  if (is_deterministic(spec)) return {representative_law(spec).contraction_sum(q), 0.0};
  if (m == 0) throw std::invalid_argument("lambda_q_expected: m must be >= 1 for sampled laws");
  std::vector<double> xs(m);
  for (auto& x : xs) x = sample_law(spec, stream).contraction_sum(q);
  return mean_with_stderr(xs);
}

inline Estimate lambda_q_expected(const RandomScalingLawSpec& spec, double q, std::size_t m = 100000,
                                  std::uint64_t seed = 0) {
  return lambda_q_expected(spec, q, m, derive_stream(derive_seed(seed, 0x4c41u), 0, {}));
}

// lambda_q = ess sup sum_i p_i r_i^q. Parametric laws must declare how the
// supremum is obtained; it is never estimated from samples.
inline double lambda_q_esssup(const RandomScalingLawSpec& spec, double q) {
  if (!(q > 0.0)) throw std::invalid_argument("lambda_q_esssup: q must be positive");
  if (const auto* mix = std::get_if<FiniteMixture>(&spec)) {
    double best = 0.0;
    for (std::size_t i = 0; i < mix->laws.size(); ++i)
      if (mix->probs[i] > 0.0) best = std::max(best, mix->laws[i].contraction_sum(q));
    return best;
  }
  if (std::holds_alternative<HeavyTailExample>(spec)) return std::pow(2.0, -q);
  const auto& p = std::get<ParametricAffine>(spec);
  if (p.esssup != EssSupDeclaration::ratio_upper_bounds && !is_deterministic(spec))
    throw HypothesisError("lambda_q_esssup: parametric law does not declare its essential supremum");
  CompensatedSum s;
  for (std::size_t i = 0; i < p.branches.size(); ++i) s.add(p.weights[i] * std::pow(p.branches[i].ratio.hi, q));
  return s.value();
}

// Named specs used by the bundled configurations.
//   uniform:      x/2, x/2 + 1/2 with weights 1/2 (invariant measure Lebesgue on [0,1])
//   cantor:       x/3, x/3 + 2/3 with weights 1/2
//   random_ratio: r_i ~ U[0.3, 0.45], offsets 0 and 0.55, weights 1/2
//   reciprocal:   x/2 + 1/omega
//   exp_inv:      x/2 + exp(1/omega)
inline RandomScalingLawSpec preset_spec(const std::string& name) {
  if (name == "uniform")
    return FiniteMixture{{ScalingLaw({Branch{0.5, AffineContraction(0.5, 0.0)}, Branch{0.5, AffineContraction(0.5, 0.5)}})},
                         {1.0}};
  if (name == "cantor")
    return FiniteMixture{{ScalingLaw({Branch{0.5, AffineContraction(1.0 / 3.0, 0.0)},
                                      Branch{0.5, AffineContraction(1.0 / 3.0, 2.0 / 3.0)}})},
                         {1.0}};
  if (name == "random_ratio") {
    ParametricAffine p;
    p.dimension = 1;
    p.weights = {0.5, 0.5};
    p.branches = {ParametricBranch{{0.3, 0.45}, {{0.0, 0.0}}}, ParametricBranch{{0.3, 0.45}, {{0.55, 0.55}}}};
    p.esssup = EssSupDeclaration::ratio_upper_bounds;
    return p;
  }
  if (name == "reciprocal") return HeavyTailExample{HeavyTailExample::Variant::reciprocal};
  if (name == "exp_inv") return HeavyTailExample{HeavyTailExample::Variant::exp_inv};
  throw std::invalid_argument("unknown preset '" + name + "' (expected uniform, cantor, random_ratio, reciprocal, exp_inv)");
}

} // namespace fractalaw
