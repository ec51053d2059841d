#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "measure.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "scaling.hpp"
#include "scaling_io.hpp"
#include "transport.hpp"

namespace fractalaw {

// Support control applied after every level of the iteration.
struct PrunePolicy {
  double epsilon = 0.0; // grid size for coalesce; 0 = exact unless auto_threshold kicks in
  std::size_t cap = std::numeric_limits<std::size_t>::max();
  // With epsilon == 0, measures above this many atoms are coalesced on the
  // grid diameter * 2^-depth.
  std::size_t auto_threshold = std::size_t{1} << 20;
  // Hard limit; exceeding it after pruning is a ResourceError.
  std::size_t atom_limit = std::size_t{1} << 24;
};

// A measure together with a bound on how far pruning moved its mass:
// l_q(exact, measure) <= slack^{min(1,q)}.
struct Iterate {
  DiscreteMeasure measure;
  double slack = 0.0;
};

inline double slack_term(double slack, double q) { return slack == 0.0 ? 0.0 : std::pow(slack, std::min(1.0, q)); }

namespace detail {

inline Iterate prune_level(DiscreteMeasure mu, double slack, std::size_t depth, const PrunePolicy& p, Norm norm) {
  double eps = p.epsilon;
  if (eps == 0.0 && mu.size() > p.auto_threshold) eps = diameter(mu, norm) * std::ldexp(1.0, -static_cast<int>(depth));
  if (eps > 0.0 || mu.size() > p.cap) {
    auto c = coalesce_tracked(mu, eps, p.cap, norm);
    mu = std::move(c.measure);
    slack += c.displacement;
  }
  if (mu.size() > p.atom_limit)
    throw ResourceError("iterate_measure: " + std::to_string(mu.size()) + " atoms exceed the limit of " +
                        std::to_string(p.atom_limit));
  return {std::move(mu), slack};
}

inline Iterate combine(const ScalingLaw& law, std::vector<Iterate> children, std::size_t depth, const PrunePolicy& p,
                       Norm norm) {
  std::vector<DiscreteMeasure> inputs;
  inputs.reserve(children.size());
  double slack = 0.0;
  for (std::size_t i = 0; i < children.size(); ++i) {
    // the image of a delta-perturbation under S_i is an (r_i delta)-perturbation
    slack = std::max(slack, law[i].map.ratio() * children[i].slack);
    inputs.push_back(std::move(children[i].measure));
  }
  return prune_level(apply_law(law, inputs), slack, depth, p, norm);
}

struct TreeContext {
  std::uint64_t seed;
  std::uint64_t tree;
  const RandomScalingLawSpec& spec;
  const DiscreteMeasure& mu0;
  const PrunePolicy& prune;
  Norm norm;
};

inline Iterate build_node(const TreeContext& ctx, const TreeAddress& sigma, std::size_t remaining) {
  if (remaining == 0) return {ctx.mu0, 0.0};
  auto stream = derive_stream(ctx.seed, ctx.tree, sigma);
  const ScalingLaw law = sample_law(ctx.spec, stream);
  std::vector<Iterate> children;
  children.reserve(law.size());
  for (std::uint32_t i = 0; i < law.size(); ++i) children.push_back(build_node(ctx, sigma.child(i), remaining - 1));
  return combine(law, std::move(children), remaining, ctx.prune, ctx.norm);
}

} // namespace detail

// mu_n of the subtree rooted at `root` of tree `tree`: the law at the root
// is drawn at `root`, the law feeding branch i of the node at sigma is drawn
// at sigma.i, and leaves n levels below carry mu0. Deterministic specs are
// evaluated level by level, which gives the same result without walking all
// N^n nodes.
inline Iterate iterate_subtree(std::uint64_t seed, std::uint64_t tree, const TreeAddress& root,
                               const RandomScalingLawSpec& spec, const DiscreteMeasure& mu0, std::size_t n,
                               const PrunePolicy& prune = {}, Norm norm = Norm::euclidean) {
  if (!mu0.is_unit_mass()) throw std::invalid_argument("iterate_measure: mu0 must have unit mass");
  if (mu0.dimension() != dimension(spec)) throw std::invalid_argument("iterate_measure: mu0 dimension does not match the law");
  if (is_deterministic(spec)) {
    auto stream = derive_stream(seed, tree, root);
    const ScalingLaw law = sample_law(spec, stream);
    Iterate cur{mu0, 0.0};
    for (std::size_t level = 1; level <= n; ++level) {
      std::vector<Iterate> children(law.size(), cur);
      cur = detail::combine(law, std::move(children), level, prune, norm);
    }
    return cur;
  }
  const detail::TreeContext ctx{seed, tree, spec, mu0, prune, norm};
  return detail::build_node(ctx, root, n);
}

inline Iterate iterate_measure_tracked(std::uint64_t seed, std::uint64_t tree, const RandomScalingLawSpec& spec,
                                       const DiscreteMeasure& mu0, std::size_t n, const PrunePolicy& prune = {},
                                       Norm norm = Norm::euclidean) {
  return iterate_subtree(seed, tree, {}, spec, mu0, n, prune, norm);
}

inline DiscreteMeasure iterate_measure(std::uint64_t seed, std::uint64_t tree, const RandomScalingLawSpec& spec,
                                       const DiscreteMeasure& mu0, std::size_t n, const PrunePolicy& prune = {},
                                       Norm norm = Norm::euclidean) {
  return iterate_measure_tracked(seed, tree, spec, mu0, n, prune, norm).measure;
}

struct TrajectoryOptions {
  double q = 1.0;
  PrunePolicy prune;
  TransportOptions transport;
  bool keep_measures = false;
  bool distance_to_last = false;
};

struct Trajectory {
  std::vector<DiscreteMeasure> measures; // mu_0..mu_n when kept
  std::vector<double> slack;             // pruning displacement bound per depth
  std::vector<double> step_distances;    // l_q(mu_k, mu_{k+1}), k = 0..n-1
  std::vector<double> to_last;           // l_q(mu_k, mu_n), k = 0..n, when requested
  DiscreteMeasure last;

  // Bound on how much pruning can change step k.
  double step_slack(std::size_t k, double q) const { return slack_term(slack[k], q) + slack_term(slack[k + 1], q); }
};

// The sequence mu_0..mu_n of one tree. Each depth is evaluated with
// iterate_measure on the same tree, so element k is bit-identical to
// iterate_measure(..., k).
inline Trajectory trajectory(std::uint64_t seed, std::uint64_t tree, const RandomScalingLawSpec& spec,
                             const DiscreteMeasure& mu0, std::size_t n_max, const TrajectoryOptions& opts = {}) {
  if (!(opts.q > 0.0)) throw std::invalid_argument("trajectory: q must be positive");
  Trajectory t;
  std::optional<Iterate> last;
  if (opts.distance_to_last) last = iterate_measure_tracked(seed, tree, spec, mu0, n_max, opts.prune, opts.transport.norm);
  std::optional<DiscreteMeasure> prev;
  for (std::size_t k = 0; k <= n_max; ++k) {
    Iterate cur = (last && k == n_max) ? *last : iterate_measure_tracked(seed, tree, spec, mu0, k, opts.prune, opts.transport.norm);
    t.slack.push_back(cur.slack);
    if (prev) t.step_distances.push_back(lq_distance(*prev, cur.measure, opts.q, opts.transport));
    if (last) t.to_last.push_back(k == n_max ? 0.0 : lq_distance(cur.measure, last->measure, opts.q, opts.transport));
    if (opts.keep_measures) t.measures.push_back(cur.measure);
    if (k == n_max)
      t.last = std::move(cur.measure);
    else
      prev = std::move(cur.measure);
  }
  return t;
}

struct Ensemble {
  std::uint64_t seed = 0;
  std::uint64_t first_tree = 0; // members use trees first_tree .. first_tree + m - 1
  std::string spec_hash;
  std::size_t depth = 0;
  PrunePolicy prune;
  std::vector<DiscreteMeasure> members;
  std::vector<double> slack;

  std::size_t size() const { return members.size(); }
  double max_slack() const { return slack.empty() ? 0.0 : *std::max_element(slack.begin(), slack.end()); }
};

// m independent iterates, one per tree index, computed in parallel with
// results stored by index.
inline Ensemble generate_ensemble(std::uint64_t seed, const RandomScalingLawSpec& spec, const DiscreteMeasure& mu0,
                                  std::size_t n, std::size_t m, const PrunePolicy& prune = {}, std::size_t threads = 1,
                                  std::uint64_t first_tree = 0, Norm norm = Norm::euclidean) {
  if (m == 0) throw std::invalid_argument("generate_ensemble: m must be >= 1");
  Ensemble e;
  e.seed = seed;
  e.first_tree = first_tree;
  e.spec_hash = spec_hash(spec);
  e.depth = n;
  e.prune = prune;
  e.members.resize(m);
  e.slack.resize(m);
  if (is_deterministic(spec)) {
    const auto it = iterate_measure_tracked(seed, first_tree, spec, mu0, n, prune, norm);
    for (std::size_t i = 0; i < m; ++i) {
      e.members[i] = it.measure;
      e.slack[i] = it.slack;
    }
    return e;
  }
  parallel_for(m, threads, [&](std::size_t i) {
    auto it = iterate_measure_tracked(seed, first_tree + i, spec, mu0, n, prune, norm);
    e.members[i] = std::move(it.measure);
    e.slack[i] = it.slack;
  });
  return e;
}

inline nlohmann::ordered_json prune_to_json(const PrunePolicy& p) {
  nlohmann::ordered_json j;
  j["epsilon"] = p.epsilon;
  if (p.cap == std::numeric_limits<std::size_t>::max())
    j["cap"] = nullptr;
  else
    j["cap"] = p.cap;
  j["auto_threshold"] = p.auto_threshold;
  j["atom_limit"] = p.atom_limit;
  return j;
}

inline nlohmann::ordered_json ensemble_manifest(const Ensemble& e) {
  nlohmann::ordered_json j;
  j["seed"] = e.seed;
  j["first_tree"] = e.first_tree;
  j["spec_hash"] = e.spec_hash;
  j["n"] = e.depth;
  j["m"] = e.members.size();
  j["prune"] = prune_to_json(e.prune);
  return j;
}

} // namespace fractalaw
