#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "config.hpp"
#include "iteration.hpp"
#include "numeric.hpp"
#include "parallel.hpp"
#include "prob_metric.hpp"
#include "report.hpp"
#include "rng.hpp"
#include "scaling.hpp"
#include "transport.hpp"

namespace fractalaw {

inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// A-priori distance of the k-th iterate from the limit, for a contraction
// factor lambda in (0, 1) and base = distance between mu_0 and S mu_0:
// lambda^{k/q} / (1 - lambda^{1/q}) for q >= 1, lambda^k / (1 - lambda) below.
inline double error_bound(double lambda, double q, std::size_t k, double base) {
  if (!(lambda > 0.0 && lambda < 1.0)) throw std::invalid_argument("error_bound: lambda must lie in (0, 1)");
  if (!(q > 0.0)) throw std::invalid_argument("error_bound: q must be positive");
  const double kk = static_cast<double>(k);
  if (q >= 1.0) return std::pow(lambda, kk / q) / (1.0 - std::pow(lambda, 1.0 / q)) * base;
  return std::pow(lambda, kk) / (1.0 - lambda) * base;
}

// lambda^{(1/q) ^ 1}: the per-step factor on l_q distances.
inline double distance_factor(double lambda, double q) { return std::pow(lambda, std::min(1.0, 1.0 / q)); }

struct GeometricFit {
  double ratio = kNaN;
  double log_intercept = kNaN;
  std::size_t points = 0;
};

// Least squares fit of log step_k = a + k log(ratio) over k >= 1. Steps that
// are zero, non-finite or not above floor[k] carry no rate information and
// are skipped; fewer than two usable points give a NaN ratio.
inline GeometricFit fit_geometric_rate(std::span<const double> steps, std::span<const double> floor = {}) {
  std::vector<double> xs, ys;
  for (std::size_t k = 1; k < steps.size(); ++k) {
    const double s = steps[k];
    const double f = k < floor.size() ? floor[k] : 0.0;
    if (!(s > f) || !std::isfinite(s)) continue;
    xs.push_back(static_cast<double>(k));
    ys.push_back(std::log(s));
  }
  GeometricFit fit;
  fit.points = xs.size();
  if (xs.size() < 2) return fit;
  const double n = static_cast<double>(xs.size());
  const double mx = compensated_sum(xs) / n, my = compensated_sum(ys) / n;
  CompensatedSum sxy, sxx;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy.add((xs[i] - mx) * (ys[i] - my));
    sxx.add((xs[i] - mx) * (xs[i] - mx));
  }
  const double slope = sxy.value() / sxx.value();
  fit.ratio = std::exp(slope);
  fit.log_intercept = my - slope * mx;
  return fit;
}

namespace detail {

inline DiscreteMeasure realize(const MeasureSource& s, const ExperimentConfig& cfg, std::uint64_t seed, std::uint64_t tree,
                               const TreeAddress& root) {
  if (s.is_fixed()) return s.start;
  return iterate_subtree(seed, tree, root, cfg.require_spec(), s.start, s.depth, cfg.prune, cfg.norm).measure;
}

// S applied to independent copies of a source: branch i is fed the copy that
// lives in subtree i of the same tree, and the law is the one drawn at the root.
inline DiscreteMeasure push_source(const ScalingLaw& law, const MeasureSource& s, const ExperimentConfig& cfg,
                                   std::uint64_t seed, std::uint64_t tree) {
  std::vector<DiscreteMeasure> inputs;
  inputs.reserve(law.size());
  for (std::uint32_t i = 0; i < law.size(); ++i) inputs.push_back(realize(s, cfg, seed, tree, TreeAddress{}.child(i)));
  return apply_law(law, inputs);
}

inline TransportOptions serial(TransportOptions o) {
  o.threads = 1;
  return o;
}

// Fraction of sorted samples strictly below t.
inline double fraction_below(const std::vector<double>& sorted, double t) {
  const auto it = std::lower_bound(sorted.begin(), sorted.end(), t);
  return static_cast<double>(it - sorted.begin()) / static_cast<double>(sorted.size());
}

inline double binomial_se(double p, std::size_t m) { return std::sqrt(std::max(0.0, p * (1.0 - p)) / static_cast<double>(m)); }

inline const HeavyTailExample* heavy_tail(const RandomScalingLawSpec& spec) { return std::get_if<HeavyTailExample>(&spec); }

inline void require_grid(const ExperimentConfig& cfg) {
  if (cfg.t_grid.empty()) throw ConfigError("config: '" + cfg.experiment + "' needs 't_grid'");
}

inline DiscreteMeasure fixed_source(const std::optional<MeasureSource>& s, const char* what, DiscreteMeasure fallback) {
  if (!s) return fallback;
  if (!s->is_fixed()) throw ConfigError(std::string("config: '") + what + "' must be a fixed measure here");
  return s->start;
}

struct Moments1d {
  double mean = 0.0;
  double variance = 0.0;
};

inline Moments1d moments_1d(const DiscreteMeasure& mu) {
  CompensatedSum m1;
  for (const auto& a : mu.atoms()) m1.add(a.weight * a.point[0]);
  const double mean = m1.value();
  CompensatedSum m2;
  for (const auto& a : mu.atoms()) m2.add(a.weight * (a.point[0] - mean) * (a.point[0] - mean));
  return {mean, m2.value()};
}

inline double max_abs_coordinate(const DiscreteMeasure& mu) {
  double m = 0.0;
  for (const auto& a : mu.atoms())
    for (std::size_t i = 0; i < a.point.dimension(); ++i) m = std::max(m, std::abs(a.point[i]));
  return m;
}

// Midpoint discretization of the uniform law on [0,1] with 2^20 atoms.
inline DiscreteMeasure uniform_reference() {
  const std::size_t n = std::size_t{1} << 20;
  std::vector<Atom> atoms(n);
  const double w = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) atoms[i] = {Point{(static_cast<double>(i) + 0.5) * w}, w};
  return make_measure(std::move(atoms));
}

} // namespace detail

// Samples l_q(alpha, S alpha) over m independent trees and reports the tail
// P(l_q >= t) on the grid together with gamma = max_t t P(l_q >= t).
inline Report tail_check(const ExperimentConfig& cfg) {
  const auto& spec = cfg.require_spec();
  detail::require_grid(cfg);
  const std::size_t d = dimension(spec);
  const MeasureSource alpha = cfg.alpha ? *cfg.alpha : MeasureSource{DiscreteMeasure::dirac(Point::zero(d)), 0};
  const bool exact = is_deterministic(spec);
  const std::size_t m = cfg.ensemble_size;
  const std::size_t draws = exact ? 1 : m;
  const double a = std::min(1.0, cfg.q);
  const auto* ht = detail::heavy_tail(spec);
  const bool scalar_path = ht && alpha.is_fixed() && alpha.start.size() == 1;

  // Samples are kept as ln l_q so offsets like exp(1/omega) never overflow;
  // +inf marks a distance that overflowed a double.
  std::vector<double> logs(draws);
  std::vector<char> overflowed(draws, 0);
  parallel_for(draws, cfg.threads, [&](std::size_t j) {
    auto stream = derive_stream(cfg.seed, j, {});
    if (scalar_path) {
      const double lb = heavy_tail_log_offset(ht->variant, stream.uniform_open_closed());
      const double x = alpha.start.atoms()[0].point[0];
      // S x - x = b - x/2
      const double ld = lb < 700.0 ? std::log(std::abs(std::exp(lb) - 0.5 * x)) : lb + std::log1p(-0.5 * x * std::exp(-lb));
      logs[j] = a * ld;
      return;
    }
    try {
      const ScalingLaw law = sample_law(spec, stream);
      const DiscreteMeasure here = detail::realize(alpha, cfg, cfg.seed, j, {});
      const DiscreteMeasure pushed = detail::push_source(law, alpha, cfg, cfg.seed, j);
      logs[j] = std::log(lq_distance(here, pushed, cfg.q, detail::serial(cfg.transport())));
    } catch (const std::overflow_error&) {
      logs[j] = std::numeric_limits<double>::infinity();
      overflowed[j] = 1;
    }
  });
  std::vector<double> sorted = logs;
  std::sort(sorted.begin(), sorted.end());

  const double eps = exact ? 0.0 : dkw_epsilon(m, cfg.delta);
  Report r;
  r.experiment = "tail-check";
  r.curve_axis = "t";
  r.curve_value = "empirical P(l_q(alpha, S alpha) >= t)";

  const auto& expect = cfg.expect;
  if (expect.tail_oracle) {
    if (!ht || !alpha.is_fixed() || !(alpha.start == DiscreteMeasure::dirac(Point::zero(d))))
      throw ConfigError("config: tail_oracle needs a heavy_tail spec and alpha = dirac at 0");
  }
  const auto oracle = [&](double t) {
    if (!expect.tail_oracle) return kNaN;
    const double ls = std::log(t) / a; // ln of the offset threshold s = t^{1/a}
    if (*expect.tail_oracle == "reciprocal") return ls <= 0.0 ? 1.0 : std::exp(-ls);
    return ls <= 1.0 ? 1.0 : 1.0 / ls;
  };

  double gamma = 0.0, oracle_gap = 0.0;
  std::vector<double> products;
  for (double t : cfg.t_grid) {
    const double p = 1.0 - detail::fraction_below(sorted, std::log(t));
    products.push_back(t * p);
    gamma = std::max(gamma, t * p);
    const double o = oracle(t);
    if (expect.tail_oracle) oracle_gap = std::max(oracle_gap, std::abs(p - o));
    r.curve.push_back({t, p, exact ? kNaN : detail::binomial_se(p, m), o});
  }
  std::size_t n_overflow = 0;
  for (char c : overflowed) n_overflow += c;

  r.metric("gamma_hat", gamma);
  r.metric("dkw_epsilon", eps);
  r.metric("samples", static_cast<double>(draws));
  r.metric("overflowed_samples", static_cast<double>(n_overflow));
  r.details["tail_product"] = json_numbers(products);
  r.details["log_samples_computed_in_closed_form"] = scalar_path;

  if (expect.tail_oracle)
    r.verdicts.push_back(check_at_most("tail_matches_" + *expect.tail_oracle, oracle_gap, eps, "dkw_band", eps, "dkw_epsilon", eps));
  if (expect.bounded_tail) {
    // growth of t P(>= t) from the lower half of the grid to the upper half,
    // compared with the largest swing the DKW band allows at the top of the grid
    const std::size_t half = products.size() / 2;
    if (half == 0) throw ConfigError("config: bounded_tail needs at least two grid points");
    const double lower = *std::max_element(products.begin(), products.begin() + static_cast<std::ptrdiff_t>(half));
    const double upper = *std::max_element(products.begin() + static_cast<std::ptrdiff_t>(half), products.end());
    const double swing = cfg.t_grid.back() * eps;
    Verdict v = *expect.bounded_tail ? check_at_most("tail_product_growth", upper - lower, swing, "grid_max_times_dkw", swing, "dkw_epsilon", eps)
                                     : check_at_least("tail_product_growth", upper - lower, swing, "grid_max_times_dkw", swing, "dkw_epsilon", eps);
    v.note = *expect.bounded_tail ? "t P(>=t) expected to level off" : "t P(>=t) expected to keep growing";
    r.verdicts.push_back(v);
  }
  if (expect.gamma_range) {
    r.verdicts.push_back(check_at_least("gamma_lower", gamma, expect.gamma_range->first, "gamma_range_lo", expect.gamma_range->first));
    r.verdicts.push_back(check_at_most("gamma_upper", gamma, expect.gamma_range->second, "gamma_range_hi", expect.gamma_range->second));
  }
  if (expect.gamma_max) r.verdicts.push_back(check_at_most("gamma_max", gamma, *expect.gamma_max, "gamma_max", *expect.gamma_max));
  return r;
}

// Running means of sum_i p_i d(S_i 0, 0)^q along a sample schedule, tracked in
// log space. Divergent means the running mean grew by at least 10x from the
// first checkpoint to the last.
inline Report moment_divergence_probe(const ExperimentConfig& cfg) {
  const auto& spec = cfg.require_spec();
  std::vector<std::size_t> schedule = cfg.schedule;
  if (schedule.empty()) schedule = {1000, 10000, 100000, 1000000};
  const std::size_t total = schedule.back();
  const Point origin = Point::zero(dimension(spec));
  const auto* ht = detail::heavy_tail(spec);

  std::vector<double> logs(total);
  parallel_for(total, cfg.threads, [&](std::size_t j) {
    auto stream = derive_stream(cfg.seed, j, {});
    if (ht) {
      // d(S 0, 0) is the offset itself
      logs[j] = cfg.q * heavy_tail_log_offset(ht->variant, stream.uniform_open_closed());
      return;
    }
    const ScalingLaw law = sample_law(spec, stream);
    CompensatedSum s;
    for (const auto& b : law.branches()) s.add(b.weight * std::pow(distance(b.map(origin), origin, cfg.norm), cfg.q));
    logs[j] = std::log(s.value());
  });

  Report r;
  r.experiment = "moment-probe";
  r.curve_axis = "k";
  r.curve_value = "natural log of the running mean after k samples";

  std::vector<double> log_means;
  double hi = -std::numeric_limits<double>::infinity(), scaled = 0.0;
  std::size_t next = 0;
  for (std::size_t j = 0; j < total; ++j) {
    const double x = logs[j];
    if (x > hi) {
      scaled = scaled * std::exp(hi - x) + 1.0;
      hi = x;
    } else {
      scaled += std::exp(x - hi);
    }
    if (j + 1 == schedule[next]) {
      log_means.push_back(hi + std::log(scaled) - std::log(static_cast<double>(j + 1)));
      ++next;
    }
  }
  const double growth_log10 = (log_means.back() - log_means.front()) / std::log(10.0);
  const bool divergent = growth_log10 >= 1.0;

  const auto& expect = cfg.expect;
  for (std::size_t i = 0; i < schedule.size(); ++i)
    r.curve.push_back({static_cast<double>(schedule[i]), log_means[i], kNaN, expect.probe_mean ? std::log(*expect.probe_mean) : kNaN});
  r.metric("log10_growth", growth_log10);
  r.metric("log_running_mean_final", log_means.back());
  r.details["schedule"] = schedule;
  r.details["classification"] = divergent ? "divergent" : "stabilizing";

  if (expect.divergent) {
    Verdict v;
    v.name = "divergence_classification";
    v.observed = growth_log10;
    v.relation = *expect.divergent ? ">=" : "<";
    v.threshold = 1.0;
    v.tolerance_name = "growth_factor";
    v.tolerance = 10.0;
    v.passed = divergent == *expect.divergent;
    v.note = "observed is log10 of the growth of the running mean across the schedule";
    r.verdicts.push_back(v);
  }
  if (expect.probe_mean) {
    double se = kNaN;
    if (std::all_of(logs.begin(), logs.end(), [](double x) { return x < 700.0; })) {
      std::vector<double> xs(total);
      for (std::size_t j = 0; j < total; ++j) xs[j] = std::exp(logs[j]);
      se = mean_with_stderr(xs).std_error;
    }
    const double mean = std::exp(log_means.back());
    r.metric("running_mean_final", mean, se);
    const double tol = expect.probe_mean_tol ? *expect.probe_mean_tol : 0.0;
    const double mc = expect.probe_mean_tol ? 0.0 : 4.0 * se;
    r.verdicts.push_back(check_at_most("running_mean_matches", std::abs(mean - *expect.probe_mean), tol + mc, "probe_mean_tol", tol,
                                       expect.probe_mean_tol ? "none" : "stderr_x4", mc));
  }
  return r;
}

// Compares F_{S mu, S nu}(t) with F_{mu, nu}(t / lambda^{(1/q)^1}) on the grid.
// The left side reuses one law draw for both measures and feeds branch i
// with the copies of (mu, nu) from subtree i; the right side uses fresh trees.
inline Report contraction_check(const ExperimentConfig& cfg) {
  const auto& spec = cfg.require_spec();
  detail::require_grid(cfg);
  if (!cfg.mu || !cfg.nu) throw ConfigError("config: contract-check needs 'mu' and 'nu'");
  const MeasureSource& mu = *cfg.mu;
  const MeasureSource& nu = *cfg.nu;
  const double lambda = lambda_q_esssup(spec, cfg.q);
  const double factor = distance_factor(lambda, cfg.q);
  const bool exact = is_deterministic(spec);
  const std::size_t m = cfg.ensemble_size;
  const std::size_t draws = exact ? 1 : m;
  const auto opts = detail::serial(cfg.transport());

  std::vector<double> lhs(draws), rhs(draws);
  parallel_for(draws, cfg.threads, [&](std::size_t j) {
    auto stream = derive_stream(cfg.seed, j, {});
    const ScalingLaw law = sample_law(spec, stream);
    lhs[j] = lq_distance(detail::push_source(law, mu, cfg, cfg.seed, j), detail::push_source(law, nu, cfg, cfg.seed, j), cfg.q, opts);
    const std::uint64_t tree = m + j;
    rhs[j] = lq_distance(detail::realize(mu, cfg, cfg.seed, tree, {}), detail::realize(nu, cfg, cfg.seed, tree, {}), cfg.q, opts);
  });
  std::sort(lhs.begin(), lhs.end());
  std::sort(rhs.begin(), rhs.end());

  const double dkw = exact ? 0.0 : dkw_epsilon(m, cfg.delta);
  const double eps_mc = 2.0 * dkw;
  Report r;
  r.experiment = "contract-check";
  r.curve_axis = "t";
  r.curve_value = "empirical F_{S mu, S nu}(t); bound = F_{mu, nu}(t / factor) - eps_mc";
  double gap = -1.0;
  for (double t : cfg.t_grid) {
    const double fl = detail::fraction_below(lhs, t);
    const double fr = detail::fraction_below(rhs, t / factor);
    gap = std::max(gap, fr - fl);
    r.curve.push_back({t, fl, exact ? kNaN : detail::binomial_se(fl, m), fr - eps_mc});
  }
  r.metric("lambda_esssup", lambda);
  r.metric("distance_factor", factor);
  r.metric("eps_mc", eps_mc);
  r.metric("max_gap", gap);
  r.metric("mean_lhs_distance", mean_with_stderr(lhs).value, mean_with_stderr(lhs).std_error);
  r.metric("mean_rhs_distance", mean_with_stderr(rhs).value, mean_with_stderr(rhs).std_error);
  r.verdicts.push_back(exact ? check_at_most("contraction_inequality", gap, 0.0, "exact", 0.0)
                             : check_at_most("contraction_inequality", gap, eps_mc, "dkw_twice", eps_mc, "dkw_epsilon", dkw));
  return r;
}

// Step distances l_q(mu_k, mu_{k+1}) and distances to the deepest iterate over
// m trees, with a geometric rate fitted per tree.
inline Report convergence_run(const ExperimentConfig& cfg) {
  const auto& spec = cfg.require_spec();
  const double lambda = lambda_q_esssup(spec, cfg.q);
  if (!(lambda < 1.0))
    throw HypothesisError("converge: lambda_q = " + std::to_string(lambda) + " is not < 1; refusing to certify convergence");
  const std::size_t n = cfg.depth;
  if (n < 1) throw ConfigError("config: converge needs depth >= 1");
  const DiscreteMeasure mu0 = detail::fixed_source(cfg.mu0, "mu0", default_mu0(spec));
  const double factor = distance_factor(lambda, cfg.q);
  const bool exact = is_deterministic(spec);
  const std::size_t trees = exact ? 1 : cfg.ensemble_size;
  const bool one_d = dimension(spec) == 1;

  TrajectoryOptions topts;
  topts.q = cfg.q;
  topts.prune = cfg.prune;
  topts.transport = detail::serial(cfg.transport());
  topts.distance_to_last = true;

  std::vector<std::vector<double>> steps(trees), to_last(trees), slack(trees);
  std::vector<GeometricFit> fits(trees);
  std::vector<detail::Moments1d> moments(trees);
  DiscreteMeasure first_last;
  parallel_for(trees, cfg.threads, [&](std::size_t j) {
    Trajectory t = trajectory(cfg.seed, j, spec, mu0, n, topts);
    // rounding floor: pruning slack plus a few ulps of the coordinate scale
    const double scale = 1e-13 * (1.0 + detail::max_abs_coordinate(t.last));
    std::vector<double> floor(n);
    for (std::size_t k = 0; k < n; ++k) floor[k] = t.step_slack(k, cfg.q) + scale;
    fits[j] = fit_geometric_rate(t.step_distances, floor);
    if (one_d) moments[j] = detail::moments_1d(t.last);
    steps[j] = std::move(t.step_distances);
    to_last[j] = std::move(t.to_last);
    slack[j] = std::move(t.slack);
    if (j == 0) first_last = std::move(t.last);
  });

  Report r;
  r.experiment = "converge";
  r.curve_axis = "k";
  r.curve_value = "l_q*(mu_k, mu_n) over trees; bound = error_bound(lambda_esssup, q, k, l_q*(mu_0, mu_1))";

  std::vector<double> ratios;
  for (const auto& f : fits)
    if (std::isfinite(f.ratio)) ratios.push_back(f.ratio);
  const double med = ratios.empty() ? kNaN : median(ratios);
  r.metric("lambda_esssup", lambda);
  r.metric("distance_factor", factor);
  r.metric("median_fitted_ratio", med);
  r.metric("trees", static_cast<double>(trees));
  r.metric("trees_with_fit", static_cast<double>(ratios.size()));
  if (!ratios.empty()) {
    r.metric("min_fitted_ratio", *std::min_element(ratios.begin(), ratios.end()));
    r.metric("max_fitted_ratio", *std::max_element(ratios.begin(), ratios.end()));
  }
  r.verdicts.push_back(check_at_most("median_fitted_ratio", med, factor + cfg.ratio_slack, "ratio_slack", cfg.ratio_slack));
  const auto& expect = cfg.expect;
  if (expect.ratio)
    r.verdicts.push_back(check_at_most("fitted_ratio_target", std::abs(med - *expect.ratio), expect.ratio_tol, "ratio_tol", expect.ratio_tol));

  // per-depth summaries
  const auto column = [&](const std::vector<std::vector<double>>& rows, std::size_t k) {
    std::vector<double> c(trees);
    for (std::size_t j = 0; j < trees; ++j) c[j] = rows[j][k];
    return c;
  };
  std::vector<double> median_steps, lifted_steps;
  for (std::size_t k = 0; k < n; ++k) {
    const auto c = column(steps, k);
    median_steps.push_back(median(c));
    lifted_steps.push_back(lift_distances(c, cfg.q).value);
  }
  r.details["median_step_distance"] = json_numbers(median_steps);
  r.details["lifted_step_distance"] = json_numbers(lifted_steps);

  const Estimate base = lift_distances(column(steps, 0), cfg.q);
  const bool bound_defined = lambda > 0.0;
  double worst_margin = -std::numeric_limits<double>::infinity(), worst_se = 0.0;
  for (std::size_t k = 0; k <= n; ++k) {
    const Estimate e = lift_distances(column(to_last, k), cfg.q);
    const double bound = bound_defined ? error_bound(lambda, cfg.q, k, base.value) : kNaN;
    double prune_slack = 0.0;
    for (std::size_t j = 0; j < trees; ++j)
      prune_slack = std::max(prune_slack, slack_term(slack[j][k], cfg.q) + slack_term(slack[j][n], cfg.q));
    r.curve.push_back({static_cast<double>(k), e.value, exact ? kNaN : e.std_error, bound});
    if (e.value - bound - prune_slack > worst_margin) worst_margin = e.value - bound - prune_slack;
    worst_se = std::max(worst_se, e.std_error + base.std_error);
  }
  if (expect.error_bound) {
    if (!bound_defined) throw ConfigError("config: error_bound needs a law with positive contraction factor");
    const double tol = 1e-12;
    const double mc = exact ? 0.0 : 3.0 * worst_se;
    r.verdicts.push_back(check_at_most("error_bound_holds", worst_margin, tol + mc, "rounding", tol, exact ? "none" : "stderr_x3", mc));
  }

  if (expect.mean || expect.variance) {
    if (!one_d) throw ConfigError("config: moment expectations need a one-dimensional law");
    std::vector<double> means(trees), vars(trees);
    for (std::size_t j = 0; j < trees; ++j) {
      means[j] = moments[j].mean;
      vars[j] = moments[j].variance;
    }
    const Estimate em = mean_with_stderr(means), ev = mean_with_stderr(vars);
    r.metric("limit_mean", em.value, em.std_error);
    r.metric("limit_variance", ev.value, ev.std_error);
    const double mcm = exact ? 0.0 : 3.0 * em.std_error, mcv = exact ? 0.0 : 3.0 * ev.std_error;
    if (expect.mean)
      r.verdicts.push_back(check_at_most("limit_mean", std::abs(em.value - *expect.mean), expect.moment_tol + mcm, "moment_tol",
                                         expect.moment_tol, exact ? "none" : "stderr_x3", mcm));
    if (expect.variance)
      r.verdicts.push_back(check_at_most("limit_variance", std::abs(ev.value - *expect.variance), expect.moment_tol + mcv,
                                         "moment_tol", expect.moment_tol, exact ? "none" : "stderr_x3", mcv));
  }
  if (expect.uniform_reference_tol) {
    if (!one_d) throw ConfigError("config: uniform_reference_tol needs a one-dimensional law");
    const double l = lq_1d(first_last, detail::uniform_reference(), 1.0);
    r.metric("l1_to_uniform_reference", l);
    r.verdicts.push_back(check_at_most("uniform_reference", l, *expect.uniform_reference_tol, "uniform_reference_tol",
                                       *expect.uniform_reference_tol));
  }
  return r;
}

// Three l_q** estimates between ensembles of depth-n iterates: A against an
// ensemble of S-pushed copies (depth n+1), A against an ensemble started from
// mu0', and a baseline between two fresh ensembles from mu0.
inline Report selfsim_test(const ExperimentConfig& cfg) {
  const auto& spec = cfg.require_spec();
  const std::size_t m = cfg.ensemble_size;
  if (m < 32) throw ConfigError("config: selfsim needs ensemble_size >= 32");
  const double lambda = lambda_q_esssup(spec, cfg.q);
  if (!(lambda < 1.0)) throw HypothesisError("selfsim: lambda_q = " + std::to_string(lambda) + " is not < 1");
  if (!cfg.mu0_alt) throw ConfigError("config: selfsim needs 'mu0_alt'");
  const DiscreteMeasure mu0 = detail::fixed_source(cfg.mu0, "mu0", default_mu0(spec));
  const DiscreteMeasure mu0_alt = detail::fixed_source(cfg.mu0_alt, "mu0_alt", mu0);
  const std::size_t n = cfg.depth;
  const double factor = distance_factor(lambda, cfg.q);
  const auto gen = [&](std::uint64_t tag, const DiscreteMeasure& start, std::size_t depth) {
    return generate_ensemble(derive_seed(cfg.seed, tag), spec, start, depth, m, cfg.prune, cfg.threads, 0, cfg.norm);
  };
  const Ensemble a = gen(1, mu0, n), pushed = gen(2, mu0, n + 1), b = gen(3, mu0_alt, n), c = gen(4, mu0, n),
                 d = gen(5, mu0, n);
  const auto opts = cfg.transport();
  const double est_push = lq_star_star(a.members, pushed.members, cfg.q, opts);
  const double est_cross = lq_star_star(a.members, b.members, cfg.q, opts);
  const double baseline = lq_star_star(c.members, d.members, cfg.q, opts);
  const auto prune_slack = [&](const Ensemble& x, const Ensemble& y) {
    return slack_term(x.max_slack(), cfg.q) + slack_term(y.max_slack(), cfg.q);
  };

  // Depth terms: both comparisons only coincide in the limit n -> infinity.
  double push_depth = 0.0, cross_depth = 0.0;
  if (cfg.geometric_slack) {
    const Ensemble one = gen(6, mu0, 1);
    std::vector<double> first(m);
    for (std::size_t j = 0; j < m; ++j) first[j] = lq_distance(mu0, one.members[j], cfg.q, opts);
    const double fn = std::pow(factor, static_cast<double>(n));
    push_depth = fn * lift_distances(first, cfg.q).value;
    cross_depth = fn * lq_distance(mu0, mu0_alt, cfg.q, opts);
  }
  const double slack_push = prune_slack(a, pushed) + push_depth;
  const double slack_cross = prune_slack(a, b) + cross_depth;
  const double slack_base = prune_slack(c, d);

  Report r;
  r.experiment = "selfsim";
  r.curve_axis = "k";
  r.curve_value = "l_q** estimate: k=0 A vs S-pushed A, k=1 A vs B (mu0'), k=2 baseline; bound = factor * baseline + slack";
  const double f = cfg.selfsim_factor;
  r.curve.push_back({0.0, est_push, kNaN, f * baseline + slack_push});
  r.curve.push_back({1.0, est_cross, kNaN, f * baseline + slack_cross});
  r.curve.push_back({2.0, baseline, kNaN, slack_base});
  r.metric("lq_star_star_push", est_push);
  r.metric("lq_star_star_cross_start", est_cross);
  r.metric("lq_star_star_baseline", baseline);
  r.metric("slack_push", slack_push);
  r.metric("slack_cross_start", slack_cross);
  r.metric("slack_baseline", slack_base);
  r.details["ensembles"] = {ensemble_manifest(a), ensemble_manifest(pushed), ensemble_manifest(b), ensemble_manifest(c),
                            ensemble_manifest(d)};
  r.verdicts.push_back(check_at_most("push_within_baseline", est_push, f * baseline + slack_push, "selfsim_factor", f,
                                     "pruning_and_depth_slack", slack_push));
  r.verdicts.push_back(check_at_most("cross_start_within_baseline", est_cross, f * baseline + slack_cross, "selfsim_factor", f,
                                     "pruning_and_depth_slack", slack_cross));
  return r;
}

// Banach iteration of a pointwise contraction on a finite E-space.
inline Report fixed_point_run(const ExperimentConfig& cfg) {
  if (!cfg.fixed_point) throw ConfigError("config: fixed-point needs a 'fixed_point' block");
  const auto& b = *cfg.fixed_point;
  FiniteRandomVariable z(b.omega, b.start);
  const EContraction f(b.maps);
  const FixedPointResult res = fixed_point_iterate(f, z, b.steps, cfg.norm);
  const double ratio = f.ratio();
  const double d0 = res.step_distances.empty() ? 0.0 : res.step_distances.front();

  Report r;
  r.experiment = "fixed-point";
  r.curve_axis = "k";
  r.curve_value = "sup_omega d(x_k, x_{k+1}); bound = r^k d_0";
  double worst_excess = 0.0, worst_ratio = 0.0;
  for (std::size_t k = 0; k < res.step_distances.size(); ++k) {
    const double bound = std::pow(ratio, static_cast<double>(k)) * d0;
    r.curve.push_back({static_cast<double>(k), res.step_distances[k], kNaN, bound});
    worst_excess = std::max(worst_excess, res.step_distances[k] - bound);
    // quotients of steps already at rounding level say nothing about the rate
    if (k > 0 && res.step_distances[k - 1] > 1e-6 * d0)
      worst_ratio = std::max(worst_ratio, res.step_distances[k] / res.step_distances[k - 1]);
  }
  double limit_error = 0.0;
  for (std::size_t w = 0; w < b.maps.size(); ++w)
    limit_error = std::max(limit_error, distance(res.limit.values[w], b.maps[w].fixed_point(), cfg.norm));
  const double last = res.step_distances.empty() ? 0.0 : res.step_distances.back();
  const double a_posteriori = ratio < 1.0 ? ratio * last / (1.0 - ratio) : kNaN;

  r.metric("contraction_ratio", ratio);
  r.metric("max_step_ratio", worst_ratio);
  r.metric("last_step", last);
  r.metric("limit_error", limit_error);
  auto limit = nlohmann::ordered_json::array();
  for (const auto& p : res.limit.values) {
    auto coords = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < p.dimension(); ++i) coords.push_back(p[i]);
    limit.push_back(coords);
  }
  r.details["limit"] = limit;
  const double rt = 1e-9;
  r.verdicts.push_back(check_at_most("step_ratio", worst_ratio, ratio + rt, "rounding", rt));
  r.verdicts.push_back(check_at_most("geometric_bound", worst_excess, 1e-12 * (1.0 + d0), "rounding", 1e-12));
  r.verdicts.push_back(check_at_most("converged", last, b.tolerance, "fixed_point_tolerance", b.tolerance));
  r.verdicts.push_back(check_at_most("limit_matches_fixed_point", limit_error, a_posteriori + 1e-12, "a_posteriori_bound", 1e-12));
  return r;
}

// Iterates K_{j+1} = f_1(K_j) u ... u f_N(K_j) and tracks the probabilistic
// Hausdorff distance function of consecutive sets on the grid.
inline Report invariant_set_run(const ExperimentConfig& cfg) {
  if (!cfg.invariant_set) throw ConfigError("config: invariant-set needs an 'invariant_set' block");
  detail::require_grid(cfg);
  const auto& b = *cfg.invariant_set;
  std::vector<EContraction> maps;
  for (const auto& f : b.maps) maps.emplace_back(f);
  const FiniteRandomVariable z(b.omega, b.start);
  InvariantSetOptions o;
  o.epsilon = b.epsilon;
  o.capacity = b.capacity;
  o.norm = cfg.norm;
  const InvariantSetResult res = invariant_set_iterate(maps, z, b.steps, cfg.t_grid, o);

  Report r;
  r.experiment = "invariant-set";
  r.curve_axis = "k";
  r.curve_value = "min over the t-grid of F_{K_k, K_{k+1}}(t)";
  std::size_t first_one = res.distance.size();
  auto rows = nlohmann::ordered_json::array();
  for (std::size_t k = 0; k < res.distance.size(); ++k) {
    const double lo = *std::min_element(res.distance[k].begin(), res.distance[k].end());
    r.curve.push_back({static_cast<double>(k), lo, kNaN, 1.0});
    if (lo >= 1.0 - 1e-12 && first_one == res.distance.size()) first_one = k;
    rows.push_back(json_numbers(res.distance[k]));
  }
  r.details["t_grid"] = json_numbers(cfg.t_grid);
  r.details["hausdorff"] = rows;
  r.details["sizes"] = res.sizes;
  double ratio = 0.0;
  for (const auto& f : maps) ratio = std::max(ratio, f.ratio());
  r.metric("contraction_ratio", ratio);
  r.metric("final_set_size", static_cast<double>(res.sizes.back()));
  r.metric("first_step_at_one", first_one == res.distance.size() ? kNaN : static_cast<double>(first_one));
  const double final_min = r.curve.empty() ? kNaN : r.curve.back().value;
  r.verdicts.push_back(check_at_least("hausdorff_reaches_one", final_min, 1.0 - 1e-12, "rounding", 1e-12));
  return r;
}

inline Report run_config(const ExperimentConfig& cfg) {
  Report r;
  if (cfg.experiment == "tail-check")
    r = tail_check(cfg);
  else if (cfg.experiment == "moment-probe")
    r = moment_divergence_probe(cfg);
  else if (cfg.experiment == "contract-check")
    r = contraction_check(cfg);
  else if (cfg.experiment == "converge")
    r = convergence_run(cfg);
  else if (cfg.experiment == "selfsim")
    r = selfsim_test(cfg);
  else if (cfg.experiment == "fixed-point")
    r = fixed_point_run(cfg);
  else if (cfg.experiment == "invariant-set")
    r = invariant_set_run(cfg);
  else
    throw ConfigError("config: unknown experiment '" + cfg.experiment + "'");
  r.inputs = config_echo(cfg);
  return r;
}

} // namespace fractalaw
