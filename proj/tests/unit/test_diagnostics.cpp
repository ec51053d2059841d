#include <cmath>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "fractalaw/diagnostics.hpp"
#include "support/oracles.hpp"

using namespace fractalaw;

namespace {

ExperimentConfig cfg(const std::string& text) { return parse_config_text(text); }

double metric(const Report& r, const std::string& name) {
  const Metric* m = r.find_metric(name);
  if (!m) throw std::runtime_error("missing metric " + name);
  return m->value;
}

} // namespace

TEST(ErrorBound, HandValues) {
  EXPECT_DOUBLE_EQ(error_bound(0.5, 1.0, 3, 1.0), 0.25);
  EXPECT_DOUBLE_EQ(error_bound(0.5, 1.0, 0, 0.3), 0.3 / 0.5);
  // q = 2: lambda^{k/2} / (1 - lambda^{1/2})
  EXPECT_NEAR(error_bound(0.25, 2.0, 2, 1.0), 0.25 / 0.5, 1e-15);
  // q < 1 uses lambda^k / (1 - lambda)
  EXPECT_NEAR(error_bound(0.5, 0.5, 2, 2.0), 0.25 / 0.5 * 2.0, 1e-15);
}

TEST(ErrorBound, RejectsLambdaOutsideUnitInterval) {
  EXPECT_THROW(error_bound(1.0, 1.0, 0, 1.0), std::invalid_argument);
  EXPECT_THROW(error_bound(0.0, 1.0, 0, 1.0), std::invalid_argument);
  EXPECT_THROW(error_bound(-0.1, 1.0, 0, 1.0), std::invalid_argument);
}

TEST(ErrorBound, MonotoneInKAndLambda) {
  for (double q : {0.5, 1.0, 2.0}) {
    for (std::size_t k = 0; k < 30; ++k) {
      for (double lam = 0.05; lam < 0.95; lam += 0.05) {
        EXPECT_LT(error_bound(lam, q, k + 1, 1.0), error_bound(lam, q, k, 1.0));
        EXPECT_LT(error_bound(lam, q, k, 1.0), error_bound(lam + 0.05, q, k, 1.0));
      }
    }
  }
}

TEST(GeometricFit, RecoversExactRatioAndSkipsFirstStep) {
  std::vector<double> steps{5.0}; // k = 0 is off the line on purpose
  for (int k = 1; k < 15; ++k) steps.push_back(3.0 * std::pow(0.4, k));
  const auto fit = fit_geometric_rate(steps);
  EXPECT_NEAR(fit.ratio, 0.4, 1e-12);
  EXPECT_NEAR(std::exp(fit.log_intercept), 3.0, 1e-10);
  EXPECT_EQ(fit.points, 14u);
}

TEST(GeometricFit, FloorAndDegenerateInputs) {
  std::vector<double> steps{1.0, 0.5, 0.25, 1e-20, 0.0};
  std::vector<double> floor(steps.size(), 1e-15);
  const auto fit = fit_geometric_rate(steps, floor);
  EXPECT_EQ(fit.points, 2u);
  EXPECT_NEAR(fit.ratio, 0.5, 1e-12);
  EXPECT_TRUE(std::isnan(fit_geometric_rate(std::vector<double>{1.0, 0.5}).ratio));
}

TEST(TailCheck, ReciprocalMatchesOneOverT) {
  const auto r = tail_check(cfg(R"({"experiment": "tail-check", "seed": 3, "spec": "reciprocal", "alpha": {"dirac": 0},
    "ensemble_size": 20000, "t_grid": {"log_space": [0.5, 20, 12]},
    "expect": {"tail_oracle": "reciprocal", "bounded_tail": true}})"));
  const double eps = dkw_epsilon(20000);
  for (const auto& p : r.curve) EXPECT_LE(std::abs(p.value - std::min(1.0, 1.0 / p.x)), eps) << p.x;
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(metric(r, "gamma_hat"), 1.0, 0.15);
}

TEST(TailCheck, ExpInvMatchesInverseLog) {
  const auto r = tail_check(cfg(R"({"experiment": "tail-check", "seed": 4, "spec": "exp_inv", "alpha": {"dirac": 0},
    "ensemble_size": 20000, "t_grid": {"log_space": [2, 1e8, 20]},
    "expect": {"tail_oracle": "inv_log", "bounded_tail": false}})"));
  const double eps = dkw_epsilon(20000);
  for (const auto& p : r.curve) EXPECT_LE(std::abs(p.value - std::min(1.0, 1.0 / std::log(p.x))), eps) << p.x;
  EXPECT_TRUE(r.passed());
}

TEST(TailCheck, WrongOracleFails) {
  const auto r = tail_check(cfg(R"({"experiment": "tail-check", "spec": "exp_inv", "alpha": {"dirac": 0},
    "ensemble_size": 5000, "t_grid": {"log_space": [2, 1e4, 10]}, "expect": {"tail_oracle": "reciprocal"}})"));
  EXPECT_FALSE(r.passed());
}

TEST(TailCheck, QBelowOneUsesPowerOfDistance) {
  // l_q(delta_0, delta_b) = b^q for q < 1, so P(l >= t) = P(1/omega >= t^{1/q})
  const auto r = tail_check(cfg(R"({"experiment": "tail-check", "seed": 5, "q": 0.5, "spec": "reciprocal",
    "alpha": {"dirac": 0}, "ensemble_size": 20000, "t_grid": [0.5, 1, 2, 3, 5]})"));
  const double eps = dkw_epsilon(20000);
  for (const auto& p : r.curve) EXPECT_LE(std::abs(p.value - std::min(1.0, 1.0 / (p.x * p.x))), eps) << p.x;
}

TEST(TailCheck, MatchesDirectRecomputation) {
  // Recompute every sample from its omega draw: the two-atom alpha goes through
  // the transport path, the Dirac alpha through the closed form.
  const std::vector<double> grid{0.3, 1, 4, 10};
  const std::size_t m = 3000;
  const auto two_atoms = DiscreteMeasure(make_measure(std::vector<Atom>{{Point{0.25}, 0.5}, {Point{0.75}, 0.5}}));
  const auto dirac = DiscreteMeasure::dirac(Point{0.25});
  for (const auto* alpha : {&two_atoms, &dirac}) {
    auto c = cfg(R"({"experiment": "tail-check", "seed": 9, "spec": "reciprocal", "ensemble_size": 3000, "t_grid": [0.3, 1, 4, 10]})");
    c.alpha = MeasureSource{*alpha, 0};
    const auto r = tail_check(c);
    std::vector<double> l(m);
    for (std::size_t j = 0; j < m; ++j) {
      auto stream = derive_stream(9, j, {});
      const double b = 1.0 / stream.uniform_open_closed();
      l[j] = lq_1d(*alpha, pushforward(AffineContraction(0.5, b), *alpha), 1.0);
    }
    for (std::size_t i = 0; i < grid.size(); ++i) {
      double count = 0;
      for (double x : l) count += x >= grid[i] * (1.0 + 1e-12) ? 1 : 0;
      double loose = 0;
      for (double x : l) loose += x >= grid[i] * (1.0 - 1e-12) ? 1 : 0;
      const double got = std::round(r.curve[i].value * static_cast<double>(m));
      EXPECT_GE(got, count);
      EXPECT_LE(got, loose);
    }
  }
}

TEST(TailCheck, DeterministicIterateHasTinyTail) {
  // alpha = mu_20 of the uniform law; S alpha = mu_21 and l_1(mu_20, mu_21) = 2^-22
  const auto r = tail_check(cfg(R"({"experiment": "tail-check", "spec": "uniform", "alpha": {"iterate": 20, "start": {"dirac": 0}},
    "ensemble_size": 10, "t_grid": {"log_space": [1e-9, 1, 30]}, "expect": {"gamma_max": 9.5367431640625e-07}})"));
  EXPECT_TRUE(r.passed());
  EXPECT_LE(metric(r, "gamma_hat"), std::ldexp(1.0, -22) * (1.0 + 1e-9));
  EXPECT_EQ(metric(r, "dkw_epsilon"), 0.0);
}

TEST(TailCheck, ExpInvIterateCountsOverflowAsLarge) {
  const auto r = tail_check(cfg(R"({"experiment": "tail-check", "seed": 2, "spec": "exp_inv", "alpha": {"iterate": 1},
    "ensemble_size": 4000, "t_grid": [10, 1e300]})"));
  // P(omega < 1/709.78) ~ 0.0014 per draw; overflowed samples exceed every t
  EXPECT_GT(metric(r, "overflowed_samples"), 0.0);
  EXPECT_GE(r.curve.back().value, metric(r, "overflowed_samples") / 4000.0);
}

TEST(MomentProbe, BoundedLawGivesExactMean) {
  // uniform law: sum_i p_i |S_i 0|^q = 0.5 * 0.5^q for every draw
  const auto r = moment_divergence_probe(cfg(R"({"experiment": "moment-probe", "q": 2, "spec": "uniform",
    "schedule": [10, 100], "expect": {"divergent": false, "probe_mean": 0.125, "probe_mean_tol": 1e-15}})"));
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(r.curve.back().value, std::log(0.125), 1e-14);
  EXPECT_EQ(metric(r, "log10_growth"), 0.0);
}

TEST(MomentProbe, ReciprocalHalfStabilizesNearTwo) {
  // E omega^{-1/2} = 2
  const auto r = moment_divergence_probe(cfg(R"({"experiment": "moment-probe", "seed": 1, "q": 0.5, "spec": "reciprocal",
    "schedule": [1000, 10000, 100000], "expect": {"divergent": false, "probe_mean": 2, "probe_mean_tol": 0.1}})"));
  EXPECT_TRUE(r.passed());
}

TEST(MomentProbe, ExpInvDiverges) {
  const auto r = moment_divergence_probe(cfg(R"({"experiment": "moment-probe", "seed": 1, "spec": "exp_inv",
    "schedule": [1000, 10000, 100000], "expect": {"divergent": true}})"));
  EXPECT_TRUE(r.passed());
  EXPECT_GE(metric(r, "log10_growth"), 1.0);
}

TEST(MomentProbe, MisclassificationFails) {
  const auto r = moment_divergence_probe(cfg(R"({"experiment": "moment-probe", "spec": "uniform", "schedule": [10, 100],
    "expect": {"divergent": true}})"));
  EXPECT_FALSE(r.passed());
}

TEST(ContractionCheck, UniformDiracsExact) {
  const auto r = contraction_check(cfg(R"({"experiment": "contract-check", "spec": "uniform", "mu": {"dirac": 0},
    "nu": {"dirac": 1}, "t_grid": {"linear": [0.05, 1.5, 30]}})"));
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(metric(r, "eps_mc"), 0.0);
  // l_1(S delta_0, S delta_1) = 1/2 exactly
  EXPECT_EQ(metric(r, "mean_lhs_distance"), 0.5);
  EXPECT_EQ(metric(r, "mean_rhs_distance"), 1.0);
}

TEST(ContractionCheck, EqualMeasuresTrivial) {
  const auto r = contraction_check(cfg(R"({"experiment": "contract-check", "spec": "random_ratio", "mu": {"dirac": 0.2},
    "nu": {"dirac": 0.2}, "ensemble_size": 100, "t_grid": [0.1, 1]})"));
  EXPECT_TRUE(r.passed());
  for (const auto& p : r.curve) EXPECT_EQ(p.value, 1.0);
}

TEST(ContractionCheck, RandomRatioWithinMonteCarloTerm) {
  const auto r = contraction_check(cfg(R"({"experiment": "contract-check", "seed": 21, "q": 2, "spec": "random_ratio",
    "mu": {"dirac": 0}, "nu": {"dirac": 1}, "ensemble_size": 2000, "t_grid": {"linear": [0.05, 1.2, 24]}})"));
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(metric(r, "eps_mc"), 2.0 * dkw_epsilon(2000), 1e-15);
}

TEST(ContractionCheck, RandomSourcesRun) {
  const auto r = contraction_check(cfg(R"({"experiment": "contract-check", "seed": 1, "q": 1, "spec": "random_ratio",
    "mu": {"iterate": 3, "start": {"dirac": 0}}, "nu": {"iterate": 3, "start": {"dirac": 1}},
    "ensemble_size": 500, "t_grid": {"linear": [0.001, 0.2, 20]}})"));
  EXPECT_TRUE(r.passed());
}

TEST(Converge, UniformLawAnalyticDistances) {
  const auto r = convergence_run(cfg(R"({"experiment": "converge", "spec": "uniform", "mu0": {"dirac": 0}, "depth": 12,
    "expect": {"ratio": 0.5, "ratio_tol": 1e-9, "error_bound": true}})"));
  EXPECT_TRUE(r.passed());
  // l_1(mu_k, mu_n) = 2^-(k+1) - 2^-(n+1)
  ASSERT_EQ(r.curve.size(), 13u);
  for (std::size_t k = 0; k <= 12; ++k)
    EXPECT_NEAR(r.curve[k].value, std::ldexp(1.0, -static_cast<int>(k) - 1) - std::ldexp(1.0, -13), 1e-15);
  const auto med = r.details.at("median_step_distance");
  for (std::size_t k = 0; k < 12; ++k) EXPECT_NEAR(med[k].get<double>(), std::ldexp(1.0, -static_cast<int>(k) - 2), 1e-15);
}

TEST(Converge, UniformReferenceAgainstExactIntegral) {
  const auto r = convergence_run(cfg(R"({"experiment": "converge", "spec": "uniform", "mu0": {"dirac": 0}, "depth": 12,
    "expect": {"uniform_reference_tol": 1e-3}})"));
  const auto mu = iterate_measure(0, 0, preset_spec("uniform"), DiscreteMeasure::dirac(Point{0.0}), 12);
  // the continuous uniform law is within 2^-22 (half a reference cell) of the reference
  EXPECT_NEAR(metric(r, "l1_to_uniform_reference"), oracle::l1_to_uniform(mu), std::ldexp(1.0, -21));
}

TEST(Converge, CantorMomentsMatchRecursion) {
  const auto r = convergence_run(cfg(R"({"experiment": "converge", "spec": "cantor", "mu0": {"dirac": 0}, "depth": 15,
    "expect": {"mean": 0.5, "variance": 0.125, "moment_tol": 1e-6, "error_bound": true}})"));
  EXPECT_TRUE(r.passed());
  const auto m = oracle::affine_moments({0.5, 0.5}, {1.0 / 3.0, 1.0 / 3.0}, {0.0, 2.0 / 3.0}, 0.0, 15);
  EXPECT_NEAR(metric(r, "limit_mean"), m.m1, 1e-13);
  EXPECT_NEAR(metric(r, "limit_variance"), m.m2 - m.m1 * m.m1, 1e-13);
  EXPECT_NEAR(metric(r, "median_fitted_ratio"), 1.0 / 3.0, 1e-9);
}

TEST(Converge, RefusesWhenLambdaNotBelowOne) {
  EXPECT_THROW(convergence_run(cfg(R"({"experiment": "converge", "depth": 3, "spec": {"kind": "mixture",
    "laws": [[{"weight": 0.5, "linear": 1, "offset": 0}, {"weight": 0.5, "linear": 1, "offset": 1}]]}})")),
               HypothesisError);
  EXPECT_THROW(convergence_run(cfg(R"({"experiment": "converge", "depth": 3, "spec": {"kind": "parametric",
    "weights": [1], "branches": [{"ratio": [0.1, 0.2], "offset": [[0, 1]]}]}})")),
               HypothesisError);
}

TEST(Converge, RandomRatioRateBelowEssSup) {
  const auto r = convergence_run(cfg(R"({"experiment": "converge", "seed": 5, "spec": "random_ratio", "mu0": {"dirac": 0},
    "depth": 9, "ensemble_size": 40, "expect": {"error_bound": true}})"));
  EXPECT_TRUE(r.passed());
  // mean contraction E(r_1 + r_2)/2 = 0.375; ess-sup 0.45
  EXPECT_NEAR(metric(r, "median_fitted_ratio"), 0.375, 0.05);
}

TEST(Converge, ReciprocalStepRatioNearHalf) {
  const auto r = convergence_run(cfg(R"({"experiment": "converge", "seed": 4, "spec": "reciprocal", "depth": 30,
    "ensemble_size": 300})"));
  EXPECT_TRUE(r.passed());
  EXPECT_NEAR(metric(r, "median_fitted_ratio"), 0.5, 0.05);
}

TEST(Selfsim, DeterministicLawOnlyDepthSlack) {
  const auto r = selfsim_test(cfg(R"({"experiment": "selfsim", "spec": "uniform", "mu0": {"dirac": 0}, "mu0_alt": {"dirac": 1},
    "depth": 10, "ensemble_size": 32})"));
  EXPECT_TRUE(r.passed());
  EXPECT_EQ(metric(r, "lq_star_star_baseline"), 0.0);
  // A vs B is l_1(mu_10 from 0, mu_10 from 1) = 2^-10 exactly
  EXPECT_NEAR(metric(r, "lq_star_star_cross_start"), std::ldexp(1.0, -10), 1e-15);
  EXPECT_NEAR(metric(r, "lq_star_star_push"), std::ldexp(1.0, -12), 1e-15);
}

TEST(Selfsim, ShallowDepthIsNegativeControl) {
  const auto r = selfsim_test(cfg(R"({"experiment": "selfsim", "seed": 11, "spec": "random_ratio", "mu0": {"dirac": 0},
    "mu0_alt": {"dirac": 1}, "depth": 2, "ensemble_size": 32, "geometric_slack": false})"));
  EXPECT_GT(metric(r, "lq_star_star_cross_start"), 3.0 * metric(r, "lq_star_star_baseline"));
  EXPECT_FALSE(r.passed());
}

TEST(Selfsim, RequiresEnoughMembers) {
  EXPECT_THROW(selfsim_test(cfg(R"({"experiment": "selfsim", "spec": "uniform", "mu0_alt": {"dirac": 1}, "depth": 2,
    "ensemble_size": 31})")),
               ConfigError);
}

TEST(FixedPointRun, LimitIsClosedForm) {
  const auto r = fixed_point_run(cfg(R"({"experiment": "fixed-point", "fixed_point": {"omega": [0.5, 0.5],
    "maps": [{"linear": 0.5, "offset": 1}, {"linear": -0.25, "offset": 1}], "start": [0, 0], "steps": 80}})"));
  EXPECT_TRUE(r.passed());
  const auto limit = r.details.at("limit");
  EXPECT_NEAR(limit[0][0].get<double>(), 2.0, 1e-14);
  EXPECT_NEAR(limit[1][0].get<double>(), 0.8, 1e-14);
}

TEST(FixedPointRun, NonContractionIsHypothesisViolation) {
  EXPECT_THROW(fixed_point_run(cfg(R"({"experiment": "fixed-point", "fixed_point": {"omega": [1],
    "maps": [{"linear": 1.5, "offset": 1}], "start": [0]}})")),
               HypothesisError);
}

TEST(InvariantSetRun, ReachesOneWithinTenSteps) {
  const auto r = invariant_set_run(cfg(R"({"experiment": "invariant-set", "t_grid": [0.01, 0.1, 1],
    "invariant_set": {"omega": [0.5, 0.5], "maps": [[{"linear": 0.5, "offset": 0}, {"linear": 0.5, "offset": 0}],
    [{"linear": 0.5, "offset": 0.5}, {"linear": 0.5, "offset": 0.5}]], "start": [0, 0], "steps": 10}})"));
  EXPECT_TRUE(r.passed());
  EXPECT_LE(metric(r, "first_step_at_one"), 9.0);
}
