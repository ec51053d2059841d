#include <cmath>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include <fractalaw/prob_metric.hpp>
#include <fractalaw/rng.hpp>

using namespace fractalaw;

namespace {

// Random dyadic probability vector (multiples of 1/64) so that all sums of
// probabilities are exact in binary floating point.
std::vector<double> dyadic_probs(std::mt19937_64& rng, std::size_t k) {
  std::vector<int> units(k, 1);
  std::uniform_int_distribution<std::size_t> pick(0, k - 1);
  for (std::size_t left = 64 - k; left > 0; --left) ++units[pick(rng)];
  std::vector<double> p(k);
  for (std::size_t i = 0; i < k; ++i) p[i] = units[i] / 64.0;
  return p;
}

FiniteRandomVariable random_rv(std::mt19937_64& rng, const std::vector<double>& probs, std::size_t d = 1) {
  std::uniform_real_distribution<double> u(-3.0, 3.0);
  std::vector<Point> v;
  for (std::size_t j = 0; j < probs.size(); ++j) {
    Point p = Point::zero(d);
    for (std::size_t i = 0; i < d; ++i) p[i] = u(rng);
    v.push_back(p);
  }
  return FiniteRandomVariable(probs, v);
}

FiniteRandomVariable rv1(const std::vector<double>& probs, const std::vector<double>& xs) {
  std::vector<Point> v;
  for (double x : xs) v.push_back(Point(x));
  return FiniteRandomVariable(probs, v);
}

// sup_{s<t} G(s) by direct evaluation of the defining formula at one point in
// every open interval between consecutive pairwise distances below t.
double hausdorff_oracle(const std::vector<FiniteRandomVariable>& a, const std::vector<FiniteRandomVariable>& b, double t,
                        bool lukasiewicz = true) {
  std::vector<double> cuts{0.0};
  for (const auto& x : a)
    for (const auto& y : b)
      for (std::size_t w = 0; w < x.size(); ++w) {
        const double d = distance(x.values[w], y.values[w]);
        if (d < t) cuts.push_back(d);
      }
  cuts.push_back(t);
  std::sort(cuts.begin(), cuts.end());
  auto f = [&](const FiniteRandomVariable& x, const FiniteRandomVariable& y, double s) {
    double p = 0;
    for (std::size_t w = 0; w < x.size(); ++w)
      if (distance(x.values[w], y.values[w]) < s) p += x.probs[w];
    return p;
  };
  double best = 0.0;
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    if (!(cuts[k] < cuts[k + 1])) continue;
    const double s = 0.5 * (cuts[k] + cuts[k + 1]);
    double inf_a = 1.0, inf_b = 1.0;
    for (const auto& x : a) {
      double sup = 0;
      for (const auto& y : b) sup = std::max(sup, f(x, y, s));
      inf_a = std::min(inf_a, sup);
    }
    for (const auto& y : b) {
      double sup = 0;
      for (const auto& x : a) sup = std::max(sup, f(x, y, s));
      inf_b = std::min(inf_b, sup);
    }
    best = std::max(best, lukasiewicz ? std::max(inf_a + inf_b - 1.0, 0.0) : std::min(inf_a, inf_b));
  }
  return best;
}

} // namespace

TEST(Ecdf, StrictInequalityConvention) {
  const std::vector<double> s{1, 2, 3};
  const auto f = ecdf(s);
  EXPECT_EQ(f.eval(2.0), 1.0 / 3.0);
  EXPECT_EQ(f.eval(1.0), 0.0);
  EXPECT_EQ(f.eval(3.5), 1.0);
}

TEST(Ecdf, ZerosReproduceHeaviside) {
  const std::vector<double> s{0, 0, 0};
  const auto f = ecdf(s);
  EXPECT_EQ(f.eval(0.0), 0.0);
  EXPECT_EQ(f.eval(1e-300), 1.0);
  EXPECT_TRUE(f.is_heaviside());
  EXPECT_EQ(DistributionFunction::heaviside().eval(0.0), 0.0);
  EXPECT_EQ(DistributionFunction::heaviside().eval(0.5), 1.0);
}

TEST(Ecdf, Errors) {
  EXPECT_THROW(ecdf(std::vector<double>{}), std::invalid_argument);
  EXPECT_THROW(ecdf(std::vector<double>{1.0, -0.5}), std::invalid_argument);
  EXPECT_THROW(ecdf(std::vector<double>{std::nan("")}), std::invalid_argument);
}

TEST(Ecdf, InfiniteSamplesKeepSupBelowOne) {
  const std::vector<double> s{1.0, std::numeric_limits<double>::infinity()};
  const auto f = ecdf(s);
  EXPECT_EQ(f.eval(1e308), 0.5);
  EXPECT_EQ(f.sup(), 0.5);
}

TEST(Ecdf, UniformSampleWithinDkwBand) {
  auto stream = derive_stream(123, 0, {});
  std::vector<double> xs(100000);
  for (auto& x : xs) x = stream.uniform();
  const auto f = ecdf(xs);
  std::sort(xs.begin(), xs.end());
  // sup_t |F(t) - t| is attained at sample points (approached from either side)
  double gap = 0;
  const double m = static_cast<double>(xs.size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    gap = std::max(gap, std::abs(f.eval(xs[i]) - xs[i]));
    gap = std::max(gap, std::abs((i + 1) / m - xs[i]));
  }
  EXPECT_LE(gap, dkw_epsilon(xs.size(), 1e-3));
}

TEST(DistributionFunction, NondecreasingInUnitInterval) {
  std::mt19937_64 rng(41);
  for (int t = 0; t < 100; ++t) {
    const auto p = dyadic_probs(rng, 8);
    const auto f = espace_distance(random_rv(rng, p, 2), random_rv(rng, p, 2));
    EXPECT_EQ(f.eval(0.0), 0.0);
    double prev = 0;
    for (double s = 0; s < 10; s += 0.05) {
      const double v = f.eval(s);
      EXPECT_GE(v, prev);
      EXPECT_LE(v, 1.0);
      prev = v;
    }
    EXPECT_EQ(prev, 1.0);
  }
}

TEST(TNorm, Examples) {
  EXPECT_NEAR(tmin(1.0, 0.37), 0.37, 1e-15);
  EXPECT_NEAR(tmin(0.7, 0.6), 0.3, 1e-15);
  EXPECT_EQ(tmin(0.3, 0.3), 0.0);
  EXPECT_THROW(tmin(1.2, 0.5), std::invalid_argument);
  EXPECT_THROW(tmin(0.5, -0.1), std::invalid_argument);
  EXPECT_EQ(tnorm_min(0.2, 0.9), 0.2);
}

TEST(TNorm, AxiomsOnGrid) {
  std::vector<double> g;
  for (int i = 0; i <= 32; ++i) g.push_back(i / 32.0);
  for (double a : g) {
    EXPECT_NEAR(tmin(a, 1.0), a, 1e-15);
    EXPECT_EQ(tmin(a, 0.0), 0.0);
    for (double b : g) {
      EXPECT_EQ(tmin(a, b), tmin(b, a));
      EXPECT_LE(tmin(a, b), tnorm_min(a, b));
      for (double c : g) {
        EXPECT_NEAR(tmin(tmin(a, b), c), tmin(a, tmin(b, c)), 1e-15);
        if (b <= c) {
          EXPECT_LE(tmin(a, b), tmin(a, c));
        }
      }
    }
  }
}

TEST(ESpaceDistance, Examples) {
  const std::vector<double> p{0.5, 0.5};
  const auto x = rv1(p, {0.0, 0.0}), y = rv1(p, {1.0, 3.0});
  EXPECT_TRUE(espace_distance(x, x).is_heaviside());
  EXPECT_EQ(espace_distance(x, y).eval(2.0), 0.5);
  const auto a = FiniteRandomVariable::constant(p, Point(1.0)), b = FiniteRandomVariable::constant(p, Point(3.5));
  const auto f = espace_distance(a, b);
  EXPECT_EQ(f.eval(2.5), 0.0);
  EXPECT_EQ(f.eval(2.5000001), 1.0);
  EXPECT_THROW(espace_distance(x, rv1({0.25, 0.75}, {0.0, 0.0})), std::invalid_argument);
}

TEST(ESpaceDistance, HeavisideIffEqual) {
  std::mt19937_64 rng(42);
  for (int t = 0; t < 200; ++t) {
    const auto p = dyadic_probs(rng, 5);
    const auto x = random_rv(rng, p);
    auto y = x;
    EXPECT_TRUE(espace_distance(x, y).is_heaviside());
    y.values[t % 5] = Point(y.values[t % 5][0] + 1e-9);
    EXPECT_FALSE(espace_distance(x, y).is_heaviside());
  }
}

TEST(Menger, IdenticalVariablesHaveNoViolations) {
  std::mt19937_64 rng(43);
  const auto p = dyadic_probs(rng, 16);
  const auto x = random_rv(rng, p);
  std::vector<std::pair<double, double>> grid;
  for (int i = 0; i < 10; ++i)
    for (int j = 0; j < 10; ++j) grid.push_back({0.3 * i, 0.3 * j});
  EXPECT_TRUE(menger_check(x, x, x, grid).empty());
}

TEST(Menger, RandomTriplesOnSixteenAtomSpace) {
  std::mt19937_64 rng(44);
  std::uniform_real_distribution<double> u(0.0, 6.0);
  std::size_t violations = 0;
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = dyadic_probs(rng, 16);
    const auto x = random_rv(rng, p, 1 + trial % 3), y = random_rv(rng, p, 1 + trial % 3), z = random_rv(rng, p, 1 + trial % 3);
    std::vector<std::pair<double, double>> grid;
    for (int k = 0; k < 100; ++k) grid.push_back({u(rng), u(rng)});
    violations += menger_check(x, y, z, grid).size();
  }
  EXPECT_EQ(violations, 0u);
}

TEST(Menger, CorruptedDistributionFunctionIsCaught) {
  std::mt19937_64 rng(45);
  const auto p = dyadic_probs(rng, 4);
  const auto x = rv1(p, {0, 0, 0, 0}), y = rv1(p, {1, 1, 1, 1}), z = rv1(p, {0.5, 0.5, 0.5, 0.5});
  const auto fxz = espace_distance(x, z), fzy = espace_distance(z, y);
  // F_xy that drops back to 0 beyond t = 1.5: no longer monotone
  auto broken = [&](double t) { return t > 1.0 && t <= 1.5 ? 1.0 : 0.0; };
  const std::vector<std::pair<double, double>> grid{{0.6, 0.6}, {1.0, 1.0}};
  const auto v = menger_check_functions(broken, [&](double t) { return fxz.eval(t); }, [&](double t) { return fzy.eval(t); }, grid);
  ASSERT_EQ(v.size(), 1u);
  EXPECT_EQ(v[0].s, 1.0);
  EXPECT_EQ(v[0].lhs, 0.0);
  EXPECT_EQ(v[0].rhs, 1.0);
}

TEST(Sehgal, Controls) {
  std::mt19937_64 rng(46);
  const auto p = dyadic_probs(rng, 6);
  std::vector<double> grid;
  for (int i = 1; i <= 100; ++i) grid.push_back(0.07 * i);
  const EContraction half(std::vector<AffineContraction>(6, AffineContraction(0.5, 0.0)));
  std::vector<AffineContraction> mixed;
  for (int j = 0; j < 6; ++j) mixed.push_back(AffineContraction(j % 2 ? 0.3 : 0.5, 0.1 * j));
  const EContraction mix(mixed);
  EXPECT_EQ(mix.ratio(), 0.5);
  for (int t = 0; t < 50; ++t) {
    const auto x = random_rv(rng, p), y = random_rv(rng, p);
    EXPECT_TRUE(sehgal_check(half, x, y, 0.5, grid).empty());
    EXPECT_TRUE(sehgal_check(mix, x, y, 0.5, grid).empty());
  }
  const auto x = rv1(p, {0, 0, 0, 0, 0, 0}), y = rv1(p, {1, 1, 1, 1, 1, 1});
  EXPECT_FALSE(sehgal_check(half, x, y, 0.4, grid).empty());
  EXPECT_THROW(sehgal_check(half, x, y, 1.0, grid), std::invalid_argument);
}

TEST(Hausdorff, SingletonWithItself) {
  std::mt19937_64 rng(47);
  const auto p = dyadic_probs(rng, 5);
  const std::vector<FiniteRandomVariable> a{random_rv(rng, p)};
  const std::vector<double> grid{0.0, 1e-12, 0.5, 3.0};
  const auto v = prob_hausdorff(a, a, grid);
  EXPECT_EQ(v[0], 0.0);
  for (std::size_t i = 1; i < v.size(); ++i) EXPECT_EQ(v[i], 1.0);
}

TEST(Hausdorff, SingletonsReduceToPairDistance) {
  // With T = min the distance between {x} and {y} is F_xy itself (at t the
  // value excludes the jump at t); with T_m it is T_m(F_xy, F_xy).
  std::mt19937_64 rng(48);
  const auto p = dyadic_probs(rng, 7);
  for (int t = 0; t < 50; ++t) {
    const auto x = random_rv(rng, p), y = random_rv(rng, p);
    const auto f = espace_distance(x, y);
    std::vector<double> grid;
    for (double s : f.jumps()) grid.push_back(s);
    grid.push_back(100.0);
    const auto vmin = prob_hausdorff(std::vector{x}, std::vector{y}, grid, TNorm::minimum);
    const auto vluk = prob_hausdorff(std::vector{x}, std::vector{y}, grid);
    for (std::size_t i = 0; i < grid.size(); ++i) {
      EXPECT_EQ(vmin[i], f.eval(grid[i]));
      EXPECT_EQ(vluk[i], std::max(2.0 * f.eval(grid[i]) - 1.0, 0.0));
    }
  }
}

TEST(Hausdorff, AddingAFarPointOnThreeAtomSpace) {
  const std::vector<double> p{0.5, 0.25, 0.25};
  const auto x = rv1(p, {0, 0, 0}), far = rv1(p, {10, 1, 0});
  const std::vector<FiniteRandomVariable> a{x}, b{x, far};
  const std::vector<double> grid{0.5, 1.0, 1.5, 10.0, 10.5};
  const std::vector<double> hand{0.25, 0.25, 0.5, 0.5, 1.0};
  const auto v = prob_hausdorff(a, b, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) EXPECT_EQ(v[i], hand[i]) << grid[i];
  EXPECT_EQ(prob_hausdorff(b, a, grid), v); // symmetric by construction
}

TEST(Hausdorff, MatchesExhaustiveOracle) {
  std::mt19937_64 rng(49);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  for (int trial = 0; trial < 200; ++trial) {
    const auto p = dyadic_probs(rng, 3);
    std::vector<FiniteRandomVariable> a, b;
    for (int i = 0; i < 1 + trial % 3; ++i) a.push_back(random_rv(rng, p));
    for (int i = 0; i < 1 + (trial / 3) % 3; ++i) b.push_back(random_rv(rng, p));
    std::vector<double> grid;
    for (int k = 0; k < 10; ++k) grid.push_back(u(rng));
    const auto v = prob_hausdorff(a, b, grid);
    const auto w = prob_hausdorff(a, b, grid, TNorm::minimum);
    for (std::size_t k = 0; k < grid.size(); ++k) {
      EXPECT_NEAR(v[k], hausdorff_oracle(a, b, grid[k]), 1e-15);
      EXPECT_NEAR(w[k], hausdorff_oracle(a, b, grid[k], false), 1e-15);
    }
  }
  EXPECT_THROW(prob_hausdorff(std::vector<FiniteRandomVariable>{}, std::vector<FiniteRandomVariable>{}, std::vector<double>{1.0}),
               std::invalid_argument);
}

TEST(FixedPoint, AffineLimitIsTwiceTheOffset) {
  const std::vector<double> p{0.25, 0.25, 0.5};
  const std::vector<double> c{1.0, -2.0, 0.3};
  std::vector<AffineContraction> g;
  for (double ci : c) g.push_back(AffineContraction(0.5, ci));
  const EContraction f(g);
  const auto r = fixed_point_iterate(f, rv1(p, {5.0, 5.0, 5.0}), 40);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_NEAR(r.limit.values[j][0], 2.0 * c[j], 1e-10);
  for (double q : r.step_ratios) EXPECT_LE(q, 0.5 + 1e-12);
}

TEST(FixedPoint, FixedStartHasZeroSteps) {
  const std::vector<double> p{0.5, 0.5};
  const EContraction f({AffineContraction(0.5, 1.0), AffineContraction(0.25, 3.0)});
  const auto r = fixed_point_iterate(f, rv1(p, {2.0, 4.0}), 5);
  for (double d : r.step_distances) EXPECT_EQ(d, 0.0);
}

TEST(FixedPoint, RatiosBoundedAndLimitIndependentOfStart) {
  std::mt19937_64 rng(50);
  std::uniform_real_distribution<double> u(0.0, 0.5), b(-2, 2);
  for (int t = 0; t < 50; ++t) {
    const auto p = dyadic_probs(rng, 6);
    std::vector<AffineContraction> g;
    for (int j = 0; j < 6; ++j) g.push_back(AffineContraction(u(rng), b(rng)));
    const EContraction f(g);
    const auto r1 = fixed_point_iterate(f, random_rv(rng, p), 60);
    const auto r2 = fixed_point_iterate(f, random_rv(rng, p), 60);
    for (std::size_t j = 0; j < p.size(); ++j) EXPECT_NEAR(r1.limit.values[j][0], r2.limit.values[j][0], 1e-9);
    // ratios are meaningful while the steps are far above rounding noise
    for (std::size_t j = 1; j < r1.step_distances.size(); ++j)
      if (r1.step_distances[j - 1] > 1e-6) {
        EXPECT_LE(r1.step_distances[j], f.ratio() * r1.step_distances[j - 1] * (1 + 1e-9) + 1e-15);
      }
  }
}

TEST(FixedPoint, RejectsNonContraction) {
  const EContraction f({AffineContraction(1.0, 1.0), AffineContraction(0.5, 0.0)});
  EXPECT_THROW(fixed_point_iterate(f, rv1({0.5, 0.5}, {0, 0}), 3), HypothesisError);
}

TEST(InvariantSet, SingleMapFollowsFixedPointOrbit) {
  const std::vector<double> p{0.5, 0.5};
  const EContraction f({AffineContraction(0.5, 1.0), AffineContraction(0.3, -1.0)});
  const auto z = rv1(p, {4.0, 4.0});
  const std::vector<EContraction> maps{f};
  const std::vector<double> grid{1.0};
  const auto r = invariant_set_iterate(maps, z, 6, grid);
  const auto fp = fixed_point_iterate(f, z, 6);
  ASSERT_EQ(r.last.size(), 1u);
  EXPECT_EQ(r.last[0], fp.limit);
  for (auto s : r.sizes) EXPECT_EQ(s, 1u);
}

TEST(InvariantSet, DyadicSetsOnOnePointSpace) {
  const std::vector<double> p{1.0};
  const std::vector<EContraction> maps{EContraction({AffineContraction(0.5, 0.0)}), EContraction({AffineContraction(0.5, 0.5)})};
  const std::vector<double> grid{0.1};
  for (std::size_t j = 1; j <= 4; ++j) {
    const auto r = invariant_set_iterate(maps, rv1(p, {0.0}), j, grid);
    ASSERT_EQ(r.last.size(), std::size_t{1} << j);
    for (std::size_t k = 0; k < r.last.size(); ++k) EXPECT_EQ(r.last[k].values[0][0], static_cast<double>(k) / (1 << j));
  }
}

TEST(InvariantSet, HausdorffValuesReachOne) {
  std::mt19937_64 rng(51);
  const auto p = dyadic_probs(rng, 4);
  std::vector<EContraction> maps;
  for (int i = 0; i < 2; ++i) {
    std::vector<AffineContraction> g;
    for (int j = 0; j < 4; ++j) g.push_back(AffineContraction(0.25 + 0.25 * (j % 2), 0.5 * i + 0.1 * j));
    maps.emplace_back(g);
  }
  InvariantSetOptions opts;
  opts.epsilon = std::ldexp(1.0, -12);
  const std::vector<double> grid{0.1};
  const auto r = invariant_set_iterate(maps, rv1(p, {0, 0, 0, 0}), 10, grid, opts);
  bool reached = false;
  for (const auto& v : r.distance) reached = reached || v[0] >= 1.0;
  EXPECT_TRUE(reached);
  EXPECT_EQ(r.distance.back()[0], 1.0);
}

TEST(InvariantSet, CapacityIsEnforced) {
  const std::vector<EContraction> maps{EContraction({AffineContraction(0.5, 0.0)}), EContraction({AffineContraction(0.5, 0.5)})};
  InvariantSetOptions opts;
  opts.capacity = 8;
  const std::vector<double> grid{0.1};
  EXPECT_THROW(invariant_set_iterate(maps, rv1({1.0}, {0.0}), 4, grid, opts), ResourceError);
  opts.epsilon = 0.2;
  EXPECT_NO_THROW(invariant_set_iterate(maps, rv1({1.0}, {0.0}), 8, grid, opts));
}
