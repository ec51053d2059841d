#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <vector>

namespace fractalaw {

// Neumaier-compensated running sum.
class CompensatedSum {
public:
  void add(double x) {
    const double t = sum_ + x;
    if (std::abs(sum_) >= std::abs(x))
      comp_ += (sum_ - t) + x;
    else
      comp_ += (x - t) + sum_;
    sum_ = t;
  }
  double value() const { return sum_ + comp_; }

private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

inline double compensated_sum(std::span<const double> xs) {
  CompensatedSum s;
  for (double x : xs) s.add(x);
  return s.value();
}

// A Monte Carlo (or exact, stderr == 0) estimate.
struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Sample mean with standard error sd/sqrt(m). Summation is in index order so
// the result is independent of how the samples were produced.
inline Estimate mean_with_stderr(std::span<const double> xs) {
  if (xs.empty()) throw std::invalid_argument("mean_with_stderr: empty sample");
  const double m = static_cast<double>(xs.size());
  const double mean = compensated_sum(xs) / m;
  if (xs.size() == 1) return {mean, 0.0};
  CompensatedSum ss;
  for (double x : xs) ss.add((x - mean) * (x - mean));
  const double var = ss.value() / (m - 1.0);
  return {mean, std::sqrt(var / m)};
}

// Dvoretzky-Kiefer-Wolfowitz half-width: with probability >= 1 - delta the
// empirical CDF of m i.i.d. samples is uniformly within this of the truth.
inline double dkw_epsilon(std::size_t m, double delta = 1e-3) {
  if (m == 0) throw std::invalid_argument("dkw_epsilon: m must be positive");
  if (!(delta > 0.0 && delta < 1.0)) throw std::invalid_argument("dkw_epsilon: delta outside (0,1)");
  return std::sqrt(std::log(2.0 / delta) / (2.0 * static_cast<double>(m)));
}

inline double median(std::vector<double> xs) {
  if (xs.empty()) throw std::invalid_argument("median: empty sample");
  std::sort(xs.begin(), xs.end());
  const std::size_t n = xs.size();
  return n % 2 == 1 ? xs[n / 2] : 0.5 * (xs[n / 2 - 1] + xs[n / 2]);
}

// log(sum_i exp(x_i)), stable for very large arguments.
inline double log_sum_exp(std::span<const double> xs) {
  if (xs.empty()) return -std::numeric_limits<double>::infinity();
  const double hi = *std::max_element(xs.begin(), xs.end());
  if (!std::isfinite(hi)) return hi;
  CompensatedSum s;
  for (double x : xs) s.add(std::exp(x - hi));
  return hi + std::log(s.value());
}

} // namespace fractalaw
