#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdio>
#include <limits>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "errors.hpp"
#include "measure.hpp"
#include "numeric.hpp"
#include "parallel.hpp"

namespace fractalaw {

// Optimal coupling between supplies (rows) and demands (columns).
struct TransportPlan {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> flow; // row-major rows x cols
  double cost = 0.0;        // sum_ij flow_ij * cost_ij
  std::size_t pivots = 0;

  double at(std::size_t i, std::size_t j) const { return flow[i * cols + j]; }
};

struct TransportOptions {
  std::size_t support_cap = 512; // max atoms per side for the LP
  Norm norm = Norm::euclidean;
  std::size_t threads = 1; // used for pairwise cost matrices
};

enum class PricingRule {
  block_search, // fast default; switches to Bland's rule on long degenerate runs
  bland,        // lowest-index entering and leaving cells throughout
};

namespace detail {

// Transportation simplex (MODI potentials) started from the north-west corner
// rule, with block-search pricing.
class TransportationSimplex {
public:
  TransportationSimplex(std::span<const double> supply, std::span<const double> demand, std::span<const double> cost,
                        PricingRule rule)
      : rule_(rule), n_(supply.size()), m_(demand.size()), cost_(cost.begin(), cost.end()), flow_(n_ * m_, 0.0),
        basic_(n_ * m_, 0) {
    block_ = std::max<std::size_t>(16, static_cast<std::size_t>(std::sqrt(static_cast<double>(n_ * m_))));
    if (n_ == 0 || m_ == 0) throw std::invalid_argument("transport: empty side");
    if (cost.size() != n_ * m_) throw std::invalid_argument("transport: cost matrix has wrong size");
    for (double c : cost_)
      if (!std::isfinite(c)) throw std::invalid_argument("transport: non-finite cost");
    north_west_corner(supply, demand);
  }

  TransportPlan solve() {
    double cmax = 0.0;
    for (double c : cost_) cmax = std::max(cmax, std::abs(c));
    const double tol = 1e-13 * (1.0 + cmax);
    const std::size_t max_pivots = 50 * (n_ + m_) * (n_ + m_) + 1000;

    std::size_t pivots = 0;
    std::size_t degenerate_run = 0;
    for (;;) {
      compute_potentials();
      // Long runs of degenerate pivots are the only way the method can cycle;
      // during such a run fall back to Bland's rule, which cannot.
      const bool bland = rule_ == PricingRule::bland || degenerate_run > n_ + m_;
      const std::size_t entering = bland ? first_candidate(tol) : block_candidate(tol);
      if (entering == npos) break;
      if (++pivots > max_pivots) throw std::runtime_error("transport: pivot limit exceeded");
      if (pivot(entering, bland))
        degenerate_run = 0;
      else
        ++degenerate_run;
    }

    TransportPlan plan;
    plan.rows = n_;
    plan.cols = m_;
    plan.pivots = pivots;
    CompensatedSum total;
    for (std::size_t k : basis_) total.add(flow_[k] * cost_[k]);
    plan.cost = total.value();
    plan.flow = std::move(flow_);
    return plan;
  }

private:
  double reduced_cost(std::size_t k) const { return cost_[k] - u_[k / m_] - v_[k % m_]; }

  // Lowest-index cell with negative reduced cost.
  std::size_t first_candidate(double tol) const {
    for (std::size_t k = 0; k < n_ * m_; ++k)
      if (!basic_[k] && reduced_cost(k) < -tol) return k;
    return npos;
  }

  // Block search: scan cells in blocks starting where the previous search
  // stopped and take the most negative reduced cost of the first block that
  // has one.
  std::size_t block_candidate(double tol) {
    const std::size_t total = n_ * m_;
    std::size_t best = npos;
    double best_rc = -tol;
    std::size_t in_block = 0;
    for (std::size_t scanned = 0; scanned < total; ++scanned) {
      const std::size_t k = cursor_;
      cursor_ = cursor_ + 1 == total ? 0 : cursor_ + 1;
      if (!basic_[k]) {
        const double rc = reduced_cost(k);
        if (rc < best_rc) {
          best_rc = rc;
          best = k;
        }
      }
      if (++in_block == block_) {
        if (best != npos) return best;
        in_block = 0;
      }
    }
    return best;
  }

  void north_west_corner(std::span<const double> supply, std::span<const double> demand) {
    double rs = supply[0], rd = demand[0];
    std::size_t i = 0, j = 0;
    for (;;) {
      const std::size_t k = i * m_ + j;
      basic_[k] = 1;
      basis_.push_back(k);
      if (i == n_ - 1 && j == m_ - 1) {
        flow_[k] = std::max(0.0, std::min(rs, rd));
        break;
      }
      if (i == n_ - 1 || (j < m_ - 1 && rd < rs)) {
        flow_[k] = std::max(0.0, rd);
        rs -= rd;
        ++j;
        rd = demand[j];
      } else {
        flow_[k] = std::max(0.0, rs);
        rd -= rs;
        ++i;
        rs = supply[i];
      }
    }
  }

  // u_i + v_j = c_ij on the basis tree, rooted at row 0; also records the tree
  // structure used to trace pivot cycles. Nodes: rows 0..n-1, columns n..n+m-1.
  void compute_potentials() {
    const std::size_t nodes = n_ + m_;
    adj_.assign(nodes, {});
    for (std::size_t k : basis_) {
      const std::size_t i = k / m_, j = k % m_;
      adj_[i].push_back(k);
      adj_[n_ + j].push_back(k);
    }
    u_.assign(n_, 0.0);
    v_.assign(m_, 0.0);
    parent_edge_.assign(nodes, npos);
    parent_.assign(nodes, npos);
    depth_.assign(nodes, 0);
    std::vector<char> seen(nodes, 0);
    std::vector<std::size_t> queue{0};
    seen[0] = 1;
    for (std::size_t h = 0; h < queue.size(); ++h) {
      const std::size_t node = queue[h];
      for (std::size_t k : adj_[node]) {
        const std::size_t i = k / m_, j = k % m_;
        const std::size_t other = node < n_ ? n_ + j : i;
        if (seen[other]) continue;
        seen[other] = 1;
        if (node < n_)
          v_[j] = cost_[k] - u_[i];
        else
          u_[i] = cost_[k] - v_[j];
        parent_[other] = node;
        parent_edge_[other] = k;
        depth_[other] = depth_[node] + 1;
        queue.push_back(other);
      }
    }
    if (queue.size() != nodes) throw std::logic_error("transport: basis is not a spanning tree");
  }

  // Returns true when the pivot moved a positive amount of mass.
  bool pivot(std::size_t entering, bool bland) {
    const std::size_t ei = entering / m_, ej = entering % m_;
    // Tree path from column node to row node; edges in order starting at the column.
    std::size_t a = n_ + ej, b = ei;
    std::vector<std::size_t> from_col, from_row;
    while (depth_[a] > depth_[b]) {
      from_col.push_back(parent_edge_[a]);
      a = parent_[a];
    }
    while (depth_[b] > depth_[a]) {
      from_row.push_back(parent_edge_[b]);
      b = parent_[b];
    }
    while (a != b) {
      from_col.push_back(parent_edge_[a]);
      a = parent_[a];
      from_row.push_back(parent_edge_[b]);
      b = parent_[b];
    }
    std::vector<std::size_t> path = std::move(from_col);
    path.insert(path.end(), from_row.rbegin(), from_row.rend());

    // Signs alternate -, +, -, ... starting next to the entering column.
    double theta = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < path.size(); p += 2) theta = std::min(theta, flow_[path[p]]);
    // Bland: lowest index among the blocking cells. Otherwise the blocking
    // cell closest to the entering column.
    std::size_t leaving = npos;
    for (std::size_t p = 0; p < path.size(); p += 2) {
      if (flow_[path[p]] != theta) continue;
      if (!bland) {
        leaving = path[p];
        break;
      }
      leaving = std::min(leaving, path[p]);
    }

    for (std::size_t p = 0; p < path.size(); ++p) {
      if (p % 2 == 0)
        flow_[path[p]] -= theta;
      else
        flow_[path[p]] += theta;
    }
    flow_[leaving] = 0.0;
    basic_[leaving] = 0;
    flow_[entering] = theta;
    basic_[entering] = 1;
    *std::find(basis_.begin(), basis_.end(), leaving) = entering;
    return theta > 0.0;
  }

  static constexpr std::size_t npos = std::numeric_limits<std::size_t>::max();

  PricingRule rule_;
  std::size_t n_, m_;
  std::vector<double> cost_;
  std::vector<double> flow_;
  std::vector<char> basic_;
  std::vector<std::size_t> basis_;
  std::vector<double> u_, v_;
  std::vector<std::vector<std::size_t>> adj_;
  std::vector<std::size_t> parent_, parent_edge_, depth_;
  std::size_t block_ = 16;
  std::size_t cursor_ = 0;
};

inline void require_equal_mass(const DiscreteMeasure& mu, const DiscreteMeasure& nu, const char* who) {
  const double scale = std::max({1.0, mu.mass(), nu.mass()});
  if (std::abs(mu.mass() - nu.mass()) > 1e-12 * scale)
    throw std::invalid_argument(std::string(who) + ": measures have different total mass");
}

inline double outer_root(double cost, double q) { return q >= 1.0 ? std::pow(cost, 1.0 / q) : cost; }

} // namespace detail

// Solves min sum c_ij x_ij subject to row sums = supply, column sums = demand.
// Totals of supply and demand must agree.
inline TransportPlan solve_transport(std::span<const double> supply, std::span<const double> demand,
                                     std::span<const double> cost, PricingRule rule = PricingRule::block_search) {
  for (double s : supply)
    if (!(s >= 0.0)) throw std::invalid_argument("transport: negative supply");
  for (double d : demand)
    if (!(d >= 0.0)) throw std::invalid_argument("transport: negative demand");
  return detail::TransportationSimplex(supply, demand, cost, rule).solve();
}

// Optimal plan for the cost d(x, y)^q between two equal-mass measures.
inline TransportPlan optimal_plan(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double q,
                                  const TransportOptions& opts = {}) {
  if (!(q > 0.0)) throw std::invalid_argument("optimal_plan: q must be positive");
  if (mu.dimension() != nu.dimension()) throw std::invalid_argument("optimal_plan: dimension mismatch");
  if (mu.size() > opts.support_cap || nu.size() > opts.support_cap)
    throw ResourceError("optimal_plan: support size " + std::to_string(std::max(mu.size(), nu.size())) +
                        " exceeds cap " + std::to_string(opts.support_cap));
  detail::require_equal_mass(mu, nu, "optimal_plan");
  std::vector<double> a, b, c;
  a.reserve(mu.size());
  b.reserve(nu.size());
  c.reserve(mu.size() * nu.size());
  for (const auto& x : mu.atoms()) a.push_back(x.weight);
  for (const auto& y : nu.atoms()) b.push_back(y.weight);
  for (const auto& x : mu.atoms())
    for (const auto& y : nu.atoms()) c.push_back(std::pow(distance(x.point, y.point, opts.norm), q));
  return solve_transport(a, b, c);
}

// Minimal metric between equal-mass (not necessarily unit) measures:
// (inf_gamma integral d^q dgamma)^{min(1, 1/q)}.
inline double lq_general(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double q,
                         const TransportOptions& opts = {}) {
  return detail::outer_root(optimal_plan(mu, nu, q, opts).cost, q);
}

// l_q between unit-mass measures via the transportation LP.
inline double lq_exact_small(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double q,
                             const TransportOptions& opts = {}) {
  if (!mu.is_unit_mass() || !nu.is_unit_mass()) throw std::invalid_argument("lq_exact_small: unit mass required");
  return lq_general(mu, nu, q, opts);
}

// l_q on the line via the monotone (quantile) coupling. Only valid for convex
// cost, so q < 1 is rejected.
inline double lq_1d(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double q) {
  if (q < 1.0) throw std::domain_error("lq_1d: monotone coupling is not optimal for q < 1");
  if (mu.dimension() != 1 || nu.dimension() != 1) throw std::invalid_argument("lq_1d: one-dimensional measures required");
  detail::require_equal_mass(mu, nu, "lq_1d");
  const auto a = mu.atoms();
  const auto b = nu.atoms();
  std::size_t i = 0, j = 0;
  double ra = a[0].weight, rb = b[0].weight;
  CompensatedSum cost;
  while (i < a.size() && j < b.size()) {
    const double moved = std::min(ra, rb);
    const double d = std::abs(a[i].point[0] - b[j].point[0]);
    if (moved > 0.0 && d > 0.0) cost.add(moved * (q == 1.0 ? d : std::pow(d, q)));
    ra -= moved;
    rb -= moved;
    if (ra <= 0.0 && ++i < a.size()) ra = a[i].weight;
    if (rb <= 0.0 && ++j < b.size()) rb = b[j].weight;
  }
  return std::pow(std::max(0.0, cost.value()), 1.0 / q);
}

// l_q(mu, mu(X) delta_a) = (integral d^q(x, a) dmu)^{min(1, 1/q)}.
inline double lq_dirac(const DiscreteMeasure& mu, const Point& a, double q, Norm norm = Norm::euclidean) {
  return detail::outer_root(q_moment(mu, a, q, norm), q);
}

// Dispatcher: the exact 1-D solver when it applies (d = 1, q >= 1), the LP
// otherwise.
inline double lq_distance(const DiscreteMeasure& mu, const DiscreteMeasure& nu, double q,
                          const TransportOptions& opts = {}) {
  if (mu.dimension() == 1 && nu.dimension() == 1 && q >= 1.0) return lq_1d(mu, nu, q);
  return lq_general(mu, nu, q, opts);
}

// Two lists of sample measures. When `paired`, left[i] and right[i] were
// produced from the same sample point omega_i.
struct EnsemblePair {
  bool paired = false;
  std::vector<DiscreteMeasure> left;
  std::vector<DiscreteMeasure> right;
};

// Lifts per-pair distances to (mean l^q)^{1/q} for q >= 1, mean l for q < 1.
// The standard error for q >= 1 is propagated by the delta method.
inline Estimate lift_distances(std::span<const double> distances, double q) {
  if (q < 1.0) return mean_with_stderr(distances);
  std::vector<double> powered(distances.size());
  for (std::size_t i = 0; i < distances.size(); ++i) powered[i] = std::pow(distances[i], q);
  const Estimate e = mean_with_stderr(powered);
  const double value = std::pow(e.value, 1.0 / q);
  const double se = e.value > 0.0 ? (1.0 / q) * std::pow(e.value, 1.0 / q - 1.0) * e.std_error : 0.0;
  return {value, se};
}

// Monte Carlo estimate of l_q^* over paired ensembles.
inline Estimate lq_star(const EnsemblePair& pair, double q, const TransportOptions& opts = {}) {
  if (!pair.paired) throw std::invalid_argument("lq_star: ensembles must be paired");
  if (pair.left.size() != pair.right.size() || pair.left.empty())
    throw std::invalid_argument("lq_star: paired ensembles must have equal positive length");
  const std::size_t m = pair.left.size();
  std::vector<double> samples(m);
  parallel_for(m, opts.threads, [&](std::size_t i) {
    samples[i] = lq_distance(pair.left[i], pair.right[i], q, opts);
  });
  return lift_distances(samples, q);
}

struct Assignment {
  std::vector<std::size_t> column_of_row;
  double cost = 0.0;
};

// Exact minimum-cost perfect matching on an m x m matrix (row-major), by the
// shortest augmenting path method with dual potentials, O(m^3).
inline Assignment assignment_solve(std::span<const double> cost, std::size_t m) {
  if (cost.size() != m * m) throw std::invalid_argument("assignment_solve: matrix must be m x m");
  for (double c : cost)
    if (!std::isfinite(c) || c < 0.0) throw std::invalid_argument("assignment_solve: entries must be finite and >= 0");
  if (m == 0) return {};

  const double inf = std::numeric_limits<double>::infinity();
  // 1-based arrays; column 0 is a virtual start column.
  std::vector<double> u(m + 1, 0.0), v(m + 1, 0.0);
  std::vector<std::size_t> row_of_col(m + 1, 0), way(m + 1, 0);
  for (std::size_t i = 1; i <= m; ++i) {
    row_of_col[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(m + 1, inf);
    std::vector<char> used(m + 1, 0);
    do {
      used[j0] = 1;
      const std::size_t i0 = row_of_col[j0];
      double delta = inf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = cost[(i0 - 1) * m + (j - 1)] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= m; ++j) {
        if (used[j]) {
          u[row_of_col[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (row_of_col[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      row_of_col[j0] = row_of_col[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  Assignment result;
  result.column_of_row.assign(m, 0);
  for (std::size_t j = 1; j <= m; ++j) result.column_of_row[row_of_col[j] - 1] = j - 1;
  CompensatedSum total;
  for (std::size_t i = 0; i < m; ++i) total.add(cost[i * m + result.column_of_row[i]]);
  result.cost = total.value();
  return result;
}

// l_q^{**} between two equal-weight empirical distributions over measures
// from an m x m matrix of costs l_q(mu_i, nu_j)^{max(1, q)}.
inline double lq_star_star_from_costs(std::span<const double> costs, std::size_t m, double q) {
  if (m == 0) throw std::invalid_argument("lq_star_star: empty ensembles");
  const Assignment a = assignment_solve(costs, m);
  return detail::outer_root(a.cost / static_cast<double>(m), q);
}

inline std::vector<double> lq_cost_matrix(std::span<const DiscreteMeasure> a, std::span<const DiscreteMeasure> b,
                                          double q, const TransportOptions& opts = {}) {
  const std::size_t m = a.size(), n = b.size();
  std::vector<double> costs(m * n);
  parallel_for(m * n, opts.threads, [&](std::size_t k) {
    const double l = lq_distance(a[k / n], b[k % n], q, opts);
    costs[k] = q >= 1.0 ? std::pow(l, q) : l;
  });
  return costs;
}

// Minimal metric l_q^{**} between the empirical distributions of two
// equal-size ensembles; the infimum over couplings is an assignment problem.
inline double lq_star_star(std::span<const DiscreteMeasure> a, std::span<const DiscreteMeasure> b, double q,
                           const TransportOptions& opts = {}) {
  if (a.size() != b.size()) throw std::invalid_argument("lq_star_star: ensemble sizes differ");
  if (a.empty()) throw std::invalid_argument("lq_star_star: empty ensembles");
  return lq_star_star_from_costs(lq_cost_matrix(a, b, q, opts), a.size(), q);
}

// Debug exports.
inline std::string matrix_to_csv(std::span<const double> values, std::size_t rows, std::size_t cols) {
  if (values.size() != rows * cols) throw std::invalid_argument("matrix_to_csv: size mismatch");
  std::string out;
  for (std::size_t i = 0; i < rows; ++i) {
    for (std::size_t j = 0; j < cols; ++j) {
      char buf[32];
      std::snprintf(buf, sizeof buf, "%.17g", values[i * cols + j]);
      out += buf;
      out += j + 1 < cols ? "," : "\n";
    }
  }
  return out;
}

inline std::string plan_to_csv(const TransportPlan& plan) {
  std::string out = "row,col,flow\n";
  for (std::size_t i = 0; i < plan.rows; ++i)
    for (std::size_t j = 0; j < plan.cols; ++j) {
      const double f = plan.at(i, j);
      if (f <= 0.0) continue;
      char buf[80];
      std::snprintf(buf, sizeof buf, "%zu,%zu,%.17g\n", i, j, f);
      out += buf;
    }
  return out;
}

} // namespace fractalaw
