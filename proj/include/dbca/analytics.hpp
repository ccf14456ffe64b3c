#pragma once

// Closed-form single-round expectations under joint ACB + BCCR, the
// throughput/resource Pareto frontier, and the drift approximation of the
// burst resolution time.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "dbca/model.hpp"
#include "dbca/traffic.hpp"

namespace dbca::analytics {

using model::OperatingPoint;
using model::SystemConfig;

namespace detail {

inline void check_inputs(double n, double p, int M, const char* who) {
  if (!(n >= 0.0) || !std::isfinite(n)) throw DomainError(std::string(who) + ": n must be >= 0");
  if (!(p > 0.0 && p <= 1.0)) throw DomainError(std::string(who) + ": p must lie in (0, 1]");
  if (M < 1) throw DomainError(std::string(who) + ": M must be >= 1");
}

// Level counts up to this bound are always summed term by term.
inline constexpr std::uint64_t kDirectSumLevels = std::uint64_t{1} << 14;

// sum_{h=1..l} (1 - h*c)^m evaluated term by term.
inline double direct_level_sum(std::uint64_t levels, double c, double m) {
  if (m == 0.0) return static_cast<double>(levels);  // also covers a base of exactly 0
  double sum = 0.0;
  for (std::uint64_t h = 1; h <= levels; ++h) {
    sum += std::exp(m * std::log1p(-static_cast<double>(h) * c));
  }
  return sum;
}

// The same sum via Euler-Maclaurin. Only used when c*m is small, where the
// correction series converges far below double precision within a few terms.
// Returns a negative value when it cannot guarantee convergence.
inline double euler_maclaurin_level_sum(std::uint64_t levels, double c, double m) {
  static constexpr std::array<double, 8> kBernoulli = {
      1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0,
      5.0 / 66.0, -691.0 / 2730.0, 7.0 / 6.0, -3617.0 / 510.0};
  const double l = static_cast<double>(levels);
  const double top = l * c;  // = p / M
  const double log_end = std::log1p(-top);
  const double n = m + 1.0;

  const double integral = -std::expm1(n * log_end) / (c * n);
  const double f_end = std::exp(m * log_end);
  double sum = integral + 0.5 * (f_end - 1.0);

  // f^(r)(x) = (-c)^r * m(m-1)...(m-r+1) * (1 - c x)^(m - r)
  double falling = m;         // m (m-1) ... (m-r+1) for r = 1
  double c_pow = c;           // c^r
  double factorial = 2.0;     // (2j)!
  for (std::size_t j = 1; j <= kBernoulli.size(); ++j) {
    const double r = 2.0 * static_cast<double>(j) - 1.0;
    const double d_end = -c_pow * falling * std::exp((m - r) * log_end);
    const double d_start = -c_pow * falling;
    const double term = kBernoulli[j - 1] / factorial * (d_end - d_start);
    sum += term;
    if (std::abs(term) <= 1e-17 * std::abs(sum)) return sum;
    falling *= (m - r) * (m - r - 1.0);
    c_pow *= c * c;
    factorial *= (2.0 * static_cast<double>(j) + 1.0) * (2.0 * static_cast<double>(j) + 2.0);
  }
  return -1.0;
}

}  // namespace detail

/// Expected successful RAOs in one round with n contenders, access
/// probability p, k CRSs and M preambles.
inline double expected_throughput(double n, double p, int k, int M) {
  detail::check_inputs(n, p, M, "expected_throughput");
  const std::uint64_t levels = model::priority_levels(k);
  if (n == 0.0) return 0.0;
  const double l = static_cast<double>(levels);
  const double c = p / (l * static_cast<double>(M));
  const double m = n - 1.0;
  double sum = -1.0;
  if (levels > detail::kDirectSumLevels && c * std::max(std::abs(m), 1.0) < 0.25 &&
      p / M <= 0.5) {
    sum = detail::euler_maclaurin_level_sum(levels, c, m);
  }
  if (sum < 0.0) sum = detail::direct_level_sum(levels, c, m);
  return n * p / l * sum;
}

/// Expected number of preambles chosen by at least one UE.
inline double expected_occupied(double n, double p, int M) {
  detail::check_inputs(n, p, M, "expected_occupied");
  if (n == 0.0) return 0.0;
  const auto m = static_cast<double>(M);
  return -m * std::expm1(n * std::log1p(-p / m));
}

/// Expected uplink resource blocks consumed in one round.
inline double expected_resources(double n, const OperatingPoint& point, const SystemConfig& config) {
  return model::round_resources(0, 0, config) +
         config.msg3_rb * (1.0 + point.crs_slots * config.crs_overhead) *
             expected_occupied(n, point.access_probability, config.preambles);
}

struct FrontierPoint {
  double throughput = 0.0;
  double resources = 0.0;
  OperatingPoint point;
};

struct ParetoResult {
  std::vector<FrontierPoint> frontier;               // non-dominated, resources ascending
  std::vector<std::vector<FrontierPoint>> curves;    // curves[k]: the fixed-k sweep over p
};

/// Grid value p_j = j / grid_points, j = 1..grid_points.
inline double grid_probability(std::size_t j, std::size_t grid_points) {
  return static_cast<double>(j) / static_cast<double>(grid_points);
}

/// Keeps the points no other point beats on both objectives (more throughput,
/// fewer resources).
inline std::vector<FrontierPoint> non_dominated(std::vector<FrontierPoint> points) {
  std::sort(points.begin(), points.end(), [](const FrontierPoint& a, const FrontierPoint& b) {
    if (a.resources != b.resources) return a.resources < b.resources;
    return a.throughput > b.throughput;
  });
  std::vector<FrontierPoint> out;
  double best = -1.0;
  for (const auto& pt : points) {
    if (pt.throughput > best) {
      out.push_back(pt);
      best = pt.throughput;
    }
  }
  return out;
}

/// Enumerates (S, R) over k in [0, max_crs] and the p grid, then filters to
/// the Pareto frontier.
inline ParetoResult pareto_frontier(double n, const SystemConfig& config,
                                    std::size_t grid_points = 1000) {
  config.validate();
  if (!(n >= 1.0)) throw DomainError("pareto_frontier: n must be >= 1");
  if (grid_points == 0) throw DomainError("pareto_frontier: grid_points must be >= 1");
  ParetoResult result;
  result.curves.resize(static_cast<std::size_t>(config.max_crs) + 1);
  std::vector<FrontierPoint> all;
  all.reserve(result.curves.size() * grid_points);
  for (int k = 0; k <= config.max_crs; ++k) {
    auto& curve = result.curves[static_cast<std::size_t>(k)];
    curve.reserve(grid_points);
    for (std::size_t j = 1; j <= grid_points; ++j) {
      const OperatingPoint pt{grid_probability(j, grid_points), k};
      curve.push_back({expected_throughput(n, pt.access_probability, k, config.preambles),
                       expected_resources(n, pt, config), pt});
    }
    all.insert(all.end(), curve.begin(), curve.end());
  }
  result.frontier = non_dominated(std::move(all));
  return result;
}

class DivergedError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct DriftStep {
  double backlog = 0.0;     // E[n_i], including this round's arrivals
  double arrivals = 0.0;    // E[a_i]
  double successes = 0.0;   // E[s_i]
  OperatingPoint point;
};

struct DriftPrediction {
  std::size_t rounds_to_resolution = 0;
  std::vector<DriftStep> trajectory;
  double epsilon = 1.0;
};

/// Iterates the expected backlog E[n_{i+1}] = E[n_i] - S + E[a_{i+1}] under a
/// backlog -> operating point policy until the backlog falls below epsilon
/// with no arrivals left.
template <class Policy>
  requires std::invocable<Policy&, double>
DriftPrediction drift_burst_resolution(const traffic::BurstScenario& scenario, Policy&& policy,
                                       const SystemConfig& config, double epsilon = 1.0,
                                       std::size_t round_cap = 1'000'000) {
  config.validate();
  scenario.validate();
  if (!(epsilon > 0.0)) throw DomainError("drift_burst_resolution: epsilon must be > 0");

  const std::size_t arrival_span = traffic::arrival_rounds(scenario, config.round_ms);
  DriftPrediction out;
  out.epsilon = epsilon;
  double backlog = traffic::expected_arrivals_in_round(scenario, 0, config.round_ms);
  for (std::size_t round = 0;; ++round) {
    if (backlog < epsilon && round + 1 >= arrival_span) {
      out.rounds_to_resolution = round;
      return out;
    }
    if (round >= round_cap) {
      throw DivergedError("drift_burst_resolution: no resolution within " +
                          std::to_string(round_cap) + " rounds");
    }
    const OperatingPoint pt = policy(backlog);
    pt.validate(config);
    const double arrivals = traffic::expected_arrivals_in_round(scenario, round, config.round_ms);
    const double served = std::min(
        backlog, expected_throughput(backlog, pt.access_probability, pt.crs_slots, config.preambles));
    out.trajectory.push_back({backlog, arrivals, served, pt});
    backlog = backlog - served +
              traffic::expected_arrivals_in_round(scenario, round + 1, config.round_ms);
  }
}

}  // namespace dbca::analytics
