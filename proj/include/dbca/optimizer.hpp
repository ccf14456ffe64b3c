#pragma once

// Resource-constrained throughput maximization. Each round the controller
// needs an access probability (solved jointly with a CRS count under an
// expected-resource budget) and, once MSG1 has been observed, the CRS count
// itself (closed-form rule).

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>

#include <boost/math/tools/roots.hpp>
#include <boost/math/tools/toms748_solve.hpp>

#include "dbca/analytics.hpp"
#include "dbca/model.hpp"

namespace dbca::optimizer {

using model::OperatingPoint;
using model::SystemConfig;

class InfeasibleError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Per-round cap on expected uplink consumption (resource blocks).
struct ResourceBudget {
  double limit_rb = 0.0;
  double proportionality = 1.0;  // C, when derived from the d-ACB reference

  /// C times the expected consumption of d-ACB (p = min(1, M/n), no CRS) at backlog n.
  static ResourceBudget proportional(double c, double n_hat, const SystemConfig& config);

  bool operator==(const ResourceBudget&) const = default;
};

/// Classic slotted-ALOHA optimum; 1 when there is nobody to contend with.
inline double aloha_optimal_p(double n, int M) {
  if (M < 1) throw DomainError("aloha_optimal_p: M must be >= 1");
  if (!(n >= 0.0)) throw DomainError("aloha_optimal_p: n must be >= 0");
  if (n <= static_cast<double>(M)) return 1.0;
  return static_cast<double>(M) / n;
}

inline ResourceBudget ResourceBudget::proportional(double c, double n_hat,
                                                   const SystemConfig& config) {
  if (!(c >= 1.0)) throw DomainError("ResourceBudget: proportionality constant must be >= 1");
  if (!(n_hat >= 0.0)) throw DomainError("ResourceBudget: n_hat must be >= 0");
  const OperatingPoint reference{aloha_optimal_p(n_hat, config.preambles), 0};
  return {c * analytics::expected_resources(n_hat, reference, config), c};
}

/// How the real-valued CRS count is turned into an integer.
enum class CrsRounding {
  floor,         // largest k whose expected consumption fits the budget
  nearest_even,  // round to nearest, ties to even
};

/// soft: expected idle preambles; hard: the idle count observed this round.
enum class ConstraintMode { soft, hard };

/// exact: maximize the exact throughput; root_find: use the approximate root directly.
enum class FixedKPath { exact, root_find };

inline double round_half_even(double v) {
  const double fl = std::floor(v);
  const double diff = v - fl;
  if (diff < 0.5) return fl;
  if (diff > 0.5) return fl + 1.0;
  return std::fmod(fl, 2.0) == 0.0 ? fl : fl + 1.0;
}

/// Real-valued CRS count that makes the consumption equal the budget for the
/// given occupied-preamble count; +inf when nothing is occupied.
inline double crs_unrounded(double occupied, const ResourceBudget& budget,
                            const SystemConfig& config) {
  if (occupied <= 0.0) return std::numeric_limits<double>::infinity();
  return ((budget.limit_rb - config.prach_rb) / (config.msg3_rb * occupied) - 1.0) /
         config.crs_overhead;
}

inline int round_crs(double raw, const SystemConfig& config, CrsRounding rounding) {
  if (std::isnan(raw)) return 0;
  const double k_max = config.max_crs;
  double r = raw;
  if (r > k_max + 1.0) r = k_max + 1.0;
  if (r < -1.0) r = -1.0;
  r = rounding == CrsRounding::floor ? std::floor(r) : round_half_even(r);
  return static_cast<int>(std::clamp(r, 0.0, k_max));
}

/// CRS count for the round once MSG1 has been observed. With hard constraints
/// the observed idle count replaces the expected one.
inline int crs_decision(double n_hat, double p, const ResourceBudget& budget,
                        const SystemConfig& config, CrsRounding rounding = CrsRounding::floor,
                        ConstraintMode mode = ConstraintMode::soft,
                        std::optional<int> observed_idle = std::nullopt) {
  if (!(n_hat >= 0.0)) throw DomainError("crs_decision: n_hat must be >= 0");
  double occupied = 0.0;
  if (mode == ConstraintMode::hard) {
    if (!observed_idle) throw DomainError("crs_decision: hard mode needs the observed idle count");
    if (*observed_idle < 0 || *observed_idle > config.preambles)
      throw DomainError("crs_decision: idle count out of range");
    occupied = static_cast<double>(config.preambles - *observed_idle);
  } else {
    if (n_hat == 0.0) return 0;
    occupied = analytics::expected_occupied(n_hat, p, config.preambles);
  }
  if (occupied <= 0.0) return 0;
  return round_crs(crs_unrounded(occupied, budget, config), config, rounding);
}

/// Largest access probability whose expected consumption at k CRSs stays
/// within the budget; may exceed 1 (or be +inf) when the budget never binds.
inline double max_access_probability(double n, int k, const ResourceBudget& budget,
                                     const SystemConfig& config) {
  const double room = budget.limit_rb - config.prach_rb;
  if (!(room > 0.0)) throw InfeasibleError("budget does not exceed the PRACH cost");
  if (n <= 0.0) return std::numeric_limits<double>::infinity();
  const double M = config.preambles;
  const double share = room / (M * config.msg3_rb * (1.0 + k * config.crs_overhead));
  if (share >= 1.0) return std::numeric_limits<double>::infinity();
  // M - M * (1 - share)^(1/n)
  return -M * std::expm1(std::log1p(-share) / n);
}

/// Residual of the stationarity condition of the exponential throughput
/// approximation in x = n p / (M l).
inline double stationarity_residual(double x, std::uint64_t levels) {
  const double l = static_cast<double>(levels);
  const double em1 = std::expm1(-x);  // e^{-x} - 1
  return -(em1 + x) + std::exp(-x * l) * ((1.0 - x * l) * em1 + x);
}

/// Root of stationarity_residual in (0, n/(M l)], or n/(M l) when the
/// residual does not change sign there.
inline double stationarity_root(double n, int k, int M) {
  const std::uint64_t levels = model::priority_levels(k);
  const double l = static_cast<double>(levels);
  const double hi = n / (static_cast<double>(M) * l);
  const double lo = std::min(1e-4 / l, 0.5 * hi);
  const double f_hi = stationarity_residual(hi, levels);
  const double f_lo = stationarity_residual(lo, levels);
  if (f_hi >= 0.0 || f_lo <= 0.0) return hi;
  boost::uintmax_t max_iter = 200;
  const auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-10; };
  const auto [a, b] = boost::math::tools::toms748_solve(
      [levels](double x) { return stationarity_residual(x, levels); }, lo, hi, f_lo, f_hi, tol,
      max_iter);
  return 0.5 * (a + b);
}

/// Approximate throughput-maximizing access probability for k CRSs.
inline double root_find_p(double n, int k, int M) {
  if (M < 1) throw DomainError("root_find_p: M must be >= 1");
  if (!(n >= 2.0)) throw DomainError("root_find_p: n must be >= 2");
  const double x = stationarity_root(n, k, M);
  const double l = static_cast<double>(model::priority_levels(k));
  return std::min(x * static_cast<double>(M) * l / n, 1.0);
}

namespace detail {

// Sign-carrying part of dS/dp and its derivative:
//   D(p)  = sum_h (1 - a_h p)^(n-2) (1 - n a_h p),  a_h = h / (l M)
//   D'(p) = -sum_h a_h (1 - a_h p)^(n-3) [(n-2)(1 - n a_h p) + n (1 - a_h p)]
inline std::pair<double, double> slope_terms(double p, double n, std::uint64_t levels, int M) {
  const double scale = 1.0 / (static_cast<double>(levels) * static_cast<double>(M));
  double d = 0.0;
  double dd = 0.0;
  for (std::uint64_t h = 1; h <= levels; ++h) {
    const double a = static_cast<double>(h) * scale;
    const double base = 1.0 - a * p;
    const double pow_n3 = std::exp((n - 3.0) * std::log(base));
    const double pow_n2 = pow_n3 * base;
    const double lin = 1.0 - n * a * p;
    d += pow_n2 * lin;
    dd -= a * pow_n3 * ((n - 2.0) * lin + n * base);
  }
  return {d, dd};
}

}  // namespace detail

/// Throughput-maximizing access probability for a fixed CRS count under the
/// budget: min(unconstrained maximizer, p_max, 1).
inline double solve_fixed_k(double n, int k, const ResourceBudget& budget,
                            const SystemConfig& config, FixedKPath path = FixedKPath::exact) {
  if (!(n >= 0.0)) throw DomainError("solve_fixed_k: n must be >= 0");
  if (k < 0 || k > config.max_crs) throw DomainError("solve_fixed_k: k out of range");
  const double cap = std::min(1.0, max_access_probability(n, k, budget, config));
  // Below two contenders throughput is increasing in p.
  if (n < 2.0) return cap;

  if (path == FixedKPath::root_find) return std::min(root_find_p(n, k, config.preambles), cap);

  const std::uint64_t levels = model::priority_levels(k);
  const int M = config.preambles;
  if (detail::slope_terms(cap, n, levels, M).first >= 0.0) return cap;

  // Unique interior maximum in (0, cap): safeguarded Newton on D(p) = 0,
  // seeded with the approximate root.
  double guess = root_find_p(n, k, M);
  if (!(guess > 0.0 && guess < cap)) guess = 0.5 * cap;
  boost::uintmax_t max_iter = 100;
  const double p = boost::math::tools::newton_raphson_iterate(
      [&](double q) { return detail::slope_terms(q, n, levels, M); }, guess, 0.0, cap, 50,
      max_iter);
  return std::clamp(p, std::numeric_limits<double>::min(), cap);
}

/// Operating point maximizing expected throughput subject to expected
/// consumption <= budget; ties go to the cheaper point.
inline OperatingPoint solve_operating_point(double n_hat, const ResourceBudget& budget,
                                            const SystemConfig& config,
                                            FixedKPath path = FixedKPath::exact) {
  if (!(n_hat >= 0.0)) throw DomainError("solve_operating_point: n_hat must be >= 0");
  if (n_hat < 1.0) return {1.0, 0};
  if (!(budget.limit_rb > config.prach_rb))
    throw InfeasibleError("solve_operating_point: budget does not exceed the PRACH cost");

  constexpr double kTieTolerance = 1e-12;
  OperatingPoint best{1.0, 0};
  double best_s = -1.0;
  double best_r = std::numeric_limits<double>::infinity();
  for (int k = 0; k <= config.max_crs; ++k) {
    const double cap = std::min(1.0, max_access_probability(n_hat, k, budget, config));
    // Throughput never exceeds the expected occupancy, which only shrinks with k.
    const double bound = analytics::expected_occupied(n_hat, cap, config.preambles);
    if (bound < best_s * (1.0 - kTieTolerance)) break;

    const double p = solve_fixed_k(n_hat, k, budget, config, path);
    const OperatingPoint pt{p, k};
    const double s = analytics::expected_throughput(n_hat, p, k, config.preambles);
    const double r = analytics::expected_resources(n_hat, pt, config);
    if (s > best_s * (1.0 + kTieTolerance) ||
        (s >= best_s * (1.0 - kTieTolerance) && r < best_r)) {
      best = pt;
      best_s = s;
      best_r = r;
    }
  }
  return best;
}

}  // namespace dbca::optimizer
