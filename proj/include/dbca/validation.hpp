#pragma once

// Self-checks behind `dbca validate`: analytic model vs Monte Carlo, solver
// vs grid search, root finder vs exact maximizer, CRS rule vs substitution,
// drift recursion vs simulation. Tolerances follow the acceptance bounds.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dbca/analytics.hpp"
#include "dbca/config.hpp"
#include "dbca/metrics.hpp"
#include "dbca/optimizer.hpp"
#include "dbca/sim.hpp"

namespace dbca::cli {

/// Expected-throughput function under test; replaceable to inject faults.
using ThroughputFn = std::function<double(double n, double p, int k, int M)>;

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct CheckContext {
  const config::ExperimentConfig& config;
  ThroughputFn throughput = analytics::expected_throughput;
};

namespace detail {

inline std::string fmt(double v, int precision = 6) {
  std::ostringstream o;
  o.precision(precision);
  o << v;
  return o.str();
}

// Runs body(i) for i in [0, count) on up to `workers` threads.
template <class Body>
void parallel_for(std::size_t count, std::size_t workers, Body&& body) {
  workers = std::clamp<std::size_t>(workers, 1, std::max<std::size_t>(count, 1));
  if (workers == 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) body(i);
    });
  }
}

}  // namespace detail

/// Monte Carlo mean successes at a frozen (p, k) stays within three standard
/// errors of the analytic value at every grid point.
inline CheckResult check_bridge(const CheckContext& ctx) {
  const auto& c = ctx.config;
  struct Point {
    double n;
    int k;
    double p;
    double z = 0.0;
  };
  std::vector<Point> points;
  for (double n : c.backlogs)
    for (int k : c.crs_counts)
      for (std::size_t j = 1; j <= c.curve_points; ++j)
        points.push_back({n, k, analytics::grid_probability(j, c.curve_points)});

  detail::parallel_for(points.size(), c.parallel, [&](std::size_t i) {
    auto& pt = points[i];
    const auto stats = sim::fixed_point_successes(static_cast<std::size_t>(pt.n), {pt.p, pt.k},
                                                  c.system, c.bridge_rounds, c.seed, i);
    // A sample with no variation still carries one count of resolution.
    const double se = std::max(stats.standard_error, 1.0 / static_cast<double>(stats.rounds));
    pt.z = (stats.mean - ctx.throughput(pt.n, pt.p, pt.k, c.system.preambles)) / se;
  });

  std::size_t breaches = 0;
  double worst = 0.0;
  const Point* worst_pt = nullptr;
  for (const auto& pt : points) {
    if (std::abs(pt.z) > 3.0) ++breaches;
    if (std::abs(pt.z) >= worst) {
      worst = std::abs(pt.z);
      worst_pt = &pt;
    }
  }
  // Two-sided normal tail beyond 3 SE.
  const double expected = static_cast<double>(points.size()) * std::erfc(3.0 / std::sqrt(2.0));
  std::string detail = std::to_string(points.size()) + " points, " +
                       std::to_string(breaches) + " beyond 3 SE (" + detail::fmt(expected, 3) +
                       " expected by chance), max |z| = " + detail::fmt(worst, 3);
  if (worst_pt)
    detail += " (n=" + detail::fmt(worst_pt->n) + " k=" + std::to_string(worst_pt->k) +
              " p=" + detail::fmt(worst_pt->p) + ")";
  return {"bridge", breaches == 0 && !points.empty(), detail};
}

/// Without CRSs the throughput is the slotted-ALOHA expression and peaks at min(1, M/n).
inline CheckResult check_aloha(const CheckContext& ctx) {
  const int M = ctx.config.system.preambles;
  constexpr std::size_t kGrid = 1000;
  double worst_rel = 0.0;
  std::size_t misplaced = 0;
  for (double n : {3.0, 10.0, 54.0, 100.0, 1000.0, 5000.0, 10000.0}) {
    double best = -1.0;
    double best_p = 0.0;
    for (std::size_t j = 1; j <= kGrid; ++j) {
      const double p = analytics::grid_probability(j, kGrid);
      const double s = ctx.throughput(n, p, 0, M);
      const long double base = 1.0L - static_cast<long double>(p) / M;
      const auto ref = static_cast<double>(n * p * std::pow(base, static_cast<long double>(n) - 1.0L));
      worst_rel = std::max(worst_rel, std::abs(s - ref) / ref);
      if (s > best) {
        best = s;
        best_p = p;
      }
    }
    if (std::abs(best_p - optimizer::aloha_optimal_p(n, M)) > 1.0 / kGrid + 1e-12) ++misplaced;
  }
  return {"aloha", worst_rel <= 1e-12 && misplaced == 0,
          "max relative deviation " + detail::fmt(worst_rel, 3) + ", misplaced maxima " +
              std::to_string(misplaced)};
}

/// Frontier supremum at n = 1000 against the all-occupied limit, and
/// non-domination of every frontier point over the whole grid.
inline CheckResult check_pareto(const CheckContext& ctx) {
  const auto& sys = ctx.config.system;
  const double n = 1000.0;
  const double limit = sys.preambles * -std::expm1(n * std::log1p(-1.0 / sys.preambles));

  // The supremum is approached as k grows without bound; the CRS count is
  // not a resource parameter, so the sweep runs far past max_crs.
  model::SystemConfig wide = sys;
  wide.max_crs = 32;
  const auto result = analytics::pareto_frontier(n, wide, ctx.config.pareto_points);
  double sup = 0.0;
  for (const auto& f : result.frontier)
    sup = std::max(sup, ctx.throughput(n, f.point.access_probability, f.point.crs_slots, sys.preambles));

  const auto beats = [](const analytics::FrontierPoint& q, const analytics::FrontierPoint& f) {
    return q.throughput >= f.throughput && q.resources <= f.resources &&
           (q.throughput > f.throughput || q.resources < f.resources);
  };
  std::size_t dominated = 0;
  for (const auto& f : result.frontier) {
    const bool hit = std::any_of(result.curves.begin(), result.curves.end(), [&](const auto& curve) {
      return std::any_of(curve.begin(), curve.end(), [&](const auto& q) { return beats(q, f); });
    });
    if (hit) ++dominated;
  }
  const double gap = std::abs(sup - limit);
  return {"pareto", gap <= 1e-6 && dominated == 0,
          "supremum " + detail::fmt(sup, 12) + " vs limit " + detail::fmt(limit, 12) + " (gap " +
              detail::fmt(gap, 3) + "), " + std::to_string(result.frontier.size()) +
              " frontier points, " + std::to_string(dominated) + " dominated"};
}

/// Counts strict local maxima of a sequence, ignoring steps below tol.
inline std::size_t count_local_maxima(const std::vector<double>& s, double tol) {
  std::size_t maxima = 0;
  int last = 0;  // sign of the last significant step
  for (std::size_t i = 1; i < s.size(); ++i) {
    const double d = s[i] - s[i - 1];
    const double scale = std::max({std::abs(s[i]), std::abs(s[i - 1]), 1e-300});
    if (std::abs(d) <= tol * scale) continue;
    const int sign = d > 0 ? 1 : -1;
    if (last > 0 && sign < 0) ++maxima;
    last = sign;
  }
  if (last > 0) ++maxima;  // still rising at the right end
  return maxima;
}

/// Throughput over the p grid has exactly one local maximum.
inline CheckResult check_unimodal(const CheckContext& ctx) {
  const int M = ctx.config.system.preambles;
  constexpr std::size_t kGrid = 1000;
  std::size_t bad = 0;
  std::string where;
  for (double n : {3.0, 10.0, 100.0, 1000.0, 5000.0}) {
    for (int k = 0; k <= 6; ++k) {
      std::vector<double> s;
      for (std::size_t j = 1; j <= kGrid; ++j)
        s.push_back(ctx.throughput(n, analytics::grid_probability(j, kGrid), k, M));
      const auto m = count_local_maxima(s, 1e-12);
      if (m != 1) {
        ++bad;
        where += " n=" + detail::fmt(n) + ",k=" + std::to_string(k) + ":" + std::to_string(m);
      }
    }
  }
  return {"unimodal", bad == 0, "35 curves, " + std::to_string(bad) + " not unimodal" + where};
}

/// Root finder: x = 1 without CRSs; within 2% of the exact maximum otherwise.
inline CheckResult check_root_finder(const CheckContext& ctx) {
  const int M = ctx.config.system.preambles;
  double worst_x = 0.0;
  for (double n : {200.0, 1000.0, 5000.0})
    worst_x = std::max(worst_x, std::abs(optimizer::stationarity_root(n, 0, M) - 1.0));

  constexpr std::size_t kGrid = 20000;
  double worst_loss = 0.0;
  for (double n : {200.0, 1000.0, 5000.0}) {
    for (int k = 1; k <= 6; ++k) {
      double best = 0.0;
      for (std::size_t j = 1; j <= kGrid; ++j)
        best = std::max(best, ctx.throughput(n, analytics::grid_probability(j, kGrid), k, M));
      const double s = ctx.throughput(n, optimizer::root_find_p(n, k, M), k, M);
      worst_loss = std::max(worst_loss, (best - s) / best);
    }
  }
  return {"root_finder", worst_x <= 1e-9 && worst_loss <= 0.02,
          "|x-1| at l=1: " + detail::fmt(worst_x, 3) + ", worst throughput loss " +
              detail::fmt(100.0 * worst_loss, 3) + "%"};
}

/// The CRS count fits the budget and one more would not, on 1000 random cases.
inline CheckResult check_crs_rule(const CheckContext& ctx) {
  const auto& sys = ctx.config.system;
  std::mt19937_64 rng(ctx.config.seed);
  std::uniform_real_distribution<double> log_n(0.0, std::log(20000.0));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::size_t failures = 0;
  std::size_t clamped = 0;
  for (int i = 0; i < 1000; ++i) {
    const double n = std::exp(log_n(rng));
    const double p = optimizer::aloha_optimal_p(n, sys.preambles);
    const double occ = analytics::expected_occupied(n, p, sys.preambles);
    const double r0 = sys.prach_rb + sys.msg3_rb * occ;
    const double r_top = sys.prach_rb + sys.msg3_rb * (1.0 + (sys.max_crs + 2) * sys.crs_overhead) * occ;
    const double eps = sys.prach_rb + 1e-9 + unit(rng) * (r_top - sys.prach_rb);
    const optimizer::ResourceBudget budget{eps, 1.0};
    const int k = optimizer::crs_decision(n, p, budget, sys);
    const auto cost = [&](int kk) {
      return sys.prach_rb + sys.msg3_rb * (1.0 + kk * sys.crs_overhead) * occ;
    };
    const double tol = 1e-9 * eps;
    bool ok = true;
    if (eps < r0) {
      ok = k == 0;  // nothing fits; clamped up to zero
      ++clamped;
    } else if (cost(sys.max_crs) <= eps + tol) {
      ok = k == sys.max_crs;
      ++clamped;
    } else {
      ok = cost(k) <= eps + tol && cost(k + 1) > eps - tol;
    }
    if (!ok) ++failures;
  }
  return {"crs_rule", failures == 0,
          "1000 cases (" + std::to_string(clamped) + " clamped), " + std::to_string(failures) +
              " violations"};
}

/// Solver throughput against a dense (p, k) grid, and budget feasibility.
inline CheckResult check_solver_grid(const CheckContext& ctx) {
  const auto& sys = ctx.config.system;
  constexpr std::size_t kGrid = 1000;
  double worst = 0.0;
  double worst_excess = -1e300;
  for (double n : {10.0, 100.0, 1000.0, 5000.0}) {
    for (double c : {1.0, 1.4, 1.8}) {
      const auto budget = optimizer::ResourceBudget::proportional(c, n, sys);
      double grid_best = 0.0;
      for (int k = 0; k <= sys.max_crs; ++k) {
        for (std::size_t j = 1; j <= kGrid; ++j) {
          const model::OperatingPoint pt{analytics::grid_probability(j, kGrid), k};
          if (analytics::expected_resources(n, pt, sys) > budget.limit_rb) continue;
          grid_best = std::max(grid_best, ctx.throughput(n, pt.access_probability, k, sys.preambles));
        }
      }
      const auto pt = optimizer::solve_operating_point(n, budget, sys, ctx.config.dbca_options.fixed_k_path);
      const double s = ctx.throughput(n, pt.access_probability, pt.crs_slots, sys.preambles);
      worst = std::max(worst, (grid_best - s) / grid_best);
      worst_excess = std::max(worst_excess, analytics::expected_resources(n, pt, sys) - budget.limit_rb);
    }
  }
  return {"solver_grid", worst <= 1e-3 && worst_excess <= 1e-6,
          "worst shortfall vs grid " + detail::fmt(100.0 * std::max(worst, 0.0), 3) +
              "%, worst budget excess " + detail::fmt(worst_excess, 3) + " RB"};
}

/// Drift-predicted burst resolution time against the simulated mean.
inline CheckResult check_drift(const CheckContext& ctx) {
  const auto& c = ctx.config;
  const auto& sys = c.system;
  constexpr std::size_t kReps = 30;
  std::string detail;
  bool ok = true;
  for (std::size_t n : {std::size_t{1000}, std::size_t{5000}}) {
    const auto scenario = traffic::BurstScenario::delta(n);
    const auto dacb = analytics::drift_burst_resolution(
        scenario,
        [&](double b) { return model::OperatingPoint{optimizer::aloha_optimal_p(b, sys.preambles), 0}; },
        sys, c.drift_epsilon, c.drift_round_cap);
    const auto dbca = analytics::drift_burst_resolution(
        scenario,
        [&](double b) {
          if (b < 1.0) return model::OperatingPoint{1.0, 0};
          return optimizer::solve_operating_point(
              b, optimizer::ResourceBudget::proportional(1.0, b, sys), sys);
        },
        sys, c.drift_epsilon, c.drift_round_cap);

    std::vector<double> genie(kReps);
    std::vector<double> est(kReps);
    sim::DbcaOptions options = c.dbca_options;
    options.proportionality = 1.0;
    detail::parallel_for(kReps, c.parallel, [&](std::size_t r) {
      genie[r] = static_cast<double>(
          sim::run_dacb(scenario, sys, sim::DacbMode::genie, c.seed, r, c.round_cap,
                        options.update_base)
              .rounds_to_resolution);
      est[r] = static_cast<double>(
          sim::run_dbca(scenario, sys, options, c.seed, r, c.round_cap).rounds_to_resolution);
    });
    const double g = metrics::estimate(genie).mean;
    const double e = metrics::estimate(est).mean;
    const double eg = std::abs(static_cast<double>(dacb.rounds_to_resolution) - g) / g;
    const double ee = std::abs(static_cast<double>(dbca.rounds_to_resolution) - e) / e;
    ok = ok && eg <= 0.10 && ee <= 0.15;
    if (!detail.empty()) detail += "; ";
    detail += "N=" + std::to_string(n) + ": d-ACB genie " + std::to_string(dacb.rounds_to_resolution) +
              " vs " + detail::fmt(g, 4) + " (" + detail::fmt(100 * eg, 3) + "%), DBCA " +
              std::to_string(dbca.rounds_to_resolution) + " vs " + detail::fmt(e, 4) + " (" +
              detail::fmt(100 * ee, 3) + "%)";
  }
  return {"drift", ok, detail};
}

inline CheckResult run_check(const std::string& name, const CheckContext& ctx) {
  if (name == "bridge") return check_bridge(ctx);
  if (name == "aloha") return check_aloha(ctx);
  if (name == "pareto") return check_pareto(ctx);
  if (name == "unimodal") return check_unimodal(ctx);
  if (name == "root_finder") return check_root_finder(ctx);
  if (name == "crs_rule") return check_crs_rule(ctx);
  if (name == "solver_grid") return check_solver_grid(ctx);
  if (name == "drift") return check_drift(ctx);
  throw DomainError("unknown check '" + name + "'");
}

}  // namespace dbca::cli
