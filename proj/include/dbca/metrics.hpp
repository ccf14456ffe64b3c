#pragma once

// Replication-level metrics: mean service time, total consumed resources,
// and resource efficiency, each with a Student-t confidence interval.

#include <cmath>
#include <cstddef>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include <boost/math/distributions/students_t.hpp>

#include "dbca/model.hpp"
#include "dbca/sim.hpp"

namespace dbca::metrics {

/// Mean and 95% halfwidth of one metric across replications.
struct Estimate {
  double mean = 0.0;
  std::optional<double> ci_halfwidth;  // present with >= 2 replications

  double relative_halfwidth() const {
    if (!ci_halfwidth) return 0.0;
    return mean != 0.0 ? *ci_halfwidth / std::abs(mean) : (*ci_halfwidth == 0.0 ? 0.0 : std::numeric_limits<double>::infinity());
  }
};

struct MetricSummary {
  Estimate service_time_ms;   // mean over replications of the per-run mean
  Estimate total_resources;   // resource blocks per burst
  Estimate efficiency;        // successes per resource block, round-averaged
  Estimate rounds;            // burst resolution time in rounds
  std::size_t replications = 0;
};

struct EfficiencyOptions {
  bool skip_idle_rounds = false;  // drop rounds with no occupied preamble from the average
};

inline Estimate estimate(std::span<const double> values, double confidence = 0.95) {
  if (values.empty()) throw DomainError("estimate: no values");
  Estimate e;
  const double n = static_cast<double>(values.size());
  e.mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  if (values.size() >= 2) {
    double ss = 0.0;
    for (double v : values) ss += (v - e.mean) * (v - e.mean);
    const double sd = std::sqrt(ss / (n - 1.0));
    const boost::math::students_t dist(n - 1.0);
    const double t = boost::math::quantile(boost::math::complement(dist, (1.0 - confidence) / 2.0));
    e.ci_halfwidth = t * sd / std::sqrt(n);
  }
  return e;
}

inline double mean_service_time(const sim::SimulationResult& run) {
  if (run.service_ms.empty()) return 0.0;
  return std::accumulate(run.service_ms.begin(), run.service_ms.end(), 0.0) /
         static_cast<double>(run.service_ms.size());
}

/// (1/T_BR) * sum_i s_i / (R1 + r3 (1 + k_i delta) M_O_i).
inline double run_efficiency(const sim::SimulationResult& run, const model::SystemConfig& config,
                             const EfficiencyOptions& options = {}) {
  double sum = 0.0;
  std::size_t rounds = 0;
  for (const auto& row : run.trace) {
    if (options.skip_idle_rounds && row.occupied == 0) continue;
    sum += row.successes / model::round_resources(row.occupied, row.k, config);
    ++rounds;
  }
  return rounds == 0 ? 0.0 : sum / static_cast<double>(rounds);
}

inline MetricSummary summarize(std::span<const sim::SimulationResult> runs,
                               const model::SystemConfig& config,
                               const EfficiencyOptions& options = {}) {
  if (runs.empty()) throw DomainError("summarize: no replications");
  std::vector<double> service;
  std::vector<double> resources;
  std::vector<double> efficiency;
  std::vector<double> rounds;
  for (const auto& run : runs) {
    service.push_back(mean_service_time(run));
    resources.push_back(run.total_resources);
    efficiency.push_back(run_efficiency(run, config, options));
    rounds.push_back(static_cast<double>(run.rounds_to_resolution));
  }
  MetricSummary s;
  s.service_time_ms = estimate(service);
  s.total_resources = estimate(resources);
  s.efficiency = estimate(efficiency);
  s.rounds = estimate(rounds);
  s.replications = runs.size();
  return s;
}

/// True when every reported halfwidth is within `target` of its mean.
inline bool meets_precision(const MetricSummary& s, double target) {
  return s.service_time_ms.relative_halfwidth() <= target &&
         s.total_resources.relative_halfwidth() <= target &&
         s.efficiency.relative_halfwidth() <= target;
}

}  // namespace dbca::metrics
