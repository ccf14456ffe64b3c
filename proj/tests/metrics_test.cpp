#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "dbca/metrics.hpp"

using namespace dbca;
using namespace dbca::metrics;

namespace {

const model::SystemConfig kCfg{};

sim::TraceRow row(int occupied, int k, int successes) {
  sim::TraceRow r;
  r.occupied = occupied;
  r.idle = kCfg.preambles - occupied;
  r.k = k;
  r.successes = successes;
  r.resources_rb = model::round_resources(occupied, k, kCfg);
  return r;
}

}  // namespace

TEST(Estimate, SingleValueHasNoInterval) {
  const std::vector<double> v{4.0};
  const auto e = estimate(v);
  EXPECT_DOUBLE_EQ(e.mean, 4.0);
  EXPECT_FALSE(e.ci_halfwidth.has_value());
  EXPECT_EQ(e.relative_halfwidth(), 0.0);
}

TEST(Estimate, StudentTHalfwidth) {
  // Sample sd = 1, t(0.975, 3) = 3.182446305284263.
  const std::vector<double> v{-1.0, 0.0, 1.0, 0.0};
  const std::vector<double> w{9.0, 10.0, 11.0, 10.0};
  const auto e = estimate(w);
  const double sd = std::sqrt(2.0 / 3.0);
  EXPECT_NEAR(*e.ci_halfwidth, 3.182446305284263 * sd / 2.0, 1e-12);
  EXPECT_NEAR(e.relative_halfwidth(), *e.ci_halfwidth / 10.0, 1e-15);
  EXPECT_TRUE(std::isinf(estimate(v).relative_halfwidth()));
  EXPECT_THROW(estimate(std::vector<double>{}), DomainError);
}

TEST(Efficiency, IdleRoundCountsAsZero) {
  sim::SimulationResult run;
  run.trace = {row(10, 2, 4), row(0, 0, 0)};
  const double busy = 4.0 / model::round_resources(10, 2, kCfg);
  EXPECT_NEAR(run_efficiency(run, kCfg), busy / 2.0, 1e-15);
  EXPECT_NEAR(run_efficiency(run, kCfg, {.skip_idle_rounds = true}), busy, 1e-15);
}

TEST(ServiceTime, SingleUeDeltaBurst) {
  const auto r = sim::run_dbca(traffic::BurstScenario::delta(1), kCfg, {}, 1, 0);
  EXPECT_DOUBLE_EQ(mean_service_time(r), 10.0);
  const std::vector<sim::SimulationResult> runs{r};
  const auto s = summarize(runs, kCfg);
  EXPECT_DOUBLE_EQ(s.service_time_ms.mean, 10.0);
  EXPECT_DOUBLE_EQ(s.total_resources.mean, model::round_resources(1, r.trace[0].k, kCfg));
  EXPECT_FALSE(s.efficiency.ci_halfwidth.has_value());
  EXPECT_EQ(s.replications, 1u);
}

TEST(Summary, ScalesWithResourceUnits) {
  // Doubling every resource quantity halves efficiency and doubles totals.
  std::vector<sim::SimulationResult> runs;
  for (int rep = 0; rep < 5; ++rep)
    runs.push_back(sim::run_dacb(traffic::BurstScenario::delta(300), kCfg, sim::DacbMode::genie, 2,
                                 static_cast<std::uint64_t>(rep)));
  auto doubled_cfg = kCfg;
  doubled_cfg.prach_rb *= 2.0;
  doubled_cfg.msg3_rb *= 2.0;
  auto doubled = runs;
  for (auto& r : doubled) {
    r.total_resources *= 2.0;
    for (auto& t : r.trace) t.resources_rb *= 2.0;
  }
  const auto a = summarize(runs, kCfg);
  const auto b = summarize(doubled, doubled_cfg);
  EXPECT_NEAR(b.total_resources.mean, 2.0 * a.total_resources.mean, 1e-9);
  EXPECT_NEAR(b.efficiency.mean, a.efficiency.mean / 2.0, 1e-12);
  EXPECT_DOUBLE_EQ(a.service_time_ms.mean, b.service_time_ms.mean);
  EXPECT_NEAR(a.efficiency.relative_halfwidth(), b.efficiency.relative_halfwidth(), 1e-12);
}

TEST(Summary, PrecisionCheck) {
  MetricSummary s;
  s.service_time_ms = {100.0, 1.0};
  s.total_resources = {1000.0, 5.0};
  s.efficiency = {0.3, 0.003};
  EXPECT_TRUE(meets_precision(s, 0.011));
  s.efficiency.ci_halfwidth = 0.004;
  EXPECT_FALSE(meets_precision(s, 0.011));
}
