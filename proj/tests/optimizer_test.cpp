#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "dbca/analytics.hpp"
#include "dbca/optimizer.hpp"

using namespace dbca;
using namespace dbca::optimizer;

namespace {

const model::SystemConfig kCfg;

double grid_argmax(double n, int k, int M, std::size_t points = 100000) {
  double best = -1.0, best_p = 0.0;
  for (std::size_t j = 1; j <= points; ++j) {
    const double p = static_cast<double>(j) / static_cast<double>(points);
    const double s = analytics::expected_throughput(n, p, k, M);
    if (s > best) {
      best = s;
      best_p = p;
    }
  }
  return best_p;
}

}  // namespace

TEST(AlohaOptimum, Examples) {
  EXPECT_DOUBLE_EQ(aloha_optimal_p(1000, 54), 0.054);
  EXPECT_DOUBLE_EQ(aloha_optimal_p(10, 54), 1.0);
  EXPECT_DOUBLE_EQ(aloha_optimal_p(54, 54), 1.0);
  EXPECT_DOUBLE_EQ(aloha_optimal_p(0, 54), 1.0);
}

TEST(Budget, ProportionalToReference) {
  const auto b = ResourceBudget::proportional(1.4, 1000, kCfg);
  const model::OperatingPoint ref{0.054, 0};
  EXPECT_NEAR(b.limit_rb, 1.4 * analytics::expected_resources(1000, ref, kCfg), 1e-12);
  EXPECT_THROW(ResourceBudget::proportional(0.9, 1000, kCfg), DomainError);
}

TEST(CrsRule, SaturatedExample) {
  // 14.2857 * (194/108 - 1) = 11.375
  EXPECT_EQ(crs_decision(1e7, 1.0, {200.0, 1.0}, kCfg), 11);
  EXPECT_EQ(crs_decision(1e7, 1.0, {200.0, 1.0}, kCfg, CrsRounding::nearest_even), 11);
  EXPECT_LE(model::round_resources(54, 11, kCfg), 200.0);
  EXPECT_GT(model::round_resources(54, 12, kCfg), 200.0);
}

TEST(CrsRule, BudgetCoveringOnlyMsg3GivesZero) {
  const double occ = analytics::expected_occupied(500, 0.1, 54);
  EXPECT_EQ(crs_decision(500, 0.1, {6.0 + 2.0 * occ, 1.0}, kCfg), 0);
  EXPECT_EQ(crs_decision(500, 0.1, {6.0 + 2.0 * occ, 1.0}, kCfg, CrsRounding::nearest_even), 0);
}

TEST(CrsRule, HugeBudgetClampsToMax) {
  EXPECT_EQ(crs_decision(500, 0.1, {1e9, 1.0}, kCfg), 14);
  EXPECT_EQ(crs_decision(0, 0.1, {1e9, 1.0}, kCfg), 0);
  EXPECT_EQ(crs_decision(500, 0.1, {6.5, 1.0}, kCfg), 0);
}

TEST(CrsRule, HalfwayRounding) {
  EXPECT_EQ(round_half_even(2.5), 2.0);
  EXPECT_EQ(round_half_even(3.5), 4.0);
  EXPECT_EQ(round_half_even(-0.5), -0.0);
  EXPECT_EQ(round_half_even(2.4999999), 2.0);
  EXPECT_EQ(round_half_even(2.5000001), 3.0);
  EXPECT_EQ(round_crs(2.5, kCfg, CrsRounding::nearest_even), 2);
  EXPECT_EQ(round_crs(3.5, kCfg, CrsRounding::nearest_even), 4);
  EXPECT_EQ(round_crs(3.5, kCfg, CrsRounding::floor), 3);
  EXPECT_EQ(round_crs(3.99, kCfg, CrsRounding::floor), 3);
  EXPECT_EQ(round_crs(-0.5, kCfg, CrsRounding::nearest_even), 0);
  EXPECT_EQ(round_crs(14.5, kCfg, CrsRounding::nearest_even), 14);
}

TEST(CrsRule, BudgetAtExactHalfSlot) {
  // Budget making the real-valued count exactly 2.5 with all 54 preambles
  // occupied; an overhead of 1/8 keeps every step exact in binary.
  auto cfg = kCfg;
  cfg.crs_overhead = 0.125;
  const double eps = 6.0 + 2.0 * 54.0 * (1.0 + 2.5 * 0.125);
  EXPECT_EQ(crs_decision(1e7, 1.0, {eps, 1.0}, cfg, CrsRounding::nearest_even), 2);
  EXPECT_EQ(crs_decision(1e7, 1.0, {eps, 1.0}, cfg, CrsRounding::floor), 2);
  EXPECT_EQ(crs_decision(1e7, 1.0, {eps + 27.0, 1.0}, cfg, CrsRounding::nearest_even), 4);
}

TEST(CrsRule, NonDecreasingInBudget) {
  for (double n : {20.0, 300.0, 5000.0}) {
    const double p = aloha_optimal_p(n, 54);
    int prev = 0;
    for (double eps = 6.1; eps < 400.0; eps += 0.37) {
      const int k = crs_decision(n, p, {eps, 1.0}, kCfg);
      EXPECT_GE(k, prev);
      prev = k;
    }
  }
}

TEST(CrsRule, HardModeUsesObservedIdle) {
  const ResourceBudget b{200.0, 1.0};
  EXPECT_EQ(crs_decision(10, 0.5, b, kCfg, CrsRounding::floor, ConstraintMode::hard, 0), 11);
  EXPECT_EQ(crs_decision(10, 0.5, b, kCfg, CrsRounding::floor, ConstraintMode::hard, 54), 0);
  EXPECT_THROW(crs_decision(10, 0.5, b, kCfg, CrsRounding::floor, ConstraintMode::hard), DomainError);
}

TEST(AccessCap, ConsumptionEqualsBudget) {
  for (int k : {0, 3, 9}) {
    const ResourceBudget b{60.0, 1.0};
    const double p = max_access_probability(1000, k, b, kCfg);
    ASSERT_LT(p, 1.0);
    EXPECT_NEAR(analytics::expected_resources(1000, {p, k}, kCfg), 60.0, 1e-9);
  }
  EXPECT_TRUE(std::isinf(max_access_probability(1000, 0, {1000.0, 1.0}, kCfg)));
  EXPECT_THROW(max_access_probability(1000, 0, {6.0, 1.0}, kCfg), InfeasibleError);
}

TEST(RootFinder, SingleLevelRootIsOne) {
  for (double n : {200.0, 1000.0, 5000.0}) {
    EXPECT_NEAR(stationarity_root(n, 0, 54), 1.0, 1e-9);
    EXPECT_NEAR(root_find_p(n, 0, 54), 54.0 / n, 1e-9);
  }
  EXPECT_NEAR(stationarity_residual(1.0, 1), 0.0, 1e-15);
}

TEST(RootFinder, FallbackWhenBacklogIsSmall) {
  EXPECT_DOUBLE_EQ(root_find_p(30, 0, 54), 1.0);
  EXPECT_DOUBLE_EQ(root_find_p(100, 3, 54), 1.0);
  EXPECT_THROW(root_find_p(1.5, 2, 54), DomainError);
}

TEST(RootFinder, CloseToExactMaximizer) {
  const double pe = grid_argmax(1000, 3, 54);
  const double pr = root_find_p(1000, 3, 54);
  const double se = analytics::expected_throughput(1000, pe, 3, 54);
  const double sr = analytics::expected_throughput(1000, pr, 3, 54);
  EXPECT_GE(sr, 0.98 * se);
}

TEST(FixedK, UnconstrainedAlohaCase) {
  EXPECT_NEAR(solve_fixed_k(1000, 0, {1e9, 1.0}, kCfg), 0.054, 1e-9);
}

TEST(FixedK, MatchesGridMaximizer) {
  for (double n : {2.0, 3.0, 10.0, 100.0, 1000.0})
    for (int k : {1, 2, 5}) {
      const double p = solve_fixed_k(n, k, {1e9, 1.0}, kCfg);
      const double g = grid_argmax(n, k, 54);
      EXPECT_NEAR(p, g, 2e-5) << n << " " << k;
    }
}

TEST(FixedK, BindingBudgetReturnsCap) {
  const ResourceBudget b{40.0, 1.0};
  const double cap = max_access_probability(1000, 4, b, kCfg);
  EXPECT_DOUBLE_EQ(solve_fixed_k(1000, 4, b, kCfg), cap);
  EXPECT_DOUBLE_EQ(solve_fixed_k(1000, 4, b, kCfg, FixedKPath::root_find), cap);
}

TEST(FixedK, FewContendersTransmitAtCap) {
  EXPECT_DOUBLE_EQ(solve_fixed_k(1.5, 3, {1e9, 1.0}, kCfg), 1.0);
}

TEST(Solver, SmallBacklogIsTrivial) {
  const auto pt = solve_operating_point(1.0, {10.0, 1.0}, kCfg);
  EXPECT_EQ(pt, (model::OperatingPoint{1.0, 0}));
  EXPECT_EQ(solve_operating_point(0.3, {10.0, 1.0}, kCfg), (model::OperatingPoint{1.0, 0}));
}

TEST(Solver, InfeasibleBudget) {
  EXPECT_THROW(solve_operating_point(100, {6.0, 1.0}, kCfg), InfeasibleError);
}

TEST(Solver, BeatsAlohaAtEqualBudget) {
  const auto b = ResourceBudget::proportional(1.0, 1000, kCfg);
  const auto pt = solve_operating_point(1000, b, kCfg);
  const double s = analytics::expected_throughput(1000, pt.access_probability, pt.crs_slots, 54);
  EXPECT_GT(s, analytics::expected_throughput(1000, 0.054, 0, 54) + 1.0);
  EXPECT_LE(analytics::expected_resources(1000, pt, kCfg), b.limit_rb + 1e-6);
}

TEST(Solver, MatchesDenseGridAndStaysFeasible) {
  for (double n : {10.0, 100.0, 1000.0, 5000.0})
    for (double c : {1.0, 1.4, 1.8}) {
      const auto b = ResourceBudget::proportional(c, n, kCfg);
      double best = 0.0;
      for (int k = 0; k <= kCfg.max_crs; ++k)
        for (int j = 1; j <= 500; ++j) {
          const model::OperatingPoint q{j / 500.0, k};
          if (analytics::expected_resources(n, q, kCfg) <= b.limit_rb)
            best = std::max(best, analytics::expected_throughput(n, q.access_probability, k, 54));
        }
      for (auto path : {FixedKPath::exact, FixedKPath::root_find}) {
        const auto pt = solve_operating_point(n, b, kCfg, path);
        const double s = analytics::expected_throughput(n, pt.access_probability, pt.crs_slots, 54);
        EXPECT_GE(s, best * (1.0 - 1e-3)) << n << " " << c;
        EXPECT_LE(analytics::expected_resources(n, pt, kCfg), b.limit_rb + 1e-6);
      }
    }
}

TEST(Solver, WithoutCrsFallsBackToAloha) {
  model::SystemConfig cfg;
  cfg.max_crs = 0;
  const auto b = ResourceBudget::proportional(1.0, 1000, cfg);
  const auto pt = solve_operating_point(1000, b, cfg);
  EXPECT_EQ(pt.crs_slots, 0);
  EXPECT_NEAR(pt.access_probability, 0.054, 1e-9);
}

TEST(Solver, SingleContenderKeepsTheCheapestPoint) {
  // Throughput is p whatever k is, so every k ties and k = 0 costs least.
  EXPECT_EQ(solve_operating_point(1.0, {1e6, 1.0}, kCfg), (model::OperatingPoint{1.0, 0}));
}

TEST(Solver, TwoContendersUseEveryCrs) {
  const auto pt = solve_operating_point(2.0, {1e6, 1.0}, kCfg);
  EXPECT_DOUBLE_EQ(pt.access_probability, 1.0);
  EXPECT_EQ(pt.crs_slots, kCfg.max_crs);
}
