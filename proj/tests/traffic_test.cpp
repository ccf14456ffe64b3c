#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <vector>

#include <boost/math/special_functions/beta.hpp>

#include "dbca/traffic.hpp"

using namespace dbca;
using namespace dbca::traffic;

namespace {

double binomial_tail(int a, int b, double x) {
  // I_x(a, b) for integer a, b as a binomial tail.
  const int m = a + b - 1;
  double sum = 0.0;
  for (int j = a; j <= m; ++j)
    sum += std::tgamma(m + 1.0) / (std::tgamma(j + 1.0) * std::tgamma(m - j + 1.0)) *
           std::pow(x, j) * std::pow(1.0 - x, m - j);
  return sum;
}

}  // namespace

TEST(IncompleteBeta, IntegerParametersClosedForm) {
  for (int a : {1, 2, 3, 5})
    for (int b : {1, 4, 7})
      for (double x : {0.0, 0.01, 0.2, 0.5, 0.77, 0.99, 1.0})
        EXPECT_NEAR(regularized_incomplete_beta(a, b, x), binomial_tail(a, b, x), 1e-13);
}

TEST(IncompleteBeta, AgreesWithBoost) {
  for (double a : {0.5, 3.0, 12.5})
    for (double b : {0.7, 4.0, 30.0})
      for (double x : {0.001, 0.3, 0.6, 0.999})
        EXPECT_NEAR(regularized_incomplete_beta(a, b, x), boost::math::ibeta(a, b, x), 1e-13);
}

TEST(IncompleteBeta, DomainChecks) {
  EXPECT_THROW(regularized_incomplete_beta(0.0, 1.0, 0.5), DomainError);
  EXPECT_THROW(regularized_incomplete_beta(1.0, 1.0, 1.5), DomainError);
}

TEST(Scenario, ArrivalSpan) {
  EXPECT_EQ(arrival_rounds(BurstScenario::delta(100), 10.0), 1u);
  EXPECT_EQ(arrival_rounds(BurstScenario::uniform(100), 10.0), 100u);
  EXPECT_EQ(arrival_rounds(BurstScenario::beta_burst(100), 10.0), 100u);
  EXPECT_EQ(arrival_rounds(BurstScenario::beta_burst(0), 10.0), 0u);
}

TEST(Scenario, ExpectedArrivalsSumToBurstSize) {
  for (const auto& s : {BurstScenario::delta(1234), BurstScenario::uniform(1234),
                        BurstScenario::beta_burst(1234)}) {
    double total = 0.0;
    for (std::size_t i = 0; i < 120; ++i) total += expected_arrivals_in_round(s, i, 10.0);
    EXPECT_NEAR(total, 1234.0, 1e-9);
  }
  EXPECT_NEAR(expected_arrivals_in_round(BurstScenario::uniform(1000), 7, 10.0), 10.0, 1e-12);
}

TEST(Scenario, Validation) {
  EXPECT_THROW(BurstScenario::beta_burst(10, 1000, 0.0, 4.0).validate(), DomainError);
  EXPECT_THROW(BurstScenario::uniform(10, 0.0).validate(), DomainError);
  EXPECT_NO_THROW(BurstScenario::delta(10).validate());
  EXPECT_EQ(parse_shape("beta"), ArrivalShape::beta);
  EXPECT_THROW(parse_shape("poisson"), DomainError);
}

TEST(Sampling, DeltaIsAllAtZero) {
  std::mt19937_64 rng(1);
  const auto t = sample_activation_times(BurstScenario::delta(50), rng);
  EXPECT_TRUE(std::all_of(t.begin(), t.end(), [](double v) { return v == 0.0; }));
}

TEST(Sampling, BetaMeanAndShape) {
  std::mt19937_64 rng(5);
  const auto s = BurstScenario::beta_burst(200000);
  const auto t = sample_activation_times(s, rng);
  const double mean = std::accumulate(t.begin(), t.end(), 0.0) / static_cast<double>(t.size());
  // Mean of Beta(3, 4) scaled to the window: 3/7 s; sd of the mean ~ 0.4 ms.
  EXPECT_NEAR(mean, 1000.0 * 3.0 / 7.0, 2.0);
  EXPECT_TRUE(std::all_of(t.begin(), t.end(), [](double v) { return v >= 0.0 && v < 1000.0; }));

  // Chi-square over 20 equal-width bins against the activation CDF.
  std::vector<double> observed(20, 0.0);
  for (double v : t) observed[static_cast<std::size_t>(v / 50.0)] += 1.0;
  double chi2 = 0.0;
  for (std::size_t i = 0; i < 20; ++i) {
    const double e = 200000.0 * (activation_cdf(s, 50.0 * (i + 1)) - activation_cdf(s, 50.0 * i));
    chi2 += (observed[i] - e) * (observed[i] - e) / e;
  }
  EXPECT_LT(chi2, 43.8);  // 99.9% quantile, 19 degrees of freedom
}

TEST(Sampling, UniformChiSquare) {
  std::mt19937_64 rng(9);
  const auto t = sample_activation_times(BurstScenario::uniform(100000), rng);
  std::vector<double> observed(10, 0.0);
  for (double v : t) observed[activation_round(v, 100.0)] += 1.0;
  double chi2 = 0.0;
  for (double o : observed) chi2 += (o - 10000.0) * (o - 10000.0) / 10000.0;
  EXPECT_LT(chi2, 27.9);  // 99.9% quantile, 9 degrees of freedom
}

TEST(Sampling, ActivationRound) {
  EXPECT_EQ(activation_round(0.0, 10.0), 0u);
  EXPECT_EQ(activation_round(9.999, 10.0), 0u);
  EXPECT_EQ(activation_round(10.0, 10.0), 1u);
  EXPECT_EQ(activation_round(999.9, 10.0), 99u);
}
