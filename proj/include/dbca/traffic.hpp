#pragma once

// Burst arrival processes: activation-time sampling and the expected number
// of activations per contention round.
//
// Rounds are 0-based: round i covers [i*T, (i+1)*T) and a UE activated at
// time t contends from round floor(t / T) onwards.

#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "dbca/model.hpp"

namespace dbca::traffic {

enum class ArrivalShape { beta, uniform, delta };

inline std::string_view to_string(ArrivalShape s) {
  switch (s) {
    case ArrivalShape::beta: return "beta";
    case ArrivalShape::uniform: return "uniform";
    case ArrivalShape::delta: return "delta";
  }
  return "?";
}

inline ArrivalShape parse_shape(std::string_view s) {
  if (s == "beta") return ArrivalShape::beta;
  if (s == "uniform") return ArrivalShape::uniform;
  if (s == "delta") return ArrivalShape::delta;
  throw DomainError("unknown arrival shape '" + std::string(s) + "'");
}

struct BurstScenario {
  std::size_t ue_count = 0;
  ArrivalShape shape = ArrivalShape::delta;
  double window_ms = 1000.0;  // T_a; ignored for delta
  double alpha = 3.0;
  double beta = 4.0;

  static BurstScenario delta(std::size_t n) { return {n, ArrivalShape::delta, 0.0, 3.0, 4.0}; }
  static BurstScenario uniform(std::size_t n, double window_ms = 1000.0) {
    return {n, ArrivalShape::uniform, window_ms, 3.0, 4.0};
  }
  static BurstScenario beta_burst(std::size_t n, double window_ms = 1000.0, double a = 3.0,
                                  double b = 4.0) {
    return {n, ArrivalShape::beta, window_ms, a, b};
  }

  void validate() const {
    if (shape == ArrivalShape::delta) return;
    if (!(window_ms > 0.0)) throw DomainError("BurstScenario: window_ms must be > 0");
    if (shape == ArrivalShape::beta && !(alpha > 0.0 && beta > 0.0))
      throw DomainError("BurstScenario: beta parameters must be > 0");
  }

  bool operator==(const BurstScenario&) const = default;
};

namespace detail {

// Modified Lentz evaluation of the incomplete beta continued fraction.
inline double beta_continued_fraction(double a, double b, double x) {
  constexpr int kMaxIter = 1000;
  constexpr double kEps = 1e-16;
  constexpr double kTiny = 1e-300;
  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::abs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const double m2 = 2.0 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::abs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::abs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::abs(del - 1.0) < kEps) return h;
  }
  throw DomainError("regularized_incomplete_beta: continued fraction did not converge");
}

}  // namespace detail

/// I_x(a, b), the regularized incomplete beta function.
inline double regularized_incomplete_beta(double a, double b, double x) {
  if (!(a > 0.0 && b > 0.0)) throw DomainError("regularized_incomplete_beta: a, b must be > 0");
  if (!(x >= 0.0 && x <= 1.0)) throw DomainError("regularized_incomplete_beta: x outside [0, 1]");
  if (x == 0.0) return 0.0;
  if (x == 1.0) return 1.0;
  const double log_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                           a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(log_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * detail::beta_continued_fraction(a, b, x) / a;
  return 1.0 - front * detail::beta_continued_fraction(b, a, 1.0 - x) / b;
}

/// P[activation time < t].
inline double activation_cdf(const BurstScenario& s, double t_ms) {
  switch (s.shape) {
    case ArrivalShape::delta: return t_ms > 0.0 ? 1.0 : 0.0;
    case ArrivalShape::uniform:
      if (t_ms <= 0.0) return 0.0;
      if (t_ms >= s.window_ms) return 1.0;
      return t_ms / s.window_ms;
    case ArrivalShape::beta:
      if (t_ms <= 0.0) return 0.0;
      if (t_ms >= s.window_ms) return 1.0;
      return regularized_incomplete_beta(s.alpha, s.beta, t_ms / s.window_ms);
  }
  return 0.0;
}

/// Number of rounds that can receive activations.
inline std::size_t arrival_rounds(const BurstScenario& s, double round_ms) {
  if (s.ue_count == 0) return 0;
  if (s.shape == ArrivalShape::delta) return 1;
  return static_cast<std::size_t>(std::ceil(s.window_ms / round_ms - 1e-12));
}

/// N times the activation mass falling in [i*T, (i+1)*T).
inline double expected_arrivals_in_round(const BurstScenario& s, std::size_t round,
                                         double round_ms) {
  const auto n = static_cast<double>(s.ue_count);
  if (s.shape == ArrivalShape::delta) return round == 0 ? n : 0.0;
  const double lo = static_cast<double>(round) * round_ms;
  const double hi = lo + round_ms;
  return n * (activation_cdf(s, hi) - activation_cdf(s, lo));
}

/// N i.i.d. activation times in milliseconds.
template <class Urng>
std::vector<double> sample_activation_times(const BurstScenario& s, Urng& rng) {
  s.validate();
  std::vector<double> times(s.ue_count, 0.0);
  switch (s.shape) {
    case ArrivalShape::delta: break;
    case ArrivalShape::uniform: {
      std::uniform_real_distribution<double> u(0.0, s.window_ms);
      for (auto& t : times) t = u(rng);
      break;
    }
    case ArrivalShape::beta: {
      std::gamma_distribution<double> ga(s.alpha, 1.0);
      std::gamma_distribution<double> gb(s.beta, 1.0);
      for (auto& t : times) {
        const double x = ga(rng);
        const double y = gb(rng);
        t = s.window_ms * (x / (x + y));
        if (t >= s.window_ms) t = std::nextafter(s.window_ms, 0.0);
      }
      break;
    }
  }
  return times;
}

inline std::size_t activation_round(double t_ms, double round_ms) {
  return static_cast<std::size_t>(std::floor(t_ms / round_ms));
}

}  // namespace dbca::traffic
