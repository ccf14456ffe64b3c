#pragma once

// Pseudo-Bayesian backlog estimation with a burst "boosting" factor.
//
// Each round the gNB first corrects its a-priori estimate from the observed
// idle preamble count (posterior), then builds the next a-priori estimate
// once the number of successes is known.

#include <algorithm>
#include <cmath>
#include <string>
#include <string_view>

#include "dbca/model.hpp"

namespace dbca::estimator {

/// Which estimate the next prior is built on. `prior` follows the DBCA
/// pseudocode (n-_{i+1} = n-_i + q dn - s); `posterior` uses n_i instead.
enum class UpdateBase { prior, posterior };

inline std::string_view to_string(UpdateBase b) {
  return b == UpdateBase::prior ? "prior" : "posterior";
}

inline UpdateBase parse_update_base(std::string_view s) {
  if (s == "prior") return UpdateBase::prior;
  if (s == "posterior") return UpdateBase::posterior;
  throw DomainError("unknown estimator update base '" + std::string(s) + "'");
}

struct EstimatorState {
  double n_prior = 1.0;      // a-priori backlog for the current round
  double n_posterior = 1.0;  // after the idle-count correction
  double delta_n = 0.0;      // last correction
  unsigned boost_q = 0;

  bool operator==(const EstimatorState&) const = default;
};

/// Correction implied by observing `idle` idle preambles when the backlog is
/// Poisson with mean n_prior and each UE transmits with probability p.
inline double idle_correction(double n_prior, double p, int idle, int M) {
  const auto m = static_cast<double>(M);
  const double load = p * n_prior;
  if (load <= 0.0) {
    // Limit of the expression as the prior vanishes: the occupied count.
    return m - static_cast<double>(idle);
  }
  const double x = load / m;
  return load * (std::exp(-x) - static_cast<double>(idle) / m) / (-std::expm1(-x));
}

/// Stage II: fold the idle-preamble observation into the estimate.
inline EstimatorState observe_idle(EstimatorState state, double p, int idle, int M) {
  if (M < 1) throw DomainError("observe_idle: M must be >= 1");
  if (idle < 0 || idle > M) throw DomainError("observe_idle: idle count out of range");
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("observe_idle: p must lie in (0, 1]");
  state.delta_n = idle_correction(state.n_prior, p, idle, M);
  state.n_posterior = std::max(0.0, state.n_prior + state.delta_n);
  return state;
}

/// Stage V: update the boosting factor and form the next a-priori estimate.
inline EstimatorState observe_successes(EstimatorState state, int successes,
                                        UpdateBase base = UpdateBase::prior) {
  if (successes < 0) throw DomainError("observe_successes: successes must be >= 0");
  state.boost_q = state.delta_n > 0.0 ? state.boost_q + 1 : 0;
  const double from = base == UpdateBase::prior ? state.n_prior : state.n_posterior;
  const double arrivals = static_cast<double>(state.boost_q) * std::max(0.0, state.delta_n);
  state.n_prior = std::max(0.0, from + arrivals - static_cast<double>(successes));
  return state;
}

}  // namespace dbca::estimator
