#pragma once

// Round-synchronous simulation of burst resolution over the collision
// channel: DBCA, dynamic ACB (estimated or genie backlog) and q-ary tree
// resolution.
//
// A replication owns its controller and RNG streams; nothing is shared, so
// replications may run concurrently.

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <numeric>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "dbca/estimator.hpp"
#include "dbca/model.hpp"
#include "dbca/optimizer.hpp"
#include "dbca/traffic.hpp"

namespace dbca::sim {

using model::OperatingPoint;
using model::RoundOutcome;
using model::SystemConfig;

/// Independent engines per concern, all derived from (master seed, replication).
/// The activation stream ignores the protocol, so paired runs share arrivals.
struct RngStreams {
  enum Stream : std::uint32_t { kActivation = 1, kAcb = 2, kPreamble = 3, kPriority = 4 };

  std::mt19937_64 activation;
  std::mt19937_64 acb;
  std::mt19937_64 preamble;
  std::mt19937_64 priority;

  static std::mt19937_64 engine(std::uint64_t master_seed, std::uint64_t replication,
                                std::uint32_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(master_seed),
                      static_cast<std::uint32_t>(master_seed >> 32),
                      static_cast<std::uint32_t>(replication),
                      static_cast<std::uint32_t>(replication >> 32), stream};
    return std::mt19937_64(seq);
  }

  RngStreams(std::uint64_t master_seed, std::uint64_t replication)
      : activation(engine(master_seed, replication, kActivation)),
        acb(engine(master_seed, replication, kAcb)),
        preamble(engine(master_seed, replication, kPreamble)),
        priority(engine(master_seed, replication, kPriority)) {}
};

/// What the gNB sees after MSG1, before allocating CRSs.
struct PreambleReport {
  int idle = 0;
  int occupied = 0;
  double access_probability = 1.0;
};

/// One line of the per-round trace.
struct TraceRow {
  std::size_t round = 0;
  std::size_t n_true = 0;
  double n_hat_prior = std::numeric_limits<double>::quiet_NaN();
  double n_hat_post = std::numeric_limits<double>::quiet_NaN();
  double q_boost = std::numeric_limits<double>::quiet_NaN();
  double p = 1.0;
  int k = 0;
  int idle = 0;
  int occupied = 0;
  int successes = 0;
  double resources_rb = 0.0;
  // DBCA only: budget and expected consumption of the point planned for the next round.
  double planned_budget_rb = std::numeric_limits<double>::quiet_NaN();
  double planned_resources_rb = std::numeric_limits<double>::quiet_NaN();
};

/// gNB-side protocol logic driving run_round.
template <class C>
concept RoundController = requires(C c, const C cc, const PreambleReport& report,
                                   const RoundOutcome& outcome, TraceRow& row, std::size_t n) {
  c.begin_round(n);
  { cc.access_probability() } -> std::convertible_to<double>;
  { c.crs_slots(report) } -> std::convertible_to<int>;
  c.conclude(outcome);
  cc.annotate(row);
};

/// Publishes the same operating point every round.
class FixedController {
 public:
  explicit FixedController(OperatingPoint point) : point_(point) {}
  void begin_round(std::size_t) {}
  double access_probability() const { return point_.access_probability; }
  int crs_slots(const PreambleReport&) const { return point_.crs_slots; }
  void conclude(const RoundOutcome&) {}
  void annotate(TraceRow&) const {}

 private:
  OperatingPoint point_;
};

enum class DacbMode { estimated, genie };

inline std::string_view to_string(DacbMode m) {
  return m == DacbMode::estimated ? "estimated" : "genie";
}

inline DacbMode parse_dacb_mode(std::string_view s) {
  if (s == "estimated") return DacbMode::estimated;
  if (s == "genie") return DacbMode::genie;
  throw DomainError("unknown d-ACB mode '" + std::string(s) + "'");
}

/// Dynamic ACB: p = min(1, M / n), no CRSs.
class DacbController {
 public:
  DacbController(const SystemConfig& config, DacbMode mode,
                 estimator::UpdateBase base = estimator::UpdateBase::posterior)
      : config_(config), mode_(mode), base_(base) {
    p_ = next_p(0);
  }

  void begin_round(std::size_t true_backlog) {
    true_backlog_ = true_backlog;
    if (mode_ == DacbMode::genie) p_ = next_p(true_backlog);
  }
  double access_probability() const { return p_; }

  int crs_slots(const PreambleReport& report) {
    prior_ = state_.n_prior;
    state_ = estimator::observe_idle(state_, p_, report.idle, config_.preambles);
    return 0;
  }

  void conclude(const RoundOutcome& outcome) {
    state_ = estimator::observe_successes(state_, outcome.successes, base_);
    if (mode_ == DacbMode::estimated) p_ = next_p(0);
  }

  void annotate(TraceRow& row) const {
    row.n_hat_prior = prior_;
    row.n_hat_post = state_.n_posterior;
    row.q_boost = state_.boost_q;
  }

 private:
  double next_p(std::size_t true_backlog) const {
    const double n =
        mode_ == DacbMode::genie ? static_cast<double>(true_backlog) : state_.n_prior;
    return optimizer::aloha_optimal_p(n, config_.preambles);
  }

  SystemConfig config_;
  DacbMode mode_;
  estimator::UpdateBase base_;
  estimator::EstimatorState state_{};
  std::size_t true_backlog_ = 0;
  double prior_ = 1.0;
  double p_ = 1.0;
};

/// Backlog basis of the per-round resource budget.
enum class BudgetReference { estimated, genie };

inline std::string_view to_string(BudgetReference b) {
  return b == BudgetReference::estimated ? "estimated" : "genie";
}

inline BudgetReference parse_budget_reference(std::string_view s) {
  if (s == "estimated") return BudgetReference::estimated;
  if (s == "genie") return BudgetReference::genie;
  throw DomainError("unknown budget reference '" + std::string(s) + "'");
}

struct DbcaOptions {
  double proportionality = 1.0;  // C
  estimator::UpdateBase update_base = estimator::UpdateBase::posterior;
  optimizer::CrsRounding crs_rounding = optimizer::CrsRounding::floor;
  optimizer::ConstraintMode constraint = optimizer::ConstraintMode::soft;
  optimizer::FixedKPath fixed_k_path = optimizer::FixedKPath::exact;
  BudgetReference budget_reference = BudgetReference::estimated;

  bool operator==(const DbcaOptions&) const = default;
};

/// DBCA, gNB view. Per round: posterior from the idle count, CRS count from
/// the closed-form rule, next prior from the successes, next access
/// probability from the constrained solver.
class DbcaController {
 public:
  DbcaController(const SystemConfig& config, const DbcaOptions& options)
      : config_(config), options_(options) {
    if (!(options.proportionality >= 1.0))
      throw DomainError("DbcaController: proportionality constant must be >= 1");
  }

  void begin_round(std::size_t true_backlog) { true_backlog_ = true_backlog; }
  double access_probability() const { return p_; }

  int crs_slots(const PreambleReport& report) {
    prior_ = state_.n_prior;
    state_ = estimator::observe_idle(state_, p_, report.idle, config_.preambles);
    const double n_hat = state_.n_posterior;
    const auto budget = optimizer::ResourceBudget::proportional(
        options_.proportionality, budget_basis(n_hat), config_);
    return optimizer::crs_decision(n_hat, p_, budget, config_, options_.crs_rounding,
                                   options_.constraint, report.idle);
  }

  void conclude(const RoundOutcome& outcome) {
    state_ = estimator::observe_successes(state_, outcome.successes, options_.update_base);
    const double n_next = state_.n_prior;
    const double basis =
        options_.budget_reference == BudgetReference::genie
            ? std::max(0.0, static_cast<double>(true_backlog_) - outcome.successes)
            : n_next;
    const auto budget =
        optimizer::ResourceBudget::proportional(options_.proportionality, basis, config_);
    planned_budget_ = budget.limit_rb;
    if (n_next < 1.0) {
      planned_ = {1.0, 0};
    } else {
      planned_ =
          optimizer::solve_operating_point(n_next, budget, config_, options_.fixed_k_path);
    }
    planned_resources_ = analytics::expected_resources(n_next, planned_, config_);
    p_ = planned_.access_probability;
  }

  void annotate(TraceRow& row) const {
    row.n_hat_prior = prior_;
    row.n_hat_post = state_.n_posterior;
    row.q_boost = state_.boost_q;
    row.planned_budget_rb = planned_budget_;
    row.planned_resources_rb = planned_resources_;
  }

  const estimator::EstimatorState& state() const { return state_; }
  const OperatingPoint& planned() const { return planned_; }

 private:
  double budget_basis(double n_hat) const {
    return options_.budget_reference == BudgetReference::genie
               ? static_cast<double>(true_backlog_)
               : n_hat;
  }

  SystemConfig config_;
  DbcaOptions options_;
  estimator::EstimatorState state_{};
  std::size_t true_backlog_ = 0;
  double prior_ = 1.0;
  double p_ = 1.0;
  OperatingPoint planned_{1.0, 0};
  double planned_budget_ = std::numeric_limits<double>::quiet_NaN();
  double planned_resources_ = std::numeric_limits<double>::quiet_NaN();
};

/// Scratch buffers reused across rounds.
struct RoundWorkspace {
  std::vector<std::size_t> passers;       // positions in the contender list
  std::vector<int> preamble_of;           // per passer
  std::vector<std::uint64_t> level_of;    // per passer
  std::vector<std::size_t> offsets;       // per preamble, into order
  std::vector<std::size_t> order;         // passers grouped by preamble
  std::vector<std::size_t> fill;          // next free slot per preamble in order
  std::vector<std::uint64_t> group_levels;
};

struct RoundResult {
  RoundOutcome outcome;
  double access_probability = 1.0;
  int crs_slots = 0;
  std::vector<std::size_t> winners;  // positions in the contender list
};

namespace detail {

// Uniform integer in [0, range): multiply-shift with rejection, exact for a
// 64-bit engine.
template <class Urng>
std::uint64_t bounded(Urng& rng, std::uint64_t range) {
  static_assert(Urng::min() == 0 && Urng::max() == std::numeric_limits<std::uint64_t>::max());
  auto m = static_cast<unsigned __int128>(rng()) * range;
  auto low = static_cast<std::uint64_t>(m);
  if (low < range) {
    const std::uint64_t threshold = (0 - range) % range;
    while (low < threshold) {
      m = static_cast<unsigned __int128>(rng()) * range;
      low = static_cast<std::uint64_t>(m);
    }
  }
  return static_cast<std::uint64_t>(m >> 64);
}

template <class Urng>
void access_class_barring(std::size_t contenders, double p, Urng& rng,
                          std::vector<std::size_t>& passers) {
  passers.clear();
  if (p >= 1.0) {
    passers.resize(contenders);
    std::iota(passers.begin(), passers.end(), std::size_t{0});
    return;
  }
  if (p < 0.25) {
    // Skip straight to the next UE that passes: gaps are geometric.
    std::geometric_distribution<std::size_t> gap(p);
    std::size_t pos = gap(rng);
    while (pos < contenders) {
      passers.push_back(pos);
      pos += 1 + gap(rng);
    }
    return;
  }
  // One 64-bit draw per UE against p * 2^64.
  const auto cut = static_cast<std::uint64_t>(std::ldexp(p, 64));
  for (std::size_t i = 0; i < contenders; ++i) {
    if (rng() < cut) passers.push_back(i);
  }
}

}  // namespace detail

/// One contention round: ACB, preamble choice, CRS allocation by the
/// controller, BCCR on every occupied preamble.
template <RoundController Controller>
RoundResult run_round(Controller& controller, std::size_t contenders, const SystemConfig& config,
                      RngStreams& rng, RoundWorkspace& ws) {
  const double p = controller.access_probability();
  if (!(p > 0.0 && p <= 1.0)) throw DomainError("run_round: access probability outside (0, 1]");
  const int M = config.preambles;

  detail::access_class_barring(contenders, p, rng.acb, ws.passers);

  ws.preamble_of.resize(ws.passers.size());
  ws.offsets.assign(static_cast<std::size_t>(M) + 1, 0);
  for (std::size_t i = 0; i < ws.passers.size(); ++i) {
    const auto j = static_cast<int>(detail::bounded(rng.preamble, static_cast<std::uint64_t>(M)));
    ws.preamble_of[i] = j;
    ++ws.offsets[static_cast<std::size_t>(j) + 1];
  }
  int occupied = 0;
  for (int j = 0; j < M; ++j) {
    if (ws.offsets[static_cast<std::size_t>(j) + 1] > 0) ++occupied;
  }
  const int idle = M - occupied;

  const int k = controller.crs_slots(PreambleReport{idle, occupied, p});
  if (k < 0 || k > config.max_crs) throw DomainError("run_round: controller chose k out of range");
  const std::uint64_t levels = model::priority_levels(k);

  ws.level_of.assign(ws.passers.size(), 0);
  if (levels > 1) {
    // levels = 2^k, so the top k bits of a draw are uniform over them.
    for (auto& l : ws.level_of) l = rng.priority() >> (64 - k);
  }

  std::partial_sum(ws.offsets.begin(), ws.offsets.end(), ws.offsets.begin());
  ws.order.resize(ws.passers.size());
  ws.fill.assign(ws.offsets.begin(), ws.offsets.end() - 1);
  for (std::size_t i = 0; i < ws.passers.size(); ++i) {
    ws.order[ws.fill[static_cast<std::size_t>(ws.preamble_of[i])]++] = i;
  }

  RoundResult result;
  result.access_probability = p;
  result.crs_slots = k;
  for (int j = 0; j < M; ++j) {
    const std::size_t begin = ws.offsets[static_cast<std::size_t>(j)];
    const std::size_t end = ws.offsets[static_cast<std::size_t>(j) + 1];
    if (begin == end) continue;
    ws.group_levels.clear();
    for (std::size_t g = begin; g < end; ++g) ws.group_levels.push_back(ws.level_of[ws.order[g]]);
    const auto res = model::resolve_preamble(ws.group_levels, k);
    if (res.kind == model::Resolution::Kind::success) {
      result.winners.push_back(ws.passers[ws.order[begin + res.winner]]);
    }
  }
  result.outcome = RoundOutcome::make(idle, occupied, static_cast<int>(result.winners.size()), k,
                                      config);
  controller.conclude(result.outcome);
  return result;
}

struct SimulationResult {
  std::vector<double> service_ms;  // per UE
  std::vector<TraceRow> trace;
  std::size_t rounds_to_resolution = 0;
  double total_resources = 0.0;
};

class NonTerminationError : public std::runtime_error {
 public:
  NonTerminationError(const std::string& what, std::vector<TraceRow> trace)
      : std::runtime_error(what), trace_(std::move(trace)) {}
  const std::vector<TraceRow>& trace() const { return trace_; }

 private:
  std::vector<TraceRow> trace_;
};

inline constexpr std::size_t kDefaultRoundCap = 100'000;

namespace detail {

/// UE ids sorted by the round in which they start contending.
struct ActivationSchedule {
  std::vector<std::size_t> ue_by_round;    // UE ids, ascending activation round
  std::vector<std::size_t> round_of;       // per UE

  ActivationSchedule(const traffic::BurstScenario& scenario, const SystemConfig& config,
                     RngStreams& rng) {
    const auto times = traffic::sample_activation_times(scenario, rng.activation);
    round_of.resize(times.size());
    for (std::size_t u = 0; u < times.size(); ++u)
      round_of[u] = traffic::activation_round(times[u], config.round_ms);
    ue_by_round.resize(times.size());
    std::iota(ue_by_round.begin(), ue_by_round.end(), std::size_t{0});
    std::stable_sort(ue_by_round.begin(), ue_by_round.end(),
                     [&](std::size_t a, std::size_t b) { return round_of[a] < round_of[b]; });
  }
};

inline double service_time(std::size_t success_round, std::size_t activation_round,
                           const SystemConfig& config) {
  return static_cast<double>(success_round - activation_round + 1) * config.round_ms;
}

}  // namespace detail

/// Runs one replication of a burst under an ACB/BCCR controller until every
/// UE has connected.
template <RoundController Controller>
SimulationResult run_burst(const traffic::BurstScenario& scenario, const SystemConfig& config,
                           Controller& controller, std::uint64_t master_seed,
                           std::uint64_t replication, std::size_t round_cap = kDefaultRoundCap) {
  config.validate();
  scenario.validate();
  RngStreams rng(master_seed, replication);
  const detail::ActivationSchedule schedule(scenario, config, rng);

  SimulationResult result;
  result.service_ms.assign(scenario.ue_count, 0.0);
  std::vector<std::size_t> contending;
  RoundWorkspace ws;
  std::size_t next_arrival = 0;
  std::size_t connected = 0;
  for (std::size_t round = 0; connected < scenario.ue_count; ++round) {
    if (round >= round_cap) {
      throw NonTerminationError("burst not resolved within " + std::to_string(round_cap) +
                                    " rounds",
                                std::move(result.trace));
    }
    while (next_arrival < schedule.ue_by_round.size() &&
           schedule.round_of[schedule.ue_by_round[next_arrival]] <= round) {
      contending.push_back(schedule.ue_by_round[next_arrival++]);
    }
    controller.begin_round(contending.size());
    auto rr = run_round(controller, contending.size(), config, rng, ws);

    TraceRow row;
    row.round = round;
    row.n_true = contending.size();
    row.p = rr.access_probability;
    row.k = rr.crs_slots;
    row.idle = rr.outcome.idle_preambles;
    row.occupied = rr.outcome.occupied_preambles;
    row.successes = rr.outcome.successes;
    row.resources_rb = rr.outcome.consumed_resources;
    controller.annotate(row);
    result.trace.push_back(row);
    result.total_resources += rr.outcome.consumed_resources;

    // Remove winners back to front so earlier positions stay valid.
    std::sort(rr.winners.begin(), rr.winners.end(), std::greater<>());
    for (std::size_t pos : rr.winners) {
      const std::size_t ue = contending[pos];
      result.service_ms[ue] = detail::service_time(round, schedule.round_of[ue], config);
      contending[pos] = contending.back();
      contending.pop_back();
      ++connected;
    }
    result.rounds_to_resolution = round + 1;
  }
  return result;
}

inline SimulationResult run_dbca(const traffic::BurstScenario& scenario, const SystemConfig& config,
                                 const DbcaOptions& options, std::uint64_t master_seed,
                                 std::uint64_t replication = 0,
                                 std::size_t round_cap = kDefaultRoundCap) {
  DbcaController controller(config, options);
  return run_burst(scenario, config, controller, master_seed, replication, round_cap);
}

inline SimulationResult run_dacb(const traffic::BurstScenario& scenario, const SystemConfig& config,
                                 DacbMode mode, std::uint64_t master_seed,
                                 std::uint64_t replication = 0,
                                 std::size_t round_cap = kDefaultRoundCap,
                                 estimator::UpdateBase base = estimator::UpdateBase::posterior) {
  DacbController controller(config, mode, base);
  return run_burst(scenario, config, controller, master_seed, replication, round_cap);
}

/// q-ary tree resolution over reserved preambles, without ACB or a resource
/// constraint.
///
/// A collision on any preamble enqueues its UEs as a pending split. Each
/// round, pending splits are served FIFO, each reserving q preambles on
/// which its UEs re-pick uniformly; the preambles left over carry fresh
/// contention. UEs activated while any tree is pending are held back until
/// all trees have been resolved.
inline SimulationResult run_qtra(const traffic::BurstScenario& scenario, const SystemConfig& config,
                                 int q, std::uint64_t master_seed, std::uint64_t replication = 0,
                                 std::size_t round_cap = kDefaultRoundCap) {
  config.validate();
  scenario.validate();
  if (q < 2) throw DomainError("run_qtra: branching factor must be >= 2");
  if (q > config.preambles) throw DomainError("run_qtra: branching factor exceeds preamble count");
  RngStreams rng(master_seed, replication);
  const detail::ActivationSchedule schedule(scenario, config, rng);
  const int M = config.preambles;

  SimulationResult result;
  result.service_ms.assign(scenario.ue_count, 0.0);
  std::vector<std::size_t> fresh;
  std::vector<std::size_t> gated;
  std::deque<std::vector<std::size_t>> splits;
  std::vector<std::vector<std::size_t>> on_preamble(static_cast<std::size_t>(M));
  const std::vector<std::uint64_t> no_levels;
  std::size_t next_arrival = 0;
  std::size_t connected = 0;

  for (std::size_t round = 0; connected < scenario.ue_count; ++round) {
    if (round >= round_cap) {
      throw NonTerminationError("q-TRA burst not resolved within " + std::to_string(round_cap) +
                                    " rounds",
                                std::move(result.trace));
    }
    const bool tree_active = !splits.empty();
    while (next_arrival < schedule.ue_by_round.size() &&
           schedule.round_of[schedule.ue_by_round[next_arrival]] <= round) {
      (tree_active ? gated : fresh).push_back(schedule.ue_by_round[next_arrival++]);
    }
    const std::size_t backlog = fresh.size() + gated.size() +
                                std::accumulate(splits.begin(), splits.end(), std::size_t{0},
                                                [](std::size_t acc, const auto& s) {
                                                  return acc + s.size();
                                                });

    for (auto& v : on_preamble) v.clear();
    int next_free = 0;
    while (!splits.empty() && next_free + q <= M) {
      std::uniform_int_distribution<int> pick(0, q - 1);
      for (std::size_t ue : splits.front()) {
        on_preamble[static_cast<std::size_t>(next_free + pick(rng.preamble))].push_back(ue);
      }
      splits.pop_front();
      next_free += q;
    }
    if (next_free < M && !fresh.empty()) {
      std::uniform_int_distribution<int> pick(next_free, M - 1);
      for (std::size_t ue : fresh) on_preamble[static_cast<std::size_t>(pick(rng.preamble))].push_back(ue);
      fresh.clear();
    }

    int occupied = 0;
    int successes = 0;
    for (auto& group : on_preamble) {
      if (group.empty()) continue;
      ++occupied;
      const std::vector<std::uint64_t> levels(group.size(), 0);
      const auto res = model::resolve_preamble(levels, 0);
      if (res.kind == model::Resolution::Kind::success) {
        const std::size_t ue = group[res.winner];
        result.service_ms[ue] = detail::service_time(round, schedule.round_of[ue], config);
        ++successes;
        ++connected;
      } else {
        splits.push_back(group);
      }
    }
    if (splits.empty() && !gated.empty()) {
      fresh.insert(fresh.end(), gated.begin(), gated.end());
      gated.clear();
    }

    const auto outcome = RoundOutcome::make(M - occupied, occupied, successes, 0, config);
    TraceRow row;
    row.round = round;
    row.n_true = backlog;
    row.p = 1.0;
    row.k = 0;
    row.idle = outcome.idle_preambles;
    row.occupied = outcome.occupied_preambles;
    row.successes = outcome.successes;
    row.resources_rb = outcome.consumed_resources;
    result.trace.push_back(row);
    result.total_resources += outcome.consumed_resources;
    result.rounds_to_resolution = round + 1;
  }
  return result;
}

struct SuccessStats {
  double mean = 0.0;
  double standard_error = 0.0;
  std::size_t rounds = 0;
};

/// Mean successes per round with the backlog held at n (winners are
/// replaced) and the controller frozen at `point`.
inline SuccessStats fixed_point_successes(std::size_t n, const OperatingPoint& point,
                                          const SystemConfig& config, std::size_t rounds,
                                          std::uint64_t master_seed, std::uint64_t replication) {
  point.validate(config);
  if (rounds < 2) throw DomainError("fixed_point_successes: need at least two rounds");
  RngStreams rng(master_seed, replication);
  FixedController controller(point);
  RoundWorkspace ws;
  double sum = 0.0;
  double sum_sq = 0.0;
  for (std::size_t r = 0; r < rounds; ++r) {
    const auto rr = run_round(controller, n, config, rng, ws);
    const double s = rr.outcome.successes;
    sum += s;
    sum_sq += s * s;
  }
  const double count = static_cast<double>(rounds);
  const double mean = sum / count;
  const double var = std::max(0.0, (sum_sq - count * mean * mean) / (count - 1.0));
  return {mean, std::sqrt(var / count), rounds};
}

}  // namespace dbca::sim
