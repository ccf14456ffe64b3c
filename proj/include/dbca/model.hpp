#pragma once

// Core domain types shared by every other header: system parameters, the
// per-round operating point, BCCR priority encoding, and the collision
// channel outcome of a single preamble.

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace dbca {

/// Thrown when an argument lies outside the mathematical domain of an operation.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

namespace model {

/// Largest CRS count whose level count 2^k still fits a 64-bit integer.
inline constexpr int kMaxRepresentableCrs = 62;

/// Static channel and resource parameters of one cell.
struct SystemConfig {
  int preambles = 54;           // M
  double prach_rb = 6.0;        // R1, PRACH resource blocks per round
  double msg3_rb = 2.0;         // r3, resource blocks per MSG3
  double crs_overhead = 0.07;   // delta = r_CRS / r3
  int max_crs = 14;             // k_max
  double round_ms = 10.0;       // one contention round = one PRACH slot

  void validate() const {
    if (preambles < 1) throw DomainError("SystemConfig: preambles must be >= 1");
    if (!(prach_rb >= 0.0)) throw DomainError("SystemConfig: prach_rb must be >= 0");
    if (!(msg3_rb > 0.0)) throw DomainError("SystemConfig: msg3_rb must be > 0");
    if (!(crs_overhead > 0.0 && crs_overhead <= 1.0))
      throw DomainError("SystemConfig: crs_overhead must lie in (0, 1]");
    if (max_crs < 0 || max_crs > kMaxRepresentableCrs)
      throw DomainError("SystemConfig: max_crs must lie in [0, 62]");
    if (!(round_ms > 0.0)) throw DomainError("SystemConfig: round_ms must be > 0");
  }

  bool operator==(const SystemConfig&) const = default;
};

inline std::uint64_t priority_levels(int crs_slots) {
  if (crs_slots < 0 || crs_slots > kMaxRepresentableCrs)
    throw DomainError("priority_levels: crs_slots out of range");
  return std::uint64_t{1} << crs_slots;
}

/// The control pair published for one contention round.
struct OperatingPoint {
  double access_probability = 1.0;
  int crs_slots = 0;

  std::uint64_t levels() const { return priority_levels(crs_slots); }

  void validate(const SystemConfig& config) const {
    if (!(access_probability > 0.0 && access_probability <= 1.0))
      throw DomainError("OperatingPoint: access probability must lie in (0, 1]");
    if (crs_slots < 0 || crs_slots > config.max_crs)
      throw DomainError("OperatingPoint: crs_slots must lie in [0, max_crs]");
  }

  bool operator==(const OperatingPoint&) const = default;
};

/// A BCCR priority level and the bit pattern a UE plays in the CRSs.
/// bits[0] is played in CRS #0; 1 means transmit, 0 means listen.
struct PrioritySequence {
  std::uint64_t level = 0;
  std::vector<std::uint8_t> bits;
};

/// Level 0 is the highest priority and maps to all ones.
inline PrioritySequence encode_priority(std::uint64_t level, int crs_slots) {
  const std::uint64_t levels = priority_levels(crs_slots);
  if (level >= levels) throw DomainError("encode_priority: level out of range");
  const std::uint64_t value = levels - 1 - level;
  PrioritySequence seq{level, std::vector<std::uint8_t>(static_cast<std::size_t>(crs_slots))};
  for (int j = 0; j < crs_slots; ++j) {
    seq.bits[static_cast<std::size_t>(j)] =
        static_cast<std::uint8_t>((value >> (crs_slots - 1 - j)) & 1U);
  }
  return seq;
}

inline std::uint64_t decode_priority(std::span<const std::uint8_t> bits) {
  if (bits.size() > static_cast<std::size_t>(kMaxRepresentableCrs))
    throw DomainError("decode_priority: too many bits");
  std::uint64_t value = 0;
  for (std::uint8_t b : bits) {
    if (b > 1) throw DomainError("decode_priority: bits must be 0 or 1");
    value = (value << 1) | b;
  }
  const std::uint64_t levels = std::uint64_t{1} << bits.size();
  return levels - 1 - value;
}

/// Outcome of one preamble after BCCR.
struct Resolution {
  enum class Kind { idle, success, collision };

  Kind kind = Kind::idle;
  std::size_t winner = 0;  // index into the contender list; valid for success only

  static Resolution idle() { return {Kind::idle, 0}; }
  static Resolution success(std::size_t w) { return {Kind::success, w}; }
  static Resolution collision() { return {Kind::collision, 0}; }

  bool operator==(const Resolution&) const = default;
};

namespace detail {
inline void check_levels(std::span<const std::uint64_t> levels, int crs_slots, const char* who) {
  const std::uint64_t count = priority_levels(crs_slots);
  for (std::uint64_t l : levels) {
    if (l >= count) throw DomainError(std::string(who) + ": priority level out of range");
  }
}
}  // namespace detail

/// Resolves the contenders of one preamble: the contender holding the unique
/// smallest level wins; ties on the smallest level collide.
inline Resolution resolve_preamble(std::span<const std::uint64_t> levels, int crs_slots) {
  detail::check_levels(levels, crs_slots, "resolve_preamble");
  if (levels.empty()) return Resolution::idle();
  if (levels.size() == 1) return Resolution::success(0);
  std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
  std::size_t best_index = 0;
  std::size_t holders = 0;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    if (levels[i] < best) {
      best = levels[i];
      best_index = i;
      holders = 1;
    } else if (levels[i] == best) {
      ++holders;
    }
  }
  return holders == 1 ? Resolution::success(best_index) : Resolution::collision();
}

/// Slot-by-slot binary countdown: in every CRS a contender transmits on bit 1
/// and listens on bit 0; a listener that hears a transmission drops out for
/// good. Kept as the reference for resolve_preamble.
inline Resolution countdown_by_slots(std::span<const std::uint64_t> levels, int crs_slots) {
  detail::check_levels(levels, crs_slots, "countdown_by_slots");
  if (levels.empty()) return Resolution::idle();

  std::vector<PrioritySequence> seqs;
  seqs.reserve(levels.size());
  for (std::uint64_t l : levels) seqs.push_back(encode_priority(l, crs_slots));

  std::vector<bool> active(levels.size(), true);
  for (int slot = 0; slot < crs_slots; ++slot) {
    const auto s = static_cast<std::size_t>(slot);
    bool heard = false;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      if (active[i] && seqs[i].bits[s] == 1) heard = true;
    }
    if (!heard) continue;
    for (std::size_t i = 0; i < seqs.size(); ++i) {
      if (active[i] && seqs[i].bits[s] == 0) active[i] = false;
    }
  }

  std::size_t survivors = 0;
  std::size_t last = 0;
  for (std::size_t i = 0; i < active.size(); ++i) {
    if (active[i]) {
      ++survivors;
      last = i;
    }
  }
  return survivors == 1 ? Resolution::success(last) : Resolution::collision();
}

/// Realized uplink consumption of a round: PRACH plus MSG3 and k CRSs for
/// every occupied preamble.
inline double round_resources(int occupied_preambles, int crs_slots, const SystemConfig& config) {
  return config.prach_rb +
         config.msg3_rb * (1.0 + crs_slots * config.crs_overhead) * occupied_preambles;
}

/// Per-round observables. The gNB never sees per-preamble multiplicities.
struct RoundOutcome {
  int idle_preambles = 0;
  int occupied_preambles = 0;
  int successes = 0;
  double consumed_resources = 0.0;

  static RoundOutcome make(int idle, int occupied, int successes, int crs_slots,
                           const SystemConfig& config) {
    if (idle < 0 || occupied < 0 || idle + occupied != config.preambles)
      throw DomainError("RoundOutcome: idle + occupied must equal the preamble count");
    if (successes < 0 || successes > occupied)
      throw DomainError("RoundOutcome: successes must lie in [0, occupied]");
    return {idle, occupied, successes, round_resources(occupied, crs_slots, config)};
  }

  bool operator==(const RoundOutcome&) const = default;
};

}  // namespace model
}  // namespace dbca
