#pragma once

// Experiment configuration: a sectioned key = value file (INI) read through
// boost::property_tree. Every value is validated, and failures point at the
// offending line and field.

#include <algorithm>
#include <charconv>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "dbca/estimator.hpp"
#include "dbca/model.hpp"
#include "dbca/optimizer.hpp"
#include "dbca/sim.hpp"
#include "dbca/traffic.hpp"

namespace dbca::config {

class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& field, std::size_t line, const std::string& message)
      : std::runtime_error(format(field, line, message)),
        field_(field),
        line_(line),
        message_(message) {}

  const std::string& field() const { return field_; }
  std::size_t line() const { return line_; }  // 0 when unknown
  const std::string& message() const { return message_; }

 private:
  static std::string format(const std::string& field, std::size_t line, const std::string& msg) {
    std::string out = "config";
    if (line > 0) out += ":" + std::to_string(line);
    if (!field.empty()) out += ": " + field;
    return out + ": " + msg;
  }

  std::string field_;
  std::size_t line_;
  std::string message_;
};

enum class TraceMode { off, first, all };

inline std::string_view to_string(TraceMode m) {
  switch (m) {
    case TraceMode::off: return "off";
    case TraceMode::first: return "first";
    case TraceMode::all: return "all";
  }
  return "?";
}

inline TraceMode parse_trace_mode(std::string_view s) {
  if (s == "off") return TraceMode::off;
  if (s == "first") return TraceMode::first;
  if (s == "all") return TraceMode::all;
  throw DomainError("unknown trace mode '" + std::string(s) + "' (off|first|all)");
}

inline std::string_view to_string(optimizer::CrsRounding r) {
  return r == optimizer::CrsRounding::floor ? "floor" : "nearest_even";
}
inline optimizer::CrsRounding parse_crs_rounding(std::string_view s) {
  if (s == "floor") return optimizer::CrsRounding::floor;
  if (s == "nearest_even") return optimizer::CrsRounding::nearest_even;
  throw DomainError("unknown CRS rounding '" + std::string(s) + "' (floor|nearest_even)");
}

inline std::string_view to_string(optimizer::ConstraintMode m) {
  return m == optimizer::ConstraintMode::soft ? "soft" : "hard";
}
inline optimizer::ConstraintMode parse_constraint(std::string_view s) {
  if (s == "soft") return optimizer::ConstraintMode::soft;
  if (s == "hard") return optimizer::ConstraintMode::hard;
  throw DomainError("unknown constraint mode '" + std::string(s) + "' (soft|hard)");
}

inline std::string_view to_string(optimizer::FixedKPath p) {
  return p == optimizer::FixedKPath::exact ? "exact" : "root_find";
}
inline optimizer::FixedKPath parse_fixed_k_path(std::string_view s) {
  if (s == "exact") return optimizer::FixedKPath::exact;
  if (s == "root_find") return optimizer::FixedKPath::root_find;
  throw DomainError("unknown p solver '" + std::string(s) + "' (exact|root_find)");
}

inline const std::vector<std::string>& known_checks() {
  static const std::vector<std::string> checks = {
      "bridge", "aloha", "pareto", "unimodal", "root_finder", "crs_rule", "solver_grid", "drift"};
  return checks;
}

struct ExperimentConfig {
  model::SystemConfig system;

  // [experiment]
  std::uint64_t seed = 1;
  std::size_t replications = 30;
  std::size_t max_replications = 4000;
  double ci_target = 0.011;
  TraceMode trace = TraceMode::off;
  std::size_t parallel = 1;
  std::size_t round_cap = sim::kDefaultRoundCap;
  std::string out_dir;  // empty: environment or ./out

  // [scenarios]
  std::vector<traffic::ArrivalShape> shapes = {traffic::ArrivalShape::beta,
                                               traffic::ArrivalShape::uniform,
                                               traffic::ArrivalShape::delta};
  std::vector<std::size_t> ue_counts = {500, 1000, 2000, 4000, 5000, 6000, 8000, 10000};
  double window_ms = 1000.0;
  double beta_alpha = 3.0;
  double beta_beta = 4.0;

  // [protocols]
  std::vector<double> dbca_c = {1.0, 1.4, 1.8};
  std::vector<sim::DacbMode> dacb = {sim::DacbMode::estimated, sim::DacbMode::genie};
  std::vector<int> qtra_q = {2, 8};
  sim::DbcaOptions dbca_options;  // proportionality is taken from dbca_c

  // [analyze]
  std::vector<double> backlogs = {1000.0};
  std::vector<int> crs_counts = {0, 1, 2, 3, 4};
  std::size_t curve_points = 100;    // throughput curves, p = j / curve_points
  std::size_t pareto_points = 1000;  // frontier grid
  double drift_epsilon = 1.0;
  std::size_t drift_round_cap = 1'000'000;

  // [validate]
  std::vector<std::string> checks = known_checks();
  std::size_t bridge_rounds = 20000;

  traffic::BurstScenario scenario(traffic::ArrivalShape shape, std::size_t n) const {
    switch (shape) {
      case traffic::ArrivalShape::delta: return traffic::BurstScenario::delta(n);
      case traffic::ArrivalShape::uniform: return traffic::BurstScenario::uniform(n, window_ms);
      case traffic::ArrivalShape::beta:
        return traffic::BurstScenario::beta_burst(n, window_ms, beta_alpha, beta_beta);
    }
    throw DomainError("unknown arrival shape");
  }

  bool operator==(const ExperimentConfig&) const = default;
};

namespace detail {

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(s);
  while (std::getline(in, item, ',')) {
    auto t = trim(item);
    if (!t.empty()) out.push_back(std::move(t));
  }
  return out;
}

// Shortest text that reads back to the same double.
inline std::string format_double(double v) {
  char buf[64];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

template <class T>
std::optional<T> parse_number(const std::string& s) {
  T v{};
  const char* end = s.data() + s.size();
  const auto r = std::from_chars(s.data(), end, v);
  if (r.ec != std::errc{} || r.ptr != end) return std::nullopt;
  return v;
}

template <class T, class F>
std::string join(const std::vector<T>& items, F&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ", ";
    out += fmt(items[i]);
  }
  return out;
}

// Line numbers of "section.key" entries, for diagnostics only.
inline std::map<std::string, std::size_t> index_lines(const std::string& text) {
  std::map<std::string, std::size_t> lines;
  std::istringstream in(text);
  std::string raw;
  std::string section;
  for (std::size_t no = 1; std::getline(in, raw); ++no) {
    const auto line = trim(raw);
    if (line.empty() || line[0] == ';' || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      section = trim(std::string_view(line).substr(1, line.size() - 2));
      lines.emplace(section, no);
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    lines.emplace(section + "." + trim(std::string_view(line).substr(0, eq)), no);
  }
  return lines;
}

class Reader {
 public:
  Reader(const boost::property_tree::ptree& tree, std::map<std::string, std::size_t> lines)
      : tree_(tree), lines_(std::move(lines)) {}

  void reject_unknown(const std::map<std::string, std::vector<std::string>>& schema) const {
    for (const auto& [section, body] : tree_) {
      const auto it = schema.find(section);
      if (it == schema.end() || body.data().size() > 0) {
        throw ConfigError(section, line(section), "unknown section");
      }
      for (const auto& [key, value] : body) {
        (void)value;
        if (std::find(it->second.begin(), it->second.end(), key) == it->second.end()) {
          throw ConfigError(section + "." + key, line(section + "." + key), "unknown key");
        }
      }
    }
  }

  template <class T, class Parse>
  void read(const std::string& path, T& out, Parse&& parse) const {
    const auto raw = tree_.get_optional<std::string>(boost::property_tree::ptree::path_type(path, '.'));
    if (!raw) return;
    const auto text = trim(*raw);
    try {
      out = parse(text);
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(path, line(path), e.what());
    }
  }

  std::size_t line(const std::string& path) const {
    const auto it = lines_.find(path);
    return it == lines_.end() ? 0 : it->second;
  }

 private:
  const boost::property_tree::ptree& tree_;
  std::map<std::string, std::size_t> lines_;
};

template <class T>
T number_or_throw(const std::string& s) {
  const auto v = parse_number<T>(s);
  if (!v) throw DomainError("'" + s + "' is not a valid number");
  return *v;
}

template <class T, class F>
std::vector<T> list_of(const std::string& s, F&& item) {
  std::vector<T> out;
  for (const auto& part : split_list(s)) out.push_back(item(part));
  return out;
}

}  // namespace detail

/// Field-level domain checks; throws ConfigError naming the field.
inline void validate(const ExperimentConfig& c) {
  const auto fail = [](const std::string& field, const std::string& msg) {
    throw ConfigError(field, 0, msg);
  };
  const auto& sys = c.system;
  if (sys.preambles < 1) fail("system.preambles", "must be >= 1");
  if (!(sys.prach_rb >= 0.0)) fail("system.prach_rb", "must be >= 0");
  if (!(sys.msg3_rb > 0.0)) fail("system.msg3_rb", "must be > 0");
  if (!(sys.crs_overhead > 0.0 && sys.crs_overhead <= 1.0))
    fail("system.crs_overhead", "must lie in (0, 1]");
  if (sys.max_crs < 0 || sys.max_crs > model::kMaxRepresentableCrs)
    fail("system.max_crs", "must lie in [0, " + std::to_string(model::kMaxRepresentableCrs) + "]");
  if (!(sys.round_ms > 0.0)) fail("system.round_ms", "must be > 0");
  try {
    sys.validate();
  } catch (const DomainError& e) {
    fail("system", e.what());
  }
  if (c.replications < 1) fail("experiment.replications", "must be >= 1");
  if (c.max_replications < c.replications)
    fail("experiment.max_replications", "must be >= replications");
  if (!(c.ci_target > 0.0)) fail("experiment.ci_target", "must be > 0");
  if (c.parallel < 1) fail("experiment.parallel", "must be >= 1");
  if (c.round_cap < 1) fail("experiment.round_cap", "must be >= 1");
  if (c.shapes.empty()) fail("scenarios.shapes", "must not be empty");
  if (c.ue_counts.empty()) fail("scenarios.ue_counts", "must not be empty");
  for (auto n : c.ue_counts)
    if (n < 1) fail("scenarios.ue_counts", "burst sizes must be >= 1");
  if (!(c.window_ms > 0.0)) fail("scenarios.window_ms", "must be > 0");
  if (!(c.beta_alpha > 0.0)) fail("scenarios.beta_alpha", "must be > 0");
  if (!(c.beta_beta > 0.0)) fail("scenarios.beta_beta", "must be > 0");
  for (double v : c.dbca_c)
    if (!(v >= 1.0)) fail("protocols.dbca_c", "proportionality constants must be >= 1");
  for (int q : c.qtra_q)
    if (q < 2 || q > c.system.preambles)
      fail("protocols.qtra_q", "branching factors must lie in [2, preambles]");
  if (c.backlogs.empty()) fail("analyze.backlogs", "must not be empty");
  for (double n : c.backlogs)
    if (!(n >= 1.0)) fail("analyze.backlogs", "backlogs must be >= 1");
  if (c.crs_counts.empty()) fail("analyze.crs_counts", "must not be empty");
  for (int k : c.crs_counts)
    if (k < 0 || k > c.system.max_crs) fail("analyze.crs_counts", "CRS counts must lie in [0, max_crs]");
  if (c.curve_points < 1) fail("analyze.curve_points", "must be >= 1");
  if (c.pareto_points < 1) fail("analyze.pareto_points", "must be >= 1");
  if (!(c.drift_epsilon > 0.0)) fail("analyze.drift_epsilon", "must be > 0");
  if (c.drift_round_cap < 1) fail("analyze.drift_round_cap", "must be >= 1");
  for (const auto& name : c.checks) {
    const auto& known = known_checks();
    if (std::find(known.begin(), known.end(), name) == known.end())
      fail("validate.checks", "unknown check '" + name + "'");
  }
  if (c.bridge_rounds < 2) fail("validate.bridge_rounds", "must be >= 2");
}

/// Parses config text. Keys left out keep their defaults.
inline ExperimentConfig parse(const std::string& text) {
  namespace pt = boost::property_tree;
  using detail::list_of;
  using detail::number_or_throw;
  pt::ptree tree;
  {
    std::istringstream in(text);
    try {
      pt::ini_parser::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
      throw ConfigError("", e.line(), e.message());
    }
  }
  const detail::Reader r(tree, detail::index_lines(text));
  r.reject_unknown({
      {"system", {"preambles", "prach_rb", "msg3_rb", "crs_overhead", "max_crs", "round_ms"}},
      {"experiment",
       {"seed", "replications", "max_replications", "ci_target", "trace", "parallel", "round_cap",
        "out_dir"}},
      {"scenarios", {"shapes", "ue_counts", "window_ms", "beta_alpha", "beta_beta"}},
      {"protocols",
       {"dbca_c", "dacb", "qtra_q", "estimator_base", "crs_rounding", "constraint", "p_solver",
        "budget_reference"}},
      {"analyze",
       {"backlogs", "crs_counts", "curve_points", "pareto_points", "drift_epsilon",
        "drift_round_cap"}},
      {"validate", {"checks", "bridge_rounds"}},
  });

  const auto to_int = [](const std::string& s) { return number_or_throw<int>(s); };
  const auto to_size = [](const std::string& s) { return number_or_throw<std::size_t>(s); };
  const auto to_u64 = [](const std::string& s) { return number_or_throw<std::uint64_t>(s); };
  const auto to_double = [](const std::string& s) { return number_or_throw<double>(s); };
  const auto to_string = [](const std::string& s) { return s; };

  ExperimentConfig c;
  r.read("system.preambles", c.system.preambles, to_int);
  r.read("system.prach_rb", c.system.prach_rb, to_double);
  r.read("system.msg3_rb", c.system.msg3_rb, to_double);
  r.read("system.crs_overhead", c.system.crs_overhead, to_double);
  r.read("system.max_crs", c.system.max_crs, to_int);
  r.read("system.round_ms", c.system.round_ms, to_double);

  r.read("experiment.seed", c.seed, to_u64);
  r.read("experiment.replications", c.replications, to_size);
  r.read("experiment.max_replications", c.max_replications, to_size);
  r.read("experiment.ci_target", c.ci_target, to_double);
  r.read("experiment.trace", c.trace, [](const std::string& s) { return parse_trace_mode(s); });
  r.read("experiment.parallel", c.parallel, to_size);
  r.read("experiment.round_cap", c.round_cap, to_size);
  r.read("experiment.out_dir", c.out_dir, to_string);

  r.read("scenarios.shapes", c.shapes, [](const std::string& s) {
    return list_of<traffic::ArrivalShape>(s, [](const std::string& v) { return traffic::parse_shape(v); });
  });
  r.read("scenarios.ue_counts", c.ue_counts,
         [&](const std::string& s) { return list_of<std::size_t>(s, to_size); });
  r.read("scenarios.window_ms", c.window_ms, to_double);
  r.read("scenarios.beta_alpha", c.beta_alpha, to_double);
  r.read("scenarios.beta_beta", c.beta_beta, to_double);

  r.read("protocols.dbca_c", c.dbca_c,
         [&](const std::string& s) { return list_of<double>(s, to_double); });
  r.read("protocols.dacb", c.dacb, [](const std::string& s) {
    return list_of<sim::DacbMode>(s, [](const std::string& v) { return sim::parse_dacb_mode(v); });
  });
  r.read("protocols.qtra_q", c.qtra_q,
         [&](const std::string& s) { return list_of<int>(s, to_int); });
  r.read("protocols.estimator_base", c.dbca_options.update_base,
         [](const std::string& s) { return estimator::parse_update_base(s); });
  r.read("protocols.crs_rounding", c.dbca_options.crs_rounding,
         [](const std::string& s) { return parse_crs_rounding(s); });
  r.read("protocols.constraint", c.dbca_options.constraint,
         [](const std::string& s) { return parse_constraint(s); });
  r.read("protocols.p_solver", c.dbca_options.fixed_k_path,
         [](const std::string& s) { return parse_fixed_k_path(s); });
  r.read("protocols.budget_reference", c.dbca_options.budget_reference,
         [](const std::string& s) { return sim::parse_budget_reference(s); });

  r.read("analyze.backlogs", c.backlogs,
         [&](const std::string& s) { return list_of<double>(s, to_double); });
  r.read("analyze.crs_counts", c.crs_counts,
         [&](const std::string& s) { return list_of<int>(s, to_int); });
  r.read("analyze.curve_points", c.curve_points, to_size);
  r.read("analyze.pareto_points", c.pareto_points, to_size);
  r.read("analyze.drift_epsilon", c.drift_epsilon, to_double);
  r.read("analyze.drift_round_cap", c.drift_round_cap, to_size);

  r.read("validate.checks", c.checks, [](const std::string& s) { return detail::split_list(s); });
  r.read("validate.bridge_rounds", c.bridge_rounds, to_size);

  try {
    validate(c);
  } catch (const ConfigError& e) {
    throw ConfigError(e.field(), r.line(e.field()), e.message());
  }
  return c;
}

inline ExperimentConfig load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("", 0, "cannot open '" + path + "'");
  std::ostringstream text;
  text << in.rdbuf();
  return parse(text.str());
}

/// Canonical text form; parse(serialize(c)) == c.
inline std::string serialize(const ExperimentConfig& c) {
  using detail::format_double;
  using detail::join;
  const auto num = [](auto v) { return std::to_string(v); };
  const auto str = [](auto v) { return std::string(to_string(v)); };
  const auto shape = [](traffic::ArrivalShape s) { return std::string(traffic::to_string(s)); };
  const auto mode = [](sim::DacbMode m) { return std::string(sim::to_string(m)); };
  const auto ident = [](const std::string& s) { return s; };

  std::ostringstream o;
  o << "[system]\n"
    << "preambles = " << c.system.preambles << "\n"
    << "prach_rb = " << format_double(c.system.prach_rb) << "\n"
    << "msg3_rb = " << format_double(c.system.msg3_rb) << "\n"
    << "crs_overhead = " << format_double(c.system.crs_overhead) << "\n"
    << "max_crs = " << c.system.max_crs << "\n"
    << "round_ms = " << format_double(c.system.round_ms) << "\n\n";
  o << "[experiment]\n"
    << "seed = " << c.seed << "\n"
    << "replications = " << c.replications << "\n"
    << "max_replications = " << c.max_replications << "\n"
    << "ci_target = " << format_double(c.ci_target) << "\n"
    << "trace = " << str(c.trace) << "\n"
    << "parallel = " << c.parallel << "\n"
    << "round_cap = " << c.round_cap << "\n"
    << "out_dir = " << c.out_dir << "\n\n";
  o << "[scenarios]\n"
    << "shapes = " << join(c.shapes, shape) << "\n"
    << "ue_counts = " << join(c.ue_counts, num) << "\n"
    << "window_ms = " << format_double(c.window_ms) << "\n"
    << "beta_alpha = " << format_double(c.beta_alpha) << "\n"
    << "beta_beta = " << format_double(c.beta_beta) << "\n\n";
  o << "[protocols]\n"
    << "dbca_c = " << join(c.dbca_c, format_double) << "\n"
    << "dacb = " << join(c.dacb, mode) << "\n"
    << "qtra_q = " << join(c.qtra_q, num) << "\n"
    << "estimator_base = " << estimator::to_string(c.dbca_options.update_base) << "\n"
    << "crs_rounding = " << str(c.dbca_options.crs_rounding) << "\n"
    << "constraint = " << str(c.dbca_options.constraint) << "\n"
    << "p_solver = " << str(c.dbca_options.fixed_k_path) << "\n"
    << "budget_reference = " << sim::to_string(c.dbca_options.budget_reference) << "\n\n";
  o << "[analyze]\n"
    << "backlogs = " << join(c.backlogs, format_double) << "\n"
    << "crs_counts = " << join(c.crs_counts, num) << "\n"
    << "curve_points = " << c.curve_points << "\n"
    << "pareto_points = " << c.pareto_points << "\n"
    << "drift_epsilon = " << format_double(c.drift_epsilon) << "\n"
    << "drift_round_cap = " << c.drift_round_cap << "\n\n";
  o << "[validate]\n"
    << "checks = " << join(c.checks, ident) << "\n"
    << "bridge_rounds = " << c.bridge_rounds << "\n";
  return o.str();
}

/// 64-bit FNV-1a of the canonical text, printed in output headers.
inline std::uint64_t hash(const ExperimentConfig& c) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize(c)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace dbca::config
