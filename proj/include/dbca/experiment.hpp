#pragma once

// The three CLI commands: analytic tables, the protocol x scenario x N
// simulation grid, and the self-check report. All output is plain CSV with a
// leading '#' row carrying the schema version and config hash.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dbca/analytics.hpp"
#include "dbca/config.hpp"
#include "dbca/metrics.hpp"
#include "dbca/optimizer.hpp"
#include "dbca/sim.hpp"
#include "dbca/validation.hpp"

namespace dbca::cli {

inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kOutDirEnv = "DBCA_OUT_DIR";

/// --out, then the config, then $DBCA_OUT_DIR, then ./out.
inline std::filesystem::path resolve_out_dir(const std::optional<std::string>& flag,
                                             const config::ExperimentConfig& cfg) {
  if (flag && !flag->empty()) return *flag;
  if (!cfg.out_dir.empty()) return cfg.out_dir;
  if (const char* env = std::getenv(kOutDirEnv); env && *env) return env;
  return "out";
}

namespace detail {

inline std::string num(double v) {
  if (std::isnan(v)) return "";
  return config::detail::format_double(v);
}

inline std::string hex(std::uint64_t v) {
  std::ostringstream o;
  o << std::hex << std::setw(16) << std::setfill('0') << v;
  return o.str();
}

class CsvFile {
 public:
  CsvFile(const std::filesystem::path& path, const std::string& schema,
          const config::ExperimentConfig& cfg, const std::string& header)
      : path_(path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write '" + path.string() + "'");
    out_ << "# schema=" << schema << "/" << kSchemaVersion << " config_hash=" << hex(config::hash(cfg))
         << " seed=" << cfg.seed << "\n"
         << header << "\n";
  }

  template <class... Fields>
  void row(const Fields&... fields) {
    std::size_t i = 0;
    ((out_ << (i++ ? "," : "") << fields), ...);
    out_ << "\n";
  }

  void close() {
    out_.close();
    if (!out_) throw std::runtime_error("failed writing '" + path_.string() + "'");
  }

 private:
  std::filesystem::path path_;
  std::ofstream out_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// analyze

/// Writes throughput_curves.csv, pareto_frontier.csv, pareto_curves.csv and
/// drift.csv under `out`.
inline std::vector<std::filesystem::path> cmd_analyze(const config::ExperimentConfig& cfg,
                                                      const std::filesystem::path& out) {
  config::validate(cfg);
  using detail::num;
  const auto& sys = cfg.system;
  std::vector<std::filesystem::path> written;

  {
    detail::CsvFile f(out / "throughput_curves.csv", "throughput_curves", cfg,
                      "n,k,p,throughput,occupied,resources_rb");
    for (double n : cfg.backlogs)
      for (int k : cfg.crs_counts)
        for (std::size_t j = 1; j <= cfg.curve_points; ++j) {
          const model::OperatingPoint pt{analytics::grid_probability(j, cfg.curve_points), k};
          f.row(num(n), k, num(pt.access_probability),
                num(analytics::expected_throughput(n, pt.access_probability, k, sys.preambles)),
                num(analytics::expected_occupied(n, pt.access_probability, sys.preambles)),
                num(analytics::expected_resources(n, pt, sys)));
        }
    f.close();
    written.push_back(out / "throughput_curves.csv");
  }

  {
    detail::CsvFile front(out / "pareto_frontier.csv", "pareto_frontier", cfg,
                          "n,p,k,throughput,resources_rb");
    detail::CsvFile curves(out / "pareto_curves.csv", "pareto_curves", cfg,
                           "n,k,p,throughput,resources_rb");
    for (double n : cfg.backlogs) {
      const auto result = analytics::pareto_frontier(n, sys, cfg.pareto_points);
      for (const auto& pt : result.frontier)
        front.row(num(n), num(pt.point.access_probability), pt.point.crs_slots, num(pt.throughput),
                  num(pt.resources));
      for (const auto& curve : result.curves)
        for (const auto& pt : curve)
          curves.row(num(n), pt.point.crs_slots, num(pt.point.access_probability),
                     num(pt.throughput), num(pt.resources));
    }
    front.close();
    curves.close();
    written.push_back(out / "pareto_frontier.csv");
    written.push_back(out / "pareto_curves.csv");
  }

  {
    detail::CsvFile f(out / "drift.csv", "drift", cfg, "scenario,N,policy,C,rounds_to_resolution");
    for (auto shape : cfg.shapes) {
      for (std::size_t n : cfg.ue_counts) {
        const auto scenario = cfg.scenario(shape, n);
        const auto dacb = analytics::drift_burst_resolution(
            scenario,
            [&](double b) {
              return model::OperatingPoint{optimizer::aloha_optimal_p(b, sys.preambles), 0};
            },
            sys, cfg.drift_epsilon, cfg.drift_round_cap);
        f.row(traffic::to_string(shape), n, "dacb", "", dacb.rounds_to_resolution);
        for (double c : cfg.dbca_c) {
          const auto dbca = analytics::drift_burst_resolution(
              scenario,
              [&](double b) {
                if (b < 1.0) return model::OperatingPoint{1.0, 0};
                return optimizer::solve_operating_point(
                    b, optimizer::ResourceBudget::proportional(c, b, sys), sys,
                    cfg.dbca_options.fixed_k_path);
              },
              sys, cfg.drift_epsilon, cfg.drift_round_cap);
          f.row(traffic::to_string(shape), n, "dbca", num(c), dbca.rounds_to_resolution);
        }
      }
    }
    f.close();
    written.push_back(out / "drift.csv");
  }
  return written;
}

// ---------------------------------------------------------------------------
// simulate

enum class Protocol { dbca, dacb, qtra };

inline std::string_view to_string(Protocol p) {
  switch (p) {
    case Protocol::dbca: return "dbca";
    case Protocol::dacb: return "dacb";
    case Protocol::qtra: return "qtra";
  }
  return "?";
}

/// One cell of the simulation grid.
struct Job {
  traffic::ArrivalShape shape = traffic::ArrivalShape::delta;
  std::size_t ue_count = 0;
  Protocol protocol = Protocol::dbca;
  double c = 1.0;                               // dbca
  sim::DacbMode mode = sim::DacbMode::estimated;  // dacb
  int q = 2;                                    // qtra

  std::string variant(const config::ExperimentConfig& cfg) const {
    switch (protocol) {
      case Protocol::dbca: return std::string(sim::to_string(cfg.dbca_options.budget_reference));
      case Protocol::dacb: return std::string(sim::to_string(mode));
      case Protocol::qtra: return "gated";
    }
    return "";
  }

  std::string parameter() const {
    switch (protocol) {
      case Protocol::dbca: return detail::num(c);
      case Protocol::dacb: return "";
      case Protocol::qtra: return std::to_string(q);
    }
    return "";
  }
};

/// Grid in output order: scenario, N, then DBCA (by C), d-ACB, q-TRA.
inline std::vector<Job> simulation_jobs(const config::ExperimentConfig& cfg) {
  std::vector<Job> jobs;
  for (auto shape : cfg.shapes) {
    for (std::size_t n : cfg.ue_counts) {
      for (double c : cfg.dbca_c) jobs.push_back({shape, n, Protocol::dbca, c, {}, 2});
      for (auto mode : cfg.dacb) jobs.push_back({shape, n, Protocol::dacb, 1.0, mode, 2});
      for (int q : cfg.qtra_q) jobs.push_back({shape, n, Protocol::qtra, 1.0, {}, q});
    }
  }
  return jobs;
}

/// Replication index r uses the same (seed, r) streams for every protocol.
inline sim::SimulationResult run_job(const Job& job, const config::ExperimentConfig& cfg,
                                     std::size_t replication) {
  const auto scenario = cfg.scenario(job.shape, job.ue_count);
  switch (job.protocol) {
    case Protocol::dbca: {
      auto options = cfg.dbca_options;
      options.proportionality = job.c;
      return sim::run_dbca(scenario, cfg.system, options, cfg.seed, replication, cfg.round_cap);
    }
    case Protocol::dacb:
      return sim::run_dacb(scenario, cfg.system, job.mode, cfg.seed, replication, cfg.round_cap,
                           cfg.dbca_options.update_base);
    case Protocol::qtra:
      return sim::run_qtra(scenario, cfg.system, job.q, cfg.seed, replication, cfg.round_cap);
  }
  throw DomainError("unknown protocol");
}

/// Per-replication figures kept after a run; the trace only when requested.
struct RunRecord {
  double service_ms = 0.0;
  double resources = 0.0;
  double efficiency = 0.0;
  double rounds = 0.0;
  std::vector<sim::TraceRow> trace;
};

struct CellResult {
  Job job;
  metrics::MetricSummary summary;
  std::size_t initial_replications = 0;
  bool met_initially = false;
  bool met = false;
  double worst_relative_halfwidth = 0.0;
  std::vector<RunRecord> runs;
};

inline metrics::MetricSummary summarize_records(const std::vector<RunRecord>& runs) {
  std::vector<double> service, resources, efficiency, rounds;
  for (const auto& r : runs) {
    service.push_back(r.service_ms);
    resources.push_back(r.resources);
    efficiency.push_back(r.efficiency);
    rounds.push_back(r.rounds);
  }
  metrics::MetricSummary s;
  s.service_time_ms = metrics::estimate(service);
  s.total_resources = metrics::estimate(resources);
  s.efficiency = metrics::estimate(efficiency);
  s.rounds = metrics::estimate(rounds);
  s.replications = runs.size();
  return s;
}

inline double worst_relative_halfwidth(const metrics::MetricSummary& s) {
  return std::max({s.service_time_ms.relative_halfwidth(), s.total_resources.relative_halfwidth(),
                   s.efficiency.relative_halfwidth()});
}

/// Runs a cell, adding replications while any halfwidth exceeds the target,
/// up to max_replications. Results do not depend on the worker count.
inline CellResult run_cell(const Job& job, const config::ExperimentConfig& cfg) {
  CellResult cell;
  cell.job = job;
  cell.initial_replications = cfg.replications;
  std::size_t target = cfg.replications;
  bool first_pass = true;
  for (;;) {
    const std::size_t begin = cell.runs.size();
    cell.runs.resize(target);
    detail::parallel_for(target - begin, cfg.parallel, [&](std::size_t i) {
      const std::size_t r = begin + i;
      auto result = run_job(job, cfg, r);
      auto& rec = cell.runs[r];
      rec.service_ms = metrics::mean_service_time(result);
      rec.resources = result.total_resources;
      rec.efficiency = metrics::run_efficiency(result, cfg.system);
      rec.rounds = static_cast<double>(result.rounds_to_resolution);
      const bool keep = cfg.trace == config::TraceMode::all ||
                        (cfg.trace == config::TraceMode::first && r == 0);
      if (keep) rec.trace = std::move(result.trace);
    });
    cell.summary = summarize_records(cell.runs);
    cell.worst_relative_halfwidth = worst_relative_halfwidth(cell.summary);
    const bool met = cell.runs.size() < 2 || cell.worst_relative_halfwidth <= cfg.ci_target;
    if (first_pass) cell.met_initially = met;
    first_pass = false;
    cell.met = met;
    if (met || target >= cfg.max_replications) break;
    // Halfwidths shrink like 1/sqrt(R); aim a little past the estimate.
    const double ratio = cell.worst_relative_halfwidth / cfg.ci_target;
    const auto needed =
        static_cast<std::size_t>(std::ceil(1.1 * static_cast<double>(target) * ratio * ratio));
    target = std::min(cfg.max_replications, std::max(needed, target + 1));
  }
  return cell;
}

inline std::string trace_file_name(const Job& job, const config::ExperimentConfig& cfg,
                                   std::size_t replication) {
  std::string name = "trace_" + std::string(traffic::to_string(job.shape)) + "_N" +
                     std::to_string(job.ue_count) + "_" + std::string(to_string(job.protocol)) +
                     "_" + job.variant(cfg);
  if (const auto param = job.parameter(); !param.empty()) name += "_" + param;
  return name + "_r" + std::to_string(replication) + ".csv";
}

inline void write_trace(const std::filesystem::path& path, const config::ExperimentConfig& cfg,
                        const std::vector<sim::TraceRow>& trace) {
  using detail::num;
  detail::CsvFile f(path, "trace", cfg,
                    "round,n_true,n_hat_prior,n_hat_post,q_boost,p,k,idle,occupied,successes,"
                    "resources_rb");
  for (const auto& r : trace)
    f.row(r.round, r.n_true, num(r.n_hat_prior), num(r.n_hat_post), num(r.q_boost), num(r.p), r.k,
          r.idle, r.occupied, r.successes, num(r.resources_rb));
  f.close();
}

struct SimulateReport {
  std::vector<CellResult> cells;
  std::vector<std::filesystem::path> written;
};

/// Runs every cell and writes summary.csv, precision.csv and any traces.
inline SimulateReport cmd_simulate(const config::ExperimentConfig& cfg,
                                   const std::filesystem::path& out, std::ostream& log = std::cerr) {
  config::validate(cfg);
  using detail::num;
  SimulateReport report;
  const auto ci = [](const metrics::Estimate& e) {
    return e.ci_halfwidth ? num(*e.ci_halfwidth) : std::string();
  };

  detail::CsvFile summary(out / "summary.csv", "summary", cfg,
                          "scenario,protocol,variant,N,C_or_q,replications,mean_service_time_ms,"
                          "ci_service,total_resources_rb,ci_resources,efficiency,ci_efficiency,"
                          "rounds_to_resolution");
  detail::CsvFile precision(out / "precision.csv", "precision", cfg,
                            "scenario,protocol,variant,N,C_or_q,initial_replications,"
                            "replications,worst_relative_halfwidth,target,met");
  for (const auto& job : simulation_jobs(cfg)) {
    auto cell = run_cell(job, cfg);
    const auto& s = cell.summary;
    const std::string shape(traffic::to_string(job.shape));
    const std::string protocol(to_string(job.protocol));
    summary.row(shape, protocol, job.variant(cfg), job.ue_count, job.parameter(), s.replications,
                num(s.service_time_ms.mean), ci(s.service_time_ms), num(s.total_resources.mean),
                ci(s.total_resources), num(s.efficiency.mean), ci(s.efficiency), num(s.rounds.mean));
    precision.row(shape, protocol, job.variant(cfg), job.ue_count, job.parameter(),
                  cell.initial_replications, s.replications, num(cell.worst_relative_halfwidth),
                  num(cfg.ci_target), cell.met ? "yes" : "no");
    if (s.replications > cell.initial_replications || !cell.met) {
      const auto param = job.parameter();
      log << shape << " " << protocol << " " << job.variant(cfg) << " N=" << job.ue_count
          << (param.empty() ? "" : " " + param) << ": " << s.replications
          << " replications, worst halfwidth "
          << detail::fmt(100.0 * cell.worst_relative_halfwidth, 4) << "%"
          << (cell.met ? "" : " (target not met)") << "\n";
    }
    for (std::size_t r = 0; r < cell.runs.size(); ++r) {
      if (cell.runs[r].trace.empty()) continue;
      const auto path = out / "traces" / trace_file_name(job, cfg, r);
      write_trace(path, cfg, cell.runs[r].trace);
      report.written.push_back(path);
      cell.runs[r].trace.clear();
      cell.runs[r].trace.shrink_to_fit();
    }
    report.cells.push_back(std::move(cell));
  }
  summary.close();
  precision.close();
  report.written.insert(report.written.begin(), {out / "summary.csv", out / "precision.csv"});
  return report;
}

// ---------------------------------------------------------------------------
// validate

/// Deliberate corruptions for negative-control runs.
enum class Fault { none, throughput };

inline Fault parse_fault(std::string_view s) {
  if (s.empty() || s == "none") return Fault::none;
  if (s == "throughput") return Fault::throughput;
  throw DomainError("unknown fault '" + std::string(s) + "'");
}

struct ValidateReport {
  std::vector<CheckResult> results;
  bool passed = true;
};

/// Runs the configured checks and prints a table; `passed` is false on any breach.
inline ValidateReport cmd_validate(const config::ExperimentConfig& cfg, std::ostream& out,
                                   Fault fault = Fault::none, std::ostream& log = std::cerr) {
  config::validate(cfg);
  ValidateReport report;
  CheckContext ctx{cfg};
  if (fault == Fault::throughput) {
    ctx.throughput = [](double n, double p, int k, int M) {
      return 1.01 * analytics::expected_throughput(n, p, k, M);
    };
  }
  if (cfg.checks.empty()) {
    log << "warning: no checks configured; nothing to validate\n";
    return report;
  }
  out << std::left << std::setw(13) << "check" << std::setw(8) << "result"
      << "detail\n";
  for (const auto& name : cfg.checks) {
    auto r = run_check(name, ctx);
    out << std::left << std::setw(13) << r.name << std::setw(8) << (r.passed ? "PASS" : "FAIL")
        << r.detail << "\n"
        << std::flush;
    report.passed = report.passed && r.passed;
    report.results.push_back(std::move(r));
  }
  return report;
}

}  // namespace dbca::cli
