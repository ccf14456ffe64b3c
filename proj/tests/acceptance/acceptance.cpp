// Acceptance run: one PASS/FAIL line per criterion, then a summary.
// Exit status is the number of failed criteria.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "dbca/config.hpp"
#include "dbca/experiment.hpp"
#include "dbca/validation.hpp"

using namespace dbca;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

struct Line {
  int id;
  bool passed;
  std::string detail;
  double seconds;
};

std::vector<Line> g_lines;

void report(int id, bool passed, const std::string& detail, Clock::time_point start) {
  const double s = std::chrono::duration<double>(Clock::now() - start).count();
  g_lines.push_back({id, passed, detail, s});
  std::printf("criterion %2d: %s  %s  [%.1f s]\n", id, passed ? "PASS" : "FAIL", detail.c_str(), s);
  std::fflush(stdout);
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream o;
  o.precision(digits);
  o << v;
  return o.str();
}

config::ExperimentConfig base_config() {
  config::ExperimentConfig c;
  c.parallel = std::max(1u, std::thread::hardware_concurrency());
  return c;
}

void analytic_criterion(int id, const std::string& check, const config::ExperimentConfig& cfg) {
  const auto start = Clock::now();
  const cli::CheckContext ctx{cfg};
  const auto r = cli::run_check(check, ctx);
  report(id, r.passed, r.detail, start);
}

// Paired-seed cell summaries at a fixed replication count.
struct Grid {
  std::map<std::string, metrics::MetricSummary> cells;

  static std::string key(traffic::ArrivalShape shape, std::size_t n, const std::string& what) {
    return std::string(traffic::to_string(shape)) + "/" + std::to_string(n) + "/" + what;
  }
  const metrics::MetricSummary& at(traffic::ArrivalShape shape, std::size_t n,
                                   const std::string& what) const {
    return cells.at(key(shape, n, what));
  }
};

std::string label(const cli::Job& job) {
  switch (job.protocol) {
    case cli::Protocol::dbca: return "dbca" + cli::detail::num(job.c);
    case cli::Protocol::dacb: return "dacb_" + std::string(sim::to_string(job.mode));
    case cli::Protocol::qtra: return "qtra" + std::to_string(job.q);
  }
  return "";
}

double upper(const metrics::Estimate& e) { return e.mean + e.ci_halfwidth.value_or(0.0); }
double lower(const metrics::Estimate& e) { return e.mean - e.ci_halfwidth.value_or(0.0); }

// a < b with non-overlapping 95% intervals.
bool clearly_less(const metrics::Estimate& a, const metrics::Estimate& b) {
  return upper(a) < lower(b);
}

void criterion_ordering() {
  const auto start = Clock::now();
  auto cfg = base_config();
  cfg.shapes = {traffic::ArrivalShape::delta, traffic::ArrivalShape::beta};
  cfg.ue_counts = {2000, 5000, 10000};
  cfg.dacb = {sim::DacbMode::estimated};
  cfg.replications = 30;
  cfg.max_replications = 30;

  Grid grid;
  for (const auto& job : cli::simulation_jobs(cfg)) {
    const auto cell = cli::run_cell(job, cfg);
    grid.cells[Grid::key(job.shape, job.ue_count, label(job))] = cell.summary;
  }

  std::vector<std::string> breaches;
  std::size_t checks = 0;
  double worst_u = 1.0;
  const auto expect = [&](bool ok, const std::string& what) {
    ++checks;
    if (!ok) breaches.push_back(what);
  };
  for (auto shape : cfg.shapes) {
    for (std::size_t n : cfg.ue_counts) {
      const std::string at = std::string(traffic::to_string(shape)) + " N=" + std::to_string(n);
      const auto& d1 = grid.at(shape, n, "dbca1");
      const auto& d14 = grid.at(shape, n, "dbca1.4");
      const auto& d18 = grid.at(shape, n, "dbca1.8");
      const auto& acb = grid.at(shape, n, "dacb_estimated");
      expect(clearly_less(d1.service_time_ms, acb.service_time_ms),
             "(a) " + at + ": service " + fmt(d1.service_time_ms.mean) + " vs " +
                 fmt(acb.service_time_ms.mean));
      expect(clearly_less(d1.total_resources, acb.total_resources),
             "(b) " + at + ": resources " + fmt(d1.total_resources.mean) + " vs " +
                 fmt(acb.total_resources.mean));
      expect(clearly_less(d14.service_time_ms, d1.service_time_ms) &&
                 clearly_less(d18.service_time_ms, d14.service_time_ms),
             "(c) " + at + ": service " + fmt(d1.service_time_ms.mean) + " > " +
                 fmt(d14.service_time_ms.mean) + " > " + fmt(d18.service_time_ms.mean));
      if (shape == traffic::ArrivalShape::delta && n >= 4000) {
        for (const auto* s : {&d1, &d14}) {
          const double u = s->efficiency.mean;
          worst_u = std::min(worst_u, u);
          expect(u >= 0.35, "(d) " + at + " C=" + (s == &d1 ? "1" : "1.4") + ": U = " + fmt(u));
        }
      }
      expect(grid.at(shape, n, "qtra8").total_resources.mean <
                 grid.at(shape, n, "qtra2").total_resources.mean,
             "(e) " + at + ": q-TRA resources " +
                 fmt(grid.at(shape, n, "qtra8").total_resources.mean) + " vs " +
                 fmt(grid.at(shape, n, "qtra2").total_resources.mean));
    }
  }
  std::string detail = std::to_string(checks - breaches.size()) + "/" + std::to_string(checks) +
                       " orderings hold; lowest delta U (C<=1.4, N>=4000) " + fmt(worst_u);
  for (const auto& b : breaches) detail += "\n              breach " + b;
  report(8, breaches.empty(), detail, start);
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    files[fs::relative(e.path(), root).string()] = s.str();
  }
  return files;
}

void criterion_determinism() {
  const auto start = Clock::now();
  auto cfg = base_config();
  cfg.ue_counts = {1000};
  cfg.replications = 5;
  cfg.max_replications = 5;
  cfg.trace = config::TraceMode::all;
  const auto root = fs::temp_directory_path() / "dbca_acceptance_determinism";
  fs::remove_all(root);
  std::ostringstream quiet;
  cli::cmd_simulate(cfg, root / "a", quiet);
  cli::cmd_simulate(cfg, root / "b", quiet);
  auto serial = cfg;
  serial.parallel = 1;
  cli::cmd_simulate(serial, root / "c", quiet);
  const auto a = read_tree(root / "a");
  const bool same = a == read_tree(root / "b") && a == read_tree(root / "c");
  fs::remove_all(root);
  report(9, same && a.size() > 2,
         std::to_string(a.size()) + " CSV files compared across three runs" +
             (same ? ", byte-identical" : ", contents differ"),
         start);
}

void criterion_confidence() {
  const auto start = Clock::now();
  auto cfg = base_config();
  std::size_t cells = 0;
  std::size_t met_initially = 0;
  std::size_t met = 0;
  std::size_t max_reps = 0;
  std::vector<std::string> missed;
  for (const auto& job : cli::simulation_jobs(cfg)) {
    const auto cell = cli::run_cell(job, cfg);
    ++cells;
    met_initially += cell.met_initially ? 1 : 0;
    met += cell.met ? 1 : 0;
    max_reps = std::max(max_reps, cell.summary.replications);
    if (!cell.met)
      missed.push_back(std::string(traffic::to_string(job.shape)) + " N=" +
                       std::to_string(job.ue_count) + " " + label(job) + " at " +
                       fmt(100.0 * cell.worst_relative_halfwidth) + "%");
  }
  std::string detail = std::to_string(met_initially) + "/" + std::to_string(cells) +
                       " cells within " + fmt(100.0 * cfg.ci_target) + "% at " +
                       std::to_string(cfg.replications) + " replications; " +
                       std::to_string(met) + "/" + std::to_string(cells) +
                       " after escalation (largest cell " + std::to_string(max_reps) + ")";
  for (const auto& m : missed) detail += "\n              not met " + m;
  report(10, met == cells, detail, start);
}

}  // namespace

int main() {
  const auto start = Clock::now();
  const auto cfg = base_config();
  std::printf("acceptance run, %zu worker thread(s)\n", cfg.parallel);

  analytic_criterion(1, "bridge", cfg);
  analytic_criterion(2, "aloha", cfg);
  analytic_criterion(3, "pareto", cfg);
  analytic_criterion(4, "unimodal", cfg);
  analytic_criterion(5, "root_finder", cfg);
  analytic_criterion(6, "crs_rule", cfg);
  analytic_criterion(7, "drift", cfg);
  criterion_ordering();
  criterion_determinism();
  criterion_confidence();

  int failed = 0;
  for (const auto& l : g_lines) failed += l.passed ? 0 : 1;
  std::printf("%zu/%zu criteria passed  [%.1f s total]\n", g_lines.size() - failed, g_lines.size(),
              std::chrono::duration<double>(Clock::now() - start).count());
  return failed;
}
