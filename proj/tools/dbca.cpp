// dbca: analytic tables, burst simulations and self-checks.

#include <cstdint>
#include <exception>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "dbca/config.hpp"
#include "dbca/experiment.hpp"

namespace {

struct Options {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool trace = false;
  std::optional<std::size_t> parallel;
  std::string fault;
};

dbca::config::ExperimentConfig load(const Options& o) {
  auto cfg = o.config_path.empty() ? dbca::config::ExperimentConfig{}
                                   : dbca::config::load(o.config_path);
  if (o.seed) cfg.seed = *o.seed;
  if (o.parallel) cfg.parallel = *o.parallel;
  if (o.trace && cfg.trace == dbca::config::TraceMode::off) cfg.trace = dbca::config::TraceMode::first;
  dbca::config::validate(cfg);
  return cfg;
}

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("-c,--config", o.config_path, "experiment config file (INI)")
      ->check(CLI::ExistingFile);
  cmd->add_option("--seed", o.seed, "master seed (overrides the config)");
  cmd->add_option("-o,--out", o.out,
                  std::string("output directory (default: config, $") + dbca::cli::kOutDirEnv +
                      ", ./out)");
  cmd->add_option("-j,--parallel", o.parallel, "worker threads for replications")
      ->check(CLI::PositiveNumber);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Dynamic binary countdown access: analysis, simulation and validation"};
  app.require_subcommand(1);
  Options o;

  auto* analyze = app.add_subcommand("analyze", "write throughput, Pareto and drift tables");
  add_common(analyze, o);
  auto* simulate = app.add_subcommand("simulate", "run the protocol x scenario x N grid");
  add_common(simulate, o);
  simulate->add_flag("--trace", o.trace, "write per-round traces (first replication)");
  auto* validate = app.add_subcommand("validate", "run the self-checks; nonzero exit on breach");
  add_common(validate, o);
  validate->add_option("--inject-fault", o.fault, "corrupt a formula (negative control)")
      ->group("");

  CLI11_PARSE(app, argc, argv);

  try {
    const auto cfg = load(o);
    const auto out = dbca::cli::resolve_out_dir(o.out, cfg);
    if (analyze->parsed()) {
      for (const auto& p : dbca::cli::cmd_analyze(cfg, out)) std::cout << p.string() << "\n";
      return 0;
    }
    if (simulate->parsed()) {
      const auto report = dbca::cli::cmd_simulate(cfg, out);
      for (const auto& p : report.written) std::cout << p.string() << "\n";
      return 0;
    }
    const auto report = dbca::cli::cmd_validate(cfg, std::cout, dbca::cli::parse_fault(o.fault));
    return report.passed ? 0 : 1;
  } catch (const dbca::config::ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
}
