// Command-line driver: run, sweep, validate-config, replay.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "ionsim/config.hpp"
#include "ionsim/harness.hpp"

namespace fs = std::filesystem;
using namespace ionsim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

void log_line(const std::string& message) { std::clog << "[simulate] " << message << '\n'; }

int cmd_run(const std::string& config_path, const std::vector<std::string>& sets,
            const std::string& out) {
  RunConfig config = load_config(config_path, sets);
  const fs::path dir = out.empty() ? fs::path(config.output_dir) : fs::path(out);
  try {
    const ResultBundle bundle = run_experiment(config, nullptr, log_line);
    write_bundle(bundle, dir);
  } catch (const Error& e) {
    write_failure(dir, &config, e.what());
    throw;
  }
  log_line("bundle written to " + dir.string() + " (config " + config.hash() + ")");
  return kExitOk;
}

int cmd_sweep(const std::string& config_path, const std::vector<std::string>& sets,
              const std::string& grid_path, const std::string& out, int workers) {
  const RunConfig base = load_config(config_path, sets);
  const auto grid = read_grid(grid_path);
  const int n = workers > 0 ? workers : default_workers();
  log_line(std::to_string(grid.size()) + " grid points, " + std::to_string(n) + " workers");
  const SweepResult result = run_sweep(base, grid, out, n, log_line);
  log_line(std::to_string(result.points.size() - result.failures()) + " of " +
           std::to_string(result.points.size()) + " points succeeded");
  if (result.failures() == 0) return kExitOk;
  for (const auto& p : result.points)
    if (!p.ok && p.error_kind == kExitNumerical) return kExitNumerical;
  return kExitConfig;
}

int cmd_validate(const std::string& config_path, const std::vector<std::string>& sets) {
  const RunConfig config = load_config(config_path, sets);
  std::cout << "# config_hash = " << config.hash() << '\n' << config.canonical_text();
  return kExitOk;
}

int cmd_replay(const std::string& bundle, const std::string& out) {
  const ResultBundle b = replay(bundle, log_line);
  const fs::path dir = out.empty() ? fs::path(bundle) / "replay" : fs::path(out);
  write_bundle(b, dir);
  log_line("replayed analysis written to " + dir.string());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Simulate diabatic ramps of long-range transverse-field Ising chains"};
  app.require_subcommand(1);

  std::string config_path, out, grid_path, bundle;
  std::vector<std::string> sets;
  int workers = 0;

  auto* run = app.add_subcommand("run", "Run one experiment and write a result bundle");
  run->add_option("--config", config_path, "Key-value config file")->check(CLI::ExistingFile);
  run->add_option("--set", sets, "Override a config key (key=value)")->take_all();
  run->add_option("--out", out, "Bundle directory (default: output.dir)");

  auto* sweep = app.add_subcommand("sweep", "Run a grid of experiments");
  sweep->add_option("--config", config_path, "Base config file")->check(CLI::ExistingFile);
  sweep->add_option("--set", sets, "Override a base config key (key=value)")->take_all();
  sweep->add_option("--grid", grid_path, "Grid file (key = v1, v2, ...)")
      ->required()
      ->check(CLI::ExistingFile);
  sweep->add_option("--out", out, "Sweep directory")->required();
  sweep->add_option("--workers", workers, "Worker threads (default: IONSIM_WORKERS or cores)");

  auto* validate = app.add_subcommand("validate-config", "Print the canonical config and hash");
  validate->add_option("--config", config_path, "Key-value config file")->check(CLI::ExistingFile);
  validate->add_option("--set", sets, "Override a config key (key=value)")->take_all();

  auto* rep = app.add_subcommand("replay", "Recompute the analysis of a stored bundle");
  rep->add_option("--bundle", bundle, "Bundle directory")->required()->check(CLI::ExistingDirectory);
  rep->add_option("--out", out, "Output directory (default: <bundle>/replay)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run) return cmd_run(config_path, sets, out);
    if (*sweep) return cmd_sweep(config_path, sets, grid_path, out, workers);
    if (*validate) return cmd_validate(config_path, sets);
    if (*rep) return cmd_replay(bundle, out);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const NumericalError& e) {
    std::cerr << "numerical failure: " << e.what() << '\n';
    return kExitNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return kExitOk;
}
