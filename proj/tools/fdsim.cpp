// SPDX-License-Identifier: Apache-2.0

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fdsim/cli.hpp"
#include "fdsim/config.hpp"

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitRuntimeError = 3;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralized federated distillation simulator"};
  app.require_subcommand(1);

  std::string config_path;
  std::string seed_str;
  std::string schedule;
  std::string out;
  std::size_t rounds = 0;
  std::size_t threads = 0;
  auto* run_cmd = app.add_subcommand("run", "Execute a training run");
  run_cmd->add_option("--config", config_path, "JSON config file (defaults apply when omitted)");
  auto* seed_opt = run_cmd->add_option("--seed", seed_str, "Global seed (decimal or 0x-hex u64)");
  auto* schedule_opt =
      run_cmd->add_option("--schedule", schedule, "Schedule type: dccr|constant|full|isolated");
  auto* rounds_opt = run_cmd->add_option("--rounds", rounds, "Number of communication rounds");
  auto* threads_opt =
      run_cmd->add_option("--threads", threads, "Worker threads (outputs are identical for any value)");
  auto* out_opt =
      run_cmd->add_option("--out", out, "Output directory (default $FDSIM_OUT_ROOT/run or runs/run)");

  std::string snapshot_path;
  std::string project_out;
  auto* project_cmd = app.add_subcommand("project", "Embed a run's snapshots into 2D trajectories");
  project_cmd->add_option("snapshots", snapshot_path, "Run directory or snapshots.bin path")
      ->required();
  project_cmd->add_option("--out", project_out, "Output directory (default: next to the archive)");

  std::vector<std::string> logs;
  double target_acc = 0.7;
  std::string report_csv = "accuracy_vs_bytes.csv";
  auto* report_cmd = app.add_subcommand("report", "Summarize metrics logs into a comparison table");
  report_cmd->add_option("logs", logs, "metrics.jsonl files, one per scheme")->required();
  report_cmd->add_option("--target-acc", target_acc, "Accuracy level for the bytes-to-target column");
  report_cmd->add_option("--out", report_csv, "CSV output path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  try {
    if (run_cmd->parsed()) {
      fdsim::ExperimentConfig cfg;
      if (!config_path.empty()) cfg = fdsim::load_config(config_path);
      // Command-line flags override file values.
      if (seed_opt->count() > 0) cfg.seed = fdsim::detail::parse_seed(nlohmann::json(seed_str));
      if (schedule_opt->count() > 0) cfg.schedule = schedule;
      if (rounds_opt->count() > 0) cfg.rounds = rounds;
      if (threads_opt->count() > 0) cfg.threads = threads;
      if (out_opt->count() > 0) cfg.out = out;
      fdsim::run_experiment(cfg, std::cout);
      return 0;
    }
    if (project_cmd->parsed()) {
      const std::filesystem::path snap(snapshot_path);
      const std::filesystem::path out_dir =
          !project_out.empty()
              ? std::filesystem::path(project_out)
              : (std::filesystem::is_directory(snap) ? snap : snap.parent_path());
      fdsim::project_snapshots(snap, out_dir, std::cout);
      return 0;
    }
    if (report_cmd->parsed()) {
      const std::vector<std::filesystem::path> paths(logs.begin(), logs.end());
      fdsim::write_report(paths, target_acc, report_csv, std::cout);
      return 0;
    }
  } catch (const fdsim::ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitRuntimeError;
  }
  return 0;
}
