// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdlib>
#include <filesystem>
#include <iomanip>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "fdsim/config.hpp"
#include "fdsim/engine.hpp"
#include "fdsim/metrics.hpp"
#include "fdsim/projector.hpp"

namespace fdsim {

inline std::string default_out_dir() {
  const char* root = std::getenv("FDSIM_OUT_ROOT");
  return (root != nullptr ? std::string(root) : std::string("runs")) + "/run";
}

struct RunOutputs {
  std::filesystem::path dir;
  std::filesystem::path config;
  std::filesystem::path metrics;
  std::filesystem::path snapshots;
};

// Execute a run and persist everything needed to reproduce or analyze it:
// the resolved config, the JSON-lines metrics log and the snapshot
// archive. Prints final per-device accuracy and the total transferred
// bytes.
inline RunOutputs run_experiment(const ExperimentConfig& cfg, std::ostream& log) {
  Experiment exp = materialize(cfg);
  if (cfg.allow_disconnected && !exp.sim.graph.is_connected())
    log << "warning: graph is disconnected; consensus cannot reach all devices\n";

  const RunResult result =
      run(exp.sim, std::move(exp.shards), exp.shared, exp.test_set, exp.probe);

  RunOutputs paths;
  paths.dir = cfg.out.empty() ? std::filesystem::path(default_out_dir())
                              : std::filesystem::path(cfg.out);
  std::filesystem::create_directories(paths.dir);
  paths.config = paths.dir / "config.json";
  paths.metrics = paths.dir / "metrics.jsonl";
  paths.snapshots = paths.dir / "snapshots.bin";

  {
    std::ofstream out(paths.config, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + paths.config.string());
    out << to_json(cfg).dump(2) << '\n';
  }
  write_metrics_jsonl(result.metrics, paths.metrics.string());
  write_snapshots(result.snapshots, paths.snapshots.string());

  if (!result.metrics.empty()) {
    const RoundMetrics& last = result.metrics.back();
    log << "final test accuracy per device:";
    for (double acc : last.test_acc) log << ' ' << std::fixed << std::setprecision(4) << acc;
    log << "\ntotal transferred bytes: " << last.cum_bytes << '\n';
  } else {
    log << "no rounds executed; wrote initial snapshot only\n";
  }
  log << "outputs in " << paths.dir.string() << '\n';
  return paths;
}

// Project a run's snapshot archive to 2D and write trajectory.csv plus
// the two colorings of the trajectory plot.
inline void project_snapshots(const std::filesystem::path& snapshot_path,
                              const std::filesystem::path& out_dir, std::ostream& log) {
  std::filesystem::path file = snapshot_path;
  if (std::filesystem::is_directory(file)) file /= "snapshots.bin";
  const SnapshotArchive archive = read_snapshots(file.string());
  const auto points = project_archive(archive);
  std::filesystem::create_directories(out_dir);
  export_trajectory(points, (out_dir / "trajectory.csv").string());
  if (!points.empty()) {
    render_svg(points, ColorBy::kDevice, (out_dir / "trajectory_by_device.svg").string());
    render_svg(points, ColorBy::kRound, (out_dir / "trajectory_by_round.svg").string());
  }
  log << "projected " << points.size() << " snapshot points from " << archive.num_devices
      << " devices into " << out_dir.string() << '\n';
}

namespace detail {

struct SchemeSummary {
  std::string label;
  std::vector<std::size_t> rounds;
  std::vector<double> mean_acc;
  std::vector<std::uint64_t> cum_bytes;
};

inline SchemeSummary summarize_log(const std::filesystem::path& path) {
  SchemeSummary s;
  const auto parent = path.parent_path().filename().string();
  s.label = parent.empty() ? path.stem().string() : parent;
  // (round -> (sum acc, count, bytes)) keyed in round order
  std::map<std::size_t, std::pair<std::pair<double, std::size_t>, std::uint64_t>> per_round;
  for (const MetricsRecord& r : read_metrics_jsonl(path.string())) {
    auto& slot = per_round[r.t];
    slot.first.first += r.test_acc;
    slot.first.second += 1;
    slot.second = r.cum_bytes;
  }
  std::uint64_t prev_bytes = 0;
  for (const auto& [t, v] : per_round) {
    s.rounds.push_back(t);
    s.mean_acc.push_back(v.first.first / static_cast<double>(v.first.second));
    if (v.second < prev_bytes)
      throw std::runtime_error(path.string() + ": cum_bytes decreases at round " +
                               std::to_string(t));
    prev_bytes = v.second;
    s.cum_bytes.push_back(v.second);
  }
  return s;
}

}  // namespace detail

// Cross-run comparison: per-scheme (round, mean accuracy, cumulative
// bytes) CSV plus a text table of the bytes each scheme needed to first
// reach the target accuracy.
inline void write_report(const std::vector<std::filesystem::path>& logs, double target_acc,
                         const std::filesystem::path& out_csv, std::ostream& log) {
  std::vector<detail::SchemeSummary> schemes;
  schemes.reserve(logs.size());
  for (const auto& p : logs) schemes.push_back(detail::summarize_log(p));

  std::ofstream csv(out_csv, std::ios::binary | std::ios::trunc);
  if (!csv) throw std::runtime_error("cannot write " + out_csv.string());
  csv << "scheme,round,accuracy,cum_bytes\n";
  for (const auto& s : schemes)
    for (std::size_t i = 0; i < s.rounds.size(); ++i)
      csv << s.label << ',' << s.rounds[i] << ',' << detail::fmt_g17(s.mean_acc[i]) << ','
          << s.cum_bytes[i] << '\n';

  log << "scheme  rounds  final_acc  total_bytes  bytes_to_acc>=" << target_acc << '\n';
  for (const auto& s : schemes) {
    std::string bytes_to = "-";
    for (std::size_t i = 0; i < s.rounds.size(); ++i) {
      if (s.mean_acc[i] >= target_acc) {
        bytes_to = std::to_string(s.cum_bytes[i]);
        break;
      }
    }
    log << s.label << "  " << s.rounds.size() << "  " << std::fixed << std::setprecision(4)
        << (s.mean_acc.empty() ? 0.0 : s.mean_acc.back()) << "  "
        << (s.cum_bytes.empty() ? 0 : s.cum_bytes.back()) << "  " << bytes_to << '\n';
  }
}

}  // namespace fdsim
