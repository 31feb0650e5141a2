// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <fstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "fdsim/engine.hpp"

namespace fdsim {

struct MetricsRecord {
  std::size_t t = 0;
  std::size_t device = 0;
  double local_loss = 0.0;
  double distill_loss = 0.0;
  double test_acc = 0.0;
  std::uint64_t cum_bytes = 0;
};

// One JSON object per line per (round, device). Keys are emitted in a
// fixed order and doubles use the shortest round-trip form, so identical
// runs produce byte-identical logs.
inline void write_metrics_jsonl(std::span<const RoundMetrics> rounds, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("write_metrics_jsonl: cannot open " + path);
  for (const RoundMetrics& rm : rounds) {
    for (std::size_t dev = 0; dev < rm.local_loss.size(); ++dev) {
      nlohmann::ordered_json j;
      j["t"] = rm.round;
      j["device"] = dev;
      j["local_loss"] = rm.local_loss[dev];
      j["distill_loss"] = rm.distill_loss[dev];
      j["test_acc"] = rm.test_acc[dev];
      j["cum_bytes"] = rm.cum_bytes;
      out << j.dump() << '\n';
    }
  }
  if (!out) throw std::runtime_error("write_metrics_jsonl: write failed: " + path);
}

// Errors are reported as "<path>:<line>: <reason>".
inline std::vector<MetricsRecord> read_metrics_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("read_metrics_jsonl: cannot open " + path);
  std::vector<MetricsRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      MetricsRecord r;
      r.t = j.at("t").get<std::size_t>();
      r.device = j.at("device").get<std::size_t>();
      r.local_loss = j.at("local_loss").get<double>();
      r.distill_loss = j.at("distill_loss").get<double>();
      r.test_acc = j.at("test_acc").get<double>();
      r.cum_bytes = j.at("cum_bytes").get<std::uint64_t>();
      records.push_back(r);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return records;
}

}  // namespace fdsim
