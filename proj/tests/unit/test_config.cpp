// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "fdsim/config.hpp"

using namespace fdsim;

TEST_SUITE("config") {
  TEST_CASE("defaults match the reference setup") {
    const ExperimentConfig c;
    CHECK(c.devices == 10);
    CHECK(c.graph == "ring_lattice");
    CHECK(c.graph_k == 6);
    CHECK(c.shared_size == 1000);
    CHECK_NOTHROW(validate(c));
  }

  TEST_CASE("minimal synthetic config is valid") {
    const auto c = config_from_json(nlohmann::json::parse(R"({"dataset": "synthetic"})"));
    CHECK_NOTHROW(validate(c));
    const Experiment e = materialize(c);
    CHECK(e.shards.size() == 10);
    CHECK(e.shared.size() == 1000);
    CHECK(e.sim.layer_sizes.front() == 2);
    CHECK(e.sim.layer_sizes.back() == 10);
  }

  TEST_CASE("validation names the offending key") {
    ExperimentConfig c;
    c.graph_k = 5;
    CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("graph_k"), ConfigError);
    c = ExperimentConfig{};
    c.schedule = "warp";
    CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("schedule"), ConfigError);
    c = ExperimentConfig{};
    c.dataset = "idx";
    CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("idx_train_images"), ConfigError);
    c = ExperimentConfig{};
    c.schedule_d = 5000;  // exceeds shared_size
    CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("schedule_d"), ConfigError);
    c = ExperimentConfig{};
    c.layers = {3, 10};  // front != synth_input_dim
    CHECK_THROWS_WITH_AS(validate(c), doctest::Contains("layers"), ConfigError);
  }

  TEST_CASE("unknown keys are rejected by name") {
    const auto j = nlohmann::json::parse(R"({"devices": 4, "divices": 4})");
    CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("divices"), ConfigError);
  }

  TEST_CASE("type errors are reported with the key") {
    const auto j = nlohmann::json::parse(R"({"devices": "ten"})");
    CHECK_THROWS_WITH_AS(config_from_json(j), doctest::Contains("devices"), ConfigError);
  }

  TEST_CASE("seed accepts decimal and hex strings") {
    CHECK(config_from_json(nlohmann::json::parse(R"({"seed": 7})")).seed == 7);
    CHECK(config_from_json(nlohmann::json::parse(R"({"seed": "0xDEADBEEF"})")).seed ==
          0xDEADBEEFULL);
    CHECK(config_from_json(nlohmann::json::parse(R"({"seed": "123"})")).seed == 123);
    CHECK_THROWS_AS(config_from_json(nlohmann::json::parse(R"({"seed": "0xZZ"})")), ConfigError);
  }

  TEST_CASE("serialize/parse round trip is the identity") {
    ExperimentConfig c;
    c.devices = 4;
    c.graph = "edges";
    c.graph_edges = {{0, 1}, {1, 2}, {2, 3}, {3, 0}};
    c.layers = {2, 16, 10};
    c.schedule = "constant";
    c.schedule_fraction = 0.5;
    c.seed = 0xABCDEF0123456789ULL;
    c.synth_spread = 0.3;
    c.out = "runs/x";
    c.threads = 3;
    const ExperimentConfig back = config_from_json(to_json(c));
    CHECK(back == c);
  }

  TEST_CASE("load_config reports parse position on malformed JSON") {
    const auto dir = std::filesystem::temp_directory_path() / "fdsim_test_config";
    std::filesystem::create_directories(dir);
    const auto path = dir / "bad.json";
    std::ofstream(path) << "{\"devices\": 4,,}";
    CHECK_THROWS_AS(load_config(path.string()), ConfigError);
    CHECK_THROWS_AS(load_config((dir / "missing.json").string()), ConfigError);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("materialize: shared pool, probe resampling, schedule cap") {
    ExperimentConfig c;
    c.shared_size = 40;
    c.probe_size = 15;
    c.synth_train_per_class = 20;
    c.schedule = "full";
    const Experiment e = materialize(c);
    CHECK(e.shared.size() == 40);
    CHECK(e.probe.size() == 15);
    CHECK(e.sim.schedule.samples_at(0) == 40);
    CHECK(e.test_set.size() == 10 * c.synth_test_per_class);
    // Probe rows all come from the shared pool.
    for (std::size_t p = 0; p < e.probe.size(); ++p) {
      bool found = false;
      for (std::size_t s = 0; s < e.shared.size() && !found; ++s)
        found = e.probe.inputs.row(p)[0] == e.shared.inputs.row(s)[0] &&
                e.probe.inputs.row(p)[1] == e.shared.inputs.row(s)[1];
      CHECK(found);
    }
  }

  TEST_CASE("materialize is deterministic") {
    ExperimentConfig c;
    c.synth_train_per_class = 30;
    const Experiment a = materialize(c);
    const Experiment b = materialize(c);
    CHECK(a.shared.inputs == b.shared.inputs);
    CHECK(a.test_set.inputs == b.test_set.inputs);
    for (std::size_t i = 0; i < a.shards.size(); ++i)
      CHECK(a.shards[i].inputs == b.shards[i].inputs);
  }
}
