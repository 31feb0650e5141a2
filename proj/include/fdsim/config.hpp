// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "fdsim/dataset.hpp"
#include "fdsim/engine.hpp"
#include "fdsim/graph.hpp"
#include "fdsim/schedule.hpp"

namespace fdsim {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Flat key-value experiment description. Defaults follow the 10-device
// ring-lattice setup with a 1000-sample shared pool; a resolved copy is
// written into every run directory so runs can be reproduced bit for bit.
struct ExperimentConfig {
  std::size_t devices = 10;
  std::string graph = "ring_lattice";  // ring_lattice | edges
  std::size_t graph_k = 6;
  std::vector<std::pair<std::size_t, std::size_t>> graph_edges;

  std::vector<std::size_t> layers;  // empty: derived from the dataset
  std::size_t local_epochs = 1;
  std::size_t minibatch = 20;
  double learning_rate = 0.05;
  double lr_decay = 1.0;
  std::size_t lr_decay_every = 0;  // 0 keeps the rate fixed for the whole run
  double sharing_rate = 0.05;

  std::string schedule = "dccr";  // dccr | constant | full | isolated
  std::size_t schedule_d = 100;
  std::size_t schedule_tau = 100;
  double schedule_fraction = 0.2;

  std::size_t rounds = 200;
  std::uint64_t seed = 1;
  std::size_t snapshot_every = 10;
  std::size_t probe_size = 1000;

  std::string dataset = "synthetic";  // synthetic | idx
  int synth_classes = 10;
  std::size_t synth_input_dim = 2;
  std::size_t synth_train_per_class = 200;
  std::size_t synth_test_per_class = 100;
  double synth_spread = 0.15;
  std::string idx_train_images;
  std::string idx_train_labels;
  std::string idx_test_images;
  std::string idx_test_labels;
  std::size_t shared_size = 1000;
  std::size_t labels_per_device = 2;

  bool include_self = false;
  std::string distill_scale = "degree";  // degree | one
  std::size_t bytes_per_value = 4;
  bool allow_disconnected = false;
  std::size_t threads = 1;
  std::string out;

  bool operator==(const ExperimentConfig&) const = default;
};

inline nlohmann::ordered_json to_json(const ExperimentConfig& c) {
  nlohmann::ordered_json j;
  j["devices"] = c.devices;
  j["graph"] = c.graph;
  j["graph_k"] = c.graph_k;
  auto edges = nlohmann::ordered_json::array();
  for (const auto& [a, b] : c.graph_edges) edges.push_back({a, b});
  j["graph_edges"] = edges;
  j["layers"] = c.layers;
  j["local_epochs"] = c.local_epochs;
  j["minibatch"] = c.minibatch;
  j["learning_rate"] = c.learning_rate;
  j["lr_decay"] = c.lr_decay;
  j["lr_decay_every"] = c.lr_decay_every;
  j["sharing_rate"] = c.sharing_rate;
  j["schedule"] = c.schedule;
  j["schedule_d"] = c.schedule_d;
  j["schedule_tau"] = c.schedule_tau;
  j["schedule_fraction"] = c.schedule_fraction;
  j["rounds"] = c.rounds;
  j["seed"] = c.seed;
  j["snapshot_every"] = c.snapshot_every;
  j["probe_size"] = c.probe_size;
  j["dataset"] = c.dataset;
  j["synth_classes"] = c.synth_classes;
  j["synth_input_dim"] = c.synth_input_dim;
  j["synth_train_per_class"] = c.synth_train_per_class;
  j["synth_test_per_class"] = c.synth_test_per_class;
  j["synth_spread"] = c.synth_spread;
  j["idx_train_images"] = c.idx_train_images;
  j["idx_train_labels"] = c.idx_train_labels;
  j["idx_test_images"] = c.idx_test_images;
  j["idx_test_labels"] = c.idx_test_labels;
  j["shared_size"] = c.shared_size;
  j["labels_per_device"] = c.labels_per_device;
  j["include_self"] = c.include_self;
  j["distill_scale"] = c.distill_scale;
  j["bytes_per_value"] = c.bytes_per_value;
  j["allow_disconnected"] = c.allow_disconnected;
  j["threads"] = c.threads;
  j["out"] = c.out;
  return j;
}

namespace detail {

// Seed accepts a JSON integer or a decimal/0x-hex string.
inline std::uint64_t parse_seed(const nlohmann::json& v) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  if (v.is_number_integer()) {
    const auto s = v.get<std::int64_t>();
    if (s < 0) throw ConfigError("config key 'seed': must be non-negative");
    return static_cast<std::uint64_t>(s);
  }
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    try {
      std::size_t pos = 0;
      const std::uint64_t parsed = std::stoull(s, &pos, 0);
      if (pos != s.size()) throw std::invalid_argument("trailing characters");
      return parsed;
    } catch (const std::exception&) {
      throw ConfigError("config key 'seed': cannot parse '" + s + "' as u64");
    }
  }
  throw ConfigError("config key 'seed': expected integer or string");
}

template <typename T>
T get_checked(const nlohmann::json& v, const char* key) {
  try {
    return v.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string("config key '") + key + "': wrong type");
  }
}

}  // namespace detail

// Strict parse: every key must be known, and every value well-typed.
inline ExperimentConfig config_from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config: top level must be a JSON object");
  ExperimentConfig c;
  std::vector<std::string> unknown;
  for (const auto& [key, value] : j.items()) {
    using detail::get_checked;
    if (key == "devices") c.devices = get_checked<std::size_t>(value, "devices");
    else if (key == "graph") c.graph = get_checked<std::string>(value, "graph");
    else if (key == "graph_k") c.graph_k = get_checked<std::size_t>(value, "graph_k");
    else if (key == "graph_edges") {
      c.graph_edges.clear();
      if (!value.is_array()) throw ConfigError("config key 'graph_edges': expected array of pairs");
      for (const auto& e : value) {
        if (!e.is_array() || e.size() != 2)
          throw ConfigError("config key 'graph_edges': expected array of pairs");
        c.graph_edges.emplace_back(get_checked<std::size_t>(e[0], "graph_edges"),
                                   get_checked<std::size_t>(e[1], "graph_edges"));
      }
    } else if (key == "layers") c.layers = get_checked<std::vector<std::size_t>>(value, "layers");
    else if (key == "local_epochs") c.local_epochs = get_checked<std::size_t>(value, "local_epochs");
    else if (key == "minibatch") c.minibatch = get_checked<std::size_t>(value, "minibatch");
    else if (key == "learning_rate") c.learning_rate = get_checked<double>(value, "learning_rate");
    else if (key == "lr_decay") c.lr_decay = get_checked<double>(value, "lr_decay");
    else if (key == "lr_decay_every")
      c.lr_decay_every = get_checked<std::size_t>(value, "lr_decay_every");
    else if (key == "sharing_rate") c.sharing_rate = get_checked<double>(value, "sharing_rate");
    else if (key == "schedule") c.schedule = get_checked<std::string>(value, "schedule");
    else if (key == "schedule_d") c.schedule_d = get_checked<std::size_t>(value, "schedule_d");
    else if (key == "schedule_tau") c.schedule_tau = get_checked<std::size_t>(value, "schedule_tau");
    else if (key == "schedule_fraction")
      c.schedule_fraction = get_checked<double>(value, "schedule_fraction");
    else if (key == "rounds") c.rounds = get_checked<std::size_t>(value, "rounds");
    else if (key == "seed") c.seed = detail::parse_seed(value);
    else if (key == "snapshot_every")
      c.snapshot_every = get_checked<std::size_t>(value, "snapshot_every");
    else if (key == "probe_size") c.probe_size = get_checked<std::size_t>(value, "probe_size");
    else if (key == "dataset") c.dataset = get_checked<std::string>(value, "dataset");
    else if (key == "synth_classes") c.synth_classes = get_checked<int>(value, "synth_classes");
    else if (key == "synth_input_dim")
      c.synth_input_dim = get_checked<std::size_t>(value, "synth_input_dim");
    else if (key == "synth_train_per_class")
      c.synth_train_per_class = get_checked<std::size_t>(value, "synth_train_per_class");
    else if (key == "synth_test_per_class")
      c.synth_test_per_class = get_checked<std::size_t>(value, "synth_test_per_class");
    else if (key == "synth_spread") c.synth_spread = get_checked<double>(value, "synth_spread");
    else if (key == "idx_train_images")
      c.idx_train_images = get_checked<std::string>(value, "idx_train_images");
    else if (key == "idx_train_labels")
      c.idx_train_labels = get_checked<std::string>(value, "idx_train_labels");
    else if (key == "idx_test_images")
      c.idx_test_images = get_checked<std::string>(value, "idx_test_images");
    else if (key == "idx_test_labels")
      c.idx_test_labels = get_checked<std::string>(value, "idx_test_labels");
    else if (key == "shared_size") c.shared_size = get_checked<std::size_t>(value, "shared_size");
    else if (key == "labels_per_device")
      c.labels_per_device = get_checked<std::size_t>(value, "labels_per_device");
    else if (key == "include_self") c.include_self = get_checked<bool>(value, "include_self");
    else if (key == "distill_scale")
      c.distill_scale = get_checked<std::string>(value, "distill_scale");
    else if (key == "bytes_per_value")
      c.bytes_per_value = get_checked<std::size_t>(value, "bytes_per_value");
    else if (key == "allow_disconnected")
      c.allow_disconnected = get_checked<bool>(value, "allow_disconnected");
    else if (key == "threads") c.threads = get_checked<std::size_t>(value, "threads");
    else if (key == "out") c.out = get_checked<std::string>(value, "out");
    else unknown.push_back(key);
  }
  if (!unknown.empty()) {
    std::string msg = "config: unknown key(s):";
    for (const auto& k : unknown) msg += " '" + k + "'";
    throw ConfigError(msg);
  }
  return c;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);  // parse errors carry line/column info
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return config_from_json(j);
}

// Every violated constraint is reported with the offending key's name.
inline void validate(const ExperimentConfig& c) {
  const auto fail = [](const std::string& msg) { throw ConfigError("config: " + msg); };
  if (c.devices < 1) fail("'devices' must be >= 1");
  if (c.graph == "ring_lattice") {
    if (c.graph_k == 0 || c.graph_k % 2 != 0) fail("'graph_k' must be even and > 0 for ring_lattice");
    if (c.graph_k >= c.devices) fail("'graph_k' must be < 'devices'");
  } else if (c.graph == "edges") {
    for (const auto& [a, b] : c.graph_edges) {
      if (a >= c.devices || b >= c.devices) fail("'graph_edges' contains a node >= 'devices'");
      if (a == b) fail("'graph_edges' contains a self-loop");
    }
  } else {
    fail("'graph' must be one of: ring_lattice, edges");
  }
  if (!c.layers.empty()) {
    if (c.layers.size() < 2) fail("'layers' needs at least input and output sizes");
    for (std::size_t s : c.layers)
      if (s == 0) fail("'layers' entries must be >= 1");
  }
  if (c.minibatch < 1) fail("'minibatch' must be >= 1");
  if (!(c.learning_rate > 0.0)) fail("'learning_rate' must be > 0");
  if (!(c.lr_decay > 0.0 && c.lr_decay <= 1.0)) fail("'lr_decay' must be in (0, 1]");
  if (!(c.sharing_rate > 0.0)) fail("'sharing_rate' must be > 0");
  if (c.schedule == "dccr") {
    if (c.schedule_d < 1) fail("'schedule_d' must be >= 1");
    if (c.schedule_tau < 1) fail("'schedule_tau' must be >= 1");
    if (c.schedule_d > c.shared_size) fail("'schedule_d' exceeds 'shared_size'");
  } else if (c.schedule == "constant") {
    if (!(c.schedule_fraction > 0.0 && c.schedule_fraction <= 1.0))
      fail("'schedule_fraction' must be in (0, 1]");
  } else if (c.schedule != "full" && c.schedule != "isolated") {
    fail("'schedule' must be one of: dccr, constant, full, isolated");
  }
  if (c.snapshot_every < 1) fail("'snapshot_every' must be >= 1");
  if (c.probe_size < 1) fail("'probe_size' must be >= 1");
  if (c.shared_size < 1) fail("'shared_size' must be >= 1");
  if (c.dataset == "synthetic") {
    if (c.synth_classes < 1) fail("'synth_classes' must be >= 1");
    if (c.synth_input_dim < 1) fail("'synth_input_dim' must be >= 1");
    if (c.synth_train_per_class < 1) fail("'synth_train_per_class' must be >= 1");
    if (c.synth_test_per_class < 1) fail("'synth_test_per_class' must be >= 1");
    if (!(c.synth_spread >= 0.0)) fail("'synth_spread' must be >= 0");
    if (c.labels_per_device < 1 ||
        c.labels_per_device > static_cast<std::size_t>(c.synth_classes))
      fail("'labels_per_device' must be in [1, synth_classes]");
    if (!c.layers.empty() && c.layers.front() != c.synth_input_dim)
      fail("'layers' front must equal 'synth_input_dim'");
    if (!c.layers.empty() && c.layers.back() != static_cast<std::size_t>(c.synth_classes))
      fail("'layers' back must equal 'synth_classes'");
  } else if (c.dataset == "idx") {
    if (c.idx_train_images.empty()) fail("missing required key 'idx_train_images'");
    if (c.idx_train_labels.empty()) fail("missing required key 'idx_train_labels'");
    if (c.idx_test_images.empty()) fail("missing required key 'idx_test_images'");
    if (c.idx_test_labels.empty()) fail("missing required key 'idx_test_labels'");
  } else {
    fail("'dataset' must be one of: synthetic, idx");
  }
  if (c.distill_scale != "degree" && c.distill_scale != "one")
    fail("'distill_scale' must be 'degree' or 'one'");
  if (c.bytes_per_value < 1) fail("'bytes_per_value' must be >= 1");
  if (c.threads < 1) fail("'threads' must be >= 1");
}

// A fully materialized experiment: engine config plus all datasets.
struct Experiment {
  SimConfig sim;
  std::vector<Dataset> shards;
  Dataset shared;
  Dataset test_set;
  Dataset probe;
};

// Build datasets, topology and engine settings from a validated config.
// All data synthesis and sampling runs on tagged streams derived from the
// seed, so the materialized experiment is a pure function of the config.
inline Experiment materialize(const ExperimentConfig& c) {
  validate(c);
  Experiment e;

  Dataset train;
  if (c.dataset == "synthetic") {
    SplitMix64 train_gen(stream_seed(c.seed, stream_tag::kTrainData, 0));
    train = synth_blobs(c.synth_classes, c.synth_train_per_class, c.synth_input_dim,
                        c.synth_spread, train_gen);
    SplitMix64 shared_gen(stream_seed(c.seed, stream_tag::kSharedData, 0));
    const std::size_t per_class =
        (c.shared_size + static_cast<std::size_t>(c.synth_classes) - 1) /
        static_cast<std::size_t>(c.synth_classes);
    const Dataset shared_pool =
        synth_blobs(c.synth_classes, per_class, c.synth_input_dim, c.synth_spread, shared_gen);
    e.shared = sample_shared(shared_pool, c.shared_size, shared_gen);
    SplitMix64 test_gen(stream_seed(c.seed, stream_tag::kTestData, 0));
    e.test_set = synth_blobs(c.synth_classes, c.synth_test_per_class, c.synth_input_dim,
                             c.synth_spread, test_gen);
  } else {
    train = load_idx(c.idx_train_images, c.idx_train_labels);
    const Dataset pool = load_idx(c.idx_test_images, c.idx_test_labels);
    if (c.shared_size >= pool.size())
      throw ConfigError("config: 'shared_size' must leave test samples in the IDX test pool");
    // The shared pool comes out of the held-out pool; the remainder is the
    // common accuracy test set, so the two never overlap.
    const auto shared_idx =
        select_subset(stream_seed(c.seed, stream_tag::kSharedData, 0), pool.size(), c.shared_size);
    e.shared = take(pool, shared_idx);
    std::vector<std::size_t> rest;
    rest.reserve(pool.size() - shared_idx.size());
    std::size_t cursor = 0;
    for (std::size_t i = 0; i < pool.size(); ++i) {
      if (cursor < shared_idx.size() && shared_idx[cursor] == i) ++cursor;
      else rest.push_back(i);
    }
    e.test_set = take(pool, rest);
    if (c.labels_per_device > static_cast<std::size_t>(train.num_classes))
      throw ConfigError("config: 'labels_per_device' exceeds the dataset's class count");
  }

  e.shards = partition_noniid(train, {c.devices, c.labels_per_device});

  if (e.shared.size() > c.probe_size) {
    const auto probe_idx =
        select_subset(stream_seed(c.seed, stream_tag::kProbe, 0), e.shared.size(), c.probe_size);
    e.probe = take(e.shared, probe_idx);
  } else {
    e.probe = e.shared;
  }

  std::vector<std::size_t> layers = c.layers;
  if (layers.empty()) {
    layers = {train.input_dim(), train.input_dim() > 64 ? std::size_t{128} : std::size_t{32},
              static_cast<std::size_t>(train.num_classes)};
  }
  if (layers.front() != train.input_dim())
    throw ConfigError("config: 'layers' front must equal the dataset input dimension");
  if (layers.back() != static_cast<std::size_t>(train.num_classes))
    throw ConfigError("config: 'layers' back must equal the dataset class count");

  e.sim.graph = c.graph == "ring_lattice" ? Graph::ring_lattice(c.devices, c.graph_k)
                                          : Graph::from_edges(c.devices, c.graph_edges);
  e.sim.layer_sizes = std::move(layers);
  e.sim.local_epochs = c.local_epochs;
  e.sim.minibatch = c.minibatch;
  e.sim.learning_rate = c.learning_rate;
  e.sim.lr_decay = c.lr_decay;
  e.sim.lr_decay_every = c.lr_decay_every;
  e.sim.sharing_rate = c.sharing_rate;
  if (c.schedule == "dccr")
    e.sim.schedule = Schedule::dccr(c.schedule_d, c.schedule_tau, e.shared.size());
  else if (c.schedule == "constant")
    e.sim.schedule = Schedule::constant(c.schedule_fraction, e.shared.size());
  else if (c.schedule == "full")
    e.sim.schedule = Schedule::full(e.shared.size());
  else
    e.sim.schedule = Schedule::isolated(e.shared.size());
  e.sim.rounds = c.rounds;
  e.sim.global_seed = c.seed;
  e.sim.snapshot_every = c.snapshot_every;
  e.sim.include_self = c.include_self;
  e.sim.distill_scale = c.distill_scale == "one" ? DistillScale::kOne : DistillScale::kDegree;
  e.sim.bytes_per_value = c.bytes_per_value;
  e.sim.allow_disconnected = c.allow_disconnected;
  e.sim.threads = c.threads;
  return e;
}

}  // namespace fdsim
