// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <exception>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "fdsim/dataset.hpp"
#include "fdsim/graph.hpp"
#include "fdsim/nn.hpp"
#include "fdsim/rng.hpp"
#include "fdsim/schedule.hpp"
#include "fdsim/snapshot.hpp"

namespace fdsim {

// Purpose tags folded into the global seed so that independent PRNG
// streams (model init, minibatch order, data synthesis, probe resampling)
// can never collide with the per-round subset-selection seeds.
namespace stream_tag {
inline constexpr std::uint64_t kModelInit = 0x696E69745F6D646CULL;
inline constexpr std::uint64_t kLocalShuffle = 0x6C6F63616C5F7368ULL;
inline constexpr std::uint64_t kTrainData = 0x747261696E5F6474ULL;
inline constexpr std::uint64_t kSharedData = 0x7368617265645F64ULL;
inline constexpr std::uint64_t kTestData = 0x746573745F646174ULL;
inline constexpr std::uint64_t kProbe = 0x70726F62655F6474ULL;
}  // namespace stream_tag

inline std::uint64_t stream_seed(std::uint64_t global_seed, std::uint64_t tag, std::uint64_t index) {
  return round_seed(global_seed ^ tag, index);
}

struct DeviceState {
  std::size_t id = 0;
  Model model;
  Dataset local_data;
  SplitMix64 prng;  // device-local stream, only used for minibatch order
};

// Distilled values of one device for one round; rows follow the ascending
// order of the selected shared-pool indices.
struct RoundMessage {
  std::size_t sender = 0;
  std::size_t round = 0;
  Matrix values;  // n_d x Y probability rows
};

enum class DistillScale { kDegree, kOne };

struct SimConfig {
  Graph graph;
  std::vector<std::size_t> layer_sizes;
  std::size_t local_epochs = 1;
  std::size_t minibatch = 20;
  double learning_rate = 0.05;  // local SGD step
  double lr_decay = 1.0;        // step-decay factor, applied every lr_decay_every rounds
  std::size_t lr_decay_every = 0;  // 0 disables decay
  double sharing_rate = 0.05;   // distillation step
  Schedule schedule = Schedule::full(1);
  std::size_t rounds = 0;
  std::uint64_t global_seed = 1;
  std::size_t snapshot_every = 10;
  bool include_self = false;  // include own distilled values in the target mean
  DistillScale distill_scale = DistillScale::kDegree;
  std::size_t bytes_per_value = 4;  // on-the-wire size of one distilled value
  bool allow_disconnected = false;
  std::size_t threads = 1;
};

struct RoundMetrics {
  std::size_t round = 0;
  std::vector<double> local_loss;    // per device, after the local SGD phase
  std::vector<double> distill_loss;  // per device, before the distillation update
  std::vector<double> test_acc;      // per device, at end of round
  std::uint64_t cum_bytes = 0;       // network-wide, non-decreasing
};

struct RunResult {
  std::vector<RoundMetrics> metrics;
  SnapshotArchive snapshots;
  std::vector<Model> final_models;
};

namespace detail {

// Static block partition of [0, n) across worker threads. Each device's
// work is independent and writes to its own slot, so any partition gives
// results identical to the sequential loop.
template <typename F>
void for_each_device(std::size_t n, std::size_t threads, F&& fn) {
  threads = std::min(threads, n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(threads);
  pool.reserve(threads);
  for (std::size_t w = 0; w < threads; ++w) {
    const std::size_t lo = n * w / threads;
    const std::size_t hi = n * (w + 1) / threads;
    pool.emplace_back([&, lo, hi, w] {
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[w] = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace detail

// Epochs of minibatch SGD on the device's own shard. Minibatch order comes
// from the device-local stream; everything else is data-dependent only.
inline void local_sgd_phase(DeviceState& dev, double learning_rate, std::size_t epochs,
                            std::size_t minibatch) {
  const std::size_t n = dev.local_data.size();
  if (minibatch == 0 || minibatch > n)
    throw std::invalid_argument("local_sgd_phase: bad minibatch size");
  std::vector<std::size_t> order(n);
  for (std::size_t e = 0; e < epochs; ++e) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    shuffle(dev.prng, order);
    for (std::size_t start = 0; start < n; start += minibatch) {
      const std::size_t len = std::min(minibatch, n - start);
      const std::span<const std::size_t> idx(order.data() + start, len);
      Batch batch;
      batch.inputs = take_rows(dev.local_data.inputs, idx);
      batch.labels.reserve(len);
      for (std::size_t i : idx) batch.labels.push_back(dev.local_data.labels[i]);
      const LossGrads lg = ce_grad(dev.model, batch);
      dev.model = sgd_step(std::move(dev.model), lg.grads, learning_rate);
    }
  }
}

// Model outputs on the selected shared rows, in ascending index order.
inline RoundMessage compute_distilled(const DeviceState& dev, const Matrix& selected_rows,
                                      std::size_t round) {
  RoundMessage msg;
  msg.sender = dev.id;
  msg.round = round;
  msg.values = selected_rows.rows() > 0 ? forward(dev.model, selected_rows)
                                        : Matrix(0, dev.model.output_dim());
  for (std::size_t r = 0; r < msg.values.rows(); ++r) {
    double sum = 0.0;
    for (double v : msg.values.row(r)) sum += v;
    if (std::abs(sum - 1.0) > 1e-9)
      throw std::runtime_error("compute_distilled: output row is not a probability vector");
  }
  return msg;
}

// inbox(i) = messages of i's neighbors. Delivery is reliable and
// synchronous within the round; messages stay immutable.
inline std::vector<std::vector<const RoundMessage*>> exchange_messages(
    const Graph& g, const std::vector<RoundMessage>& messages) {
  if (messages.size() != g.num_nodes())
    throw std::invalid_argument("exchange: need exactly one message per device");
  std::vector<std::vector<const RoundMessage*>> inboxes(g.num_nodes());
  for (std::size_t i = 0; i < g.num_nodes(); ++i) {
    const auto& nb = g.neighbors(i);
    inboxes[i].reserve(nb.size());
    for (std::size_t j : nb) inboxes[i].push_back(&messages[j]);
  }
  return inboxes;
}

// Element-wise mean of the inbox values; this is the round's target.
inline Matrix aggregate_targets(std::span<const RoundMessage* const> inbox) {
  if (inbox.empty()) throw std::invalid_argument("aggregate_targets: empty inbox");
  const Matrix& first = inbox.front()->values;
  Matrix mean(first.rows(), first.cols());
  for (const RoundMessage* msg : inbox) {
    if (msg->round != inbox.front()->round)
      throw std::runtime_error("aggregate_targets: mixed rounds in inbox");
    if (msg->values.rows() != first.rows() || msg->values.cols() != first.cols())
      throw std::runtime_error("aggregate_targets: inconsistent row counts in inbox");
    for (std::size_t i = 0; i < mean.data().size(); ++i) mean.data()[i] += msg->values.data()[i];
  }
  const double inv = 1.0 / static_cast<double>(inbox.size());
  for (double& v : mean.data()) v *= inv;
  return mean;
}

// Minibatch SGD toward the aggregated targets over the selected rows, in
// ascending index order. The step is sharing_rate * scale, with scale the
// device degree by default.
inline void distill_phase(DeviceState& dev, const Matrix& selected_rows, const Matrix& targets,
                          double sharing_rate, std::size_t scale, std::size_t minibatch) {
  const std::size_t n = selected_rows.rows();
  if (targets.rows() != n) throw std::invalid_argument("distill_phase: row count mismatch");
  const double step = sharing_rate * static_cast<double>(scale);
  std::vector<std::size_t> idx(minibatch);
  for (std::size_t start = 0; start < n; start += minibatch) {
    const std::size_t len = std::min(minibatch, n - start);
    idx.resize(len);
    std::iota(idx.begin(), idx.end(), start);
    const Matrix rows = take_rows(selected_rows, idx);
    const Matrix tgt = take_rows(targets, idx);
    const LossGrads lg = distill_grad(dev.model, rows, tgt);
    dev.model = sgd_step(std::move(dev.model), lg.grads, step);
  }
}

// Bytes the whole network transfers in round t: every device sends its
// n_d(t) x Y values to each neighbor (2|E| directed sends). Subset indices
// cost nothing; the synchronized PRNG replaces them.
inline std::uint64_t comm_bytes(std::size_t t, const Schedule& schedule, std::size_t output_dim,
                                std::size_t bytes_per_value, std::size_t num_edges) {
  return static_cast<std::uint64_t>(schedule.samples_at(t)) * output_dim * bytes_per_value * 2 *
         num_edges;
}

// Full simulation: T rounds of local SGD, synchronized subset selection,
// distilled-value exchange and distillation. Deterministic given the
// config; thread count never changes any output bit.
inline RunResult run(const SimConfig& cfg, std::vector<Dataset> shards, const Dataset& shared,
                     const Dataset& test_set, const Dataset& probe,
                     std::vector<Model> initial_models = {}) {
  const std::size_t n_dev = cfg.graph.num_nodes();
  if (shards.size() != n_dev) throw std::invalid_argument("run: one shard per device required");
  if (cfg.layer_sizes.size() < 2) throw std::invalid_argument("run: bad architecture");
  if (!cfg.allow_disconnected && !cfg.graph.is_connected())
    throw std::invalid_argument("run: graph is disconnected");
  const std::size_t out_dim = cfg.layer_sizes.back();
  if (static_cast<std::size_t>(shared.num_classes) > out_dim)
    throw std::invalid_argument("run: output layer smaller than class count");
  if (!initial_models.empty() && initial_models.size() != n_dev)
    throw std::invalid_argument("run: need one initial model per device");

  std::vector<DeviceState> devices(n_dev);
  for (std::size_t i = 0; i < n_dev; ++i) {
    devices[i].id = i;
    if (initial_models.empty()) {
      SplitMix64 init(stream_seed(cfg.global_seed, stream_tag::kModelInit, i));
      devices[i].model = model_init(cfg.layer_sizes, init);
    } else {
      devices[i].model = std::move(initial_models[i]);
    }
    devices[i].local_data = std::move(shards[i]);
    // All devices start from the same shuffle stream; each advances its own
    // copy. Devices with identical data and models therefore stay identical,
    // which is the symmetry the protocol preserves.
    devices[i].prng = SplitMix64(stream_seed(cfg.global_seed, stream_tag::kLocalShuffle, 0));
  }

  RunResult result;
  result.snapshots.num_devices = n_dev;
  result.snapshots.output_dim = out_dim;
  result.snapshots.vector_length = out_dim * probe.size();

  const auto record_snapshot = [&](std::size_t round) {
    Matrix snap(n_dev, result.snapshots.vector_length);
    detail::for_each_device(n_dev, cfg.threads, [&](std::size_t i) {
      const Matrix out = forward(devices[i].model, probe.inputs);
      std::copy(out.data().begin(), out.data().end(), snap.row(i).begin());
    });
    result.snapshots.rounds.push_back(round);
    result.snapshots.outputs.push_back(std::move(snap));
  };

  record_snapshot(0);
  std::uint64_t cum_bytes = 0;

  for (std::size_t t = 0; t < cfg.rounds; ++t) {
    RoundMetrics rm;
    rm.round = t;
    rm.local_loss.resize(n_dev);
    rm.distill_loss.assign(n_dev, 0.0);
    rm.test_acc.resize(n_dev);

    const double eta_t =
        cfg.lr_decay_every == 0
            ? cfg.learning_rate
            : cfg.learning_rate * std::pow(cfg.lr_decay, static_cast<double>(t / cfg.lr_decay_every));
    detail::for_each_device(n_dev, cfg.threads, [&](std::size_t i) {
      local_sgd_phase(devices[i], eta_t, cfg.local_epochs, cfg.minibatch);
      rm.local_loss[i] =
          cross_entropy(forward(devices[i].model, devices[i].local_data.inputs),
                        devices[i].local_data.labels);
    });

    const std::size_t n_d = cfg.schedule.samples_at(t);
    if (n_d > 0) {
      // Every device derives the subset on its own; the engine checks that
      // they all agree, which is the protocol's synchronization claim.
      const std::uint64_t seed_t = round_seed(cfg.global_seed, t);
      std::vector<std::vector<std::size_t>> selections(n_dev);
      detail::for_each_device(n_dev, cfg.threads, [&](std::size_t i) {
        selections[i] = select_subset(seed_t, shared.size(), n_d);
      });
      for (std::size_t i = 1; i < n_dev; ++i)
        if (selections[i] != selections[0])
          throw std::logic_error("run: subset selection diverged between devices");
      const Matrix selected_rows = take_rows(shared.inputs, selections[0]);

      std::vector<RoundMessage> messages(n_dev);
      detail::for_each_device(n_dev, cfg.threads, [&](std::size_t i) {
        messages[i] = compute_distilled(devices[i], selected_rows, t);
      });

      const auto inboxes = exchange_messages(cfg.graph, messages);
      detail::for_each_device(n_dev, cfg.threads, [&](std::size_t i) {
        std::vector<const RoundMessage*> inbox = inboxes[i];
        if (cfg.include_self) inbox.push_back(&messages[i]);
        if (inbox.empty()) return;  // no neighbors, nothing to distill
        const Matrix targets = aggregate_targets(inbox);
        rm.distill_loss[i] = output_mse(messages[i].values, targets);
        const std::size_t scale =
            cfg.distill_scale == DistillScale::kDegree ? cfg.graph.degree(i) : 1;
        distill_phase(devices[i], selected_rows, targets, cfg.sharing_rate, scale, cfg.minibatch);
      });
    }

    detail::for_each_device(n_dev, cfg.threads, [&](std::size_t i) {
      rm.test_acc[i] = accuracy(devices[i].model, test_set.inputs, test_set.labels);
    });

    cum_bytes += comm_bytes(t, cfg.schedule, out_dim, cfg.bytes_per_value, cfg.graph.num_edges());
    rm.cum_bytes = cum_bytes;
    result.metrics.push_back(std::move(rm));

    const std::size_t done = t + 1;
    if (done % cfg.snapshot_every == 0 || done == cfg.rounds) record_snapshot(done);
  }

  result.final_models.reserve(n_dev);
  for (auto& dev : devices) result.final_models.push_back(std::move(dev.model));
  return result;
}

}  // namespace fdsim
