// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdsim/matrix.hpp"
#include "fdsim/rng.hpp"

namespace fdsim {

struct Dataset {
  Matrix inputs;            // n x X, features in [0, 1] for image data
  std::vector<int> labels;  // n values in [0, num_classes)
  int num_classes = 0;

  std::size_t size() const { return inputs.rows(); }
  std::size_t input_dim() const { return inputs.cols(); }
};

struct PartitionSpec {
  std::size_t num_devices = 0;
  std::size_t labels_per_device = 2;
};

inline Dataset take(const Dataset& d, std::span<const std::size_t> indices) {
  Dataset out;
  out.inputs = take_rows(d.inputs, indices);
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) out.labels.push_back(d.labels[i]);
  out.num_classes = d.num_classes;
  return out;
}

namespace detail {

inline std::uint32_t read_u32_be(std::istream& in, const std::string& path) {
  unsigned char b[4];
  if (!in.read(reinterpret_cast<char*>(b), 4))
    throw std::runtime_error("load_idx: truncated file: " + path);
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

}  // namespace detail

// IDX image/label pair (the MNIST family on-disk format). Big-endian
// magics 0x00000803 (images) and 0x00000801 (labels); pixels scaled to
// [0, 1] by dividing by 255.
inline Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
  std::ifstream img(images_path, std::ios::binary);
  if (!img) throw std::runtime_error("load_idx: cannot open " + images_path);
  std::ifstream lab(labels_path, std::ios::binary);
  if (!lab) throw std::runtime_error("load_idx: cannot open " + labels_path);

  const std::uint32_t img_magic = detail::read_u32_be(img, images_path);
  if (img_magic != 0x00000803u)
    throw std::runtime_error("load_idx: bad image magic in " + images_path +
                             " (expected 0x00000803)");
  const std::uint32_t n_images = detail::read_u32_be(img, images_path);
  const std::uint32_t rows = detail::read_u32_be(img, images_path);
  const std::uint32_t cols = detail::read_u32_be(img, images_path);

  const std::uint32_t lab_magic = detail::read_u32_be(lab, labels_path);
  if (lab_magic != 0x00000801u)
    throw std::runtime_error("load_idx: bad label magic in " + labels_path +
                             " (expected 0x00000801)");
  const std::uint32_t n_labels = detail::read_u32_be(lab, labels_path);
  if (n_images != n_labels)
    throw std::runtime_error("load_idx: image/label count mismatch (" + std::to_string(n_images) +
                             " images, " + std::to_string(n_labels) + " labels)");

  const std::size_t dim = std::size_t(rows) * std::size_t(cols);
  Dataset d;
  d.inputs = Matrix(n_images, dim);
  std::vector<unsigned char> buf(dim);
  for (std::uint32_t i = 0; i < n_images; ++i) {
    if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim)))
      throw std::runtime_error("load_idx: truncated file: " + images_path);
    auto row = d.inputs.row(i);
    for (std::size_t k = 0; k < dim; ++k) row[k] = static_cast<double>(buf[k]) / 255.0;
  }
  d.labels.resize(n_images);
  int max_label = 0;
  for (std::uint32_t i = 0; i < n_labels; ++i) {
    unsigned char v;
    if (!lab.read(reinterpret_cast<char*>(&v), 1))
      throw std::runtime_error("load_idx: truncated file: " + labels_path);
    d.labels[i] = static_cast<int>(v);
    max_label = std::max(max_label, d.labels[i]);
  }
  d.num_classes = max_label + 1;
  return d;
}

// Gaussian blobs around class centers spaced evenly on the unit circle
// (first two input dimensions; remaining dimensions are centered at 0).
// Draw order is class-major then sample then dimension, one Gaussian per
// dimension, so datasets are a pure function of the generator state.
inline Dataset synth_blobs(int num_classes, std::size_t per_class, std::size_t input_dim,
                           double spread, SplitMix64& gen) {
  if (num_classes < 1 || per_class < 1 || input_dim < 1)
    throw std::invalid_argument("synth_blobs: all counts must be >= 1");
  constexpr double kTwoPi = 6.283185307179586476925;
  Dataset d;
  d.num_classes = num_classes;
  d.inputs = Matrix(per_class * static_cast<std::size_t>(num_classes), input_dim);
  d.labels.reserve(d.inputs.rows());
  std::size_t r = 0;
  for (int c = 0; c < num_classes; ++c) {
    const double angle = kTwoPi * static_cast<double>(c) / static_cast<double>(num_classes);
    std::vector<double> center(input_dim, 0.0);
    center[0] = std::cos(angle);
    if (input_dim > 1) center[1] = std::sin(angle);
    for (std::size_t s = 0; s < per_class; ++s, ++r) {
      auto row = d.inputs.row(r);
      for (std::size_t k = 0; k < input_dim; ++k) row[k] = center[k] + spread * gen.next_gaussian();
      d.labels.push_back(c);
    }
  }
  return d;
}

// Non-IID label split: device i claims labels {(i + j) mod C : j <
// labels_per_device}; samples of each class are divided equally among the
// claiming devices, remainder going to the lowest device index. Every
// sample lands in exactly one shard.
inline std::vector<Dataset> partition_noniid(const Dataset& d, const PartitionSpec& spec) {
  const int C = d.num_classes;
  if (spec.num_devices < 1) throw std::invalid_argument("partition_noniid: need >= 1 device");
  if (spec.labels_per_device < 1 || spec.labels_per_device > static_cast<std::size_t>(C))
    throw std::invalid_argument("partition_noniid: labels_per_device out of range");

  // Devices claiming each class, ascending by device index.
  std::vector<std::vector<std::size_t>> claimants(static_cast<std::size_t>(C));
  for (std::size_t i = 0; i < spec.num_devices; ++i)
    for (std::size_t j = 0; j < spec.labels_per_device; ++j)
      claimants[(i + j) % static_cast<std::size_t>(C)].push_back(i);
  for (int c = 0; c < C; ++c)
    if (claimants[static_cast<std::size_t>(c)].empty())
      throw std::invalid_argument("partition_noniid: class " + std::to_string(c) +
                                  " is not claimed by any device");

  std::vector<std::vector<std::size_t>> rows_by_class(static_cast<std::size_t>(C));
  for (std::size_t r = 0; r < d.size(); ++r)
    rows_by_class[static_cast<std::size_t>(d.labels[r])].push_back(r);

  std::vector<std::vector<std::size_t>> shard_rows(spec.num_devices);
  for (int c = 0; c < C; ++c) {
    const auto& rows = rows_by_class[static_cast<std::size_t>(c)];
    const auto& devs = claimants[static_cast<std::size_t>(c)];
    const std::size_t base = rows.size() / devs.size();
    const std::size_t rem = rows.size() % devs.size();
    std::size_t pos = 0;
    for (std::size_t p = 0; p < devs.size(); ++p) {
      const std::size_t n = base + (p < rem ? 1 : 0);
      for (std::size_t k = 0; k < n; ++k) shard_rows[devs[p]].push_back(rows[pos++]);
    }
  }

  std::vector<Dataset> shards;
  shards.reserve(spec.num_devices);
  for (auto& rows : shard_rows) {
    std::sort(rows.begin(), rows.end());
    shards.push_back(take(d, rows));
  }
  return shards;
}

// Uniform sample of `size` rows without replacement (partial Fisher-Yates
// over one seed drawn from `gen`); this is how the shared probe pool is
// carved out of a larger dataset.
inline Dataset sample_shared(const Dataset& d, std::size_t size, SplitMix64& gen) {
  if (size > d.size()) throw std::invalid_argument("sample_shared: size exceeds dataset");
  const auto indices = select_subset(gen.next_u64(), d.size(), size);
  return take(d, indices);
}

}  // namespace fdsim
