// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "fdsim/matrix.hpp"
#include "fdsim/rng.hpp"

namespace fdsim {

// Dense feed-forward classifier: ReLU hidden layers, softmax output.
// Parameters are plain values; every operation below is a pure function
// of its arguments, so models can be trained on concurrent devices
// without shared state.
struct Model {
  std::vector<std::size_t> layer_sizes;     // input, hidden..., output
  std::vector<Matrix> weights;              // weights[l]: layer_sizes[l+1] x layer_sizes[l]
  std::vector<std::vector<double>> biases;  // biases[l]: layer_sizes[l+1]

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t output_dim() const { return layer_sizes.back(); }

  bool operator==(const Model&) const = default;
};

struct Gradients {
  std::vector<Matrix> weights;
  std::vector<std::vector<double>> biases;
};

struct Batch {
  Matrix inputs;
  std::vector<int> labels;  // empty when the batch carries no labels
};

struct LossGrads {
  double loss = 0.0;
  Gradients grads;
};

namespace detail {

inline void check_input_width(const Model& m, const Matrix& inputs) {
  if (inputs.cols() != m.input_dim())
    throw std::invalid_argument("forward: input width " + std::to_string(inputs.cols()) +
                                " does not match model input size " +
                                std::to_string(m.input_dim()));
}

// Forward pass keeping every post-activation layer; acts[0] is the input,
// acts.back() the softmax probabilities.
inline std::vector<Matrix> forward_all(const Model& m, const Matrix& inputs) {
  check_input_width(m, inputs);
  const std::size_t num_layers = m.weights.size();
  std::vector<Matrix> acts;
  acts.reserve(num_layers + 1);
  acts.push_back(inputs);
  for (std::size_t l = 0; l < num_layers; ++l) {
    const Matrix& a = acts.back();
    const Matrix& w = m.weights[l];
    const std::vector<double>& b = m.biases[l];
    const std::size_t n = a.rows();
    const std::size_t out = w.rows();
    Matrix z(n, out);
    for (std::size_t r = 0; r < n; ++r) {
      const auto arow = a.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        const auto wrow = w.row(o);
        double acc = b[o];
        for (std::size_t k = 0; k < arow.size(); ++k) acc += arow[k] * wrow[k];
        z(r, o) = acc;
      }
    }
    if (l + 1 < num_layers) {
      for (double& v : z.data()) v = v > 0.0 ? v : 0.0;  // ReLU
    } else {
      // Row-wise softmax with max subtraction.
      for (std::size_t r = 0; r < n; ++r) {
        auto row = z.row(r);
        double mx = row[0];
        for (double v : row) mx = v > mx ? v : mx;
        double sum = 0.0;
        for (double& v : row) {
          v = std::exp(v - mx);
          sum += v;
        }
        for (double& v : row) v /= sum;
      }
    }
    acts.push_back(std::move(z));
  }
  return acts;
}

// Backpropagate from the output-layer delta dz (n x Y) through all layers.
inline Gradients backward(const Model& m, const std::vector<Matrix>& acts, Matrix dz) {
  Gradients g;
  g.weights.resize(m.weights.size());
  g.biases.resize(m.biases.size());
  for (std::size_t li = m.weights.size(); li-- > 0;) {
    const Matrix& a = acts[li];  // layer input (n x in)
    const std::size_t n = dz.rows();
    const std::size_t out = dz.cols();
    const std::size_t in = a.cols();
    Matrix dw(out, in);
    std::vector<double> db(out, 0.0);
    for (std::size_t r = 0; r < n; ++r) {
      const auto drow = dz.row(r);
      const auto arow = a.row(r);
      for (std::size_t o = 0; o < out; ++o) {
        const double d = drow[o];
        db[o] += d;
        auto wrow = dw.row(o);
        for (std::size_t k = 0; k < in; ++k) wrow[k] += d * arow[k];
      }
    }
    g.weights[li] = std::move(dw);
    g.biases[li] = std::move(db);
    if (li > 0) {
      // da = dz * W, masked by the ReLU derivative of this layer's input.
      const Matrix& w = m.weights[li];
      Matrix prev(n, in);
      for (std::size_t r = 0; r < n; ++r) {
        const auto drow = dz.row(r);
        const auto arow = a.row(r);
        auto prow = prev.row(r);
        for (std::size_t o = 0; o < out; ++o) {
          const double d = drow[o];
          const auto wrow = w.row(o);
          for (std::size_t k = 0; k < in; ++k) prow[k] += d * wrow[k];
        }
        for (std::size_t k = 0; k < in; ++k) prow[k] = arow[k] > 0.0 ? prow[k] : 0.0;
      }
      dz = std::move(prev);
    }
  }
  return g;
}

}  // namespace detail

// Glorot-uniform weights, zero biases. Consumes exactly
// sum_l layer_sizes[l] * layer_sizes[l+1] draws from `gen`, taken layer by
// layer in row-major order, so initialization is reproducible from the
// seed alone.
inline Model model_init(const std::vector<std::size_t>& layer_sizes, SplitMix64& gen) {
  if (layer_sizes.size() < 2) throw std::invalid_argument("model_init: need at least two layers");
  for (std::size_t s : layer_sizes)
    if (s == 0) throw std::invalid_argument("model_init: zero-size layer");
  Model m;
  m.layer_sizes = layer_sizes;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    Matrix w(fan_out, fan_in);
    for (double& v : w.data()) v = (2.0 * gen.next_f64() - 1.0) * limit;
    m.weights.push_back(std::move(w));
    m.biases.emplace_back(fan_out, 0.0);
  }
  return m;
}

// Class probabilities for each input row; rows sum to 1.
inline Matrix forward(const Model& m, const Matrix& inputs) {
  return detail::forward_all(m, inputs).back();
}

inline double cross_entropy(const Matrix& probs, std::span<const int> labels) {
  if (probs.rows() != labels.size())
    throw std::invalid_argument("cross_entropy: label count mismatch");
  double loss = 0.0;
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const int y = labels[r];
    if (y < 0 || static_cast<std::size_t>(y) >= probs.cols())
      throw std::out_of_range("cross_entropy: label out of range");
    loss -= std::log(probs(r, static_cast<std::size_t>(y)));
  }
  return loss / static_cast<double>(probs.rows());
}

// Mean squared distance between output rows and target rows:
// (1/n) sum_x ||out_x - target_x||^2. Convex in the outputs.
inline double output_mse(const Matrix& outputs, const Matrix& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols())
    throw std::invalid_argument("output_mse: shape mismatch");
  double loss = 0.0;
  for (std::size_t i = 0; i < outputs.data().size(); ++i) {
    const double d = outputs.data()[i] - targets.data()[i];
    loss += d * d;
  }
  return loss / static_cast<double>(outputs.rows());
}

// Mean cross-entropy loss and its exact gradients.
inline LossGrads ce_grad(const Model& m, const Batch& batch) {
  if (batch.labels.empty()) throw std::invalid_argument("ce_grad: batch has no labels");
  const auto acts = detail::forward_all(m, batch.inputs);
  const Matrix& p = acts.back();
  const std::size_t n = p.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossGrads out;
  out.loss = cross_entropy(p, batch.labels);
  Matrix dz = p;
  for (std::size_t r = 0; r < n; ++r) {
    dz(r, static_cast<std::size_t>(batch.labels[r])) -= 1.0;
    for (double& v : dz.row(r)) v *= inv_n;
  }
  out.grads = detail::backward(m, acts, std::move(dz));
  return out;
}

// Distillation loss for function-space aggregation: mean squared
// distance between the model's probability outputs and fixed target rows,
// with exact gradients through the softmax.
inline LossGrads distill_grad(const Model& m, const Matrix& inputs, const Matrix& targets) {
  const auto acts = detail::forward_all(m, inputs);
  const Matrix& p = acts.back();
  if (targets.rows() != p.rows() || targets.cols() != p.cols())
    throw std::invalid_argument("distill_grad: target shape mismatch");
  const std::size_t n = p.rows();
  const double inv_n = 1.0 / static_cast<double>(n);
  LossGrads out;
  out.loss = output_mse(p, targets);
  Matrix dz(n, p.cols());
  for (std::size_t r = 0; r < n; ++r) {
    const auto prow = p.row(r);
    const auto trow = targets.row(r);
    auto drow = dz.row(r);
    double dot = 0.0;
    for (std::size_t c = 0; c < prow.size(); ++c) {
      drow[c] = 2.0 * (prow[c] - trow[c]) * inv_n;  // dL/dp
      dot += drow[c] * prow[c];
    }
    for (std::size_t c = 0; c < prow.size(); ++c) drow[c] = prow[c] * (drow[c] - dot);
  }
  out.grads = detail::backward(m, acts, std::move(dz));
  return out;
}

// p <- p - step_size * g for every parameter. Throws if any updated
// parameter is non-finite.
inline Model sgd_step(Model m, const Gradients& g, double step_size) {
  if (g.weights.size() != m.weights.size() || g.biases.size() != m.biases.size())
    throw std::invalid_argument("sgd_step: gradient shape mismatch");
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    if (g.weights[l].rows() != m.weights[l].rows() || g.weights[l].cols() != m.weights[l].cols() ||
        g.biases[l].size() != m.biases[l].size())
      throw std::invalid_argument("sgd_step: gradient shape mismatch");
    auto& wd = m.weights[l].data();
    const auto& gd = g.weights[l].data();
    for (std::size_t i = 0; i < wd.size(); ++i) wd[i] -= step_size * gd[i];
    for (std::size_t i = 0; i < m.biases[l].size(); ++i) m.biases[l][i] -= step_size * g.biases[l][i];
    for (double v : wd)
      if (!std::isfinite(v)) throw std::runtime_error("sgd_step: non-finite weight after update");
    for (double v : m.biases[l])
      if (!std::isfinite(v)) throw std::runtime_error("sgd_step: non-finite bias after update");
  }
  return m;
}

// Fraction of rows whose argmax matches the label (ties to lowest index).
inline double accuracy(const Model& m, const Matrix& inputs, std::span<const int> labels) {
  const Matrix p = forward(m, inputs);
  if (p.rows() != labels.size()) throw std::invalid_argument("accuracy: label count mismatch");
  std::size_t correct = 0;
  for (std::size_t r = 0; r < p.rows(); ++r) {
    const auto row = p.row(r);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c)
      if (row[c] > row[best]) best = c;
    if (static_cast<std::size_t>(labels[r]) == best) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(p.rows());
}

}  // namespace fdsim
