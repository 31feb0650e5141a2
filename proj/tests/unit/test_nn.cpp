// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <vector>

#include "fdsim/nn.hpp"
#include "fdsim/rng.hpp"

using namespace fdsim;

namespace {

// Central finite differences, the independent gradient oracle. Evaluates
// the loss through forward() only, never through the backprop path.
template <typename LossFn>
Gradients finite_difference_grads(const Model& model, LossFn loss_of, double h = 1e-5) {
  Gradients fd;
  Model m = model;
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    Matrix dw(m.weights[l].rows(), m.weights[l].cols());
    for (std::size_t i = 0; i < dw.data().size(); ++i) {
      const double saved = m.weights[l].data()[i];
      m.weights[l].data()[i] = saved + h;
      const double up = loss_of(m);
      m.weights[l].data()[i] = saved - h;
      const double down = loss_of(m);
      m.weights[l].data()[i] = saved;
      dw.data()[i] = (up - down) / (2.0 * h);
    }
    fd.weights.push_back(std::move(dw));
    std::vector<double> db(m.biases[l].size());
    for (std::size_t i = 0; i < db.size(); ++i) {
      const double saved = m.biases[l][i];
      m.biases[l][i] = saved + h;
      const double up = loss_of(m);
      m.biases[l][i] = saved - h;
      const double down = loss_of(m);
      m.biases[l][i] = saved;
      db[i] = (up - down) / (2.0 * h);
    }
    fd.biases.push_back(std::move(db));
  }
  return fd;
}

double max_rel_error(const Gradients& a, const Gradients& b) {
  double worst = 0.0;
  const auto rel = [](double x, double y) {
    const double scale = std::max({std::abs(x), std::abs(y), 1e-6});
    return std::abs(x - y) / scale;
  };
  for (std::size_t l = 0; l < a.weights.size(); ++l) {
    for (std::size_t i = 0; i < a.weights[l].data().size(); ++i)
      worst = std::max(worst, rel(a.weights[l].data()[i], b.weights[l].data()[i]));
    for (std::size_t i = 0; i < a.biases[l].size(); ++i)
      worst = std::max(worst, rel(a.biases[l][i], b.biases[l][i]));
  }
  return worst;
}

Matrix random_inputs(std::size_t n, std::size_t dim, SplitMix64& gen) {
  Matrix m(n, dim);
  for (double& v : m.data()) v = 2.0 * gen.next_f64() - 1.0;
  return m;
}

Matrix random_prob_rows(std::size_t n, std::size_t classes, SplitMix64& gen) {
  Matrix m(n, classes);
  for (std::size_t r = 0; r < n; ++r) {
    double sum = 0.0;
    for (double& v : m.row(r)) {
      v = gen.next_f64() + 1e-3;
      sum += v;
    }
    for (double& v : m.row(r)) v /= sum;
  }
  return m;
}

}  // namespace

TEST_SUITE("nn") {
  TEST_CASE("model_init shape contract") {
    SplitMix64 gen(1);
    const Model m = model_init({2, 3, 2}, gen);
    REQUIRE(m.weights.size() == 2);
    CHECK(m.weights[0].rows() == 3);
    CHECK(m.weights[0].cols() == 2);
    CHECK(m.weights[1].rows() == 2);
    CHECK(m.weights[1].cols() == 3);
    CHECK(m.biases[0].size() == 3);
    CHECK(m.biases[1].size() == 2);
    for (const auto& b : m.biases)
      for (double v : b) CHECK(v == 0.0);
    // Glorot bound.
    const double limit0 = std::sqrt(6.0 / 5.0);
    for (double v : m.weights[0].data()) CHECK(std::abs(v) <= limit0);
  }

  TEST_CASE("model_init determinism and seed sensitivity") {
    SplitMix64 a(9), b(9), c(10);
    const Model m1 = model_init({4, 8, 3}, a);
    const Model m2 = model_init({4, 8, 3}, b);
    CHECK(m1 == m2);
    const Model m3 = model_init({4, 8, 3}, c);
    CHECK(m1 != m3);
  }

  TEST_CASE("model_init rejects bad layer lists") {
    SplitMix64 gen(1);
    CHECK_THROWS_AS(model_init({}, gen), std::invalid_argument);
    CHECK_THROWS_AS(model_init({5}, gen), std::invalid_argument);
    CHECK_THROWS_AS(model_init({5, 0, 2}, gen), std::invalid_argument);
  }

  TEST_CASE("forward: zero model gives uniform rows") {
    Model m;
    m.layer_sizes = {3, 4, 5};
    m.weights = {Matrix(4, 3), Matrix(5, 4)};
    m.biases = {std::vector<double>(4, 0.0), std::vector<double>(5, 0.0)};
    SplitMix64 gen(2);
    const Matrix p = forward(m, random_inputs(6, 3, gen));
    for (std::size_t r = 0; r < p.rows(); ++r)
      for (double v : p.row(r)) CHECK(v == doctest::Approx(0.2).epsilon(1e-12));
  }

  TEST_CASE("forward: rows sum to one and lie in (0,1)") {
    SplitMix64 gen(3);
    const Model m = model_init({5, 7, 4}, gen);
    const Matrix p = forward(m, random_inputs(20, 5, gen));
    for (std::size_t r = 0; r < p.rows(); ++r) {
      double sum = 0.0;
      for (double v : p.row(r)) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
        sum += v;
      }
      CHECK(std::abs(sum - 1.0) <= 1e-12);
    }
  }

  TEST_CASE("forward: hand-computed 2-2-2 pass") {
    Model m;
    m.layer_sizes = {2, 2, 2};
    m.weights = {Matrix::from_rows({{1.0, -1.0}, {0.5, 0.25}}),
                 Matrix::from_rows({{2.0, 1.0}, {-1.0, 0.5}})};
    m.biases = {{0.1, -0.2}, {0.05, 0.15}};
    Matrix x(1, 2);
    x(0, 0) = 0.3;
    x(0, 1) = 0.7;
    // z1 = (-0.3, 0.125) -> relu (0, 0.125); z2 = (0.175, 0.2125); softmax.
    const Matrix p = forward(m, x);
    CHECK(p(0, 0) == doctest::Approx(0.49062609847833927).epsilon(1e-12));
    CHECK(p(0, 1) == doctest::Approx(0.5093739015216608).epsilon(1e-12));
  }

  TEST_CASE("forward rejects width mismatch") {
    SplitMix64 gen(4);
    const Model m = model_init({3, 2}, gen);
    CHECK_THROWS_AS(forward(m, Matrix(1, 4)), std::invalid_argument);
  }

  TEST_CASE("ce_grad: analytic loss values") {
    SplitMix64 gen(5);
    const Model m = model_init({4, 10}, gen);
    // Uniform predictions: zero weights and biases.
    Model uniform;
    uniform.layer_sizes = {4, 10};
    uniform.weights = {Matrix(10, 4)};
    uniform.biases = {std::vector<double>(10, 0.0)};
    Batch batch;
    batch.inputs = random_inputs(8, 4, gen);
    for (int i = 0; i < 8; ++i) batch.labels.push_back(i % 10);
    const LossGrads lg = ce_grad(uniform, batch);
    CHECK(lg.loss == doctest::Approx(std::log(10.0)).epsilon(1e-12));
  }

  TEST_CASE("ce_grad: near-perfect prediction has near-zero loss") {
    // Strong logit toward class 0 via huge bias.
    Model m;
    m.layer_sizes = {1, 2};
    m.weights = {Matrix(2, 1)};
    m.biases = {{50.0, -50.0}};
    Batch batch;
    batch.inputs = Matrix(1, 1);
    batch.labels = {0};
    const LossGrads lg = ce_grad(m, batch);
    CHECK(lg.loss < 1e-12);
  }

  TEST_CASE("ce_grad rejects bad labels") {
    SplitMix64 gen(6);
    const Model m = model_init({2, 3}, gen);
    Batch batch;
    batch.inputs = Matrix(1, 2);
    batch.labels = {3};
    CHECK_THROWS_AS(ce_grad(m, batch), std::out_of_range);
    batch.labels.clear();
    CHECK_THROWS_AS(ce_grad(m, batch), std::invalid_argument);
  }

  TEST_CASE("ce_grad matches finite differences") {
    SplitMix64 gen(7);
    for (int trial = 0; trial < 5; ++trial) {
      const Model m = model_init({3, 6, 4}, gen);
      Batch batch;
      batch.inputs = random_inputs(4, 3, gen);
      for (int i = 0; i < 4; ++i)
        batch.labels.push_back(static_cast<int>(gen.next_u64() % 4));
      const LossGrads lg = ce_grad(m, batch);
      const Gradients fd = finite_difference_grads(
          m, [&](const Model& mm) { return cross_entropy(forward(mm, batch.inputs), batch.labels); });
      CHECK(max_rel_error(lg.grads, fd) <= 1e-4);
    }
  }

  TEST_CASE("distill_grad: fixed point and analytic value") {
    SplitMix64 gen(8);
    const Model m = model_init({2, 5, 3}, gen);
    const Matrix inputs = random_inputs(6, 2, gen);
    const Matrix own = forward(m, inputs);
    const LossGrads at_fixed_point = distill_grad(m, inputs, own);
    CHECK(at_fixed_point.loss == 0.0);
    for (const auto& w : at_fixed_point.grads.weights)
      for (double v : w.data()) CHECK(v == 0.0);

    // Single input, outputs (0.6, 0.4), target (1, 0): loss = 0.32.
    Matrix probs(1, 2);
    probs(0, 0) = 0.6;
    probs(0, 1) = 0.4;
    Matrix target(1, 2);
    target(0, 0) = 1.0;
    CHECK(output_mse(probs, target) == doctest::Approx(0.32).epsilon(1e-12));
  }

  TEST_CASE("distill_grad rejects shape mismatch") {
    SplitMix64 gen(9);
    const Model m = model_init({2, 3}, gen);
    CHECK_THROWS_AS(distill_grad(m, Matrix(2, 2), Matrix(3, 3)), std::invalid_argument);
  }

  TEST_CASE("distill_grad matches finite differences") {
    SplitMix64 gen(10);
    for (int trial = 0; trial < 5; ++trial) {
      const Model m = model_init({3, 5, 4}, gen);
      const Matrix inputs = random_inputs(4, 3, gen);
      const Matrix targets = random_prob_rows(4, 4, gen);
      const LossGrads lg = distill_grad(m, inputs, targets);
      const Gradients fd = finite_difference_grads(
          m, [&](const Model& mm) { return output_mse(forward(mm, inputs), targets); });
      CHECK(max_rel_error(lg.grads, fd) <= 1e-4);
    }
  }

  TEST_CASE("sgd_step arithmetic, identity and linearity") {
    Model m;
    m.layer_sizes = {1, 1};
    m.weights = {Matrix::from_rows({{1.0}})};
    m.biases = {{0.5}};
    Gradients zero;
    zero.weights = {Matrix(1, 1)};
    zero.biases = {{0.0}};
    const Model same = sgd_step(m, zero, 0.1);
    CHECK(same == m);

    Gradients g;
    g.weights = {Matrix::from_rows({{2.0}})};
    g.biases = {{1.0}};
    const Model stepped = sgd_step(m, g, 0.1);
    CHECK(stepped.weights[0](0, 0) == doctest::Approx(0.8).epsilon(1e-15));
    CHECK(stepped.biases[0][0] == doctest::Approx(0.4).epsilon(1e-15));

    // Two steps with a fixed gradient equal one step of twice the size.
    const Model twice = sgd_step(sgd_step(m, g, 0.1), g, 0.1);
    const Model once = sgd_step(m, g, 0.2);
    CHECK(twice.weights[0](0, 0) == doctest::Approx(once.weights[0](0, 0)).epsilon(1e-15));
  }

  TEST_CASE("sgd_step rejects shape mismatch and non-finite results") {
    SplitMix64 gen(11);
    const Model m = model_init({2, 2}, gen);
    Gradients g;
    g.weights = {Matrix(3, 2)};
    g.biases = {{0.0, 0.0}};
    CHECK_THROWS_AS(sgd_step(m, g, 0.1), std::invalid_argument);
    Gradients inf_g;
    inf_g.weights = {Matrix(2, 2)};
    inf_g.weights[0](0, 0) = std::numeric_limits<double>::infinity();
    inf_g.biases = {{0.0, 0.0}};
    CHECK_THROWS_AS(sgd_step(m, inf_g, 1.0), std::runtime_error);
  }

  TEST_CASE("output-space MSE is convex along segments") {
    SplitMix64 gen(12);
    for (int trial = 0; trial < 50; ++trial) {
      const Matrix f1 = random_prob_rows(3, 4, gen);
      const Matrix f2 = random_prob_rows(3, 4, gen);
      const Matrix tg = random_prob_rows(3, 4, gen);
      const double l1 = output_mse(f1, tg);
      const double l2 = output_mse(f2, tg);
      for (int step = 0; step <= 10; ++step) {
        const double t = 0.1 * step;
        Matrix mix(3, 4);
        for (std::size_t i = 0; i < mix.data().size(); ++i)
          mix.data()[i] = t * f1.data()[i] + (1.0 - t) * f2.data()[i];
        CHECK(output_mse(mix, tg) <= t * l1 + (1.0 - t) * l2 + 1e-12);
      }
    }
  }

  TEST_CASE("determinism: same seed and steps give identical models") {
    const auto train_once = [] {
      SplitMix64 gen(77);
      Model m = model_init({3, 4, 2}, gen);
      Batch batch;
      batch.inputs = random_inputs(5, 3, gen);
      batch.labels = {0, 1, 0, 1, 1};
      for (int i = 0; i < 50; ++i) {
        const LossGrads lg = ce_grad(m, batch);
        m = sgd_step(std::move(m), lg.grads, 0.05);
      }
      return m;
    };
    CHECK(train_once() == train_once());
  }
}
