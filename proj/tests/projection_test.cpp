#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ariign/autograd.hpp"
#include "ariign/errors.hpp"
#include "ariign/projection.hpp"
#include "ariign/rng.hpp"

using namespace ariign;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = rng.normal();
  return m;
}

// Naive MLP forward written independently of the tape.
Matrix naive_mlp(const MlpParams& p, const Matrix& x) {
  Matrix h = x;
  for (const auto& layer : p.layers) {
    Matrix out(h.rows(), layer.weight.rows());
    for (std::size_t r = 0; r < h.rows(); ++r)
      for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
        double acc = layer.bias(0, o);
        for (std::size_t i = 0; i < h.cols(); ++i) acc += h(r, i) * layer.weight(o, i);
        switch (layer.act) {
          case Activation::Linear: break;
          case Activation::Gelu: acc = gelu_scalar(acc); break;
          case Activation::Relu: acc = acc > 0 ? acc : 0.0; break;
          case Activation::LeakyRelu02: acc = acc > 0 ? acc : 0.2 * acc; break;
          case Activation::Sigmoid: acc = 1.0 / (1.0 + std::exp(-acc)); break;
        }
        out(r, o) = acc;
      }
    h = std::move(out);
  }
  return h;
}

}  // namespace

TEST_CASE("projection maps each modality into width d") {
  Rng rng(1);
  ProjectionParams p = make_projection(11, 7, 13, 6, 0.0, rng);
  Matrix xt = random_matrix(rng, 5, 11);
  Matrix xa = random_matrix(rng, 5, 7);
  Matrix xv = random_matrix(rng, 5, 13);
  CHECK(mlp_apply(p.text, xt).cols() == 6);
  CHECK(mlp_apply(p.audio, xa).cols() == 6);
  CHECK(mlp_apply(p.visual, xv).cols() == 6);
  CHECK(mlp_apply(p.text, xt).rows() == 5);
}

TEST_CASE("tape forward equals the naive forward") {
  Rng rng(2);
  ProjectionParams p = make_projection(9, 9, 9, 5, 0.5, rng);
  Matrix x = random_matrix(rng, 8, 9);
  // dropout must not fire in eval mode despite rate 0.5
  CHECK(max_abs_diff(mlp_apply(p.text, x), naive_mlp(p.text, x)) < 1e-12);
  CHECK(max_abs_diff(mlp_apply(p.audio, x), naive_mlp(p.audio, x)) < 1e-12);
}

TEST_CASE("construction is deterministic in the seed") {
  Rng r1(5), r2(5), r3(6);
  ProjectionParams a = make_projection(4, 4, 4, 3, 0.0, r1);
  ProjectionParams b = make_projection(4, 4, 4, 3, 0.0, r2);
  ProjectionParams c = make_projection(4, 4, 4, 3, 0.0, r3);
  CHECK(max_abs_diff(a.text.layers[0].weight, b.text.layers[0].weight) == 0.0);
  CHECK(max_abs_diff(a.text.layers[0].weight, c.text.layers[0].weight) > 0.0);
}

TEST_CASE("train-mode dropout scales survivors by 1/(1-rate)") {
  Rng rng(7);
  ProjectionParams p = make_projection(6, 6, 6, 16, 0.5, rng);
  Matrix x = random_matrix(rng, 12, 6);
  Matrix eval = mlp_apply(p.text, x);
  Tape tape;
  MlpVars vars;
  for (const auto& layer : p.text.layers) {
    vars.weights.push_back(tape.constant(layer.weight));
    vars.biases.push_back(tape.constant(layer.bias));
  }
  Rng drop(11);
  Var out = mlp_forward(tape, tape.constant(x), p.text, vars, Mode::Train, &drop);
  CHECK(max_abs_diff(tape.value(out), eval) > 1e-6);

  CHECK_THROWS_AS(
      mlp_forward(tape, tape.constant(x), p.text, vars, Mode::Train, nullptr),
      ConfigError);
}

TEST_CASE("projection gradients match finite differences") {
  Rng rng(9);
  ProjectionParams p = make_projection(4, 4, 4, 3, 0.0, rng);
  Matrix x = random_matrix(rng, 3, 4);

  Tape tape;
  MlpVars vars = mlp_leaves(tape, p.text);
  Var out = mlp_forward(tape, tape.constant(x), p.text, vars, Mode::Eval, nullptr);
  Var loss = tape.mean_all(tape.square(out));
  tape.backward(loss);

  auto eval_with = [&](const MlpParams& q) {
    Matrix y = mlp_apply(q, x);
    double acc = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) acc += y.data()[i] * y.data()[i];
    return acc / static_cast<double>(y.size());
  };

  const double h = 1e-5;
  for (std::size_t l = 0; l < p.text.layers.size(); ++l) {
    const Matrix& g = tape.grad(vars.weights[l]);
    for (std::size_t i = 0; i < g.size(); ++i) {
      MlpParams plus = p.text, minus = p.text;
      plus.layers[l].weight.data()[i] += h;
      minus.layers[l].weight.data()[i] -= h;
      double fd = (eval_with(plus) - eval_with(minus)) / (2.0 * h);
      CHECK(std::fabs(fd - g.data()[i]) /
                std::max({1.0, std::fabs(fd), std::fabs(g.data()[i])}) <
            1e-6);
    }
  }
}

TEST_CASE("single-utterance projection agrees with the batch path") {
  Rng rng(13);
  ProjectionParams p = make_projection(5, 4, 6, 3, 0.0, rng);
  std::vector<double> t = {0.1, -0.2, 0.3, 0.4, -0.5};
  std::vector<double> a = {1.0, 0.5, -1.5, 0.25};
  std::vector<double> v = {0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  ProjectedFeatures f = project(p, t, v, a);
  Matrix xt(1, 5, t);
  Matrix got = mlp_apply(p.text, xt);
  REQUIRE(f.text.size() == 3);
  for (std::size_t i = 0; i < 3; ++i)
    CHECK(f.text[i] == doctest::Approx(got(0, i)).epsilon(1e-14));
}

TEST_CASE("shape errors on mismatched input width") {
  Rng rng(15);
  ProjectionParams p = make_projection(5, 5, 5, 3, 0.0, rng);
  Matrix wrong = random_matrix(rng, 2, 4);
  CHECK_THROWS_AS(mlp_apply(p.text, wrong), ShapeError);
}
