#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "ariign/errors.hpp"
#include "ariign/rng.hpp"
#include "ariign/tgan.hpp"
#include "ariign/trainer.hpp"

using namespace ariign;

namespace {

Matrix random_matrix(Rng& rng, std::size_t r, std::size_t c, double scale = 1.0) {
  Matrix m(r, c);
  for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = scale * rng.normal();
  return m;
}

void zero_mlp(MlpParams& p) {
  for (auto& layer : p.layers) {
    layer.weight.set_zero();
    layer.bias.set_zero();
  }
}

double naive_gelu(double x) { return gelu_scalar(x); }

// Unvectorized per-sample re-implementation of both losses for
// PerSourcePad inputs.
Matrix naive_net(const MlpParams& p, const Matrix& x) {
  Matrix h = x;
  for (const auto& layer : p.layers) {
    Matrix out(h.rows(), layer.weight.rows());
    for (std::size_t r = 0; r < h.rows(); ++r)
      for (std::size_t o = 0; o < layer.weight.rows(); ++o) {
        double acc = layer.bias(0, o);
        for (std::size_t i = 0; i < h.cols(); ++i) acc += h(r, i) * layer.weight(o, i);
        if (layer.act == Activation::Gelu) acc = naive_gelu(acc);
        else if (layer.act == Activation::LeakyRelu02) acc = acc > 0 ? acc : 0.2 * acc;
        else if (layer.act == Activation::Sigmoid) acc = 1.0 / (1.0 + std::exp(-acc));
        out(r, o) = acc;
      }
    h = std::move(out);
  }
  return h;
}

double naive_disc(const GanPair& pair, const Matrix& x, std::size_t row) {
  Matrix p = naive_net(pair.discriminator, x);
  double v = p(row, 0);
  return std::min(1.0 - kDiscClampEps, std::max(kDiscClampEps, v));
}

Matrix pad(const Matrix& src, int slot) {
  Matrix j(src.rows(), 2 * src.cols());
  for (std::size_t r = 0; r < src.rows(); ++r)
    for (std::size_t c = 0; c < src.cols(); ++c)
      j(r, slot == 0 ? c : src.cols() + c) = src(r, c);
  return j;
}

double naive_gen_loss(const GanPair& pair, const Matrix& o1, const Matrix& o2) {
  Matrix f1 = naive_net(pair.generator, pad(o1, 0));
  Matrix f2 = naive_net(pair.generator, pad(o2, 1));
  double acc = 0.0;
  for (std::size_t r = 0; r < o1.rows(); ++r) {
    acc += std::log(1.0 - naive_disc(pair, f1, r));
    acc += std::log(1.0 - naive_disc(pair, f2, r));
  }
  // each fake term is a separate mean over the batch
  return acc / static_cast<double>(o1.rows());
}

double naive_disc_loss(const GanPair& pair, const Matrix& real, const Matrix& o1,
                       const Matrix& o2) {
  double acc = 0.0;
  for (std::size_t r = 0; r < real.rows(); ++r)
    acc += std::log(naive_disc(pair, real, r));
  return acc / static_cast<double>(real.rows()) + naive_gen_loss(pair, o1, o2);
}

}  // namespace

TEST_CASE("zeroed discriminator gives the analytic log(1/2) constants") {
  Rng rng(1);
  GanPair pair = make_gan_pair(Modality::Text, 4, rng);
  zero_mlp(pair.discriminator);
  Matrix real = random_matrix(rng, 6, 4);
  Matrix o1 = random_matrix(rng, 6, 4);
  Matrix o2 = random_matrix(rng, 6, 4);

  // D is identically 0.5, so gen loss = 2 log(1/2), disc loss = 3 log(1/2).
  double gen = generator_loss_value(pair, o1, o2, GanInputMode::PerSourcePad);
  double disc = discriminator_loss_value(pair, real, o1, o2, GanInputMode::PerSourcePad);
  CHECK(gen == doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));
  CHECK(disc == doctest::Approx(3.0 * std::log(0.5)).epsilon(1e-12));
  CHECK(generator_loss_value(pair, o1, o2, GanInputMode::ConcatJoint) ==
        doctest::Approx(2.0 * std::log(0.5)).epsilon(1e-12));
}

TEST_CASE("losses match the unvectorized reference on random batches") {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    std::size_t d = 2 + rng.below(5);
    std::size_t n = 1 + rng.below(9);
    GanPair pair = make_gan_pair(Modality::Audio, d, rng);
    Matrix real = random_matrix(rng, n, d);
    Matrix o1 = random_matrix(rng, n, d);
    Matrix o2 = random_matrix(rng, n, d);
    double gen = generator_loss_value(pair, o1, o2, GanInputMode::PerSourcePad);
    double disc = discriminator_loss_value(pair, real, o1, o2, GanInputMode::PerSourcePad);
    CHECK(std::fabs(gen - naive_gen_loss(pair, o1, o2)) < 1e-10);
    CHECK(std::fabs(disc - naive_disc_loss(pair, real, o1, o2)) < 1e-10);
  }
}

TEST_CASE("discriminator outputs are clamped away from 0 and 1") {
  Rng rng(3);
  GanPair pair = make_gan_pair(Modality::Text, 3, rng);
  // Saturate the sigmoid with a huge bias.
  pair.discriminator.layers.back().bias(0, 0) = 1e4;
  Matrix real = random_matrix(rng, 4, 3);
  Matrix o1 = random_matrix(rng, 4, 3);
  Matrix o2 = random_matrix(rng, 4, 3);
  double disc = discriminator_loss_value(pair, real, o1, o2, GanInputMode::PerSourcePad);
  CHECK(std::isfinite(disc));
  pair.discriminator.layers.back().bias(0, 0) = -1e4;
  CHECK(std::isfinite(
      discriminator_loss_value(pair, real, o1, o2, GanInputMode::PerSourcePad)));
}

TEST_CASE("no gradient reaches the generator from the discriminator loss") {
  Rng rng(4);
  GanPair pair = make_gan_pair(Modality::Visual, 4, rng);
  Matrix real = random_matrix(rng, 5, 4);
  Matrix o1 = random_matrix(rng, 5, 4);
  Matrix o2 = random_matrix(rng, 5, 4);

  Tape tape;
  GanVars vars = gan_leaves(tape, pair);
  Var loss = discriminator_loss(tape, pair, vars, tape.constant(real),
                                tape.constant(o1), tape.constant(o2),
                                GanInputMode::PerSourcePad);
  tape.backward(loss);
  for (Var w : vars.gen.weights) {
    const Matrix& g = tape.grad(w);
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g.data()[i] == 0.0);
  }
  // while the discriminator does receive gradient
  double disc_grad_mag = 0.0;
  for (Var w : vars.disc.weights) {
    const Matrix& g = tape.grad(w);
    for (std::size_t i = 0; i < g.size(); ++i) disc_grad_mag += std::fabs(g.data()[i]);
  }
  CHECK(disc_grad_mag > 0.0);
}

TEST_CASE("loss gradients match finite differences") {
  Rng rng(5);
  GanPair pair = make_gan_pair(Modality::Text, 3, rng);
  Matrix real = random_matrix(rng, 4, 3);
  Matrix o1 = random_matrix(rng, 4, 3);
  Matrix o2 = random_matrix(rng, 4, 3);
  const double h = 1e-5;

  for (int which : {0, 1}) {  // 0 = generator loss, 1 = discriminator loss
    Tape tape;
    GanVars vars = gan_leaves(tape, pair);
    Var loss = which == 0
                   ? generator_loss(tape, pair, vars, tape.constant(o1),
                                    tape.constant(o2), GanInputMode::PerSourcePad)
                   : discriminator_loss(tape, pair, vars, tape.constant(real),
                                        tape.constant(o1), tape.constant(o2),
                                        GanInputMode::PerSourcePad);
    tape.backward(loss);
    auto eval_with = [&](const GanPair& q) {
      return which == 0
                 ? generator_loss_value(q, o1, o2, GanInputMode::PerSourcePad)
                 : discriminator_loss_value(q, real, o1, o2, GanInputMode::PerSourcePad);
    };
    MlpVars& target = which == 0 ? vars.gen : vars.disc;
    for (std::size_t l = 0; l < target.weights.size(); ++l) {
      const Matrix& g = tape.grad(target.weights[l]);
      for (std::size_t i = 0; i < g.size(); i += 2) {
        GanPair plus = pair, minus = pair;
        MlpParams& pp = which == 0 ? plus.generator : plus.discriminator;
        MlpParams& pm = which == 0 ? minus.generator : minus.discriminator;
        pp.layers[l].weight.data()[i] += h;
        pm.layers[l].weight.data()[i] -= h;
        double fd = (eval_with(plus) - eval_with(minus)) / (2.0 * h);
        CHECK(std::fabs(fd - g.data()[i]) /
                  std::max({1.0, std::fabs(fd), std::fabs(g.data()[i])}) <
              1e-5);
      }
    }
  }
}

TEST_CASE("padded generation fills the requested slot") {
  Rng rng(6);
  GanPair pair = make_gan_pair(Modality::Text, 3, rng);
  Matrix src = random_matrix(rng, 2, 3);
  Tape tape;
  GanVars vars = gan_leaves(tape, pair);
  Var f0 = gan_generate_padded(tape, pair, vars, tape.constant(src), 0);
  CHECK(max_abs_diff(tape.value(f0), naive_net(pair.generator, pad(src, 0))) < 1e-12);
  Var f1 = gan_generate_padded(tape, pair, vars, tape.constant(src), 1);
  CHECK(max_abs_diff(tape.value(f1), naive_net(pair.generator, pad(src, 1))) < 1e-12);
  CHECK(max_abs_diff(tape.value(f0), tape.value(f1)) > 1e-12);
}

TEST_CASE("discriminator separates well-separated real and fake features") {
  // Frozen generator, Adam on the discriminator only; real and initial
  // fakes live far apart so a trained D should tell them apart.
  Rng rng(7);
  std::size_t d = 6, n = 32;
  GanPair pair = make_gan_pair(Modality::Text, d, rng);
  Matrix real = random_matrix(rng, n, d);
  for (std::size_t i = 0; i < real.size(); ++i) real.data()[i] += 4.0;
  Matrix o1 = random_matrix(rng, n, d);
  Matrix o2 = random_matrix(rng, n, d);

  Adam adam(0.01, 0.0);
  for (int step = 0; step < 200; ++step) {
    Tape tape;
    GanVars vars;
    vars.disc = mlp_leaves(tape, pair.discriminator);
    Var loss = discriminator_loss(tape, pair, vars, tape.constant(real),
                                  tape.constant(o1), tape.constant(o2),
                                  GanInputMode::PerSourcePad);
    Var objective = tape.scale(loss, -1.0);
    tape.backward(objective);
    for (std::size_t l = 0; l < vars.disc.weights.size(); ++l) {
      adam.apply("w" + std::to_string(l), pair.discriminator.layers[l].weight,
                 tape.grad(vars.disc.weights[l]));
      adam.apply("b" + std::to_string(l), pair.discriminator.layers[l].bias,
                 tape.grad(vars.disc.biases[l]));
    }
  }

  Matrix held_real = random_matrix(rng, n, d);
  for (std::size_t i = 0; i < held_real.size(); ++i) held_real.data()[i] += 4.0;
  Matrix fakes = naive_net(pair.generator, pad(random_matrix(rng, n, d), 0));
  Matrix dr = naive_net(pair.discriminator, held_real);
  Matrix df = naive_net(pair.discriminator, fakes);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (dr(i, 0) > 0.5) ++correct;
    if (df(i, 0) < 0.5) ++correct;
  }
  CHECK(static_cast<double>(correct) / (2.0 * n) > 0.9);
}

TEST_CASE("empty batches are rejected") {
  Rng rng(8);
  GanPair pair = make_gan_pair(Modality::Text, 3, rng);
  Tape tape;
  GanVars vars = gan_leaves(tape, pair);
  Var empty = tape.constant(Matrix(0, 3));
  CHECK_THROWS_AS(
      generator_loss(tape, pair, vars, empty, empty, GanInputMode::PerSourcePad),
      ConfigError);
}
