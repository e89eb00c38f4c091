#include "ariign/tgan.hpp"

#include "ariign/errors.hpp"

namespace ariign {

GanPair make_gan_pair(Modality target, std::size_t d, Rng& rng) {
  GanPair pair;
  pair.target = target;
  pair.generator = make_mlp({2 * d, d, d}, {Activation::Gelu, Activation::Linear},
                            0.0, rng);
  pair.discriminator =
      make_mlp({d, d, 1}, {Activation::LeakyRelu02, Activation::Sigmoid}, 0.0, rng);
  return pair;
}

GanVars gan_leaves(Tape& tape, const GanPair& pair) {
  return {mlp_leaves(tape, pair.generator), mlp_leaves(tape, pair.discriminator)};
}

Var disc_prob(Tape& tape, const GanPair& pair, const GanVars& vars, Var x) {
  Var p = mlp_forward(tape, x, pair.discriminator, vars.disc, Mode::Eval, nullptr);
  return tape.clamp(p, kDiscClampEps, 1.0 - kDiscClampEps);
}

Var gan_generate(Tape& tape, const GanPair& pair, const GanVars& vars, Var joint) {
  return mlp_forward(tape, joint, pair.generator, vars.gen, Mode::Eval, nullptr);
}

Var gan_generate_padded(Tape& tape, const GanPair& pair, const GanVars& vars,
                        Var source, int slot) {
  const Matrix& sv = tape.value(source);
  Var zeros = tape.constant(Matrix(sv.rows(), sv.cols()));
  Var joint = slot == 0 ? tape.concat_cols({source, zeros})
                        : tape.concat_cols({zeros, source});
  return gan_generate(tape, pair, vars, joint);
}

namespace {

// mean of log(1 - D(fake)) for one fake batch.
Var fake_term(Tape& tape, const GanPair& pair, const GanVars& vars, Var fake) {
  Var p = disc_prob(tape, pair, vars, fake);
  Var one_minus = tape.offset(tape.scale(p, -1.0), 1.0);
  return tape.mean_all(tape.log(one_minus));
}

}  // namespace

Var generator_loss(Tape& tape, const GanPair& pair, const GanVars& vars, Var other1,
                   Var other2, GanInputMode mode) {
  if (tape.value(other1).rows() == 0) throw ConfigError("generator_loss: empty batch");
  if (mode == GanInputMode::PerSourcePad) {
    Var f1 = gan_generate_padded(tape, pair, vars, other1, 0);
    Var f2 = gan_generate_padded(tape, pair, vars, other2, 1);
    return tape.add(fake_term(tape, pair, vars, f1), fake_term(tape, pair, vars, f2));
  }
  Var fake = gan_generate(tape, pair, vars, tape.concat_cols({other1, other2}));
  return tape.scale(fake_term(tape, pair, vars, fake), 2.0);
}

Var discriminator_loss(Tape& tape, const GanPair& pair, const GanVars& vars, Var real,
                       Var other1, Var other2, GanInputMode mode) {
  if (tape.value(real).rows() == 0) throw ConfigError("discriminator_loss: empty batch");
  // Fakes are recomputed outside the tape so no gradient reaches G.
  Matrix o1 = tape.value(other1);
  Matrix o2 = tape.value(other2);
  Var real_term = tape.mean_all(tape.log(disc_prob(tape, pair, vars, real)));
  Var fakes_term;
  if (mode == GanInputMode::PerSourcePad) {
    Matrix j1(o1.rows(), 2 * o1.cols());
    Matrix j2(o2.rows(), 2 * o2.cols());
    for (std::size_t r = 0; r < o1.rows(); ++r) {
      std::copy(o1.row(r), o1.row(r) + o1.cols(), j1.row(r));
      std::copy(o2.row(r), o2.row(r) + o2.cols(), j2.row(r) + o2.cols());
    }
    Var f1 = tape.constant(mlp_apply(pair.generator, j1));
    Var f2 = tape.constant(mlp_apply(pair.generator, j2));
    fakes_term = tape.add(fake_term(tape, pair, vars, f1), fake_term(tape, pair, vars, f2));
  } else {
    Matrix joint(o1.rows(), o1.cols() + o2.cols());
    for (std::size_t r = 0; r < o1.rows(); ++r) {
      std::copy(o1.row(r), o1.row(r) + o1.cols(), joint.row(r));
      std::copy(o2.row(r), o2.row(r) + o2.cols(), joint.row(r) + o1.cols());
    }
    Var fake = tape.constant(mlp_apply(pair.generator, joint));
    fakes_term = tape.scale(fake_term(tape, pair, vars, fake), 2.0);
  }
  return tape.add(real_term, fakes_term);
}

double generator_loss_value(const GanPair& pair, const Matrix& other1,
                            const Matrix& other2, GanInputMode mode) {
  Tape tape;
  GanPair p = pair;
  GanVars vars = gan_leaves(tape, p);
  Var loss = generator_loss(tape, p, vars, tape.constant(other1),
                            tape.constant(other2), mode);
  return tape.value(loss)(0, 0);
}

double discriminator_loss_value(const GanPair& pair, const Matrix& real,
                                const Matrix& other1, const Matrix& other2,
                                GanInputMode mode) {
  Tape tape;
  GanPair p = pair;
  GanVars vars = gan_leaves(tape, p);
  Var loss = discriminator_loss(tape, p, vars, tape.constant(real),
                                tape.constant(other1), tape.constant(other2), mode);
  return tape.value(loss)(0, 0);
}

Matrix gan_generate_value(const GanPair& pair, const Matrix& other1,
                          const Matrix& other2) {
  Matrix joint(other1.rows(), other1.cols() + other2.cols());
  for (std::size_t r = 0; r < other1.rows(); ++r) {
    std::copy(other1.row(r), other1.row(r) + other1.cols(), joint.row(r));
    std::copy(other2.row(r), other2.row(r) + other2.cols(),
              joint.row(r) + other1.cols());
  }
  return mlp_apply(pair.generator, joint);
}

}  // namespace ariign
