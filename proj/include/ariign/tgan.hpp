#pragma once

// Tri-modal adversarial stage: per target modality, a generator maps the
// other two modalities into the target space and a discriminator scores
// real vs generated features. Losses follow the two-term log forms with
// discriminator outputs clamped to [eps, 1-eps].

#include "ariign/autograd.hpp"
#include "ariign/mlp.hpp"
#include "ariign/rng.hpp"

namespace ariign {

inline constexpr double kDiscClampEps = 1e-7;

enum class Modality { Text = 0, Audio = 1, Visual = 2 };

enum class GanInputMode {
  PerSourcePad,  // G applied to each source separately, absent slot zeroed
  ConcatJoint,   // G applied once to the concatenated pair
};

struct GanPair {
  Modality target = Modality::Text;
  MlpParams generator;      // 2d -> d
  MlpParams discriminator;  // d -> 1, sigmoid head
};

struct GanStepReport {
  double gen_loss = 0.0;
  double disc_loss = 0.0;
  double disc_real_mean = 0.0;
  double disc_fake_mean = 0.0;
};

GanPair make_gan_pair(Modality target, std::size_t d, Rng& rng);

struct GanVars {
  MlpVars gen;
  MlpVars disc;
};

GanVars gan_leaves(Tape& tape, const GanPair& pair);

// Discriminator probability in (0,1), clamped.
Var disc_prob(Tape& tape, const GanPair& pair, const GanVars& vars, Var x);

// Generator output for a single 2d-wide input batch.
Var gan_generate(Tape& tape, const GanPair& pair, const GanVars& vars, Var joint);

// Pads `source` into the given slot (0 or 1) of the generator's 2d input.
Var gan_generate_padded(Tape& tape, const GanPair& pair, const GanVars& vars,
                        Var source, int slot);

// mean over batch of log(1 - D(G(o1))) + log(1 - D(G(o2))).
Var generator_loss(Tape& tape, const GanPair& pair, const GanVars& vars, Var other1,
                   Var other2, GanInputMode mode);

// mean of log D(real) + log(1 - D(G(o1))) + log(1 - D(G(o2))); generated
// samples are detached (no gradient reaches the generator).
Var discriminator_loss(Tape& tape, const GanPair& pair, const GanVars& vars, Var real,
                       Var other1, Var other2, GanInputMode mode);

// Plain-matrix wrappers over frozen parameters (loss evaluation only).
double generator_loss_value(const GanPair& pair, const Matrix& other1,
                            const Matrix& other2, GanInputMode mode);
double discriminator_loss_value(const GanPair& pair, const Matrix& real,
                                const Matrix& other1, const Matrix& other2,
                                GanInputMode mode);

// Matrix-level generate for eval paths.
Matrix gan_generate_value(const GanPair& pair, const Matrix& other1,
                          const Matrix& other2);

}  // namespace ariign
