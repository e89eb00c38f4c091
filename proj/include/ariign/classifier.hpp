#pragma once

// Emotion inference subnetwork: concatenation fusion of the three modality
// embeddings followed by a two-hidden-layer ReLU MLP with a softmax
// decision layer, trained with negative log-likelihood.

#include <vector>

#include "ariign/autograd.hpp"
#include "ariign/mlp.hpp"
#include "ariign/rng.hpp"

namespace ariign {

struct ClassifierParams {
  MlpParams mlp;  // 3d -> 2d relu -> d relu -> C linear
  int class_count = 0;
};

ClassifierParams make_classifier(std::size_t fused_dim, std::size_t d, int class_count,
                                 double dropout, Rng& rng);

// z_f = psi_T (+) psi_A (+) psi_V, rows aligned.
Var fuse(Tape& tape, Var psi_t, Var psi_a, Var psi_v);
std::vector<double> fuse(const std::vector<double>& psi_t,
                         const std::vector<double>& psi_a,
                         const std::vector<double>& psi_v);

// Probability rows (n x C), each summing to 1.
Var classify(Tape& tape, Var z, const ClassifierParams& params, const MlpVars& vars,
             Mode mode, Rng* rng);
Matrix classify_value(const ClassifierParams& params, const Matrix& z);

// Mean of -log p(label_i).
Var cls_loss(Tape& tape, Var probs, const std::vector<int>& labels);
double cls_loss_value(const Matrix& probs, const std::vector<int>& labels);

std::vector<int> argmax_rows(const Matrix& probs);

}  // namespace ariign
