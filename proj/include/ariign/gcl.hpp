#pragma once

// Graph contrastive losses. Similarities default to the bounded cosine
// (1 + cos)/2 over unit-normalized embeddings, so every pairwise score
// lies in [0, 1] and the ratio losses stay in [-1, 0].

#include <cstddef>
#include <vector>

#include "ariign/autograd.hpp"
#include "ariign/matrix.hpp"

namespace ariign {

enum class SimilarityMode { BoundedCosine, SoftmaxedDot };
enum class RegTarget { Positives, LiteralDelta };
enum class ImclPositiveRule { CrossModal, LiteralSameModal };

struct GclConfig {
  double beta = 0.8;    // modal margin, IMCL regularizer target
  double lambda = 0.5;  // hybrid weight
  SimilarityMode similarity = SimilarityMode::BoundedCosine;
  RegTarget reg_target = RegTarget::Positives;
  ImclPositiveRule imcl_positive_rule = ImclPositiveRule::CrossModal;
};

// Row metadata for an embeddings matrix of shape (rows x d).
struct ContrastTags {
  std::vector<int> modality;  // 0=text, 1=audio, 2=visual
  std::vector<int> label;
};

struct GclResult {
  Var loss;                        // regularized total (ratio loss + reg)
  Var ratio_loss;                  // the plain ratio term
  Var reg_loss;
  std::size_t valid_anchors = 0;
  std::size_t skipped_anchors = 0;
};

// Pairwise similarity matrix for the given mode (diagonal forced to 0 so
// an anchor never pairs with itself).
Var similarity_matrix(Tape& tape, Var embeddings, SimilarityMode mode);

// Anchor = every row; positives same modality & class, negatives same
// modality & different class. Throws DataError when no anchor is valid.
GclResult iccl_loss(Tape& tape, Var embeddings, const ContrastTags& tags,
                    const GclConfig& cfg);

// Positives/negatives drawn from the other modalities (default rule).
GclResult imcl_loss(Tape& tape, Var embeddings, const ContrastTags& tags,
                    const GclConfig& cfg);

// lambda * imcl + (1 - lambda) * iccl.
Var hybrid_loss(Tape& tape, Var imcl, Var iccl, double lambda);

// Frozen-parameter scalar wrappers for tests and logging.
double iccl_loss_value(const Matrix& embeddings, const ContrastTags& tags,
                       const GclConfig& cfg);
double imcl_loss_value(const Matrix& embeddings, const ContrastTags& tags,
                       const GclConfig& cfg);

}  // namespace ariign
