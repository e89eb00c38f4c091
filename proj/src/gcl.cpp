#include "ariign/gcl.hpp"

#include <algorithm>

#include "ariign/errors.hpp"

namespace ariign {

Var similarity_matrix(Tape& tape, Var embeddings, SimilarityMode mode) {
  const std::size_t n = tape.value(embeddings).rows();
  if (mode == SimilarityMode::BoundedCosine) {
    Var unit = tape.row_l2_normalize(embeddings);
    Var gram = tape.matmul_nt(unit, unit);  // cosines in [-1, 1]
    Var s = tape.offset(tape.scale(gram, 0.5), 0.5);
    Matrix off_diag(n, n);
    off_diag.fill(1.0);
    for (std::size_t i = 0; i < n; ++i) off_diag(i, i) = 0.0;
    return tape.mask_mul(s, std::move(off_diag));
  }
  // SoftmaxedDot: per-anchor softmax over raw dot products against all
  // other rows; the diagonal is excluded via a large negative logit.
  Var gram = tape.matmul_nt(embeddings, embeddings);
  Matrix diag_penalty(n, n);
  for (std::size_t i = 0; i < n; ++i) diag_penalty(i, i) = -1e30;
  Var masked = tape.add(gram, tape.constant(std::move(diag_penalty)));
  Var soft = tape.softmax_rows(masked);
  Matrix off_diag(n, n);
  off_diag.fill(1.0);
  for (std::size_t i = 0; i < n; ++i) off_diag(i, i) = 0.0;
  return tape.mask_mul(soft, std::move(off_diag));
}

namespace {

struct MaskPair {
  Matrix pos;  // n x n
  Matrix neg;
  std::vector<double> pos_count;
  std::vector<double> neg_count;
};

MaskPair build_masks(const ContrastTags& tags, bool cross_modal_pos,
                     bool cross_modal_neg) {
  const std::size_t n = tags.modality.size();
  MaskPair m{Matrix(n, n), Matrix(n, n), std::vector<double>(n, 0.0),
             std::vector<double>(n, 0.0)};
  for (std::size_t a = 0; a < n; ++a) {
    for (std::size_t b = 0; b < n; ++b) {
      if (a == b) continue;
      bool same_mod = tags.modality[a] == tags.modality[b];
      bool same_cls = tags.label[a] == tags.label[b];
      bool pos_mod_ok = cross_modal_pos ? !same_mod : same_mod;
      bool neg_mod_ok = cross_modal_neg ? !same_mod : same_mod;
      if (pos_mod_ok && same_cls) {
        m.pos(a, b) = 1.0;
        m.pos_count[a] += 1.0;
      } else if (neg_mod_ok && !same_cls) {
        m.neg(a, b) = 1.0;
        m.neg_count[a] += 1.0;
      }
    }
  }
  return m;
}

GclResult assemble(Tape& tape, Var sim, const MaskPair& masks, double reg_target_value,
                   RegTarget reg_target) {
  const std::size_t n = masks.pos_count.size();
  std::vector<double> valid(n, 0.0);
  std::size_t n_valid = 0;
  for (std::size_t a = 0; a < n; ++a) {
    if (masks.pos_count[a] > 0.0 && masks.neg_count[a] > 0.0) {
      valid[a] = 1.0;
      ++n_valid;
    }
  }
  if (n_valid == 0) throw DataError("contrastive batch has no valid anchor");

  Var pos_sum = tape.row_sum(tape.mask_mul(sim, masks.pos));  // n x 1
  Var neg_sum = tape.row_sum(tape.mask_mul(sim, masks.neg));
  // Invalid anchors get denominator 1 and numerator 0, then drop out of
  // the masked mean.
  Matrix invalid_fix(n, 1);
  Matrix valid_col(n, 1);
  for (std::size_t a = 0; a < n; ++a) {
    invalid_fix(a, 0) = valid[a] == 0.0 ? 1.0 : 0.0;
    valid_col(a, 0) = valid[a];
  }
  Var numer = tape.mask_mul(pos_sum, valid_col);
  Var denom = tape.add(tape.add(pos_sum, neg_sum), tape.constant(std::move(invalid_fix)));
  Var ratio = tape.div(numer, denom);
  Var ratio_loss =
      tape.scale(tape.sum_all(ratio), -1.0 / static_cast<double>(n_valid));

  // Regularizer: mean over valid anchors of the per-anchor mean squared
  // distance of the targeted similarities from the target value.
  const Matrix& reg_mask = reg_target == RegTarget::Positives ? masks.pos : masks.neg;
  const std::vector<double>& reg_count =
      reg_target == RegTarget::Positives ? masks.pos_count : masks.neg_count;
  Var dev = tape.square(tape.offset(sim, -reg_target_value));
  Var dev_sum = tape.row_sum(tape.mask_mul(dev, reg_mask));
  Matrix per_anchor_scale(n, 1);
  for (std::size_t a = 0; a < n; ++a)
    per_anchor_scale(a, 0) =
        valid[a] == 0.0 || reg_count[a] == 0.0 ? 0.0 : valid[a] / reg_count[a];
  Var reg_rows = tape.mask_mul(dev_sum, std::move(per_anchor_scale));
  Var reg_loss = tape.scale(tape.sum_all(reg_rows), 1.0 / static_cast<double>(n_valid));

  GclResult out;
  out.ratio_loss = ratio_loss;
  out.reg_loss = reg_loss;
  out.loss = tape.add(ratio_loss, reg_loss);
  out.valid_anchors = n_valid;
  out.skipped_anchors = n - n_valid;
  return out;
}

void check_tags(Tape& tape, Var embeddings, const ContrastTags& tags) {
  const std::size_t n = tape.value(embeddings).rows();
  if (tags.modality.size() != n || tags.label.size() != n)
    throw ShapeError("contrastive tags do not match embedding rows");
}

}  // namespace

GclResult iccl_loss(Tape& tape, Var embeddings, const ContrastTags& tags,
                    const GclConfig& cfg) {
  check_tags(tape, embeddings, tags);
  Var sim = similarity_matrix(tape, embeddings, cfg.similarity);
  MaskPair masks = build_masks(tags, /*cross_modal_pos=*/false,
                               /*cross_modal_neg=*/false);
  return assemble(tape, sim, masks, 1.0, cfg.reg_target);
}

GclResult imcl_loss(Tape& tape, Var embeddings, const ContrastTags& tags,
                    const GclConfig& cfg) {
  check_tags(tape, embeddings, tags);
  Var sim = similarity_matrix(tape, embeddings, cfg.similarity);
  bool cross = cfg.imcl_positive_rule == ImclPositiveRule::CrossModal;
  MaskPair masks = build_masks(tags, /*cross_modal_pos=*/cross,
                               /*cross_modal_neg=*/true);
  return assemble(tape, sim, masks, cfg.beta, cfg.reg_target);
}

Var hybrid_loss(Tape& tape, Var imcl, Var iccl, double lambda) {
  if (lambda < 0.0 || lambda > 1.0) throw ConfigError("lambda must be in [0,1]");
  return tape.add(tape.scale(imcl, lambda), tape.scale(iccl, 1.0 - lambda));
}

double iccl_loss_value(const Matrix& embeddings, const ContrastTags& tags,
                       const GclConfig& cfg) {
  Tape tape;
  Var e = tape.constant(embeddings);
  return tape.value(iccl_loss(tape, e, tags, cfg).loss)(0, 0);
}

double imcl_loss_value(const Matrix& embeddings, const ContrastTags& tags,
                       const GclConfig& cfg) {
  Tape tape;
  Var e = tape.constant(embeddings);
  return tape.value(imcl_loss(tape, e, tags, cfg).loss)(0, 0);
}

}  // namespace ariign
