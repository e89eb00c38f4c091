#include "ariign/classifier.hpp"

#include <algorithm>

#include "ariign/errors.hpp"

namespace ariign {

ClassifierParams make_classifier(std::size_t fused_dim, std::size_t d, int class_count,
                                 double dropout, Rng& rng) {
  ClassifierParams p;
  p.class_count = class_count;
  p.mlp = make_mlp({fused_dim, 2 * d, d, static_cast<std::size_t>(class_count)},
                   {Activation::Relu, Activation::Relu, Activation::Linear},
                   dropout, rng);
  return p;
}

Var fuse(Tape& tape, Var psi_t, Var psi_a, Var psi_v) {
  return tape.concat_cols({psi_t, psi_a, psi_v});
}

std::vector<double> fuse(const std::vector<double>& psi_t,
                         const std::vector<double>& psi_a,
                         const std::vector<double>& psi_v) {
  if (psi_t.size() != psi_a.size() || psi_a.size() != psi_v.size())
    throw ShapeError("fuse: modality lengths differ");
  std::vector<double> z;
  z.reserve(3 * psi_t.size());
  z.insert(z.end(), psi_t.begin(), psi_t.end());
  z.insert(z.end(), psi_a.begin(), psi_a.end());
  z.insert(z.end(), psi_v.begin(), psi_v.end());
  return z;
}

Var classify(Tape& tape, Var z, const ClassifierParams& params, const MlpVars& vars,
             Mode mode, Rng* rng) {
  Var logits = mlp_forward(tape, z, params.mlp, vars, mode, rng);
  return tape.softmax_rows(logits);
}

Matrix classify_value(const ClassifierParams& params, const Matrix& z) {
  Tape tape;
  MlpVars vars;
  ClassifierParams p = params;
  for (auto& layer : p.mlp.layers) {
    vars.weights.push_back(tape.constant(layer.weight));
    vars.biases.push_back(tape.constant(layer.bias));
  }
  Var probs = classify(tape, tape.constant(z), p, vars, Mode::Eval, nullptr);
  return tape.value(probs);
}

Var cls_loss(Tape& tape, Var probs, const std::vector<int>& labels) {
  const Matrix& pv = tape.value(probs);
  if (labels.size() != pv.rows()) throw ShapeError("cls_loss: label count mismatch");
  std::vector<std::size_t> cols;
  cols.reserve(labels.size());
  for (int l : labels) {
    if (l < 0 || static_cast<std::size_t>(l) >= pv.cols())
      throw DataError("cls_loss: label out of range");
    cols.push_back(static_cast<std::size_t>(l));
  }
  Var picked = tape.gather_cols_per_row(probs, std::move(cols));
  return tape.scale(tape.mean_all(tape.log(picked)), -1.0);
}

double cls_loss_value(const Matrix& probs, const std::vector<int>& labels) {
  Tape tape;
  Var p = tape.constant(probs);
  return tape.value(cls_loss(tape, p, labels))(0, 0);
}

std::vector<int> argmax_rows(const Matrix& probs) {
  std::vector<int> out(probs.rows(), 0);
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    const double* row = probs.row(r);
    out[r] = static_cast<int>(std::max_element(row, row + probs.cols()) - row);
  }
  return out;
}

}  // namespace ariign
