#include "ariign/mlp.hpp"

#include <cmath>

#include "ariign/errors.hpp"

namespace ariign {

MlpParams make_mlp(const std::vector<std::size_t>& dims,
                   const std::vector<Activation>& acts, double dropout, Rng& rng) {
  if (dims.size() < 2 || acts.size() != dims.size() - 1)
    throw ConfigError("make_mlp: dims/acts mismatch");
  MlpParams p;
  p.dropout = dropout;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    MlpParams::Layer layer;
    std::size_t in = dims[l], out = dims[l + 1];
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    layer.weight = Matrix(out, in);
    for (std::size_t i = 0; i < layer.weight.size(); ++i)
      layer.weight.data()[i] = rng.uniform(-bound, bound);
    layer.bias = Matrix(1, out);
    layer.act = acts[l];
    p.layers.push_back(std::move(layer));
  }
  return p;
}

MlpVars mlp_leaves(Tape& tape, const MlpParams& p) {
  MlpVars v;
  for (const auto& layer : p.layers) {
    v.weights.push_back(tape.leaf(layer.weight, true));
    v.biases.push_back(tape.leaf(layer.bias, true));
  }
  return v;
}

namespace {

Var activate(Tape& t, Var x, Activation act) {
  switch (act) {
    case Activation::Linear: return x;
    case Activation::Gelu: return t.gelu(x);
    case Activation::Relu: return t.relu(x);
    case Activation::LeakyRelu02: return t.leaky_relu(x, 0.2);
    case Activation::Sigmoid: return t.sigmoid(x);
  }
  throw ConfigError("unknown activation");
}

}  // namespace

Var mlp_forward(Tape& tape, Var x, const MlpParams& p, const MlpVars& vars,
                Mode mode, Rng* rng) {
  if (tape.value(x).cols() != p.input_dim())
    throw ShapeError("mlp_forward: input dim mismatch");
  Var h = x;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    h = tape.add_row(tape.matmul_nt(h, vars.weights[l]), vars.biases[l]);
    h = activate(tape, h, p.layers[l].act);
    bool hidden = l + 1 < p.layers.size();
    if (hidden && mode == Mode::Train && p.dropout > 0.0) {
      if (!rng) throw ConfigError("mlp_forward: train mode needs an rng for dropout");
      h = tape.dropout(h, p.dropout, *rng);
    }
  }
  return h;
}

Matrix mlp_apply(const MlpParams& p, const Matrix& x) {
  Tape tape;
  MlpVars vars;
  for (const auto& layer : p.layers) {
    vars.weights.push_back(tape.constant(layer.weight));
    vars.biases.push_back(tape.constant(layer.bias));
  }
  Var out = mlp_forward(tape, tape.constant(x), p, vars, Mode::Eval, nullptr);
  return tape.value(out);
}

void collect_mlp_params(const std::string& prefix, MlpParams& p,
                        std::vector<NamedParam>& out) {
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    out.push_back({prefix + ".w" + std::to_string(l), &p.layers[l].weight});
    out.push_back({prefix + ".b" + std::to_string(l), &p.layers[l].bias});
  }
}

}  // namespace ariign
