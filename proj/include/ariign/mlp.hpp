#pragma once

#include <string>
#include <vector>

#include "ariign/autograd.hpp"
#include "ariign/matrix.hpp"
#include "ariign/rng.hpp"

namespace ariign {

enum class Activation { Linear, Gelu, Relu, LeakyRelu02, Sigmoid };

enum class Mode { Train, Eval };

struct MlpParams {
  struct Layer {
    Matrix weight;  // out x in
    Matrix bias;    // 1 x out
    Activation act = Activation::Linear;
  };
  std::vector<Layer> layers;
  double dropout = 0.0;  // after each hidden layer, train mode only

  std::size_t input_dim() const { return layers.front().weight.cols(); }
  std::size_t output_dim() const { return layers.back().weight.rows(); }
};

// Uniform fan-in init: U(-1/sqrt(in), 1/sqrt(in)) for weights, zero bias.
MlpParams make_mlp(const std::vector<std::size_t>& dims,
                   const std::vector<Activation>& acts, double dropout, Rng& rng);

struct MlpVars {
  std::vector<Var> weights;
  std::vector<Var> biases;
};

// Registers the parameter matrices on the tape as differentiable leaves.
MlpVars mlp_leaves(Tape& tape, const MlpParams& p);

// x is (n x input_dim); returns (n x output_dim).
Var mlp_forward(Tape& tape, Var x, const MlpParams& p, const MlpVars& vars,
                Mode mode, Rng* rng);

// Convenience: forward with parameters treated as constants.
Matrix mlp_apply(const MlpParams& p, const Matrix& x);

// Named views over the raw parameter matrices, used by the optimizer and
// checkpointing. Order is stable.
struct NamedParam {
  std::string name;
  Matrix* tensor;
};

void collect_mlp_params(const std::string& prefix, MlpParams& p,
                        std::vector<NamedParam>& out);

}  // namespace ariign
