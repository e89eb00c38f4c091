#pragma once

// Tape-based reverse-mode differentiation over Matrix values. One Tape per
// training step; leaves are created from parameter matrices, the step's
// scalar loss is differentiated, and gradients are read back per leaf.

#include <cstddef>
#include <functional>
#include <vector>

#include "ariign/matrix.hpp"
#include "ariign/rng.hpp"

namespace ariign {

struct Var {
  std::size_t id = static_cast<std::size_t>(-1);
  bool valid() const { return id != static_cast<std::size_t>(-1); }
};

class Tape {
 public:
  Var leaf(Matrix value, bool needs_grad);
  Var constant(Matrix value) { return leaf(std::move(value), false); }
  Var scalar(double v);

  const Matrix& value(Var v) const { return nodes_[v.id].value; }
  const Matrix& grad(Var v) const { return nodes_[v.id].grad; }

  // --- linear algebra ---
  Var matmul(Var a, Var b);      // A(m x k) * B(k x n)
  Var matmul_nt(Var a, Var b);   // A(m x k) * B(n x k)^T
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);         // elementwise
  Var div(Var a, Var b);         // elementwise
  Var add_row(Var a, Var bias);  // bias (1 x n) broadcast over rows of a
  Var scale(Var a, double s);
  Var offset(Var a, double c);

  // --- elementwise nonlinearities ---
  Var gelu(Var a);  // tanh-form gelu, used consistently across the project
  Var relu(Var a);
  Var leaky_relu(Var a, double slope);
  Var sigmoid(Var a);
  Var log(Var a);
  Var square(Var a);
  Var clamp(Var a, double lo, double hi);

  // --- shape ---
  Var concat_cols(const std::vector<Var>& parts);
  Var concat_rows(const std::vector<Var>& parts);
  Var slice_rows(Var a, std::size_t begin, std::size_t count);
  Var slice_cols(Var a, std::size_t begin, std::size_t count);
  Var gather_rows(Var a, std::vector<std::size_t> rows);
  // out[i, 0] = a[i, col[i]]
  Var gather_cols_per_row(Var a, std::vector<std::size_t> col);

  // --- reductions / normalizations ---
  Var row_sum(Var a);   // (m x n) -> (m x 1)
  Var sum_all(Var a);   // -> (1 x 1)
  Var mean_all(Var a);  // -> (1 x 1)
  Var row_l2_normalize(Var a);
  Var softmax_rows(Var a);
  // scores (E x 1), segment id per row; softmax within each segment.
  Var segment_softmax(Var scores, std::vector<std::size_t> segment);

  // Elementwise product with a constant mask (no gradient into the mask).
  Var mask_mul(Var a, Matrix mask);

  // out (n_out x d): out[dst[e]] += coef[e] * h[src[e]] over all edges e.
  Var edge_aggregate(Var h, std::vector<std::size_t> src,
                     std::vector<std::size_t> dst, Var coef, std::size_t n_out);

  // Inverted dropout; identity when rate == 0.
  Var dropout(Var a, double rate, Rng& rng);

  // Backpropagate from a 1x1 output. Gradients accumulate on every
  // needs_grad leaf reachable from `out`.
  void backward(Var out);

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    bool needs_grad = false;
    std::function<void(Tape&)> backprop;  // empty for leaves
  };

  Var make(Matrix value, bool needs_grad, std::function<void(Tape&)> backprop);
  Matrix& grad_mut(Var v) { return nodes_[v.id].grad; }
  bool needs(Var v) const { return nodes_[v.id].needs_grad; }

  std::vector<Node> nodes_;
};

// Shared scalar definitions so oracles and kernels agree exactly.
double gelu_scalar(double x);
double gelu_grad_scalar(double x);

}  // namespace ariign
