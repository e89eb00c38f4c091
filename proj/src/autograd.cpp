#include "ariign/autograd.hpp"

#include <algorithm>
#include <cmath>

#include "ariign/errors.hpp"

namespace ariign {

namespace {
constexpr double kGeluC1 = 0.7978845608028654;  // sqrt(2/pi)
constexpr double kGeluC2 = 0.044715;
}  // namespace

double gelu_scalar(double x) {
  double u = kGeluC1 * (x + kGeluC2 * x * x * x);
  return 0.5 * x * (1.0 + std::tanh(u));
}

double gelu_grad_scalar(double x) {
  double u = kGeluC1 * (x + kGeluC2 * x * x * x);
  double t = std::tanh(u);
  double du = kGeluC1 * (1.0 + 3.0 * kGeluC2 * x * x);
  return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * du;
}

Var Tape::make(Matrix value, bool needs_grad, std::function<void(Tape&)> backprop) {
  Node node;
  node.grad = Matrix(value.rows(), value.cols());
  node.value = std::move(value);
  node.needs_grad = needs_grad;
  node.backprop = std::move(backprop);
  nodes_.push_back(std::move(node));
  return Var{nodes_.size() - 1};
}

Var Tape::leaf(Matrix value, bool needs_grad) {
  return make(std::move(value), needs_grad, nullptr);
}

Var Tape::scalar(double v) {
  Matrix m(1, 1);
  m(0, 0) = v;
  return constant(m);
}

Var Tape::matmul(Var a, Var b) {
  Var o = make(ariign::matmul(value(a), value(b)), needs(a) || needs(b), nullptr);
  nodes_[o.id].backprop = [a, b, o](Tape& t) {
    const Matrix& g = t.grad(o);
    if (t.needs(a)) add_inplace(t.grad_mut(a), ariign::matmul_nt(g, t.value(b)));
    if (t.needs(b)) add_inplace(t.grad_mut(b), ariign::matmul_tn(t.value(a), g));
  };
  return o;
}

Var Tape::matmul_nt(Var a, Var b) {
  Var o = make(ariign::matmul_nt(value(a), value(b)), needs(a) || needs(b), nullptr);
  nodes_[o.id].backprop = [a, b, o](Tape& t) {
    const Matrix& g = t.grad(o);
    if (t.needs(a)) add_inplace(t.grad_mut(a), ariign::matmul(g, t.value(b)));
    if (t.needs(b)) add_inplace(t.grad_mut(b), ariign::matmul_tn(g, t.value(a)));
  };
  return o;
}

Var Tape::add(Var a, Var b) {
  if (!value(a).same_shape(value(b))) throw ShapeError("add: shape mismatch");
  Matrix out(value(a).rows(), value(a).cols());
  kernels::active().vadd(value(a).data(), value(b).data(), out.data(), out.size());
  Var o = make(std::move(out), needs(a) || needs(b), nullptr);
  nodes_[o.id].backprop = [a, b, o](Tape& t) {
    if (t.needs(a)) add_inplace(t.grad_mut(a), t.grad(o));
    if (t.needs(b)) add_inplace(t.grad_mut(b), t.grad(o));
  };
  return o;
}

Var Tape::sub(Var a, Var b) {
  if (!value(a).same_shape(value(b))) throw ShapeError("sub: shape mismatch");
  Matrix out(value(a).rows(), value(a).cols());
  kernels::active().vsub(value(a).data(), value(b).data(), out.data(), out.size());
  Var o = make(std::move(out), needs(a) || needs(b), nullptr);
  nodes_[o.id].backprop = [a, b, o](Tape& t) {
    if (t.needs(a)) add_inplace(t.grad_mut(a), t.grad(o));
    if (t.needs(b)) axpy_inplace(t.grad_mut(b), -1.0, t.grad(o));
  };
  return o;
}

Var Tape::mul(Var a, Var b) {
  if (!value(a).same_shape(value(b))) throw ShapeError("mul: shape mismatch");
  Matrix out(value(a).rows(), value(a).cols());
  kernels::active().vmul(value(a).data(), value(b).data(), out.data(), out.size());
  Var o = make(std::move(out), needs(a) || needs(b), nullptr);
  nodes_[o.id].backprop = [a, b, o](Tape& t) {
    const Matrix& g = t.grad(o);
    if (t.needs(a)) {
      Matrix da(g.rows(), g.cols());
      kernels::active().vmul(g.data(), t.value(b).data(), da.data(), da.size());
      add_inplace(t.grad_mut(a), da);
    }
    if (t.needs(b)) {
      Matrix db(g.rows(), g.cols());
      kernels::active().vmul(g.data(), t.value(a).data(), db.data(), db.size());
      add_inplace(t.grad_mut(b), db);
    }
  };
  return o;
}

Var Tape::div(Var a, Var b) {
  if (!value(a).same_shape(value(b))) throw ShapeError("div: shape mismatch");
  const Matrix& av = value(a);
  const Matrix& bv = value(b);
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = av.data()[i] / bv.data()[i];
  Var o = make(std::move(out), needs(a) || needs(b), nullptr);
  nodes_[o.id].backprop = [a, b, o](Tape& t) {
    const Matrix& g = t.grad(o);
    const Matrix& bv2 = t.value(b);
    const Matrix& ov = t.value(o);
    if (t.needs(a)) {
      Matrix& da = t.grad_mut(a);
      for (std::size_t i = 0; i < g.size(); ++i) da.data()[i] += g.data()[i] / bv2.data()[i];
    }
    if (t.needs(b)) {
      Matrix& db = t.grad_mut(b);
      for (std::size_t i = 0; i < g.size(); ++i)
        db.data()[i] -= g.data()[i] * ov.data()[i] / bv2.data()[i];
    }
  };
  return o;
}

Var Tape::add_row(Var a, Var bias) {
  const Matrix& av = value(a);
  const Matrix& bv = value(bias);
  if (bv.rows() != 1 || bv.cols() != av.cols()) throw ShapeError("add_row: bias shape");
  Matrix out = av;
  for (std::size_t r = 0; r < out.rows(); ++r)
    kernels::active().vadd(out.row(r), bv.data(), out.row(r), out.cols());
  Var o = make(std::move(out), needs(a) || needs(bias), nullptr);
  nodes_[o.id].backprop = [a, bias, o](Tape& t) {
    const Matrix& g = t.grad(o);
    if (t.needs(a)) add_inplace(t.grad_mut(a), g);
    if (t.needs(bias)) {
      Matrix& db = t.grad_mut(bias);
      for (std::size_t r = 0; r < g.rows(); ++r)
        kernels::active().vadd(db.data(), g.row(r), db.data(), g.cols());
    }
  };
  return o;
}

Var Tape::scale(Var a, double s) {
  Matrix out = value(a);
  kernels::active().scale(s, out.data(), out.size());
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, s, o](Tape& t) {
    if (t.needs(a)) axpy_inplace(t.grad_mut(a), s, t.grad(o));
  };
  return o;
}

Var Tape::offset(Var a, double c) {
  Matrix out = value(a);
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] += c;
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, o](Tape& t) {
    if (t.needs(a)) add_inplace(t.grad_mut(a), t.grad(o));
  };
  return o;
}

Var Tape::gelu(Var a) {
  const Matrix& av = value(a);
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = gelu_scalar(av.data()[i]);
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    const Matrix& x = t.value(a);
    Matrix& da = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      da.data()[i] += g.data()[i] * gelu_grad_scalar(x.data()[i]);
  };
  return o;
}

Var Tape::relu(Var a) { return leaky_relu(a, 0.0); }

Var Tape::leaky_relu(Var a, double slope) {
  const Matrix& av = value(a);
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) {
    double x = av.data()[i];
    out.data()[i] = x > 0.0 ? x : slope * x;
  }
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, slope, o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    const Matrix& x = t.value(a);
    Matrix& da = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      da.data()[i] += g.data()[i] * (x.data()[i] > 0.0 ? 1.0 : slope);
  };
  return o;
}

Var Tape::sigmoid(Var a) {
  const Matrix& av = value(a);
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i)
    out.data()[i] = 1.0 / (1.0 + std::exp(-av.data()[i]));
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    const Matrix& y = t.value(o);
    Matrix& da = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double s = y.data()[i];
      da.data()[i] += g.data()[i] * s * (1.0 - s);
    }
  };
  return o;
}

Var Tape::log(Var a) {
  const Matrix& av = value(a);
  Matrix out(av.rows(), av.cols());
  for (std::size_t i = 0; i < out.size(); ++i) out.data()[i] = std::log(av.data()[i]);
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    const Matrix& x = t.value(a);
    Matrix& da = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) da.data()[i] += g.data()[i] / x.data()[i];
  };
  return o;
}

Var Tape::square(Var a) {
  const Matrix& av = value(a);
  Matrix out(av.rows(), av.cols());
  kernels::active().vmul(av.data(), av.data(), out.data(), out.size());
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    const Matrix& x = t.value(a);
    Matrix& da = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i)
      da.data()[i] += 2.0 * g.data()[i] * x.data()[i];
  };
  return o;
}

Var Tape::clamp(Var a, double lo, double hi) {
  const Matrix& av = value(a);
  Matrix out(av.rows(), av.cols());
  kernels::active().vclamp(av.data(), lo, hi, out.data(), out.size());
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, lo, hi, o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    const Matrix& x = t.value(a);
    Matrix& da = t.grad_mut(a);
    for (std::size_t i = 0; i < g.size(); ++i) {
      double v = x.data()[i];
      if (v > lo && v < hi) da.data()[i] += g.data()[i];
    }
  };
  return o;
}

Var Tape::concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_cols: empty");
  std::size_t rows = value(parts[0]).rows();
  std::size_t cols = 0;
  bool ng = false;
  for (Var p : parts) {
    if (value(p).rows() != rows) throw ShapeError("concat_cols: row mismatch");
    cols += value(p).cols();
    ng = ng || needs(p);
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Matrix& pv = value(p);
    for (std::size_t r = 0; r < rows; ++r)
      std::copy(pv.row(r), pv.row(r) + pv.cols(), out.row(r) + off);
    off += pv.cols();
  }
  std::vector<Var> ps = parts;
  Var o = make(std::move(out), ng, nullptr);
  nodes_[o.id].backprop = [ps, o](Tape& t) {
    const Matrix& g = t.grad(o);
    std::size_t off2 = 0;
    for (Var p : ps) {
      std::size_t pc = t.value(p).cols();
      if (t.needs(p)) {
        Matrix& dp = t.grad_mut(p);
        for (std::size_t r = 0; r < g.rows(); ++r)
          kernels::active().vadd(dp.row(r), g.row(r) + off2, dp.row(r), pc);
      }
      off2 += pc;
    }
  };
  return o;
}

Var Tape::concat_rows(const std::vector<Var>& parts) {
  if (parts.empty()) throw ShapeError("concat_rows: empty");
  std::size_t cols = value(parts[0]).cols();
  std::size_t rows = 0;
  bool ng = false;
  for (Var p : parts) {
    if (value(p).cols() != cols) throw ShapeError("concat_rows: col mismatch");
    rows += value(p).rows();
    ng = ng || needs(p);
  }
  Matrix out(rows, cols);
  std::size_t off = 0;
  for (Var p : parts) {
    const Matrix& pv = value(p);
    std::copy(pv.data(), pv.data() + pv.size(), out.data() + off * cols);
    off += pv.rows();
  }
  std::vector<Var> ps = parts;
  Var o = make(std::move(out), ng, nullptr);
  nodes_[o.id].backprop = [ps, o](Tape& t) {
    const Matrix& g = t.grad(o);
    std::size_t off2 = 0;
    for (Var p : ps) {
      std::size_t pr = t.value(p).rows();
      if (t.needs(p)) {
        Matrix& dp = t.grad_mut(p);
        kernels::active().vadd(dp.data(), g.data() + off2 * g.cols(), dp.data(),
                               pr * g.cols());
      }
      off2 += pr;
    }
  };
  return o;
}

Var Tape::slice_rows(Var a, std::size_t begin, std::size_t count) {
  const Matrix& av = value(a);
  if (begin + count > av.rows()) throw ShapeError("slice_rows: out of range");
  Matrix out(count, av.cols());
  std::copy(av.row(begin), av.row(begin) + count * av.cols(), out.data());
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, begin, o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    Matrix& da = t.grad_mut(a);
    kernels::active().vadd(da.row(begin), g.data(), da.row(begin), g.size());
  };
  return o;
}

Var Tape::slice_cols(Var a, std::size_t begin, std::size_t count) {
  const Matrix& av = value(a);
  if (begin + count > av.cols()) throw ShapeError("slice_cols: out of range");
  Matrix out(av.rows(), count);
  for (std::size_t r = 0; r < av.rows(); ++r)
    std::copy(av.row(r) + begin, av.row(r) + begin + count, out.row(r));
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, begin, o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    Matrix& da = t.grad_mut(a);
    for (std::size_t r = 0; r < g.rows(); ++r)
      kernels::active().vadd(da.row(r) + begin, g.row(r), da.row(r) + begin, g.cols());
  };
  return o;
}

Var Tape::gather_rows(Var a, std::vector<std::size_t> rows) {
  const Matrix& av = value(a);
  Matrix out(rows.size(), av.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= av.rows()) throw ShapeError("gather_rows: index out of range");
    std::copy(av.row(rows[i]), av.row(rows[i]) + av.cols(), out.row(i));
  }
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, rows = std::move(rows), o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    Matrix& da = t.grad_mut(a);
    for (std::size_t i = 0; i < rows.size(); ++i)
      kernels::active().vadd(da.row(rows[i]), g.row(i), da.row(rows[i]), g.cols());
  };
  return o;
}

Var Tape::gather_cols_per_row(Var a, std::vector<std::size_t> col) {
  const Matrix& av = value(a);
  if (col.size() != av.rows()) throw ShapeError("gather_cols_per_row: size mismatch");
  Matrix out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r) {
    if (col[r] >= av.cols()) throw ShapeError("gather_cols_per_row: col out of range");
    out(r, 0) = av(r, col[r]);
  }
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, col = std::move(col), o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    Matrix& da = t.grad_mut(a);
    for (std::size_t r = 0; r < g.rows(); ++r) da(r, col[r]) += g(r, 0);
  };
  return o;
}

Var Tape::row_sum(Var a) {
  const Matrix& av = value(a);
  Matrix out(av.rows(), 1);
  for (std::size_t r = 0; r < av.rows(); ++r)
    out(r, 0) = kernels::active().sum(av.row(r), av.cols());
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    Matrix& da = t.grad_mut(a);
    for (std::size_t r = 0; r < da.rows(); ++r)
      for (std::size_t c = 0; c < da.cols(); ++c) da(r, c) += g(r, 0);
  };
  return o;
}

Var Tape::sum_all(Var a) {
  Matrix out(1, 1);
  out(0, 0) = kernels::active().sum(value(a).data(), value(a).size());
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, o](Tape& t) {
    if (!t.needs(a)) return;
    double g = t.grad(o)(0, 0);
    Matrix& da = t.grad_mut(a);
    for (std::size_t i = 0; i < da.size(); ++i) da.data()[i] += g;
  };
  return o;
}

Var Tape::mean_all(Var a) {
  std::size_t n = value(a).size();
  return scale(sum_all(a), 1.0 / static_cast<double>(n));
}

Var Tape::row_l2_normalize(Var a) {
  const Matrix& av = value(a);
  Matrix out(av.rows(), av.cols());
  std::vector<double> norms(av.rows());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double n2 = kernels::active().dot(av.row(r), av.row(r), av.cols());
    double n = std::sqrt(n2);
    if (n < 1e-12) n = 1e-12;
    norms[r] = n;
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) = av(r, c) / n;
  }
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, norms = std::move(norms), o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    const Matrix& y = t.value(o);
    Matrix& da = t.grad_mut(a);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double yd = kernels::active().dot(y.row(r), g.row(r), g.cols());
      for (std::size_t c = 0; c < g.cols(); ++c)
        da(r, c) += (g(r, c) - y(r, c) * yd) / norms[r];
    }
  };
  return o;
}

Var Tape::softmax_rows(Var a) {
  const Matrix& av = value(a);
  Matrix out(av.rows(), av.cols());
  for (std::size_t r = 0; r < av.rows(); ++r) {
    double mx = av(r, 0);
    for (std::size_t c = 1; c < av.cols(); ++c) mx = std::max(mx, av(r, c));
    double z = 0.0;
    for (std::size_t c = 0; c < av.cols(); ++c) {
      out(r, c) = std::exp(av(r, c) - mx);
      z += out(r, c);
    }
    for (std::size_t c = 0; c < av.cols(); ++c) out(r, c) /= z;
  }
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    const Matrix& y = t.value(o);
    Matrix& da = t.grad_mut(a);
    for (std::size_t r = 0; r < g.rows(); ++r) {
      double yd = kernels::active().dot(y.row(r), g.row(r), g.cols());
      for (std::size_t c = 0; c < g.cols(); ++c)
        da(r, c) += y(r, c) * (g(r, c) - yd);
    }
  };
  return o;
}

Var Tape::segment_softmax(Var scores, std::vector<std::size_t> segment) {
  const Matrix& sv = value(scores);
  if (sv.cols() != 1 || segment.size() != sv.rows())
    throw ShapeError("segment_softmax: expects E x 1 scores with one segment id per row");
  std::size_t nseg = 0;
  for (std::size_t s : segment) nseg = std::max(nseg, s + 1);
  std::vector<double> mx(nseg, -1e300), z(nseg, 0.0);
  for (std::size_t i = 0; i < segment.size(); ++i)
    mx[segment[i]] = std::max(mx[segment[i]], sv(i, 0));
  Matrix out(sv.rows(), 1);
  for (std::size_t i = 0; i < segment.size(); ++i) {
    out(i, 0) = std::exp(sv(i, 0) - mx[segment[i]]);
    z[segment[i]] += out(i, 0);
  }
  for (std::size_t i = 0; i < segment.size(); ++i) out(i, 0) /= z[segment[i]];
  Var o = make(std::move(out), needs(scores), nullptr);
  nodes_[o.id].backprop = [scores, segment = std::move(segment), o](Tape& t) {
    if (!t.needs(scores)) return;
    const Matrix& g = t.grad(o);
    const Matrix& w = t.value(o);
    std::size_t nseg2 = 0;
    for (std::size_t s : segment) nseg2 = std::max(nseg2, s + 1);
    std::vector<double> inner(nseg2, 0.0);
    for (std::size_t i = 0; i < segment.size(); ++i)
      inner[segment[i]] += g(i, 0) * w(i, 0);
    Matrix& da = t.grad_mut(scores);
    for (std::size_t i = 0; i < segment.size(); ++i)
      da(i, 0) += w(i, 0) * (g(i, 0) - inner[segment[i]]);
  };
  return o;
}

Var Tape::mask_mul(Var a, Matrix mask) {
  const Matrix& av = value(a);
  if (!av.same_shape(mask)) throw ShapeError("mask_mul: shape mismatch");
  Matrix out(av.rows(), av.cols());
  kernels::active().vmul(av.data(), mask.data(), out.data(), out.size());
  Var o = make(std::move(out), needs(a), nullptr);
  nodes_[o.id].backprop = [a, mask = std::move(mask), o](Tape& t) {
    if (!t.needs(a)) return;
    const Matrix& g = t.grad(o);
    Matrix& da = t.grad_mut(a);
    Matrix tmp(g.rows(), g.cols());
    kernels::active().vmul(g.data(), mask.data(), tmp.data(), tmp.size());
    add_inplace(da, tmp);
  };
  return o;
}

Var Tape::edge_aggregate(Var h, std::vector<std::size_t> src,
                         std::vector<std::size_t> dst, Var coef, std::size_t n_out) {
  const Matrix& hv = value(h);
  const Matrix& cv = value(coef);
  if (src.size() != dst.size() || cv.rows() != src.size() || cv.cols() != 1)
    throw ShapeError("edge_aggregate: edge/coef size mismatch");
  Matrix out(n_out, hv.cols());
  for (std::size_t e = 0; e < src.size(); ++e)
    kernels::active().axpy(cv(e, 0), hv.row(src[e]), out.row(dst[e]), hv.cols());
  Var o = make(std::move(out), needs(h) || needs(coef), nullptr);
  nodes_[o.id].backprop = [h, coef, src = std::move(src), dst = std::move(dst), o](Tape& t) {
    const Matrix& g = t.grad(o);
    const Matrix& hv2 = t.value(h);
    const Matrix& cv2 = t.value(coef);
    if (t.needs(h)) {
      Matrix& dh = t.grad_mut(h);
      for (std::size_t e = 0; e < src.size(); ++e)
        kernels::active().axpy(cv2(e, 0), g.row(dst[e]), dh.row(src[e]), g.cols());
    }
    if (t.needs(coef)) {
      Matrix& dc = t.grad_mut(coef);
      for (std::size_t e = 0; e < src.size(); ++e)
        dc(e, 0) += kernels::active().dot(hv2.row(src[e]), g.row(dst[e]), g.cols());
    }
  };
  return o;
}

Var Tape::dropout(Var a, double rate, Rng& rng) {
  if (rate <= 0.0) return a;
  if (rate >= 1.0) throw ConfigError("dropout rate must be < 1");
  const Matrix& av = value(a);
  Matrix mask(av.rows(), av.cols());
  double keep = 1.0 - rate;
  for (std::size_t i = 0; i < mask.size(); ++i)
    mask.data()[i] = rng.uniform() < rate ? 0.0 : 1.0 / keep;
  return mask_mul(a, std::move(mask));
}

void Tape::backward(Var out) {
  const Matrix& ov = value(out);
  if (ov.rows() != 1 || ov.cols() != 1) throw ShapeError("backward: output must be 1x1");
  for (Node& n : nodes_) n.grad.set_zero();
  nodes_[out.id].grad(0, 0) = 1.0;
  for (std::size_t i = nodes_.size(); i-- > 0;) {
    if (i > out.id) continue;  // nodes after the output cannot contribute
    Node& n = nodes_[i];
    if (n.backprop && n.needs_grad) n.backprop(*this);
  }
}

}  // namespace ariign
