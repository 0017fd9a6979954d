// Copyright 2026 The gxplain Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <initializer_list>
#include <limits>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace gxplain {

struct DimensionError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct DomainError : std::domain_error {
  using std::domain_error::domain_error;
};
struct ContractError : std::logic_error {
  using std::logic_error::logic_error;
};
struct ParameterError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Dense row-major matrix of doubles. Vectors are n x 1, scalars 1 x 1.
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c, double fill = 0.0) : rows(r), cols(c), data(r * c, fill) {}
  Tensor(std::size_t r, std::size_t c, std::vector<double> values) : rows(r), cols(c), data(std::move(values)) {
    if (data.size() != r * c)
      throw DimensionError("tensor value count " + std::to_string(data.size()) + " does not match shape " +
                           std::to_string(r) + "x" + std::to_string(c));
  }

  static Tensor scalar(double v) { return Tensor(1, 1, v); }
  static Tensor column(std::vector<double> v) {
    const auto n = v.size();
    return Tensor(n, 1, std::move(v));
  }
  static Tensor from_rows(std::initializer_list<std::initializer_list<double>> rows_init) {
    Tensor t;
    t.rows = rows_init.size();
    t.cols = t.rows ? rows_init.begin()->size() : 0;
    for (const auto& row : rows_init) {
      if (row.size() != t.cols) throw DimensionError("ragged tensor initializer");
      t.data.insert(t.data.end(), row.begin(), row.end());
    }
    return t;
  }

  std::size_t size() const { return data.size(); }
  bool empty() const { return data.empty(); }
  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }
  double item() const {
    if (data.size() != 1) throw ContractError("item() on non-scalar tensor of shape " + shape_string());
    return data[0];
  }
  bool same_shape(const Tensor& o) const { return rows == o.rows && cols == o.cols; }
  std::string shape_string() const { return "[" + std::to_string(rows) + "x" + std::to_string(cols) + "]"; }

  friend bool operator==(const Tensor&, const Tensor&) = default;
};

inline Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.cols != b.rows)
    throw DimensionError("matmul inner dimensions differ: " + a.shape_string() + " x " + b.shape_string());
  Tensor c(a.rows, b.cols);
  for (std::size_t i = 0; i < a.rows; ++i) {
    double* crow = &c.data[i * c.cols];
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = a.data[i * a.cols + k];
      if (aik == 0.0) continue;
      const double* brow = &b.data[k * b.cols];
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return c;
}

inline double sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

namespace ad {

enum class Op {
  Leaf,
  MatMul,
  Add,
  Mul,
  Scale,
  AddBias,
  Relu,
  Sigmoid,
  Clamp01,
  Log,
  BinaryEntropy,
  Sum,
  Mean,
  MeanRows,
  Mse,
  BceLogit,
  SoftmaxCe,
  Slice,
  PairAverage,
  NormAdj,
};

class Tape;

/// Handle to a value recorded on a Tape.
struct Var {
  Tape* tape = nullptr;
  int id = -1;

  const Tensor& value() const;
  const Tensor& grad() const;
  std::size_t rows() const { return value().rows; }
  std::size_t cols() const { return value().cols; }
};

/// Records primitive applications in execution order. Backward replays them in
/// strict reverse order. Not thread-safe; use one tape per thread.
class Tape {
 public:
  struct Node {
    Op op = Op::Leaf;
    int in0 = -1;
    int in1 = -1;
    Tensor value;
    Tensor grad;
    bool requires_grad = false;
    double scalar = 0.0;
    std::vector<std::size_t> index;
    std::vector<double> saved;
  };

  Var leaf(Tensor value, bool requires_grad = false) {
    Node n;
    n.value = std::move(value);
    n.requires_grad = requires_grad;
    return push(std::move(n));
  }
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  Node& node(int id) { return nodes_.at(static_cast<std::size_t>(id)); }
  std::size_t size() const { return nodes_.size(); }

  Var push(Node n) {
    if (n.in0 >= 0) n.requires_grad = n.requires_grad || nodes_[n.in0].requires_grad;
    if (n.in1 >= 0) n.requires_grad = n.requires_grad || nodes_[n.in1].requires_grad;
    nodes_.push_back(std::move(n));
    return Var{this, static_cast<int>(nodes_.size() - 1)};
  }

  /// Accumulates d(root)/d(node) into every node that requires a gradient.
  /// Calling twice without zero_grad() adds the second pass onto the first.
  void backward(Var root);

  void zero_grad() {
    for (auto& n : nodes_) n.grad = Tensor();
  }

 private:
  std::vector<Node> nodes_;
  Tensor& grad_buffer(int id) {
    auto& n = nodes_[id];
    if (n.grad.rows != n.value.rows || n.grad.cols != n.value.cols) n.grad = Tensor(n.value.rows, n.value.cols);
    return n.grad;
  }
  void backward_node(int id);
};

inline const Tensor& Var::value() const { return tape->node(id).value; }
inline const Tensor& Var::grad() const {
  static const Tensor kEmpty;
  const auto& n = tape->node(id);
  return n.grad.size() ? n.grad : kEmpty;
}

namespace detail {
inline Tape& same_tape(Var a, Var b) {
  if (a.tape != b.tape || a.tape == nullptr) throw ContractError("operands recorded on different tapes");
  return *a.tape;
}
inline Tape::Node make(Op op, Var a, Tensor value) {
  Tape::Node n;
  n.op = op;
  n.in0 = a.id;
  n.value = std::move(value);
  return n;
}
}  // namespace detail

inline Var matmul(Var a, Var b) {
  auto& tape = detail::same_tape(a, b);
  auto n = detail::make(Op::MatMul, a, gxplain::matmul(a.value(), b.value()));
  n.in1 = b.id;
  return tape.push(std::move(n));
}

/// Elementwise sum. Either operand may be a 1x1 scalar that broadcasts.
inline Var add(Var a, Var b) {
  auto& tape = detail::same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out;
  if (av.same_shape(bv)) {
    out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] += bv.data[i];
  } else if (bv.size() == 1) {
    out = av;
    for (auto& x : out.data) x += bv.data[0];
  } else if (av.size() == 1) {
    out = bv;
    for (auto& x : out.data) x += av.data[0];
  } else {
    throw DimensionError("add shapes incompatible: " + av.shape_string() + " and " + bv.shape_string());
  }
  auto n = detail::make(Op::Add, a, std::move(out));
  n.in1 = b.id;
  return tape.push(std::move(n));
}

/// Elementwise (Hadamard) product with scalar broadcasting.
inline Var mul(Var a, Var b) {
  auto& tape = detail::same_tape(a, b);
  const auto& av = a.value();
  const auto& bv = b.value();
  Tensor out;
  if (av.same_shape(bv)) {
    out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out.data[i] *= bv.data[i];
  } else if (bv.size() == 1) {
    out = av;
    for (auto& x : out.data) x *= bv.data[0];
  } else if (av.size() == 1) {
    out = bv;
    for (auto& x : out.data) x *= av.data[0];
  } else {
    throw DimensionError("mul shapes incompatible: " + av.shape_string() + " and " + bv.shape_string());
  }
  auto n = detail::make(Op::Mul, a, std::move(out));
  n.in1 = b.id;
  return tape.push(std::move(n));
}

/// Multiplication by a constant (no gradient flows into the factor).
inline Var scale(Var a, double factor) {
  Tensor out = a.value();
  for (auto& x : out.data) x *= factor;
  auto n = detail::make(Op::Scale, a, std::move(out));
  n.scalar = factor;
  return a.tape->push(std::move(n));
}

/// x (m x n) plus a bias row (1 x n) repeated over every row.
inline Var add_bias(Var x, Var bias) {
  auto& tape = detail::same_tape(x, bias);
  const auto& xv = x.value();
  const auto& bv = bias.value();
  if (bv.rows != 1 || bv.cols != xv.cols)
    throw DimensionError("add_bias expects bias [1x" + std::to_string(xv.cols) + "], got " + bv.shape_string());
  Tensor out = xv;
  for (std::size_t i = 0; i < out.rows; ++i)
    for (std::size_t j = 0; j < out.cols; ++j) out(i, j) += bv.data[j];
  auto n = detail::make(Op::AddBias, x, std::move(out));
  n.in1 = bias.id;
  return tape.push(std::move(n));
}

inline Var relu(Var a) {
  Tensor out = a.value();
  for (auto& x : out.data) x = x > 0.0 ? x : 0.0;
  return a.tape->push(detail::make(Op::Relu, a, std::move(out)));
}

inline Var sigmoid(Var a) {
  Tensor out = a.value();
  for (auto& x : out.data) x = gxplain::sigmoid(x);
  return a.tape->push(detail::make(Op::Sigmoid, a, std::move(out)));
}

/// Clamp to [0,1]; gradient is 1 strictly inside (0,1) and 0 elsewhere.
inline Var clamp01(Var a) {
  Tensor out = a.value();
  for (auto& x : out.data) x = std::clamp(x, 0.0, 1.0);
  return a.tape->push(detail::make(Op::Clamp01, a, std::move(out)));
}

inline Var log(Var a) {
  Tensor out = a.value();
  for (auto& x : out.data) {
    if (!(x > 0.0)) throw DomainError("log of non-positive value " + std::to_string(x));
    x = std::log(x);
  }
  return a.tape->push(detail::make(Op::Log, a, std::move(out)));
}

/// -p ln p - (1-p) ln(1-p), with p clamped into [eps, 1-eps] before the logs.
inline Var binary_entropy(Var a, double eps = 1e-12) {
  Tensor out = a.value();
  for (auto& x : out.data) {
    const double p = std::clamp(x, eps, 1.0 - eps);
    x = -p * std::log(p) - (1.0 - p) * std::log(1.0 - p);
  }
  auto n = detail::make(Op::BinaryEntropy, a, std::move(out));
  n.scalar = eps;
  return a.tape->push(std::move(n));
}

inline Var sum(Var a) {
  if (a.value().empty()) throw DomainError("sum of empty tensor");
  double s = 0.0;
  for (double x : a.value().data) s += x;
  return a.tape->push(detail::make(Op::Sum, a, Tensor::scalar(s)));
}

inline Var mean(Var a) {
  if (a.value().empty()) throw DomainError("mean of empty tensor");
  double s = 0.0;
  for (double x : a.value().data) s += x;
  return a.tape->push(detail::make(Op::Mean, a, Tensor::scalar(s / static_cast<double>(a.value().size()))));
}

/// Column means: (m x n) -> (1 x n).
inline Var mean_rows(Var a) {
  const auto& av = a.value();
  if (av.rows == 0) throw DomainError("mean_rows of tensor with no rows");
  Tensor out(1, av.cols);
  for (std::size_t i = 0; i < av.rows; ++i)
    for (std::size_t j = 0; j < av.cols; ++j) out.data[j] += av(i, j);
  for (auto& x : out.data) x /= static_cast<double>(av.rows);
  return a.tape->push(detail::make(Op::MeanRows, a, std::move(out)));
}

inline Var mse(Var pred, Var target) {
  auto& tape = detail::same_tape(pred, target);
  const auto& p = pred.value();
  const auto& t = target.value();
  if (!p.same_shape(t)) throw DimensionError("mse shapes differ: " + p.shape_string() + " vs " + t.shape_string());
  if (p.empty()) throw DomainError("mse of empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) s += (p.data[i] - t.data[i]) * (p.data[i] - t.data[i]);
  auto n = detail::make(Op::Mse, pred, Tensor::scalar(s / static_cast<double>(p.size())));
  n.in1 = target.id;
  return tape.push(std::move(n));
}

/// Mean binary cross-entropy of sigmoid(logit) against targets in [0,1],
/// evaluated as max(x,0) - x*t + log1p(exp(-|x|)).
inline Var bce_with_logits(Var logit, Var target) {
  auto& tape = detail::same_tape(logit, target);
  const auto& x = logit.value();
  const auto& t = target.value();
  if (!x.same_shape(t)) throw DimensionError("bce shapes differ: " + x.shape_string() + " vs " + t.shape_string());
  if (x.empty()) throw DomainError("bce of empty tensors");
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double xi = x.data[i];
    s += std::max(xi, 0.0) - xi * t.data[i] + std::log1p(std::exp(-std::abs(xi)));
  }
  auto n = detail::make(Op::BceLogit, logit, Tensor::scalar(s / static_cast<double>(x.size())));
  n.in1 = target.id;
  return tape.push(std::move(n));
}

/// -log softmax(logits)[cls] for a single 1 x C row of logits.
inline Var softmax_cross_entropy(Var logits, std::size_t cls) {
  const auto& z = logits.value();
  if (z.rows != 1 || z.cols == 0) throw DimensionError("softmax_cross_entropy expects [1xC] logits, got " + z.shape_string());
  if (cls >= z.cols)
    throw DomainError("class index " + std::to_string(cls) + " out of range for " + std::to_string(z.cols) + " classes");
  const double zmax = *std::max_element(z.data.begin(), z.data.end());
  double denom = 0.0;
  std::vector<double> probs(z.cols);
  for (std::size_t j = 0; j < z.cols; ++j) denom += (probs[j] = std::exp(z.data[j] - zmax));
  for (auto& p : probs) p /= denom;
  const double loss = -(z.data[cls] - zmax - std::log(denom));
  auto n = detail::make(Op::SoftmaxCe, logits, Tensor::scalar(loss));
  n.index = {cls};
  n.saved = std::move(probs);
  return logits.tape->push(std::move(n));
}

/// Copies a contiguous run of `rows*cols` values starting at `offset` into a
/// new rows x cols tensor. Used to carve parameter matrices out of a flat vector.
inline Var slice(Var a, std::size_t offset, std::size_t rows, std::size_t cols) {
  const auto& av = a.value();
  if (offset + rows * cols > av.size())
    throw DimensionError("slice [" + std::to_string(offset) + ", +" + std::to_string(rows * cols) + ") exceeds " +
                         av.shape_string());
  Tensor out(rows, cols, std::vector<double>(av.data.begin() + static_cast<std::ptrdiff_t>(offset),
                                             av.data.begin() + static_cast<std::ptrdiff_t>(offset + rows * cols)));
  auto n = detail::make(Op::Slice, a, std::move(out));
  n.index = {offset};
  return a.tape->push(std::move(n));
}

/// out[e] = (v[e] + v[partner[e]]) / 2 for a column vector v.
inline Var pair_average(Var v, std::span<const std::size_t> partner) {
  const auto& vv = v.value();
  if (vv.cols != 1 || vv.rows != partner.size())
    throw DimensionError("pair_average expects [" + std::to_string(partner.size()) + "x1], got " + vv.shape_string());
  Tensor out(vv.rows, 1);
  for (std::size_t e = 0; e < vv.rows; ++e) {
    if (partner[e] >= vv.rows) throw ContractError("pair_average partner index out of range");
    out.data[e] = 0.5 * (vv.data[e] + vv.data[partner[e]]);
  }
  auto n = detail::make(Op::PairAverage, v, std::move(out));
  n.index.assign(partner.begin(), partner.end());
  return v.tape->push(std::move(n));
}

/// Symmetrically normalized propagation matrix D^-1/2 (A_w + I) D^-1/2 where
/// A_w[i,j] is the weight of directed edge (i,j) and D holds row sums of A_w + I.
/// `edges` is flattened as [src0, dst0, src1, dst1, ...].
inline Var normalized_adjacency(Var weights, std::span<const std::size_t> edges, std::size_t n_nodes) {
  const auto& w = weights.value();
  const std::size_t n_edges = edges.size() / 2;
  if (w.size() != n_edges)
    throw ContractError("mask length " + std::to_string(w.size()) + " does not match edge count " +
                        std::to_string(n_edges));
  std::vector<double> degree(n_nodes, 1.0);
  for (std::size_t e = 0; e < n_edges; ++e) degree[edges[2 * e]] += w.data[e];
  Tensor out(n_nodes, n_nodes);
  for (std::size_t i = 0; i < n_nodes; ++i) out(i, i) = 1.0 / degree[i];
  for (std::size_t e = 0; e < n_edges; ++e) {
    const auto i = edges[2 * e];
    const auto j = edges[2 * e + 1];
    out(i, j) += w.data[e] / std::sqrt(degree[i] * degree[j]);
  }
  auto n = detail::make(Op::NormAdj, weights, std::move(out));
  n.index.assign(edges.begin(), edges.end());
  n.saved = std::move(degree);
  return weights.tape->push(std::move(n));
}

inline void Tape::backward(Var root) {
  if (root.tape != this) throw ContractError("backward root belongs to another tape");
  const auto& rv = nodes_.at(root.id).value;
  if (rv.size() != 1) throw ContractError("backward root must be a scalar, got shape " + rv.shape_string());
  for (int id = 0; id <= root.id; ++id)
    if (nodes_[id].op != Op::Leaf) nodes_[id].grad = Tensor();
  grad_buffer(root.id).data[0] += 1.0;
  for (int id = root.id; id >= 0; --id) {
    const auto& n = nodes_[id];
    if (!n.requires_grad || n.op == Op::Leaf || n.grad.size() == 0) continue;
    backward_node(id);
  }
}

inline void Tape::backward_node(int id) {
  // Copy what we need; grad_buffer() may touch other nodes but never reallocates nodes_.
  Node& n = nodes_[id];
  const Tensor& g = n.grad;
  auto wants = [&](int in) { return in >= 0 && nodes_[in].requires_grad; };

  switch (n.op) {
    case Op::Leaf:
      break;
    case Op::MatMul: {
      const Tensor& a = nodes_[n.in0].value;
      const Tensor& b = nodes_[n.in1].value;
      if (wants(n.in0)) {
        Tensor& ga = grad_buffer(n.in0);
        for (std::size_t i = 0; i < a.rows; ++i)
          for (std::size_t j = 0; j < b.cols; ++j) {
            const double gij = g(i, j);
            if (gij == 0.0) continue;
            for (std::size_t k = 0; k < a.cols; ++k) ga(i, k) += gij * b(k, j);
          }
      }
      if (wants(n.in1)) {
        Tensor& gb = grad_buffer(n.in1);
        for (std::size_t i = 0; i < a.rows; ++i)
          for (std::size_t k = 0; k < a.cols; ++k) {
            const double aik = a(i, k);
            if (aik == 0.0) continue;
            for (std::size_t j = 0; j < b.cols; ++j) gb(k, j) += aik * g(i, j);
          }
      }
      break;
    }
    case Op::Add:
    case Op::Mul: {
      const bool is_mul = n.op == Op::Mul;
      for (int side = 0; side < 2; ++side) {
        const int in = side == 0 ? n.in0 : n.in1;
        const int other = side == 0 ? n.in1 : n.in0;
        if (!wants(in)) continue;
        Tensor& gi = grad_buffer(in);
        const Tensor& ov = nodes_[other].value;
        const bool broadcast_self = gi.size() == 1 && g.size() != 1;
        for (std::size_t k = 0; k < g.size(); ++k) {
          double contrib = g.data[k];
          if (is_mul) contrib *= ov.size() == 1 ? ov.data[0] : ov.data[k];
          gi.data[broadcast_self ? 0 : k] += contrib;
        }
      }
      break;
    }
    case Op::Scale: {
      Tensor& ga = grad_buffer(n.in0);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += n.scalar * g.data[k];
      break;
    }
    case Op::AddBias: {
      if (wants(n.in0)) {
        Tensor& gx = grad_buffer(n.in0);
        for (std::size_t k = 0; k < g.size(); ++k) gx.data[k] += g.data[k];
      }
      if (wants(n.in1)) {
        Tensor& gb = grad_buffer(n.in1);
        for (std::size_t i = 0; i < g.rows; ++i)
          for (std::size_t j = 0; j < g.cols; ++j) gb.data[j] += g(i, j);
      }
      break;
    }
    case Op::Relu: {
      const Tensor& x = nodes_[n.in0].value;
      Tensor& ga = grad_buffer(n.in0);
      for (std::size_t k = 0; k < g.size(); ++k)
        if (x.data[k] > 0.0) ga.data[k] += g.data[k];
      break;
    }
    case Op::Sigmoid: {
      Tensor& ga = grad_buffer(n.in0);
      for (std::size_t k = 0; k < g.size(); ++k) {
        const double y = n.value.data[k];
        ga.data[k] += g.data[k] * y * (1.0 - y);
      }
      break;
    }
    case Op::Clamp01: {
      const Tensor& x = nodes_[n.in0].value;
      Tensor& ga = grad_buffer(n.in0);
      for (std::size_t k = 0; k < g.size(); ++k)
        if (x.data[k] > 0.0 && x.data[k] < 1.0) ga.data[k] += g.data[k];
      break;
    }
    case Op::Log: {
      const Tensor& x = nodes_[n.in0].value;
      Tensor& ga = grad_buffer(n.in0);
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[k] += g.data[k] / x.data[k];
      break;
    }
    case Op::BinaryEntropy: {
      const Tensor& x = nodes_[n.in0].value;
      Tensor& ga = grad_buffer(n.in0);
      const double eps = n.scalar;
      for (std::size_t k = 0; k < g.size(); ++k) {
        if (x.data[k] < eps || x.data[k] > 1.0 - eps) continue;
        const double p = x.data[k];
        ga.data[k] += g.data[k] * (std::log(1.0 - p) - std::log(p));
      }
      break;
    }
    case Op::Sum: {
      Tensor& ga = grad_buffer(n.in0);
      for (auto& v : ga.data) v += g.data[0];
      break;
    }
    case Op::Mean: {
      Tensor& ga = grad_buffer(n.in0);
      const double share = g.data[0] / static_cast<double>(ga.size());
      for (auto& v : ga.data) v += share;
      break;
    }
    case Op::MeanRows: {
      Tensor& ga = grad_buffer(n.in0);
      const double inv = 1.0 / static_cast<double>(ga.rows);
      for (std::size_t i = 0; i < ga.rows; ++i)
        for (std::size_t j = 0; j < ga.cols; ++j) ga(i, j) += g.data[j] * inv;
      break;
    }
    case Op::Mse: {
      const Tensor& p = nodes_[n.in0].value;
      const Tensor& t = nodes_[n.in1].value;
      const double coeff = 2.0 * g.data[0] / static_cast<double>(p.size());
      if (wants(n.in0)) {
        Tensor& gp = grad_buffer(n.in0);
        for (std::size_t k = 0; k < p.size(); ++k) gp.data[k] += coeff * (p.data[k] - t.data[k]);
      }
      if (wants(n.in1)) {
        Tensor& gt = grad_buffer(n.in1);
        for (std::size_t k = 0; k < p.size(); ++k) gt.data[k] -= coeff * (p.data[k] - t.data[k]);
      }
      break;
    }
    case Op::BceLogit: {
      const Tensor& x = nodes_[n.in0].value;
      const Tensor& t = nodes_[n.in1].value;
      const double coeff = g.data[0] / static_cast<double>(x.size());
      if (wants(n.in0)) {
        Tensor& gx = grad_buffer(n.in0);
        for (std::size_t k = 0; k < x.size(); ++k) gx.data[k] += coeff * (gxplain::sigmoid(x.data[k]) - t.data[k]);
      }
      if (wants(n.in1)) {
        Tensor& gt = grad_buffer(n.in1);
        for (std::size_t k = 0; k < x.size(); ++k) gt.data[k] -= coeff * x.data[k];
      }
      break;
    }
    case Op::SoftmaxCe: {
      Tensor& gz = grad_buffer(n.in0);
      for (std::size_t j = 0; j < gz.cols; ++j)
        gz.data[j] += g.data[0] * (n.saved[j] - (j == n.index[0] ? 1.0 : 0.0));
      break;
    }
    case Op::Slice: {
      Tensor& ga = grad_buffer(n.in0);
      const std::size_t offset = n.index[0];
      for (std::size_t k = 0; k < g.size(); ++k) ga.data[offset + k] += g.data[k];
      break;
    }
    case Op::PairAverage: {
      Tensor& ga = grad_buffer(n.in0);
      for (std::size_t e = 0; e < g.size(); ++e) {
        ga.data[e] += 0.5 * g.data[e];
        ga.data[n.index[e]] += 0.5 * g.data[e];
      }
      break;
    }
    case Op::NormAdj: {
      const Tensor& a_hat = n.value;
      const auto& degree = n.saved;
      const std::size_t n_nodes = a_hat.rows;
      // dL/dd_i = -1/(2 d_i) * (sum_b G_ib Ahat_ib + sum_a G_ai Ahat_ai)
      std::vector<double> d_degree(n_nodes, 0.0);
      for (std::size_t i = 0; i < n_nodes; ++i)
        for (std::size_t j = 0; j < n_nodes; ++j) {
          const double ga = g(i, j) * a_hat(i, j);
          d_degree[i] += ga;
          d_degree[j] += ga;
        }
      for (std::size_t i = 0; i < n_nodes; ++i) d_degree[i] *= -0.5 / degree[i];
      Tensor& gw = grad_buffer(n.in0);
      for (std::size_t e = 0; e < gw.size(); ++e) {
        const auto i = n.index[2 * e];
        const auto j = n.index[2 * e + 1];
        gw.data[e] += g(i, j) / std::sqrt(degree[i] * degree[j]) + d_degree[i];
      }
      break;
    }
  }
}

struct FiniteDiffReport {
  double elementwise = 0.0;  // max_i |ad_i - fd_i| / (|fd_i| + 1e-8)
  double relative = 0.0;     // max_i |ad_i - fd_i| / max_i |fd_i|
};

/// Compares reverse-mode gradients of a scalar function against central
/// differences. `f` records its computation on the supplied tape from a leaf
/// holding the parameter vector (n x 1) and returns the scalar root.
inline FiniteDiffReport finite_diff_report(const std::function<Var(Tape&, Var)>& f, const std::vector<double>& point,
                                           double step) {
  if (!(step > 0.0)) throw DomainError("finite difference step must be positive");
  auto evaluate = [&](const std::vector<double>& x) {
    Tape tape;
    const Var leaf = tape.leaf(Tensor::column(x), false);
    const double v = f(tape, leaf).value().item();
    if (!std::isfinite(v)) throw NumericError("non-finite function value during finite differencing");
    return v;
  };

  Tape tape;
  const Var x = tape.leaf(Tensor::column(point), true);
  const Var root = f(tape, x);
  if (!std::isfinite(root.value().item())) throw NumericError("non-finite function value at base point");
  tape.backward(root);
  const Tensor& grad = x.grad();

  FiniteDiffReport rep;
  double abs_worst = 0.0, fd_scale = 0.0;
  std::vector<double> probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    probe[i] = point[i] + step;
    const double up = evaluate(probe);
    probe[i] = point[i] - step;
    const double down = evaluate(probe);
    probe[i] = point[i];
    const double fd = (up - down) / (2.0 * step);
    const double ad = grad.size() ? grad.data[i] : 0.0;
    rep.elementwise = std::max(rep.elementwise, std::abs(ad - fd) / (std::abs(fd) + 1e-8));
    abs_worst = std::max(abs_worst, std::abs(ad - fd));
    fd_scale = std::max(fd_scale, std::abs(fd));
  }
  rep.relative = fd_scale > 0.0 ? abs_worst / fd_scale : abs_worst;
  return rep;
}

/// finite_diff_report(...).elementwise.
inline double finite_diff_check(const std::function<Var(Tape&, Var)>& f, const std::vector<double>& point,
                                double step) {
  return finite_diff_report(f, point, step).elementwise;
}

}  // namespace ad
}  // namespace gxplain
