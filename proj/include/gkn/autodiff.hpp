// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0
//
// Tape-based reverse-mode differentiation over dense row-major float64 arrays.
// Operations cover the graph kernel network and the MLP baselines.

#pragma once

#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace gkn::ad {

using Shape = std::vector<std::size_t>;

class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class IndexError : public std::out_of_range {
 public:
  using std::out_of_range::out_of_range;
};

// Dense row-major array. Rank 0 is a scalar holding one value.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);
  explicit Tensor(Shape shape);  // zero-filled

  static Tensor scalar(double v) { return Tensor({}, {v}); }
  static Tensor vector(std::vector<double> v);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> v);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return values_.size(); }
  // Matrix view: rank-2 as is, rank-1 as a single row, scalar as 1x1.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  const double* data() const { return values_.data(); }
  double* data() { return values_.data(); }

  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double at(std::size_t r, std::size_t c) const { return values_[r * cols() + c]; }
  double& at(std::size_t r, std::size_t c) { return values_[r * cols() + c]; }
  double item() const;

  bool all_finite() const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  Shape shape_;
  std::vector<double> values_;
};

std::string shape_string(const Shape& s);

// Handle to a node recorded on a Tape.
struct Var {
  std::size_t id = 0;
};

enum class OpKind {
  Leaf,
  MatMul,
  Linear,
  Add,
  Relu,
  GatherRows,
  ScatterMean,
  EdgeMatVec,
  MseLoss,
  Sum,
};

// Gradients of every requires-grad leaf, keyed by node id.
class Gradients {
 public:
  bool has(Var v) const { return v.id < grads_.size() && grads_[v.id].has_value(); }
  const Tensor& operator[](Var v) const;

 private:
  friend class Tape;
  std::vector<std::optional<Tensor>> grads_;
};

// Records forward operations in topological order. Single writer; one tape
// per independent forward pass.
class Tape {
 public:
  Var constant(Tensor value) { return leaf(std::move(value), false); }
  Var parameter(Tensor value) { return leaf(std::move(value), true); }

  const Tensor& value(Var v) const { return node(v).value; }
  bool requires_grad(Var v) const { return node(v).requires_grad; }
  std::size_t size() const { return nodes_.size(); }

  // a[p x q] . b[q x r]
  Var matmul(Var a, Var b);
  // x[E x in] . w[out x in]^T (+ bias[out] broadcast over rows)
  Var linear(Var x, Var w, std::optional<Var> bias = std::nullopt);
  // Elementwise sum of equal shapes.
  Var add(Var a, Var b);
  Var relu(Var x);
  // out[i] = x[rows[i]]
  Var gather_rows(Var x, std::span<const std::size_t> rows);
  // out[k] = mean of messages[e] with targets[e] == k; zero rows where no message lands.
  Var scatter_mean(Var messages, std::span<const std::size_t> targets, std::size_t num_nodes);
  // mats[E x n*n] holds one row-major n x n matrix per row; out[e] = mats[e] . vecs[e].
  Var edge_matvec(Var mats, Var vecs);
  Var mse_loss(Var pred, Var target);
  Var sum(Var x);

  Gradients backward(Var loss) const;

 private:
  struct Node {
    OpKind kind = OpKind::Leaf;
    std::size_t in0 = 0;
    std::size_t in1 = 0;
    std::size_t in2 = 0;
    int arity = 0;
    Tensor value;
    bool requires_grad = false;
    std::vector<std::size_t> index;  // gather/scatter indices
    std::vector<double> counts;      // scatter_mean neighbourhood sizes
  };

  Var leaf(Tensor value, bool requires_grad);
  const Node& node(Var v) const;
  Var push(Node n);

  std::vector<Node> nodes_;
};

// Max over coordinates of |analytic - central difference| / (|analytic| + |cd| + 1e-12).
// `f` builds a scalar on the tape from the parameter it is handed.
using ScalarFn = std::function<Var(Tape&, Var)>;
double grad_check(const ScalarFn& f, const Tensor& point, double step = 1e-5);

}  // namespace gkn::ad
