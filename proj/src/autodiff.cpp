// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0

#include "gkn/autodiff.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <sstream>

namespace gkn::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;
using MutMap = Eigen::Map<RowMat>;

ConstMap as_matrix(const Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

MutMap as_matrix(Tensor& t) {
  return MutMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

std::size_t product(const Shape& s) {
  std::size_t p = 1;
  for (auto d : s) p *= d;
  return p;
}

void require_matrix(const Tensor& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got shape " + shape_string(t.shape()));
  }
}

}  // namespace

std::string shape_string(const Shape& s) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << 'x';
    os << s[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)), values_(std::move(values)) {
  if (product(shape_) != values_.size()) {
    throw DimensionError("tensor: shape " + shape_string(shape_) + " does not match " +
                         std::to_string(values_.size()) + " values");
  }
}

Tensor::Tensor(Shape shape) : shape_(std::move(shape)), values_(product(shape_), 0.0) {}

Tensor Tensor::vector(std::vector<double> v) {
  const auto n = v.size();
  return Tensor({n}, std::move(v));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> v) {
  return Tensor({rows, cols}, std::move(v));
}

std::size_t Tensor::rows() const {
  if (shape_.size() >= 2) return shape_[0];
  return 1;
}

std::size_t Tensor::cols() const {
  if (shape_.empty()) return 1;
  if (shape_.size() == 1) return shape_[0];
  std::size_t c = 1;
  for (std::size_t i = 1; i < shape_.size(); ++i) c *= shape_[i];
  return c;
}

double Tensor::item() const {
  if (values_.size() != 1) throw DimensionError("item: tensor is not a scalar");
  return values_[0];
}

bool Tensor::all_finite() const {
  return std::all_of(values_.begin(), values_.end(), [](double v) { return std::isfinite(v); });
}

const Tensor& Gradients::operator[](Var v) const {
  if (!has(v)) throw std::out_of_range("no gradient recorded for node " + std::to_string(v.id));
  return *grads_[v.id];
}

const Tape::Node& Tape::node(Var v) const {
  if (v.id >= nodes_.size()) throw IndexError("tape: unknown node " + std::to_string(v.id));
  return nodes_[v.id];
}

Var Tape::push(Node n) {
  nodes_.push_back(std::move(n));
  return Var{nodes_.size() - 1};
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  Node n;
  n.kind = OpKind::Leaf;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  return push(std::move(n));
}

Var Tape::matmul(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  require_matrix(A, "matmul");
  require_matrix(B, "matmul");
  if (A.cols() != B.rows()) {
    throw DimensionError("matmul: inner dimensions differ: " + shape_string(A.shape()) + " x " +
                         shape_string(B.shape()));
  }
  Node n;
  n.kind = OpKind::MatMul;
  n.in0 = a.id;
  n.in1 = b.id;
  n.arity = 2;
  n.value = Tensor({A.rows(), B.cols()});
  as_matrix(n.value).noalias() = as_matrix(A) * as_matrix(B);
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

Var Tape::linear(Var x, Var w, std::optional<Var> bias) {
  const Tensor& X = value(x);
  const Tensor& W = value(w);
  require_matrix(X, "linear");
  require_matrix(W, "linear");
  if (X.cols() != W.cols()) {
    throw DimensionError("linear: input width " + std::to_string(X.cols()) + " vs weight " +
                         shape_string(W.shape()));
  }
  Node n;
  n.kind = OpKind::Linear;
  n.in0 = x.id;
  n.in1 = w.id;
  n.arity = 2;
  n.value = Tensor({X.rows(), W.rows()});
  auto out = as_matrix(n.value);
  out.noalias() = as_matrix(X) * as_matrix(W).transpose();
  n.requires_grad = requires_grad(x) || requires_grad(w);
  if (bias) {
    const Tensor& b = value(*bias);
    if (b.size() != W.rows()) {
      throw DimensionError("linear: bias length " + std::to_string(b.size()) + " vs " +
                           std::to_string(W.rows()) + " outputs");
    }
    const Eigen::Map<const Eigen::RowVectorXd> bv(b.data(), static_cast<Eigen::Index>(b.size()));
    out.rowwise() += bv;
    n.in2 = bias->id;
    n.arity = 3;
    n.requires_grad = n.requires_grad || requires_grad(*bias);
  }
  return push(std::move(n));
}

Var Tape::add(Var a, Var b) {
  const Tensor& A = value(a);
  const Tensor& B = value(b);
  if (A.shape() != B.shape()) {
    throw DimensionError("add: shapes differ: " + shape_string(A.shape()) + " vs " + shape_string(B.shape()));
  }
  Node n;
  n.kind = OpKind::Add;
  n.in0 = a.id;
  n.in1 = b.id;
  n.arity = 2;
  n.value = A;
  auto out = n.value.values();
  auto rhs = B.values();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += rhs[i];
  n.requires_grad = requires_grad(a) || requires_grad(b);
  return push(std::move(n));
}

Var Tape::relu(Var x) {
  Node n;
  n.kind = OpKind::Relu;
  n.in0 = x.id;
  n.arity = 1;
  n.value = value(x);
  for (double& v : n.value.values()) v = v > 0.0 ? v : 0.0;
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

Var Tape::gather_rows(Var x, std::span<const std::size_t> rows) {
  const Tensor& X = value(x);
  require_matrix(X, "gather_rows");
  const std::size_t width = X.cols();
  Node n;
  n.kind = OpKind::GatherRows;
  n.in0 = x.id;
  n.arity = 1;
  n.value = Tensor({rows.size(), width});
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] >= X.rows()) {
      throw IndexError("gather_rows: row " + std::to_string(rows[i]) + " out of " + std::to_string(X.rows()));
    }
    std::copy_n(X.data() + rows[i] * width, width, n.value.data() + i * width);
  }
  n.index.assign(rows.begin(), rows.end());
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

Var Tape::scatter_mean(Var messages, std::span<const std::size_t> targets, std::size_t num_nodes) {
  const Tensor& M = value(messages);
  require_matrix(M, "scatter_mean");
  if (targets.size() != M.rows()) {
    throw DimensionError("scatter_mean: " + std::to_string(targets.size()) + " targets for " +
                         std::to_string(M.rows()) + " messages");
  }
  const std::size_t width = M.cols();
  Node n;
  n.kind = OpKind::ScatterMean;
  n.in0 = messages.id;
  n.arity = 1;
  n.value = Tensor({num_nodes, width});
  n.counts.assign(num_nodes, 0.0);
  double* out = n.value.data();
  for (std::size_t e = 0; e < targets.size(); ++e) {
    const std::size_t k = targets[e];
    if (k >= num_nodes) {
      throw IndexError("scatter_mean: target " + std::to_string(k) + " out of " + std::to_string(num_nodes));
    }
    n.counts[k] += 1.0;
    const double* src = M.data() + e * width;
    for (std::size_t j = 0; j < width; ++j) out[k * width + j] += src[j];
  }
  for (std::size_t k = 0; k < num_nodes; ++k) {
    if (n.counts[k] > 0.0) {
      for (std::size_t j = 0; j < width; ++j) out[k * width + j] /= n.counts[k];
    }
  }
  n.index.assign(targets.begin(), targets.end());
  n.requires_grad = requires_grad(messages);
  return push(std::move(n));
}

Var Tape::edge_matvec(Var mats, Var vecs) {
  const Tensor& M = value(mats);
  const Tensor& V = value(vecs);
  require_matrix(M, "edge_matvec");
  require_matrix(V, "edge_matvec");
  const std::size_t dim = V.cols();
  if (M.rows() != V.rows() || M.cols() != dim * dim) {
    throw DimensionError("edge_matvec: matrices " + shape_string(M.shape()) + " incompatible with vectors " +
                         shape_string(V.shape()));
  }
  Node n;
  n.kind = OpKind::EdgeMatVec;
  n.in0 = mats.id;
  n.in1 = vecs.id;
  n.arity = 2;
  n.value = Tensor({V.rows(), dim});
  for (std::size_t e = 0; e < V.rows(); ++e) {
    const double* m = M.data() + e * dim * dim;
    const double* v = V.data() + e * dim;
    double* o = n.value.data() + e * dim;
    for (std::size_t i = 0; i < dim; ++i) {
      double acc = 0.0;
      for (std::size_t j = 0; j < dim; ++j) acc += m[i * dim + j] * v[j];
      o[i] = acc;
    }
  }
  n.requires_grad = requires_grad(mats) || requires_grad(vecs);
  return push(std::move(n));
}

Var Tape::mse_loss(Var pred, Var target) {
  const Tensor& P = value(pred);
  const Tensor& T = value(target);
  if (P.shape() != T.shape()) {
    throw DimensionError("mse_loss: shapes differ: " + shape_string(P.shape()) + " vs " + shape_string(T.shape()));
  }
  if (P.size() == 0) throw DimensionError("mse_loss: empty input");
  double acc = 0.0;
  for (std::size_t i = 0; i < P.size(); ++i) {
    const double d = P[i] - T[i];
    acc += d * d;
  }
  Node n;
  n.kind = OpKind::MseLoss;
  n.in0 = pred.id;
  n.in1 = target.id;
  n.arity = 2;
  n.value = Tensor::scalar(acc / static_cast<double>(P.size()));
  n.requires_grad = requires_grad(pred) || requires_grad(target);
  return push(std::move(n));
}

Var Tape::sum(Var x) {
  double acc = 0.0;
  for (double v : value(x).values()) acc += v;
  Node n;
  n.kind = OpKind::Sum;
  n.in0 = x.id;
  n.arity = 1;
  n.value = Tensor::scalar(acc);
  n.requires_grad = requires_grad(x);
  return push(std::move(n));
}

Gradients Tape::backward(Var loss) const {
  const Node& root = node(loss);
  if (root.value.size() != 1) {
    throw std::logic_error("backward: loss must be a scalar, got shape " + shape_string(root.value.shape()));
  }
  Gradients out;
  auto& g = out.grads_;
  g.resize(nodes_.size());
  if (!root.requires_grad) return out;

  auto grad_of = [&](std::size_t id) -> Tensor& {
    if (!g[id]) g[id] = Tensor(nodes_[id].value.shape());
    return *g[id];
  };
  g[loss.id] = Tensor(root.value.shape(), {1.0});

  for (std::size_t id = loss.id + 1; id-- > 0;) {
    const Node& n = nodes_[id];
    if (!g[id] || n.kind == OpKind::Leaf || !n.requires_grad) continue;
    const Tensor& G = *g[id];
    switch (n.kind) {
      case OpKind::MatMul: {
        const Tensor& A = nodes_[n.in0].value;
        const Tensor& B = nodes_[n.in1].value;
        if (nodes_[n.in0].requires_grad) as_matrix(grad_of(n.in0)).noalias() += as_matrix(G) * as_matrix(B).transpose();
        if (nodes_[n.in1].requires_grad) as_matrix(grad_of(n.in1)).noalias() += as_matrix(A).transpose() * as_matrix(G);
        break;
      }
      case OpKind::Linear: {
        const Tensor& X = nodes_[n.in0].value;
        const Tensor& W = nodes_[n.in1].value;
        if (nodes_[n.in0].requires_grad) as_matrix(grad_of(n.in0)).noalias() += as_matrix(G) * as_matrix(W);
        if (nodes_[n.in1].requires_grad) as_matrix(grad_of(n.in1)).noalias() += as_matrix(G).transpose() * as_matrix(X);
        if (n.arity == 3 && nodes_[n.in2].requires_grad) {
          Tensor& db = grad_of(n.in2);
          const std::size_t rows = G.rows();
          const std::size_t cols = G.cols();
          for (std::size_t r = 0; r < rows; ++r) {
            for (std::size_t c = 0; c < cols; ++c) db[c] += G[r * cols + c];
          }
        }
        break;
      }
      case OpKind::Add: {
        for (std::size_t in : {n.in0, n.in1}) {
          if (!nodes_[in].requires_grad) continue;
          Tensor& d = grad_of(in);
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += G[i];
        }
        break;
      }
      case OpKind::Relu: {
        if (!nodes_[n.in0].requires_grad) break;
        const Tensor& X = nodes_[n.in0].value;
        Tensor& d = grad_of(n.in0);
        for (std::size_t i = 0; i < d.size(); ++i) {
          if (X[i] > 0.0) d[i] += G[i];
        }
        break;
      }
      case OpKind::GatherRows: {
        if (!nodes_[n.in0].requires_grad) break;
        Tensor& d = grad_of(n.in0);
        const std::size_t width = G.cols();
        for (std::size_t i = 0; i < n.index.size(); ++i) {
          double* dst = d.data() + n.index[i] * width;
          const double* src = G.data() + i * width;
          for (std::size_t j = 0; j < width; ++j) dst[j] += src[j];
        }
        break;
      }
      case OpKind::ScatterMean: {
        if (!nodes_[n.in0].requires_grad) break;
        Tensor& d = grad_of(n.in0);
        const std::size_t width = G.cols();
        for (std::size_t e = 0; e < n.index.size(); ++e) {
          const std::size_t k = n.index[e];
          const double inv = 1.0 / n.counts[k];
          double* dst = d.data() + e * width;
          const double* src = G.data() + k * width;
          for (std::size_t j = 0; j < width; ++j) dst[j] += src[j] * inv;
        }
        break;
      }
      case OpKind::EdgeMatVec: {
        const Tensor& M = nodes_[n.in0].value;
        const Tensor& V = nodes_[n.in1].value;
        const std::size_t dim = V.cols();
        const bool want_m = nodes_[n.in0].requires_grad;
        const bool want_v = nodes_[n.in1].requires_grad;
        Tensor* dM = want_m ? &grad_of(n.in0) : nullptr;
        Tensor* dV = want_v ? &grad_of(n.in1) : nullptr;
        for (std::size_t e = 0; e < V.rows(); ++e) {
          const double* ge = G.data() + e * dim;
          const double* v = V.data() + e * dim;
          const double* m = M.data() + e * dim * dim;
          for (std::size_t i = 0; i < dim; ++i) {
            if (dM) {
              double* dm = dM->data() + e * dim * dim + i * dim;
              for (std::size_t j = 0; j < dim; ++j) dm[j] += ge[i] * v[j];
            }
            if (dV) {
              double* dv = dV->data() + e * dim;
              for (std::size_t j = 0; j < dim; ++j) dv[j] += m[i * dim + j] * ge[i];
            }
          }
        }
        break;
      }
      case OpKind::MseLoss: {
        const Tensor& P = nodes_[n.in0].value;
        const Tensor& T = nodes_[n.in1].value;
        const double scale = 2.0 * G[0] / static_cast<double>(P.size());
        if (nodes_[n.in0].requires_grad) {
          Tensor& d = grad_of(n.in0);
          for (std::size_t i = 0; i < d.size(); ++i) d[i] += scale * (P[i] - T[i]);
        }
        if (nodes_[n.in1].requires_grad) {
          Tensor& d = grad_of(n.in1);
          for (std::size_t i = 0; i < d.size(); ++i) d[i] -= scale * (P[i] - T[i]);
        }
        break;
      }
      case OpKind::Sum: {
        if (!nodes_[n.in0].requires_grad) break;
        Tensor& d = grad_of(n.in0);
        for (double& v : d.values()) v += G[0];
        break;
      }
      case OpKind::Leaf:
        break;
    }
  }

  // Only requires-grad leaves are reported.
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    if (nodes_[id].kind != OpKind::Leaf || !nodes_[id].requires_grad) {
      g[id].reset();
    } else if (!g[id]) {
      g[id] = Tensor(nodes_[id].value.shape());
    }
  }
  return out;
}

double grad_check(const ScalarFn& f, const Tensor& point, double step) {
  Tape tape;
  const Var x = tape.parameter(point);
  const Var y = f(tape, x);
  const Gradients grads = tape.backward(y);
  const Tensor& analytic = grads[x];

  auto eval = [&](const Tensor& p) {
    Tape t;
    const Var v = t.constant(p);
    return t.value(f(t, v)).item();
  };

  double worst = 0.0;
  Tensor probe = point;
  for (std::size_t i = 0; i < point.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + step;
    const double up = eval(probe);
    probe[i] = saved - step;
    const double down = eval(probe);
    probe[i] = saved;
    const double cd = (up - down) / (2.0 * step);
    const double err = std::abs(analytic[i] - cd) / (std::abs(analytic[i]) + std::abs(cd) + 1e-12);
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace gkn::ad
