// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0

#include "gkn/gkn_model.hpp"

#include <Eigen/Core>

#include <cmath>
#include <random>

namespace gkn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstMap = Eigen::Map<const RowMat>;

ConstMap as_matrix(const ad::Tensor& t) {
  return ConstMap(t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols()));
}

Eigen::Map<const Eigen::RowVectorXd> as_row(const ad::Tensor& t) {
  return Eigen::Map<const Eigen::RowVectorXd>(t.data(), static_cast<Eigen::Index>(t.size()));
}

void apply_activation(RowMat& m, Activation act) {
  if (act == Activation::Relu) m = m.cwiseMax(0.0);
}

// Hidden kappa features: all layers but the last, ReLU after each.
RowMat kappa_hidden(const GknParams& params, const RowMat& features) {
  RowMat h = features;
  for (std::size_t l = 0; l + 1 < params.kappa.size(); ++l) {
    const auto& layer = params.kappa[l];
    RowMat next = h * as_matrix(layer.weight).transpose();
    next.rowwise() += as_row(layer.bias);
    h = next.cwiseMax(0.0);
  }
  return h;
}

constexpr std::size_t kHiddenCacheBytes = std::size_t{1} << 30;

}  // namespace

std::vector<std::size_t> ModelConfig::kappa_widths() const {
  std::vector<std::size_t> w;
  w.push_back(input_width());
  w.insert(w.end(), kappa_hidden.begin(), kappa_hidden.end());
  w.push_back(width * width);
  return w;
}

void ModelConfig::validate() const {
  if (dim != 1 && dim != 2) throw std::invalid_argument("model: dim must be 1 or 2");
  if (width < 1) throw std::invalid_argument("model: width must be at least 1");
  if (depth < 1) throw std::invalid_argument("model: depth must be at least 1");
  for (auto w : kappa_hidden) {
    if (w < 1) throw std::invalid_argument("model: kappa widths must be positive");
  }
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::large() {
  ModelConfig c;
  c.width = 64;
  c.kappa_hidden = {512, 1024};
  return c;
}

std::vector<ad::Tensor*> GknParams::tensors() {
  std::vector<ad::Tensor*> out{&lift_weight, &lift_bias, &local_weight, &proj_weight, &proj_bias};
  for (auto& layer : kappa) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<const ad::Tensor*> GknParams::tensors() const {
  std::vector<const ad::Tensor*> out{&lift_weight, &lift_bias, &local_weight, &proj_weight, &proj_bias};
  for (const auto& layer : kappa) {
    out.push_back(&layer.weight);
    out.push_back(&layer.bias);
  }
  return out;
}

std::vector<std::string> GknParams::tensor_names() const {
  std::vector<std::string> out{"P", "p", "W", "Q", "q"};
  for (std::size_t l = 0; l < kappa.size(); ++l) {
    out.push_back("kappa" + std::to_string(l) + ".weight");
    out.push_back("kappa" + std::to_string(l) + ".bias");
  }
  return out;
}

std::size_t GknParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : tensors()) n += t->size();
  return n;
}

std::size_t GknParams::kappa_parameter_count() const {
  std::size_t n = 0;
  for (const auto& layer : kappa) n += layer.weight.size() + layer.bias.size();
  return n;
}

bool GknParams::all_finite() const {
  for (const auto* t : tensors()) {
    if (!t->all_finite()) return false;
  }
  return true;
}

GknParams init_params(const ModelConfig& config, std::uint64_t seed) {
  config.validate();
  Rng rng(seed);
  auto uniform = [&rng](std::size_t rows, std::size_t cols) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(cols));
    std::uniform_real_distribution<double> dist(-bound, bound);
    ad::Tensor t({rows, cols});
    for (double& v : t.values()) v = dist(rng);
    return t;
  };
  const std::size_t n = config.width;
  GknParams p;
  p.config = config;
  p.lift_weight = uniform(n, config.input_width());
  p.lift_bias = ad::Tensor({n});
  p.local_weight = config.local_term ? uniform(n, n) : ad::Tensor({n, n});
  p.proj_weight = uniform(1, n);
  p.proj_bias = ad::Tensor({1});
  const auto widths = config.kappa_widths();
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    p.kappa.push_back({uniform(widths[l + 1], widths[l]), ad::Tensor({widths[l + 1]})});
  }
  return p;
}

ParamVars register_params(ad::Tape& tape, const GknParams& params, const std::vector<bool>* trainable) {
  const auto tensors = params.tensors();
  if (trainable && trainable->size() != tensors.size()) {
    throw std::invalid_argument("register_params: trainable mask has the wrong length");
  }
  ParamVars vars;
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const bool grad = trainable ? (*trainable)[i] : true;
    vars.all.push_back(grad ? tape.parameter(*tensors[i]) : tape.constant(*tensors[i]));
  }
  return vars;
}

ad::Var mlp_forward(ad::Tape& tape, const std::vector<ad::Var>& weights, const std::vector<ad::Var>& biases,
                    ad::Var x) {
  ad::Var h = x;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    h = tape.linear(h, weights[l], biases[l]);
    if (l + 1 < weights.size()) h = tape.relu(h);
  }
  return h;
}

ad::Var kappa_forward(ad::Tape& tape, const ParamVars& vars, const GknParams& params, ad::Var edge_features) {
  const auto& f = tape.value(edge_features);
  if (f.cols() != params.config.input_width()) {
    throw ad::DimensionError("kappa: edge feature width " + std::to_string(f.cols()) + ", expected " +
                             std::to_string(params.config.input_width()));
  }
  std::vector<ad::Var> w;
  std::vector<ad::Var> b;
  for (std::size_t l = 0; l < params.kappa.size(); ++l) {
    w.push_back(vars.kappa_weight(l));
    b.push_back(vars.kappa_bias(l));
  }
  return mlp_forward(tape, w, b, edge_features);
}

ad::Tensor kappa_forward(const GknParams& params, const ad::Tensor& edge_features) {
  if (edge_features.cols() != params.config.input_width()) {
    throw ad::DimensionError("kappa: edge feature width " + std::to_string(edge_features.cols()) +
                             ", expected " + std::to_string(params.config.input_width()));
  }
  const RowMat h = kappa_hidden(params, as_matrix(edge_features));
  const auto& last = params.kappa.back();
  RowMat out = h * as_matrix(last.weight).transpose();
  out.rowwise() += as_row(last.bias);
  ad::Tensor t({edge_features.rows(), last.weight.rows()});
  Eigen::Map<RowMat>(t.data(), out.rows(), out.cols()) = out;
  return t;
}

ad::Var gkn_forward(ad::Tape& tape, const ParamVars& vars, const GknParams& params, const SpatialGraph& graph) {
  const auto& cfg = params.config;
  if (graph.node_inputs.cols() != cfg.input_width()) {
    throw ad::DimensionError("gkn: node input width " + std::to_string(graph.node_inputs.cols()) + ", expected " +
                             std::to_string(cfg.input_width()));
  }
  const std::size_t k = graph.num_nodes();
  const ad::Var inputs = tape.constant(graph.node_inputs);
  const ad::Var edges = tape.constant(graph.edge_features);
  const ad::Var kmats = kappa_forward(tape, vars, params, edges);

  ad::Var v = tape.linear(inputs, vars.lift_weight(), vars.lift_bias());
  for (std::size_t t = 0; t < cfg.depth; ++t) {
    const ad::Var from = tape.gather_rows(v, graph.sources);
    const ad::Var messages = tape.edge_matvec(kmats, from);
    ad::Var pre = tape.scatter_mean(messages, graph.targets, k);
    if (cfg.local_term) pre = tape.add(tape.linear(v, vars.local_weight()), pre);
    v = cfg.activation == Activation::Relu ? tape.relu(pre) : pre;
  }
  return tape.linear(v, vars.proj_weight(), vars.proj_bias());
}

std::vector<double> gkn_predict(const GknParams& params, const SpatialGraph& graph) {
  const auto& cfg = params.config;
  if (graph.node_inputs.cols() != cfg.input_width()) {
    throw ad::DimensionError("gkn: node input width mismatch");
  }
  if (graph.num_edges() > 0 && graph.edge_features.cols() != cfg.input_width()) {
    throw ad::DimensionError("gkn: edge feature width mismatch");
  }
  const Eigen::Index k = static_cast<Eigen::Index>(graph.num_nodes());
  const Eigen::Index n = static_cast<Eigen::Index>(cfg.width);
  const std::size_t e_count = graph.num_edges();

  RowMat v = as_matrix(graph.node_inputs) * as_matrix(params.lift_weight).transpose();
  v.rowwise() += as_row(params.lift_bias);

  // Edges grouped by source node.
  std::vector<std::size_t> src_ptr(static_cast<std::size_t>(k) + 1, 0);
  for (std::size_t y : graph.sources) ++src_ptr[y + 1];
  for (Eigen::Index y = 0; y < k; ++y) src_ptr[y + 1] += src_ptr[y];
  std::vector<std::size_t> by_source(e_count);
  {
    std::vector<std::size_t> fill(src_ptr.begin(), src_ptr.end() - 1);
    for (std::size_t e = 0; e < e_count; ++e) by_source[fill[graph.sources[e]]++] = e;
  }
  std::vector<double> degree(static_cast<std::size_t>(k), 0.0);
  for (std::size_t t : graph.targets) degree[t] += 1.0;

  const auto& last = params.kappa.back();
  const Eigen::Index w = static_cast<Eigen::Index>(last.weight.cols());
  RowMat features(static_cast<Eigen::Index>(e_count), static_cast<Eigen::Index>(cfg.input_width()));
  for (std::size_t i = 0; i < e_count; ++i) {
    features.row(static_cast<Eigen::Index>(i)) = as_matrix(graph.edge_features).row(static_cast<Eigen::Index>(by_source[i]));
  }
  const bool cache = e_count * static_cast<std::size_t>(w) * sizeof(double) <= kHiddenCacheBytes;
  RowMat hidden_all;
  if (cache) hidden_all = kappa_hidden(params, features);

  // last layer: kappa(e)[i][j] = sum_k L[i*n+j][k] h_e[k] + b[i*n+j]
  // rearranged[j][k*n+i] = L[i*n+j][k], so (v_y . rearranged) holds Z_y[k][i] = sum_j L[i*n+j][k] v_y[j].
  RowMat rearranged(n, w * n);
  RowMat bias_mat(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      for (Eigen::Index kk = 0; kk < w; ++kk) rearranged(j, kk * n + i) = last.weight.at(static_cast<std::size_t>(i * n + j), static_cast<std::size_t>(kk));
      bias_mat(i, j) = last.bias[static_cast<std::size_t>(i * n + j)];
    }
  }

  for (std::size_t t = 0; t < cfg.depth; ++t) {
    const RowMat z = v * rearranged;              // K x (w n)
    const RowMat bias_msg = v * bias_mat.transpose();  // K x n
    RowMat agg = RowMat::Zero(k, n);
    for (Eigen::Index y = 0; y < k; ++y) {
      const std::size_t lo = src_ptr[static_cast<std::size_t>(y)];
      const std::size_t hi = src_ptr[static_cast<std::size_t>(y) + 1];
      if (lo == hi) continue;
      const Eigen::Index rows = static_cast<Eigen::Index>(hi - lo);
      const ConstMap zy(z.data() + y * w * n, w, n);
      RowMat msgs;
      if (cache) {
        msgs = hidden_all.middleRows(static_cast<Eigen::Index>(lo), rows) * zy;
      } else {
        msgs = kappa_hidden(params, features.middleRows(static_cast<Eigen::Index>(lo), rows)) * zy;
      }
      for (Eigen::Index r = 0; r < rows; ++r) {
        const std::size_t x = graph.targets[by_source[lo + static_cast<std::size_t>(r)]];
        agg.row(static_cast<Eigen::Index>(x)) += msgs.row(r) + bias_msg.row(y);
      }
    }
    for (Eigen::Index x = 0; x < k; ++x) {
      if (degree[static_cast<std::size_t>(x)] > 0.0) agg.row(x) /= degree[static_cast<std::size_t>(x)];
    }
    RowMat pre = agg;
    if (cfg.local_term) pre.noalias() += v * as_matrix(params.local_weight).transpose();
    apply_activation(pre, cfg.activation);
    v = std::move(pre);
  }

  const Eigen::VectorXd out = v * as_row(params.proj_weight).transpose();
  std::vector<double> result(static_cast<std::size_t>(k));
  for (Eigen::Index i = 0; i < k; ++i) result[static_cast<std::size_t>(i)] = out(i) + params.proj_bias[0];
  return result;
}

}  // namespace gkn
