// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0
//
// Graph kernel network: pointwise lifting, T message-passing iterations that
// share one local weight W and one kernel network kappa, then a pointwise
// projection back to a scalar.
//
//   v0(x)    = P (x, a, a_eps, grad a_eps)(x) + p
//   v_t+1(x) = sigma( W v_t(x) + mean_{y in N(x)} kappa(x, y, a(x), a(y)) v_t(y) )
//   u(x)     = Q v_T(x) + q

#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "gkn/autodiff.hpp"
#include "gkn/graph.hpp"

namespace gkn {

enum class Activation : std::uint32_t { Relu = 0, Identity = 1 };

struct ModelConfig {
  int dim = 2;
  std::size_t width = 32;                          // n
  std::size_t depth = 6;                           // T
  std::vector<std::size_t> kappa_hidden{128, 256};  // hidden widths of kappa
  Activation activation = Activation::Relu;        // sigma between iterations
  bool local_term = true;                          // include W v_t(x)

  std::size_t input_width() const { return 2 * static_cast<std::size_t>(dim + 1); }
  // (2(d+1), hidden..., n^2)
  std::vector<std::size_t> kappa_widths() const;
  void validate() const;

  static ModelConfig desk();   // n = 32, kappa (6, 128, 256, n^2), T = 6
  static ModelConfig large();  // n = 64, kappa (6, 512, 1024, n^2), T = 6

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

struct DenseLayer {
  ad::Tensor weight;  // out x in
  ad::Tensor bias;    // out
};

struct GknParams {
  ModelConfig config;
  ad::Tensor lift_weight;   // P: n x 2(d+1)
  ad::Tensor lift_bias;     // p: n
  ad::Tensor local_weight;  // W: n x n
  ad::Tensor proj_weight;   // Q: 1 x n
  ad::Tensor proj_bias;     // q: 1
  std::vector<DenseLayer> kappa;

  // Fixed order: P, p, W, Q, q, then (weight, bias) per kappa layer.
  std::vector<ad::Tensor*> tensors();
  std::vector<const ad::Tensor*> tensors() const;
  std::vector<std::string> tensor_names() const;
  std::size_t parameter_count() const;
  std::size_t kappa_parameter_count() const;
  bool all_finite() const;
};

// Weights uniform in +-1/sqrt(fan_in), biases zero. W and Q count as weights.
GknParams init_params(const ModelConfig& config, std::uint64_t seed);

// Parameters registered on a tape, in GknParams::tensors() order.
struct ParamVars {
  std::vector<ad::Var> all;
  ad::Var lift_weight() const { return all[0]; }
  ad::Var lift_bias() const { return all[1]; }
  ad::Var local_weight() const { return all[2]; }
  ad::Var proj_weight() const { return all[3]; }
  ad::Var proj_bias() const { return all[4]; }
  ad::Var kappa_weight(std::size_t layer) const { return all[5 + 2 * layer]; }
  ad::Var kappa_bias(std::size_t layer) const { return all[6 + 2 * layer]; }
};

// `trainable` (optional, one flag per tensor) marks which tensors become
// requires-grad leaves; the rest are constants.
ParamVars register_params(ad::Tape& tape, const GknParams& params, const std::vector<bool>* trainable = nullptr);

// Shared MLP: ReLU between layers, linear last layer.
ad::Var mlp_forward(ad::Tape& tape, const std::vector<ad::Var>& weights, const std::vector<ad::Var>& biases,
                    ad::Var x);

// Kernel matrices for each edge row: E x n^2, each row a row-major n x n matrix.
ad::Var kappa_forward(ad::Tape& tape, const ParamVars& vars, const GknParams& params, ad::Var edge_features);
ad::Tensor kappa_forward(const GknParams& params, const ad::Tensor& edge_features);

// Differentiable forward pass; returns K x 1 predictions (normalized units).
ad::Var gkn_forward(ad::Tape& tape, const ParamVars& vars, const GknParams& params, const SpatialGraph& graph);

// Inference without a tape. Factorizes the last kappa layer through the node
// states, so memory and time scale with E * hidden rather than E * n^2.
std::vector<double> gkn_predict(const GknParams& params, const SpatialGraph& graph);

}  // namespace gkn
