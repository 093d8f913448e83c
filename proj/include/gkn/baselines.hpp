// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference surrogates for the Darcy problem: a pointwise MLP, PCA encoders
// joined by an MLP, and a Galerkin reduced basis method on PCA modes.

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "gkn/autodiff.hpp"
#include "gkn/dataset.hpp"
#include "gkn/gkn_model.hpp"
#include "gkn/pde.hpp"
#include "gkn/training.hpp"

namespace gkn {

struct PcaBasis {
  std::vector<double> mean;             // K
  ad::Tensor components;                // R x K, orthonormal rows
  std::vector<double> singular_values;  // R, nonincreasing

  std::size_t rank() const { return singular_values.size(); }
  std::size_t dimension() const { return mean.size(); }
  // Throws ResolutionError when the field length differs from the basis.
  std::vector<double> encode(std::span<const double> field) const;
  std::vector<double> decode(std::span<const double> coefficients) const;
};

// Top-R components of the mean-centered rows via the N x N Gram matrix. When
// the centered data has rank below R the remaining rows complete an
// orthonormal set with singular value 0.
PcaBasis compute_pca(std::span<const std::vector<double>> fields, std::size_t rank);

struct MlpParams {
  std::vector<DenseLayer> layers;
  std::vector<ad::Tensor*> tensors();
};

// Widths (in, hidden..., out); uniform +-1/sqrt(fan_in) weights, zero biases.
MlpParams init_mlp(std::span<const std::size_t> widths, std::uint64_t seed);
// Rows of x through the MLP (ReLU between layers).
ad::Tensor mlp_predict(const MlpParams& mlp, const ad::Tensor& x);

// One Adam step per batch over `epochs` passes; batches are visited in a
// seeded shuffled order. Returns the mean loss of each epoch.
std::vector<double> train_mlp(MlpParams& mlp, std::span<const ad::Tensor> inputs, std::span<const ad::Tensor> targets,
                              std::size_t epochs, double lr, std::uint64_t seed);

struct BaselineConfig {
  std::size_t n_train = 100;
  std::size_t n_test = 40;
  std::size_t train_res = 16;
  std::size_t test_res = 16;
  std::vector<std::size_t> hidden{64, 64};
  std::size_t epochs = 200;
  double lr = 1e-3;
  std::size_t rank_in = 30;
  std::size_t rank_out = 30;
  std::uint64_t seed = 0;
};

// Per-point map (x1, x2, a(x)) -> u(x); a and u are scaled by global statistics.
struct PointwiseModel {
  MlpParams mlp;
  ChannelStats a;
  ChannelStats u;
  std::vector<double> loss_history;
};

PointwiseModel train_pointwise_nn(std::span<const GridField> a, std::span<const GridField> u,
                                  const BaselineConfig& config);
// Prediction on every node of the grid of `a` (physical units).
std::vector<double> pointwise_predict(const PointwiseModel& model, const GridField& a);

struct PcaNnModel {
  PcaBasis input;
  PcaBasis output;
  std::vector<ChannelStats> input_scale;   // per input coefficient
  std::vector<ChannelStats> output_scale;  // per output coefficient
  MlpParams mlp;
  std::vector<double> loss_history;
};

// Encoders are fitted to the training a and u fields; all fields share one grid.
PcaNnModel train_pca_nn(std::span<const std::vector<double>> a, std::span<const std::vector<double>> u,
                        const BaselineConfig& config);
std::vector<double> pca_nn_predict(const PcaNnModel& model, std::span<const double> a);

struct RbmResult {
  std::vector<double> solution;      // interior unknowns, U c
  std::vector<double> coefficients;  // c
  bool regularized = false;          // reduced matrix needed the diagonal shift
};

inline constexpr double kRbmRegularization = 1e-12;

// Galerkin solve (U^T A U) c = U^T f with U the columns given as rows of `basis`.
RbmResult rbm_solve(const SparseSystem& system, const ad::Tensor& basis);

// Orthonormal reduced basis: the mean training solution followed by its top
// R principal components (interior unknowns), Gram-Schmidt orthonormalized.
ad::Tensor rbm_basis(std::span<const std::vector<double>> interior_solutions, std::size_t rank);

struct BaselineReport {
  double test_error = 0.0;
  std::vector<double> loss_history;
};

// End-to-end runs on a Darcy dataset; pairs [0, n_train) train, the next
// n_test pairs test, errors are mean relative L2 in physical units.
BaselineReport run_pointwise_nn(const Dataset& data, const BaselineConfig& config);
BaselineReport run_pca_nn(const Dataset& data, const BaselineConfig& config);    // train_res == test_res
BaselineReport run_rbm(const Dataset& data, const BaselineConfig& config);       // rank = rank_out

}  // namespace gkn
