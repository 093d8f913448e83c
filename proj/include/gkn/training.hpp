// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0
//
// Normalization, Adam, the training and evaluation loops, and experiment
// harnesses built on them (resolution transfer, parameter sweeps, 1-d Green's
// function recovery).

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "gkn/autodiff.hpp"
#include "gkn/dataset.hpp"
#include "gkn/gkn_model.hpp"
#include "gkn/graph.hpp"

namespace gkn {

inline constexpr double kNormFloor = 1e-8;

struct ChannelStats {
  double mean = 0.0;
  double std = 1.0;  // >= kNormFloor

  double normalize(double v) const { return (v - mean) / std; }
  double denormalize(double z) const { return z * std + mean; }
  friend bool operator==(const ChannelStats&, const ChannelStats&) = default;
};

// Global scalar statistics; channel c of NodeFields uses `channels[c]`,
// edge values share channels[0] (the coefficient itself).
struct NormStats {
  std::vector<ChannelStats> channels;  // a, a_eps, d a_eps/dx1, d a_eps/dx2
  ChannelStats target;                 // u

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

// Population mean and std of every point of every field.
ChannelStats channel_stats(std::span<const GridField* const> fields);
NormStats compute_normalization(std::span<const NodeFields> train);

// Coordinates are left as they are. `include_target` controls whether u is
// normalized too (training) or kept in physical units (evaluation).
NodeFields normalize_fields(const NodeFields& raw, const NormStats& stats, bool include_target);

struct AdamHyper {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamState {
  std::vector<ad::Tensor> m;
  std::vector<ad::Tensor> v;
  std::size_t step = 0;
};

AdamState adam_init(std::span<ad::Tensor* const> params);

// One bias-corrected Adam update. A null gradient leaves that tensor alone.
void adam_step(std::span<ad::Tensor* const> params, std::span<const ad::Tensor* const> grads, AdamState& state,
               double lr, const AdamHyper& hyper = {});

class DivergenceError : public std::runtime_error {
 public:
  explicit DivergenceError(std::size_t epoch);
  std::size_t epoch() const { return epoch_; }

 private:
  std::size_t epoch_;
};

struct TrainOptions {
  std::size_t epochs = 200;
  double lr = 1e-4;
  AdamHyper adam;
  std::uint64_t seed = 0;
  std::vector<bool> trainable;  // per GknParams tensor; empty means all
};

using EpochCallback = std::function<void(std::size_t epoch, double mean_loss)>;

// Each epoch visits every graph once in a seeded shuffled order, one Adam step
// per graph, loss = MSE of the prediction against node_targets.
// Returns the mean loss of each epoch.
std::vector<double> train_on_graphs(GknParams& params, std::span<const SpatialGraph> graphs,
                                    const TrainOptions& options, const EpochCallback& on_epoch = {});

// ||pred - u|| / ||u||; throws on length mismatch.
double relative_l2(std::span<const double> pred, std::span<const double> truth);

// Relative error of one pair covered by `graphs`. Predictions are denormalized
// with `stats.target` and averaged per parent-grid node when a node appears in
// several graphs; targets are in physical units. Empty for a zero-norm target.
std::optional<double> pair_relative_l2(const GknParams& params, std::span<const SpatialGraph> graphs,
                                       const NormStats& stats);

// Mean of pair_relative_l2 over pairs; zero-norm pairs are skipped with a warning.
double evaluate_relative_l2(const GknParams& params, std::span<const std::vector<SpatialGraph>> pairs,
                            const NormStats& stats);

// Largest test resolution that is still evaluated on the full grid.
inline constexpr std::size_t kFullGridEvalLimit = 61;

struct TrainConfig {
  std::size_t n_train = 100;
  std::size_t n_test = 40;
  std::size_t train_res = 16;
  std::size_t test_res = 16;
  SamplingPlan plan{.m = 256, .l = 1, .m_test = 256, .l_test = 1, .r = 0.10, .r_test = 0.10, .seed = 0};
  std::size_t epochs = 200;
  double lr = 1e-4;
  AdamHyper adam;
  std::uint64_t seed = 0;  // initialization, sampling and shuffling
  ModelConfig model = ModelConfig::desk();

  void validate() const;
};

struct TrainedModel {
  GknParams params;
  NormStats stats;
  std::vector<double> loss_history;
  double mean_edges = 0.0;  // per training graph
};

// Training graphs for pairs [0, n_train) at train_res: the full grid when
// m >= s^2, otherwise l Nystrom subgraphs of m nodes per pair.
std::vector<SpatialGraph> training_graphs(std::span<const NodeFields> normalized, const SamplingPlan& plan,
                                          std::uint64_t seed);

// Evaluation graphs for one pair: the full grid when s <= kFullGridEvalLimit
// or m_test >= s^2, otherwise a random partition into blocks of m_test.
std::vector<SpatialGraph> evaluation_graphs(const NodeFields& normalized, const SamplingPlan& plan,
                                            std::uint64_t seed);

TrainedModel train(const TrainConfig& config, const Dataset& data, const EpochCallback& on_epoch = {});

// Relative L2 on test pairs [n_train, n_train + n_test) at resolution s.
double evaluate_model(const TrainedModel& model, const Dataset& data, const TrainConfig& config, std::size_t s);

struct TransferReport {
  std::size_t train_res = 0;
  std::vector<std::size_t> test_res;
  std::vector<double> errors;
  std::vector<double> loss_history;

  double max_min_ratio() const;
};

TransferReport resolution_transfer_experiment(const TrainConfig& config, const Dataset& data,
                                              std::span<const std::size_t> test_res,
                                              const EpochCallback& on_epoch = {});

enum class SweepAxis { TrainPairs, Subgraphs, Nodes, RadiusNodes, KappaShape };

SweepAxis parse_sweep_axis(const std::string& name);  // N | l | m | r-m | kappa
std::string sweep_axis_name(SweepAxis axis);

struct SweepCell {
  std::string label;
  TrainConfig config;
};

// Cells from textual values: N / l / m take integers (m sets m and m_test),
// r-m takes "r:m", kappa takes "w1-w2-...". Epoch counts for N follow an
// optional "N:epochs" form.
std::vector<SweepCell> sweep_cells(SweepAxis axis, std::span<const std::string> values, const TrainConfig& base);

struct SweepRow {
  std::string label;
  std::size_t n_train = 0;
  std::size_t m = 0;
  std::size_t l = 0;
  double r = 0.0;
  std::size_t epochs = 0;
  double mean_edges = 0.0;
  double train_loss = 0.0;
  double test_error = 0.0;
  std::string failure;  // empty on success
};

std::vector<SweepRow> sweep_experiment(std::span<const SweepCell> cells, const Dataset& data,
                                       const EpochCallback& on_epoch = {});

// 1-d Poisson setting: T = 1, identity sigma, no local term; lifting and
// projection are frozen so that u(x) = mean_y kappa(x, y, 1, 1) f(y) and
// kappa alone is trained to reproduce the Green's function solution.
struct Green1dConfig {
  std::size_t resolution = 33;
  std::size_t samples = 2048;
  std::size_t epochs = 60;
  double lr = 3e-4;
  std::vector<std::size_t> kappa_hidden{64, 64};
  std::size_t eval_points = 64;
  std::uint64_t seed = 0;
};

struct Green1dReport {
  std::vector<double> eval_grid;  // eval_points nodes of [0, 1]
  std::vector<double> learned;    // eval_points^2, row-major in (x, y)
  std::vector<double> analytic;
  double kernel_error = 0.0;      // relative L2 of learned vs analytic
  std::vector<double> loss_history;
};

ModelConfig green1d_model(const Green1dConfig& config);
GknParams green1d_init(const Green1dConfig& config);
// Graph for one forcing: every ordered pair of distinct nodes, edge value 1.
SpatialGraph green1d_graph(const GridField& forcing, const GridField* solution);
Green1dReport green1d_experiment(const Green1dConfig& config, const EpochCallback& on_epoch = {});

}  // namespace gkn
