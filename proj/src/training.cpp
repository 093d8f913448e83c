// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0

#include "gkn/training.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <numeric>
#include <sstream>

#include "gkn/pde.hpp"

namespace gkn {

namespace {

// Stream labels mixed into the root seed.
constexpr std::uint64_t kInitStream = 1;
constexpr std::uint64_t kSampleStream = 2;
constexpr std::uint64_t kShuffleStream = 3;
constexpr std::uint64_t kEvalStream = 4;

std::uint64_t derive(std::uint64_t seed, std::uint64_t stream) { return splitmix64(seed ^ splitmix64(stream)); }

GridField map_field(const GridField& f, const ChannelStats& c) {
  GridField out = f;
  for (double& v : out.values()) v = c.normalize(v);
  return out;
}

std::size_t parse_size(const std::string& text) {
  std::size_t pos = 0;
  const unsigned long long v = std::stoull(text, &pos);
  if (pos != text.size()) throw std::invalid_argument("sweep: not an integer: " + text);
  return static_cast<std::size_t>(v);
}

std::vector<std::string> split(const std::string& text, char sep) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, sep)) parts.push_back(item);
  return parts;
}

}  // namespace

ChannelStats channel_stats(std::span<const GridField* const> fields) {
  double count = 0.0;
  double sum = 0.0;
  for (const auto* f : fields) {
    for (double v : f->values()) sum += v;
    count += static_cast<double>(f->size());
  }
  if (count == 0.0) throw std::invalid_argument("normalization: no values");
  const double mean = sum / count;
  double sq = 0.0;
  for (const auto* f : fields) {
    for (double v : f->values()) sq += (v - mean) * (v - mean);
  }
  return {mean, std::max(std::sqrt(sq / count), kNormFloor)};
}

NormStats compute_normalization(std::span<const NodeFields> train) {
  if (train.empty()) throw std::invalid_argument("normalization: at least one training pair is required");
  NormStats stats;
  const std::size_t channels = train[0].channels.size();
  std::vector<const GridField*> ptrs;
  for (std::size_t c = 0; c < channels; ++c) {
    ptrs.clear();
    for (const auto& f : train) ptrs.push_back(&f.channels.at(c));
    stats.channels.push_back(channel_stats(ptrs));
  }
  ptrs.clear();
  for (const auto& f : train) {
    if (!f.target) throw std::invalid_argument("normalization: training pair without a target");
    ptrs.push_back(&*f.target);
  }
  stats.target = channel_stats(ptrs);
  return stats;
}

NodeFields normalize_fields(const NodeFields& raw, const NormStats& stats, bool include_target) {
  if (raw.channels.size() != stats.channels.size()) {
    throw std::invalid_argument("normalize: channel count differs from the statistics");
  }
  NodeFields out;
  out.edge_value = map_field(raw.edge_value, stats.channels[0]);
  for (std::size_t c = 0; c < raw.channels.size(); ++c) out.channels.push_back(map_field(raw.channels[c], stats.channels[c]));
  if (raw.target) out.target = include_target ? map_field(*raw.target, stats.target) : *raw.target;
  return out;
}

AdamState adam_init(std::span<ad::Tensor* const> params) {
  AdamState st;
  for (const auto* p : params) {
    st.m.emplace_back(p->shape());
    st.v.emplace_back(p->shape());
  }
  return st;
}

void adam_step(std::span<ad::Tensor* const> params, std::span<const ad::Tensor* const> grads, AdamState& state,
               double lr, const AdamHyper& hyper) {
  if (params.size() != grads.size() || params.size() != state.m.size()) {
    throw ad::DimensionError("adam: parameter, gradient and state counts differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(hyper.beta1, t);
  const double c2 = 1.0 - std::pow(hyper.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!grads[i]) continue;
    auto theta = params[i]->values();
    const auto g = grads[i]->values();
    if (g.size() != theta.size()) throw ad::DimensionError("adam: gradient shape differs from parameter");
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    for (std::size_t j = 0; j < theta.size(); ++j) {
      m[j] = hyper.beta1 * m[j] + (1.0 - hyper.beta1) * g[j];
      v[j] = hyper.beta2 * v[j] + (1.0 - hyper.beta2) * g[j] * g[j];
      const double mhat = m[j] / c1;
      const double vhat = v[j] / c2;
      theta[j] -= lr * mhat / (std::sqrt(vhat) + hyper.eps);
    }
  }
}

DivergenceError::DivergenceError(std::size_t epoch)
    : std::runtime_error("training diverged (non-finite loss) in epoch " + std::to_string(epoch)), epoch_(epoch) {}

std::vector<double> train_on_graphs(GknParams& params, std::span<const SpatialGraph> graphs,
                                    const TrainOptions& options, const EpochCallback& on_epoch) {
  if (options.epochs < 1) throw std::invalid_argument("train: epochs must be at least 1");
  if (!(options.lr >= 0.0)) throw std::invalid_argument("train: learning rate must be nonnegative");
  if (graphs.empty()) throw std::invalid_argument("train: no training graphs");
  const auto tensors = params.tensors();
  std::vector<bool> mask = options.trainable;
  if (mask.empty()) mask.assign(tensors.size(), true);
  if (mask.size() != tensors.size()) throw std::invalid_argument("train: trainable mask has the wrong length");

  std::vector<ad::Tensor> targets;
  targets.reserve(graphs.size());
  for (const auto& g : graphs) {
    if (!g.node_targets) throw std::invalid_argument("train: graph without targets");
    targets.emplace_back(ad::Shape{g.num_nodes(), 1}, *g.node_targets);
  }

  AdamState state = adam_init(tensors);
  Rng rng = child_stream(options.seed, kShuffleStream);
  std::vector<std::size_t> order(graphs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const ad::Tensor*> grads(tensors.size());
  std::vector<double> history;
  history.reserve(options.epochs);

  for (std::size_t epoch = 0; epoch < options.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t gi : order) {
      ad::Tape tape;
      const ParamVars vars = register_params(tape, params, &mask);
      const ad::Var pred = gkn_forward(tape, vars, params, graphs[gi]);
      const ad::Var loss = tape.mse_loss(pred, tape.constant(targets[gi]));
      const double value = tape.value(loss).item();
      if (!std::isfinite(value)) throw DivergenceError(epoch);
      const ad::Gradients g = tape.backward(loss);
      for (std::size_t i = 0; i < tensors.size(); ++i) {
        grads[i] = mask[i] && g.has(vars.all[i]) ? &g[vars.all[i]] : nullptr;
      }
      adam_step(tensors, grads, state, options.lr, options.adam);
      total += value;
    }
    history.push_back(total / static_cast<double>(graphs.size()));
    if (on_epoch) on_epoch(epoch, history.back());
  }
  return history;
}

double relative_l2(std::span<const double> pred, std::span<const double> truth) {
  if (pred.size() != truth.size()) throw ad::DimensionError("relative_l2: length mismatch");
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    num += (pred[i] - truth[i]) * (pred[i] - truth[i]);
    den += truth[i] * truth[i];
  }
  return std::sqrt(num) / std::sqrt(den);
}

std::optional<double> pair_relative_l2(const GknParams& params, std::span<const SpatialGraph> graphs,
                                       const NormStats& stats) {
  std::size_t extent = 0;
  for (const auto& g : graphs) {
    if (!g.node_targets) throw std::invalid_argument("evaluate: graph without targets");
    for (std::size_t idx : g.node_index) extent = std::max(extent, idx + 1);
  }
  std::vector<double> sum(extent, 0.0);
  std::vector<double> count(extent, 0.0);
  std::vector<double> truth(extent, 0.0);
  for (const auto& g : graphs) {
    const auto pred = gkn_predict(params, g);
    for (std::size_t k = 0; k < g.num_nodes(); ++k) {
      const std::size_t idx = g.node_index[k];
      sum[idx] += stats.target.denormalize(pred[k]);
      count[idx] += 1.0;
      truth[idx] = (*g.node_targets)[k];
    }
  }
  std::vector<double> p;
  std::vector<double> u;
  for (std::size_t i = 0; i < extent; ++i) {
    if (count[i] == 0.0) continue;
    p.push_back(sum[i] / count[i]);
    u.push_back(truth[i]);
  }
  double norm = 0.0;
  for (double v : u) norm += v * v;
  if (norm == 0.0) return std::nullopt;
  return relative_l2(p, u);
}

double evaluate_relative_l2(const GknParams& params, std::span<const std::vector<SpatialGraph>> pairs,
                            const NormStats& stats) {
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    const auto err = pair_relative_l2(params, pairs[i], stats);
    if (!err) {
      std::cerr << "warning: test pair " << i << " has a zero-norm target and is skipped\n";
      continue;
    }
    total += *err;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("evaluate: no test pair with a nonzero target");
  return total / static_cast<double>(used);
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("train config: epochs must be at least 1");
  if (!(lr > 0.0)) throw std::invalid_argument("train config: learning rate must be positive");
  if (n_train < 1) throw std::invalid_argument("train config: at least one training pair is required");
  if (model.dim != 2) throw std::invalid_argument("train config: Darcy models are 2-d");
  plan.validate();
  model.validate();
}

std::vector<SpatialGraph> training_graphs(std::span<const NodeFields> normalized, const SamplingPlan& plan,
                                          std::uint64_t seed) {
  std::vector<SpatialGraph> graphs;
  for (std::size_t i = 0; i < normalized.size(); ++i) {
    const auto& f = normalized[i];
    if (plan.m >= f.num_nodes()) {
      graphs.push_back(full_grid_graph(f, plan.r));
      continue;
    }
    Rng rng = child_stream(seed, i);
    for (auto& g : nystrom_subsample(f, plan.m, plan.l, plan.r, rng)) graphs.push_back(std::move(g));
  }
  return graphs;
}

std::vector<SpatialGraph> evaluation_graphs(const NodeFields& normalized, const SamplingPlan& plan,
                                            std::uint64_t seed) {
  if (normalized.resolution() <= kFullGridEvalLimit || plan.m_test >= normalized.num_nodes()) {
    std::vector<SpatialGraph> out;
    out.push_back(full_grid_graph(normalized, plan.r_test));
    return out;
  }
  std::vector<SpatialGraph> out;
  for (std::size_t rep = 0; rep < plan.l_test; ++rep) {
    for (auto& g : partition_for_evaluation(normalized, plan.m_test, plan.r_test, derive(seed, rep))) {
      out.push_back(std::move(g));
    }
  }
  return out;
}

TrainedModel train(const TrainConfig& config, const Dataset& data, const EpochCallback& on_epoch) {
  config.validate();
  if (config.n_train > data.size()) {
    throw std::invalid_argument("train: dataset has " + std::to_string(data.size()) + " pairs, " +
                                std::to_string(config.n_train) + " requested");
  }
  const auto idx = index_range(0, config.n_train);
  const auto raw = prepare_fields(data, idx, config.train_res);
  TrainedModel model;
  model.stats = compute_normalization(raw);
  std::vector<NodeFields> normalized;
  normalized.reserve(raw.size());
  for (const auto& f : raw) normalized.push_back(normalize_fields(f, model.stats, true));
  const auto graphs = training_graphs(normalized, config.plan, derive(config.seed, kSampleStream));
  double edges = 0.0;
  for (const auto& g : graphs) edges += static_cast<double>(g.num_edges());
  model.mean_edges = edges / static_cast<double>(graphs.size());

  model.params = init_params(config.model, derive(config.seed, kInitStream));
  TrainOptions opts;
  opts.epochs = config.epochs;
  opts.lr = config.lr;
  opts.adam = config.adam;
  opts.seed = config.seed;
  model.loss_history = train_on_graphs(model.params, graphs, opts, on_epoch);
  return model;
}

double evaluate_model(const TrainedModel& model, const Dataset& data, const TrainConfig& config, std::size_t s) {
  if (config.n_train + config.n_test > data.size()) {
    throw std::invalid_argument("evaluate: dataset has " + std::to_string(data.size()) + " pairs, " +
                                std::to_string(config.n_train + config.n_test) + " required");
  }
  if (config.n_test < 1) throw std::invalid_argument("evaluate: no test pairs");
  double total = 0.0;
  std::size_t used = 0;
  for (std::size_t i = 0; i < config.n_test; ++i) {
    const std::size_t idx = config.n_train + i;
    const auto raw = prepare_fields(data, std::span<const std::size_t>(&idx, 1), s);
    const NodeFields f = normalize_fields(raw[0], model.stats, false);
    const auto graphs = evaluation_graphs(f, config.plan, derive(config.seed ^ idx, kEvalStream));
    const auto err = pair_relative_l2(model.params, graphs, model.stats);
    if (!err) {
      std::cerr << "warning: test pair " << idx << " has a zero-norm target and is skipped\n";
      continue;
    }
    total += *err;
    ++used;
  }
  if (used == 0) throw std::invalid_argument("evaluate: no test pair with a nonzero target");
  return total / static_cast<double>(used);
}

double TransferReport::max_min_ratio() const {
  if (errors.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto [lo, hi] = std::minmax_element(errors.begin(), errors.end());
  return *hi / *lo;
}

TransferReport resolution_transfer_experiment(const TrainConfig& config, const Dataset& data,
                                              std::span<const std::size_t> test_res,
                                              const EpochCallback& on_epoch) {
  TransferReport report;
  report.train_res = config.train_res;
  const TrainedModel model = train(config, data, on_epoch);
  report.loss_history = model.loss_history;
  for (std::size_t s : test_res) {
    report.test_res.push_back(s);
    report.errors.push_back(evaluate_model(model, data, config, s));
  }
  return report;
}

SweepAxis parse_sweep_axis(const std::string& name) {
  if (name == "N") return SweepAxis::TrainPairs;
  if (name == "l") return SweepAxis::Subgraphs;
  if (name == "m") return SweepAxis::Nodes;
  if (name == "r-m") return SweepAxis::RadiusNodes;
  if (name == "kappa") return SweepAxis::KappaShape;
  throw std::invalid_argument("unknown sweep axis '" + name + "' (expected N, l, m, r-m or kappa)");
}

std::string sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::TrainPairs: return "N";
    case SweepAxis::Subgraphs: return "l";
    case SweepAxis::Nodes: return "m";
    case SweepAxis::RadiusNodes: return "r-m";
    case SweepAxis::KappaShape: return "kappa";
  }
  return "?";
}

std::vector<SweepCell> sweep_cells(SweepAxis axis, std::span<const std::string> values, const TrainConfig& base) {
  std::vector<SweepCell> cells;
  for (const auto& text : values) {
    SweepCell cell{text, base};
    auto& c = cell.config;
    switch (axis) {
      case SweepAxis::TrainPairs: {
        const auto parts = split(text, ':');
        if (parts.empty() || parts.size() > 2) throw std::invalid_argument("sweep: expected N or N:epochs, got " + text);
        c.n_train = parse_size(parts[0]);
        if (parts.size() == 2) c.epochs = parse_size(parts[1]);
        break;
      }
      case SweepAxis::Subgraphs:
        c.plan.l = parse_size(text);
        break;
      case SweepAxis::Nodes:
        c.plan.m = c.plan.m_test = parse_size(text);
        break;
      case SweepAxis::RadiusNodes: {
        const auto parts = split(text, ':');
        if (parts.size() != 2) throw std::invalid_argument("sweep: expected r:m, got " + text);
        c.plan.r = c.plan.r_test = std::stod(parts[0]);
        c.plan.m = c.plan.m_test = parse_size(parts[1]);
        break;
      }
      case SweepAxis::KappaShape: {
        c.model.kappa_hidden.clear();
        for (const auto& w : split(text, '-')) c.model.kappa_hidden.push_back(parse_size(w));
        break;
      }
    }
    cells.push_back(std::move(cell));
  }
  return cells;
}

std::vector<SweepRow> sweep_experiment(std::span<const SweepCell> cells, const Dataset& data,
                                       const EpochCallback& on_epoch) {
  std::vector<SweepRow> rows;
  for (const auto& cell : cells) {
    const auto& c = cell.config;
    SweepRow row;
    row.label = cell.label;
    row.n_train = c.n_train;
    row.m = c.plan.m;
    row.l = c.plan.l;
    row.r = c.plan.r;
    row.epochs = c.epochs;
    try {
      const TrainedModel model = train(c, data, on_epoch);
      row.mean_edges = model.mean_edges;
      row.train_loss = model.loss_history.back();
      row.test_error = evaluate_model(model, data, c, c.test_res);
    } catch (const std::exception& e) {
      row.failure = e.what();
      row.test_error = std::numeric_limits<double>::quiet_NaN();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

ModelConfig green1d_model(const Green1dConfig& config) {
  ModelConfig m;
  m.dim = 1;
  m.width = 1;
  m.depth = 1;
  m.kappa_hidden = config.kappa_hidden;
  m.activation = Activation::Identity;
  m.local_term = false;
  return m;
}

GknParams green1d_init(const Green1dConfig& config) {
  GknParams p = init_params(green1d_model(config), derive(config.seed, kInitStream));
  // v0 = f, u = v1
  p.lift_weight = ad::Tensor::matrix(1, 4, {0.0, 1.0, 0.0, 0.0});
  p.lift_bias = ad::Tensor({1});
  p.local_weight = ad::Tensor({1, 1});
  p.proj_weight = ad::Tensor::matrix(1, 1, {1.0});
  p.proj_bias = ad::Tensor({1});
  return p;
}

SpatialGraph green1d_graph(const GridField& forcing, const GridField* solution) {
  const std::size_t s = forcing.resolution();
  NodeFields f;
  f.edge_value = GridField(s, 1, std::vector<double>(s, 1.0));
  f.channels = {forcing, GridField(s, 1), GridField(s, 1)};
  if (solution) f.target = *solution;
  // Complete digraph plus a self-edge per node, so the mean runs over all s
  // quadrature nodes including y = x.
  SpatialGraph g = full_grid_graph(f, 2.0);
  const std::size_t e = g.num_edges();
  ad::Tensor features({e + s, 4});
  std::copy(g.edge_features.values().begin(), g.edge_features.values().end(), features.data());
  for (std::size_t i = 0; i < s; ++i) {
    g.sources.push_back(i);
    g.targets.push_back(i);
    double* row = features.data() + (e + i) * 4;
    row[0] = row[1] = g.node_coords[i];
    row[2] = row[3] = 1.0;
  }
  g.edge_features = std::move(features);
  return g;
}

Green1dReport green1d_experiment(const Green1dConfig& config, const EpochCallback& on_epoch) {
  if (config.resolution < 3 || config.samples < 1 || config.eval_points < 2) {
    throw std::invalid_argument("green1d: resolution >= 3, samples >= 1 and eval_points >= 2 are required");
  }
  const GrfSpec spec = poisson_forcing_spec(config.seed);
  std::vector<SpatialGraph> graphs;
  graphs.reserve(config.samples);
  for (std::size_t i = 0; i < config.samples; ++i) {
    Rng rng = child_stream(config.seed, i);
    const GridField f = sample_forcing_1d(spec, config.resolution, rng);
    const GridField u = solve_poisson_1d_green(f);
    graphs.push_back(green1d_graph(f, &u));
  }

  GknParams params = green1d_init(config);
  TrainOptions opts;
  opts.epochs = config.epochs;
  opts.lr = config.lr;
  opts.seed = config.seed;
  opts.trainable.assign(params.tensors().size(), true);
  std::fill_n(opts.trainable.begin(), 5, false);

  Green1dReport report;
  report.loss_history = train_on_graphs(params, graphs, opts, on_epoch);

  const std::size_t p = config.eval_points;
  for (std::size_t i = 0; i < p; ++i) report.eval_grid.push_back(static_cast<double>(i) / static_cast<double>(p - 1));
  ad::Tensor features({p * p, 4});
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      double* row = features.data() + (i * p + j) * 4;
      row[0] = report.eval_grid[i];
      row[1] = report.eval_grid[j];
      row[2] = 1.0;
      row[3] = 1.0;
      report.analytic.push_back(green_1d(report.eval_grid[i], report.eval_grid[j]));
    }
  }
  const ad::Tensor k = kappa_forward(params, features);
  report.learned.assign(k.values().begin(), k.values().end());
  report.kernel_error = relative_l2(report.learned, report.analytic);
  return report;
}

}  // namespace gkn
