// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0
//
// Command-line front end: data generation, training, evaluation, experiment
// tables, baselines and the Monte Carlo rate study.

#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "gkn/baselines.hpp"
#include "gkn/dataset.hpp"
#include "gkn/io.hpp"
#include "gkn/nystrom.hpp"
#include "gkn/pde.hpp"
#include "gkn/training.hpp"

namespace {

using namespace gkn;

template <typename T>
std::vector<T> parse_list(const std::string& text) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    std::istringstream is(item);
    T v{};
    is >> v;
    if (!is || !is.eof()) throw std::invalid_argument("cannot parse list entry '" + item + "'");
    out.push_back(v);
  }
  return out;
}

std::vector<std::string> parse_words(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

void print_real(double v) { std::printf("%s\n", format_real(v).c_str()); }

// Flags shared by train, transfer and sweep.
struct TrainFlags {
  std::string data;
  std::size_t train_res = 16;
  double r = 0.10;
  std::size_t n = 32;
  std::size_t depth = 6;
  std::string kappa = "128,256";
  std::size_t epochs = 200;
  double lr = 1e-4;
  std::uint64_t seed = 0;
  std::size_t n_train = 100;
  std::size_t n_test = 40;
  std::size_t m = 0;
  std::size_t l = 1;
  std::size_t m_test = 0;
  std::size_t l_test = 1;
  bool quiet = false;

  void add(CLI::App* cmd) {
    cmd->add_option("--data", data, "Dataset file (GKND)")->required();
    cmd->add_option("--train-res", train_res, "Training resolution s")->capture_default_str();
    cmd->add_option("--r", r, "Ball radius for training and test graphs")->capture_default_str();
    cmd->add_option("--n", n, "Node state width")->capture_default_str();
    cmd->add_option("--T", depth, "Message-passing iterations")->capture_default_str();
    cmd->add_option("--kappa", kappa, "Hidden widths of the kernel network, comma separated")->capture_default_str();
    cmd->add_option("--epochs", epochs)->capture_default_str();
    cmd->add_option("--lr", lr, "Adam learning rate")->capture_default_str();
    cmd->add_option("--seed", seed)->required();
    cmd->add_option("--n-train", n_train, "Training pairs (leading pairs of the dataset)")->capture_default_str();
    cmd->add_option("--n-test", n_test, "Test pairs (following the training pairs)")->capture_default_str();
    cmd->add_option("--m", m, "Nodes per training subgraph; 0 uses the full grid")->capture_default_str();
    cmd->add_option("--l", l, "Subgraphs per training pair")->capture_default_str();
    cmd->add_option("--m-test", m_test, "Nodes per test block above s' = 61; 0 uses the full grid")->capture_default_str();
    cmd->add_option("--l-test", l_test, "Test partitions averaged per pair")->capture_default_str();
    cmd->add_flag("--quiet", quiet, "No per-epoch progress on stderr");
  }

  TrainConfig config() const {
    TrainConfig c;
    c.n_train = n_train;
    c.n_test = n_test;
    c.train_res = train_res;
    c.test_res = train_res;
    c.plan.m = m == 0 ? train_res * train_res : m;
    c.plan.l = l;
    c.plan.m_test = m_test == 0 ? std::size_t{1} << 30 : m_test;
    c.plan.l_test = l_test;
    c.plan.r = r;
    c.plan.r_test = r;
    c.plan.seed = seed;
    c.epochs = epochs;
    c.lr = lr;
    c.seed = seed;
    c.model.width = n;
    c.model.depth = depth;
    c.model.kappa_hidden = parse_list<std::size_t>(kappa);
    return c;
  }

  EpochCallback progress() const {
    if (quiet) return {};
    return [](std::size_t epoch, double loss) {
      std::fprintf(stderr, "epoch %zu loss %s\n", epoch + 1, format_real(loss).c_str());
    };
  }
};

Table loss_table(const std::vector<double>& history) {
  Table t{{"epoch", "mean_loss"}, {}};
  for (std::size_t i = 0; i < history.size(); ++i) t.rows.push_back({std::to_string(i + 1), format_real(history[i])});
  return t;
}

int cmd_generate(std::size_t resolution, std::size_t samples, std::uint64_t seed, double tol, const std::string& out) {
  const Dataset data = generate_darcy_dataset(resolution, samples, seed, tol, [samples](std::size_t i) {
    if ((i + 1) % 20 == 0 || i + 1 == samples) std::fprintf(stderr, "generated %zu / %zu\n", i + 1, samples);
  });
  save_dataset(out, data);
  return 0;
}

int cmd_train(const TrainFlags& f, const std::string& out, const std::string& loss_out) {
  const Dataset data = load_dataset(f.data);
  const TrainConfig c = f.config();
  ModelRecord rec;
  rec.model = train(c, data, f.progress());
  rec.train_res = c.train_res;
  rec.n_train = c.n_train;
  rec.plan = c.plan;
  rec.epochs = c.epochs;
  rec.lr = c.lr;
  rec.seed = c.seed;
  save_model(out, rec);
  if (!loss_out.empty()) save_csv(loss_out, loss_table(rec.model.loss_history));
  print_real(rec.model.loss_history.back());
  return 0;
}

int cmd_evaluate(const std::string& model_path, const std::string& data_path, std::size_t test_res, long first,
                 long count, const std::string& out) {
  const ModelRecord rec = load_model(model_path);
  const Dataset data = load_dataset(data_path);
  TrainConfig c;
  c.n_train = first < 0 ? rec.n_train : static_cast<std::size_t>(first);
  if (c.n_train > data.size()) throw std::invalid_argument("evaluate: --first lies beyond the dataset");
  c.n_test = count < 0 ? data.size() - c.n_train : static_cast<std::size_t>(count);
  c.plan = rec.plan;
  c.seed = rec.seed;
  const double err = evaluate_model(rec.model, data, c, test_res);
  if (!out.empty()) {
    save_csv(out, {{"test_res", "first", "count", "relative_l2"},
                   {{std::to_string(test_res), std::to_string(c.n_train), std::to_string(c.n_test), format_real(err)}}});
  }
  print_real(err);
  return 0;
}

int cmd_transfer(const TrainFlags& f, const std::string& test_res, const std::string& out) {
  const Dataset data = load_dataset(f.data);
  const auto res = parse_list<std::size_t>(test_res);
  const TransferReport rep = resolution_transfer_experiment(f.config(), data, res, f.progress());
  Table t{{"train_res", "test_res", "relative_l2"}, {}};
  for (std::size_t i = 0; i < rep.errors.size(); ++i) {
    t.rows.push_back({std::to_string(rep.train_res), std::to_string(rep.test_res[i]), format_real(rep.errors[i])});
    std::printf("s'=%zu %s\n", rep.test_res[i], format_real(rep.errors[i]).c_str());
  }
  save_csv(out, t);
  std::printf("max/min %s\n", format_real(rep.max_min_ratio()).c_str());
  return 0;
}

int cmd_sweep(const TrainFlags& f, const std::string& axis_name, const std::string& values, std::size_t test_res,
              const std::string& out) {
  const Dataset data = load_dataset(f.data);
  TrainConfig base = f.config();
  base.test_res = test_res == 0 ? base.train_res : test_res;
  const SweepAxis axis = parse_sweep_axis(axis_name);
  const auto words = parse_words(values);
  const auto cells = sweep_cells(axis, words, base);
  const auto rows = sweep_experiment(cells, data, f.progress());
  Table t{{"axis", "value", "n_train", "m", "l", "r", "epochs", "mean_edges", "train_loss", "test_error", "failure"}, {}};
  bool failed = false;
  for (const auto& r : rows) {
    t.rows.push_back({sweep_axis_name(axis), r.label, std::to_string(r.n_train), std::to_string(r.m),
                      std::to_string(r.l), format_real(r.r), std::to_string(r.epochs), format_real(r.mean_edges),
                      format_real(r.train_loss), format_real(r.test_error), r.failure.empty() ? "" : "\"" + r.failure + "\""});
    if (!r.failure.empty()) {
      std::fprintf(stderr, "cell %s failed: %s\n", r.label.c_str(), r.failure.c_str());
      failed = true;
    }
    std::printf("%s %s\n", r.label.c_str(), format_real(r.test_error).c_str());
  }
  save_csv(out, t);
  return failed ? 1 : 0;
}

int cmd_green1d(const Green1dConfig& cfg, const std::string& out, bool quiet) {
  EpochCallback cb;
  if (!quiet) cb = [](std::size_t e, double l) { std::fprintf(stderr, "epoch %zu loss %s\n", e + 1, format_real(l).c_str()); };
  const Green1dReport rep = green1d_experiment(cfg, cb);
  Table t{{"x", "y", "learned", "analytic"}, {}};
  const std::size_t p = rep.eval_grid.size();
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      t.rows.push_back({format_real(rep.eval_grid[i]), format_real(rep.eval_grid[j]), format_real(rep.learned[i * p + j]),
                        format_real(rep.analytic[i * p + j])});
    }
  }
  save_csv(out, t);
  print_real(rep.kernel_error);
  return 0;
}

int cmd_disk(std::size_t pairs, std::uint64_t seed, const std::string& out) {
  const DiskGreenCheck c = disk_green_identities(pairs, seed);
  if (!out.empty()) {
    save_csv(out, {{"identity", "pairs", "max_deviation"},
                   {{"boundary_zero", std::to_string(c.pairs), format_real(c.max_boundary)},
                    {"symmetry", std::to_string(c.pairs), format_real(c.max_symmetry)}}});
  }
  std::printf("boundary %s\nsymmetry %s\n", format_real(c.max_boundary).c_str(), format_real(c.max_symmetry).c_str());
  return 0;
}

int cmd_rate(const std::string& m_list, std::size_t trials, double sigma, std::uint64_t seed, std::size_t quad,
             const std::string& out) {
  const auto ms = parse_list<std::size_t>(m_list);
  const RateReport rep = mc_rate_experiment(ms, trials, sigma, seed, quad);
  Table t{{"m", "mean_hs_distance", "trials", "sigma"}, {}};
  for (std::size_t i = 0; i < rep.m_values.size(); ++i) {
    t.rows.push_back({std::to_string(rep.m_values[i]), format_real(rep.mean_distance[i]), std::to_string(rep.trials),
                      format_real(rep.sigma)});
  }
  save_csv(out, t);
  std::printf("slope %s intercept %s\n", format_real(rep.slope).c_str(), format_real(rep.intercept).c_str());
  return 0;
}

int cmd_baseline(const std::string& method, const std::string& data_path, BaselineConfig cfg, const std::string& hidden,
                 const std::string& out) {
  const Dataset data = load_dataset(data_path);
  cfg.hidden = parse_list<std::size_t>(hidden);
  BaselineReport rep;
  if (method == "nn") {
    rep = run_pointwise_nn(data, cfg);
  } else if (method == "pca-nn") {
    rep = run_pca_nn(data, cfg);
  } else if (method == "rbm") {
    rep = run_rbm(data, cfg);
  } else {
    throw std::invalid_argument("unknown baseline method '" + method + "' (expected nn, pca-nn or rbm)");
  }
  save_csv(out, {{"method", "train_res", "test_res", "relative_l2"},
                 {{method, std::to_string(cfg.train_res), std::to_string(cfg.test_res), format_real(rep.test_error)}}});
  print_real(rep.test_error);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Graph kernel network workbench for elliptic PDE solution operators", "gkn"};
  app.require_subcommand(1);
  app.allow_windows_style_options(false);

  // generate
  std::size_t gen_res = 241;
  std::size_t gen_samples = 140;
  std::uint64_t gen_seed = 0;
  double gen_tol = 1e-10;
  std::string gen_out;
  auto* gen = app.add_subcommand("generate", "Sample Darcy coefficient/solution pairs");
  gen->add_option("--resolution", gen_res)->capture_default_str();
  gen->add_option("--samples", gen_samples)->capture_default_str();
  gen->add_option("--seed", gen_seed)->required();
  gen->add_option("--tol", gen_tol, "Relative residual target of the linear solver")->capture_default_str();
  gen->add_option("--out", gen_out)->required();

  // train
  TrainFlags train_flags;
  std::string train_out;
  std::string train_loss;
  auto* tr = app.add_subcommand("train", "Train a graph kernel network");
  train_flags.add(tr);
  tr->add_option("--out", train_out, "Model file (GKNM)")->required();
  tr->add_option("--loss-out", train_loss, "Per-epoch loss table");

  // evaluate
  std::string ev_model;
  std::string ev_data;
  std::size_t ev_res = 16;
  long ev_first = -1;
  long ev_count = -1;
  std::string ev_out;
  auto* ev = app.add_subcommand("evaluate", "Mean relative L2 error of a saved model");
  ev->add_option("--model", ev_model)->required();
  ev->add_option("--data", ev_data)->required();
  ev->add_option("--test-res", ev_res)->capture_default_str();
  ev->add_option("--first", ev_first, "First test pair (default: right after the training pairs)");
  ev->add_option("--count", ev_count, "Number of test pairs (default: the rest of the dataset)");
  ev->add_option("--out", ev_out, "Optional one-row table");

  // transfer
  TrainFlags tf_flags;
  std::string tf_res = "16,31,61";
  std::string tf_out;
  auto* tf = app.add_subcommand("transfer", "Train once, evaluate at several resolutions");
  tf_flags.add(tf);
  tf->add_option("--test-res", tf_res, "Comma-separated test resolutions")->capture_default_str();
  tf->add_option("--out", tf_out)->required();

  // sweep
  TrainFlags sw_flags;
  std::string sw_axis;
  std::string sw_values;
  std::size_t sw_test_res = 0;
  std::string sw_out;
  auto* sw = app.add_subcommand("sweep", "Train and evaluate over one parameter axis");
  sw_flags.add(sw);
  sw->add_option("--axis", sw_axis, "N | l | m | r-m | kappa")->required();
  sw->add_option("--values", sw_values, "Comma-separated cell values (N[:epochs], l, m, r:m, w1-w2)")->required();
  sw->add_option("--test-res", sw_test_res, "Test resolution; 0 uses the training resolution")->capture_default_str();
  sw->add_option("--out", sw_out)->required();

  // green1d
  Green1dConfig g1;
  std::string g1_kappa = "64,64";
  std::string g1_out;
  bool g1_quiet = false;
  auto* gr = app.add_subcommand("green1d", "Recover the 1-d Poisson Green's function as a learned kernel");
  gr->add_option("--resolution", g1.resolution)->capture_default_str();
  gr->add_option("--samples", g1.samples)->capture_default_str();
  gr->add_option("--epochs", g1.epochs)->capture_default_str();
  gr->add_option("--lr", g1.lr)->capture_default_str();
  gr->add_option("--kappa", g1_kappa, "Hidden widths of the kernel network")->capture_default_str();
  gr->add_option("--eval-points", g1.eval_points)->capture_default_str();
  gr->add_option("--seed", g1.seed)->required();
  gr->add_option("--out", g1_out, "Learned and analytic kernel table")->required();
  gr->add_flag("--quiet", g1_quiet);

  // green-disk-check
  std::size_t disk_pairs = 10000;
  std::uint64_t disk_seed = 0;
  std::string disk_out;
  auto* dk = app.add_subcommand("green-disk-check", "Check identities of the unit-disk Green's function");
  dk->add_option("--pairs", disk_pairs)->capture_default_str();
  dk->add_option("--seed", disk_seed)->required();
  dk->add_option("--out", disk_out, "Optional table of maximum deviations");

  // nystrom-rate
  std::string nr_m = "10,20,40,80,160,320";
  std::size_t nr_trials = 100;
  double nr_sigma = 0.2;
  std::uint64_t nr_seed = 0;
  std::size_t nr_quad = kDefaultQuadrature;
  std::string nr_out = "nystrom_rate.csv";
  auto* nr = app.add_subcommand("nystrom-rate", "Monte Carlo rate of the empirical kernel operator");
  nr->add_option("--m", nr_m, "Comma-separated sample sizes")->capture_default_str();
  nr->add_option("--trials", nr_trials)->capture_default_str();
  nr->add_option("--sigma", nr_sigma, "Gaussian kernel bandwidth")->capture_default_str();
  nr->add_option("--seed", nr_seed)->required();
  nr->add_option("--quadrature", nr_quad, "Simpson points (odd)")->capture_default_str();
  nr->add_option("--out", nr_out)->capture_default_str();

  // baseline
  std::string bl_method;
  std::string bl_data;
  BaselineConfig bl;
  std::string bl_hidden = "64,64";
  std::string bl_out;
  auto* bs = app.add_subcommand("baseline", "Pointwise NN, PCA+NN or reduced basis baseline");
  bs->add_option("--method", bl_method, "nn | pca-nn | rbm")->required();
  bs->add_option("--data", bl_data)->required();
  bs->add_option("--train-res", bl.train_res)->capture_default_str();
  bs->add_option("--test-res", bl.test_res)->capture_default_str();
  bs->add_option("--n-train", bl.n_train)->capture_default_str();
  bs->add_option("--n-test", bl.n_test)->capture_default_str();
  bs->add_option("--hidden", bl_hidden, "Hidden widths of the MLP")->capture_default_str();
  bs->add_option("--epochs", bl.epochs)->capture_default_str();
  bs->add_option("--lr", bl.lr)->capture_default_str();
  bs->add_option("--rank-in", bl.rank_in)->capture_default_str();
  bs->add_option("--rank-out", bl.rank_out, "Output rank (reduced basis size for rbm)")->capture_default_str();
  bs->add_option("--seed", bl.seed)->required();
  bs->add_option("--out", bl_out)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) return cmd_generate(gen_res, gen_samples, gen_seed, gen_tol, gen_out);
    if (tr->parsed()) return cmd_train(train_flags, train_out, train_loss);
    if (ev->parsed()) return cmd_evaluate(ev_model, ev_data, ev_res, ev_first, ev_count, ev_out);
    if (tf->parsed()) return cmd_transfer(tf_flags, tf_res, tf_out);
    if (sw->parsed()) return cmd_sweep(sw_flags, sw_axis, sw_values, sw_test_res, sw_out);
    if (gr->parsed()) {
      g1.kappa_hidden = parse_list<std::size_t>(g1_kappa);
      return cmd_green1d(g1, g1_out, g1_quiet);
    }
    if (dk->parsed()) return cmd_disk(disk_pairs, disk_seed, disk_out);
    if (nr->parsed()) return cmd_rate(nr_m, nr_trials, nr_sigma, nr_seed, nr_quad, nr_out);
    if (bs->parsed()) return cmd_baseline(bl_method, bl_data, bl, bl_hidden, bl_out);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "gkn: error: %s\n", e.what());
    return 1;
  }
  return 1;
}
