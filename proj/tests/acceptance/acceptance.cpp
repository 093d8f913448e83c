// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0
//
// Acceptance runner. Prints one PASS/FAIL line per criterion and exits
// non-zero when any criterion fails. Arguments select criteria by number.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gkn/baselines.hpp"
#include "gkn/dataset.hpp"
#include "gkn/gkn_model.hpp"
#include "gkn/graph.hpp"
#include "gkn/io.hpp"
#include "gkn/nystrom.hpp"
#include "gkn/pde.hpp"
#include "gkn/training.hpp"

#ifndef GKN_CLI_PATH
#error "GKN_CLI_PATH must name the gkn executable"
#endif

namespace {

using namespace gkn;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string fmt(double v, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << v;
  return s.str();
}

std::string join(const std::vector<double>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "/" : "") + fmt(v[i]);
  return out;
}

void progress(const std::string& msg) { std::cerr << "  .. " << msg << std::endl; }

// 140 Darcy pairs at s = 241: pairs 0..99 train, 100..139 test.
constexpr std::size_t kDataRes = 241;
constexpr std::size_t kDataPairs = 140;
constexpr std::uint64_t kDataSeed = 7;

const Dataset& darcy_data() {
  static std::optional<Dataset> data;
  if (!data) {
    progress("generating " + std::to_string(kDataPairs) + " Darcy pairs at s = " + std::to_string(kDataRes));
    data = generate_darcy_dataset(kDataRes, kDataPairs, kDataSeed);
  }
  return *data;
}

Outcome resolution_invariance() {
  const auto start = Clock::now();
  const Dataset& data = darcy_data();
  TrainConfig c;  // desk preset: n = 32, N = 100, r = 0.10, s = 16, 200 epochs
  c.seed = 1;
  const std::vector<std::size_t> res{16, 31, 61};
  const TransferReport r = resolution_transfer_experiment(c, data, res, [](std::size_t e, double loss) {
    if (e % 20 == 0) progress("epoch " + std::to_string(e) + " loss " + fmt(loss));
  });
  const double minutes = seconds_since(start) / 60.0;
  bool in_band = true;
  for (double e : r.errors) in_band = in_band && e >= 0.03 && e <= 0.15;
  const double ratio = r.max_min_ratio();
  return {in_band && ratio <= 1.6 && minutes <= 30.0,
          "errors s'=16/31/61: " + join(r.errors) + " (band [0.03, 0.15]), max/min " + fmt(ratio) +
              " (<= 1.6), runtime " + fmt(minutes, 3) + " min (<= 30)"};
}

// Reduced model so that 3 seeds x (10 x 2000 + 100 x 500) Adam steps fit a
// desk budget; both arms share the architecture and the 40 test pairs.
TrainConfig sample_efficiency_config(std::size_t n_train, std::size_t epochs, std::uint64_t seed) {
  TrainConfig c;
  c.n_train = n_train;
  c.n_test = 40;
  c.epochs = epochs;
  c.seed = seed;
  c.lr = 1e-4;
  c.model.width = 16;
  c.model.kappa_hidden = {32, 64};
  c.plan.m = 100;
  c.plan.m_test = 100;
  return c;
}

Outcome sample_efficiency() {
  const Dataset& data = darcy_data();
  bool all = true;
  std::string detail;
  for (std::uint64_t seed : {11u, 12u, 13u}) {
    double err[2];
    for (int arm = 0; arm < 2; ++arm) {
      const std::size_t n = arm ? 100 : 10;
      const TrainConfig c = sample_efficiency_config(n, arm ? 500 : 2000, seed);
      const TrainedModel m = train(c, data);
      TrainConfig test = c;
      test.n_train = 100;  // pairs 100..139 for both arms
      err[arm] = evaluate_model(m, data, test, 16);
      progress("seed " + std::to_string(seed) + " N=" + std::to_string(n) + " error " + fmt(err[arm]));
    }
    all = all && err[1] < err[0];
    detail += (detail.empty() ? "" : ", ") + std::string("seed ") + std::to_string(seed) + ": N=100 " +
              fmt(err[1]) + " vs N=10 " + fmt(err[0]);
  }
  return {all, detail};
}

Outcome green_1d_recovery() {
  Green1dConfig c;  // s = 33, 2048 forcings, 64 x 64 evaluation grid
  c.seed = 3;
  const Green1dReport r = green1d_experiment(c);
  return {r.kernel_error <= 0.15, "kernel relative L2 on 64x64 grid " + fmt(r.kernel_error) + " (<= 0.15)"};
}

Outcome nystrom_rate() {
  const auto start = Clock::now();
  const std::vector<std::size_t> m{10, 20, 40, 80, 160, 320};
  const RateReport r = mc_rate_experiment(m, 100, 0.2, 5);
  const double secs = seconds_since(start);
  bool decreasing = true;
  for (std::size_t i = 1; i < r.mean_distance.size(); ++i)
    decreasing = decreasing && r.mean_distance[i] < r.mean_distance[i - 1];
  return {r.slope >= -0.6 && r.slope <= -0.4 && secs <= 120.0 && decreasing,
          "slope " + fmt(r.slope) + " (in [-0.6, -0.4]), mean distances " + join(r.mean_distance) +
              (decreasing ? " decreasing" : " NOT decreasing") + ", runtime " + fmt(secs, 3) + " s (<= 120)"};
}

double manufactured_error(std::size_t s) {
  const double pi = std::numbers::pi;
  GridField f(s, 2);
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j) f.at(i, j) = 2 * pi * pi * std::sin(pi * f.coord(i)) * std::sin(pi * f.coord(j));
  const GridField u = solve_darcy(GridField(s, 2, std::vector<double>(s * s, 1.0)), f);
  double err = 0.0;
  for (std::size_t i = 0; i < s; ++i)
    for (std::size_t j = 0; j < s; ++j)
      err = std::max(err, std::abs(u.at(i, j) - std::sin(pi * u.coord(i)) * std::sin(pi * u.coord(j))));
  return err;
}

Outcome fd_solver() {
  const std::vector<double> e{manufactured_error(31), manufactured_error(61), manufactured_error(121)};
  const double p1 = std::log2(e[0] / e[1]);
  const double p2 = std::log2(e[1] / e[2]);
  const bool order = p1 >= 1.8 && p1 <= 2.2 && p2 >= 1.8 && p2 <= 2.2;

  const std::size_t s = 9;
  const double h = 1.0 / (s - 1);
  const GridField one(s, 2, std::vector<double>(s * s, 1.0));
  const SparseSystem sys = assemble_darcy(one, one);
  const std::size_t n = s - 2;
  double worst = 0.0;
  for (std::size_t r = 0; r < n; ++r)
    for (std::size_t c = 0; c < n; ++c)
      for (std::size_t r2 = 0; r2 < n; ++r2)
        for (std::size_t c2 = 0; c2 < n; ++c2) {
          const long dr = static_cast<long>(r) - static_cast<long>(r2);
          const long dc = static_cast<long>(c) - static_cast<long>(c2);
          double expect = 0.0;
          if (dr == 0 && dc == 0) expect = 4 / (h * h);
          if (std::abs(dr) + std::abs(dc) == 1) expect = -1 / (h * h);
          worst = std::max(worst, std::abs(sys.entry(r * n + c, r2 * n + c2) - expect) * h * h);
        }
  return {order && worst <= 1e-12, "observed orders " + fmt(p1) + ", " + fmt(p2) + " (in [1.8, 2.2]); " +
                                       "a=1 stencil max deviation " + fmt(worst) + " x h^-2"};
}

Outcome gradient_integrity() {
  ModelConfig c;
  c.width = 4;
  c.depth = 2;
  c.kappa_hidden = {8};
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::size_t k = 12;
    std::vector<double> coords(2 * k);
    std::vector<double> a(k);
    ad::Tensor inputs({k, 6});
    for (auto& v : coords) v = u(rng);
    for (auto& v : a) v = 2 * u(rng) - 1;
    for (std::size_t i = 0; i < k; ++i) {
      inputs.at(i, 0) = coords[2 * i];
      inputs.at(i, 1) = coords[2 * i + 1];
      for (std::size_t ch = 2; ch < 6; ++ch) inputs.at(i, ch) = 2 * u(rng) - 1;
    }
    const SpatialGraph g = build_radius_graph(coords, 2, a, inputs, 0.6);
    std::vector<double> target(k);
    for (auto& v : target) v = 2 * u(rng) - 1;
    const ad::Tensor tgt({k, 1}, target);
    const GknParams p = init_params(c, seed);
    const auto tensors = p.tensors();
    for (std::size_t which = 0; which < tensors.size(); ++which) {
      auto loss = [&](ad::Tape& tape, ad::Var v) {
        ParamVars vars;
        for (std::size_t i = 0; i < tensors.size(); ++i)
          vars.all.push_back(i == which ? v : tape.constant(*tensors[i]));
        return tape.mse_loss(gkn_forward(tape, vars, p, g), tape.constant(tgt));
      };
      worst = std::max(worst, ad::grad_check(loss, *tensors[which]));
    }
  }
  return {worst <= 1e-5, "max relative error over 20 seeds and all parameter groups " + fmt(worst) + " (<= 1e-5)"};
}

Outcome disk_green() {
  const DiskGreenCheck c = disk_green_identities(10000, 17);
  return {c.pairs == 10000 && c.max_boundary <= 1e-12 && c.max_symmetry <= 1e-12,
          std::to_string(c.pairs) + " pairs: boundary " + fmt(c.max_boundary) + ", symmetry " + fmt(c.max_symmetry) +
              " (<= 1e-12)"};
}

Outcome baseline_contracts() {
  // complete-basis RBM against the CG solve
  const std::size_t s = 11;
  Rng rng = child_stream(21, 0);
  const GridField a = threshold_psi(sample_grf(darcy_coefficient_spec(21), s, 2, rng));
  const SparseSystem sys = assemble_darcy(a, GridField(s, 2, std::vector<double>(s * s, 1.0)));
  const std::size_t n = sys.dimension;
  ad::Tensor eye({n, n});
  for (std::size_t i = 0; i < n; ++i) eye.at(i, i) = 1.0;
  const auto rbm = rbm_solve(sys, eye).solution;
  const auto fd = solve_cg(sys, 1e-10).solution;
  const double rbm_gap = relative_l2(rbm, fd);

  // PCA idempotency on Darcy coefficients
  const Dataset data = generate_darcy_dataset(31, 25, 4);
  std::vector<std::vector<double>> rows;
  for (std::size_t i = 0; i < 20; ++i) rows.emplace_back(data.coefficients[i].values().begin(), data.coefficients[i].values().end());
  const PcaBasis basis = compute_pca(rows, 10);
  double idem = 0.0;
  for (std::size_t i = 20; i < 25; ++i) {
    const auto c1 = basis.encode(data.coefficients[i].values());
    const auto c2 = basis.encode(basis.decode(c1));
    for (std::size_t j = 0; j < c1.size(); ++j) idem = std::max(idem, std::abs(c1[j] - c2[j]));
  }

  // pointwise network at coinciding nodes of s = 16 and s = 31
  std::vector<GridField> ta;
  std::vector<GridField> tu;
  for (std::size_t i = 0; i < 20; ++i) {
    ta.push_back(downsample(data.coefficients[i], 16));
    tu.push_back(downsample(data.solutions[i], 16));
  }
  BaselineConfig bc;
  bc.epochs = 20;
  const PointwiseModel pm = train_pointwise_nn(ta, tu, bc);
  const auto coarse = pointwise_predict(pm, downsample(data.coefficients[21], 16));
  const auto fine = pointwise_predict(pm, data.coefficients[21]);
  std::size_t mismatched = 0;
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) mismatched += coarse[i * 16 + j] != fine[(2 * i) * 31 + 2 * j];

  return {rbm_gap <= 1e-8 && idem <= 1e-10 && mismatched == 0,
          "complete-basis RBM vs FD " + fmt(rbm_gap) + " (<= 1e-8); PCA idempotency " + fmt(idem) +
              " (<= 1e-10); pointwise mismatches at coinciding nodes " + std::to_string(mismatched)};
}

Outcome mesh_refinement() {
  std::vector<double> means;
  for (std::size_t s : {16u, 31u, 61u}) {
    const GridField z(s, 2);
    const NodeFields f{z, {z, z, z, z}, std::nullopt};
    const SpatialGraph g = full_grid_graph(f, 0.10);
    const auto deg = g.in_degrees();
    double sum = 0.0;
    double count = 0.0;
    for (std::size_t k = 0; k < g.num_nodes(); ++k) {
      const auto c = g.coords(k);
      if (c[0] >= 0.1 && c[0] <= 0.9 && c[1] >= 0.1 && c[1] <= 0.9) {
        sum += static_cast<double>(deg[k]);
        count += 1.0;
      }
    }
    means.push_back(sum / count);
  }
  return {means[0] < means[1] && means[1] < means[2], "mean |N(x)| over interior nodes at s=16/31/61: " + join(means)};
}

std::string file_bytes(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Outcome reproducibility() {
  const fs::path root = fs::temp_directory_path() / "gkn_acceptance_repro";
  fs::remove_all(root);
  const std::string cli = GKN_CLI_PATH;
  // Each command writes the listed outputs into run directory "a" or "b".
  struct Command {
    std::string name;
    std::string args;
    std::vector<std::string> outputs;
  };
  const std::string data = (root / "shared.gknd").string();
  const std::string model = (root / "shared.gknm").string();
  const std::string small = " --train-res 16 --n 4 --T 2 --kappa 8,16 --epochs 2 --n-train 6 --n-test 3 --quiet";
  const std::vector<Command> commands{
      {"generate", "generate --resolution 31 --samples 9 --seed 5 --out {}/d.gknd", {"d.gknd"}},
      {"train", "train --data " + data + small + " --seed 2 --out {}/m.gknm --loss-out {}/loss.csv",
       {"m.gknm", "loss.csv"}},
      {"evaluate", "evaluate --model " + model + " --data " + data + " --test-res 31 --out {}/e.csv", {"e.csv"}},
      {"transfer", "transfer --data " + data + small + " --seed 2 --test-res 16,31 --out {}/t.csv", {"t.csv"}},
      {"sweep", "sweep --data " + data + small + " --seed 2 --axis l --values 1,2 --m 60 --out {}/s.csv", {"s.csv"}},
      {"green1d", "green1d --resolution 17 --samples 64 --epochs 2 --eval-points 16 --seed 2 --quiet --out {}/g.csv",
       {"g.csv"}},
      {"green-disk-check", "green-disk-check --pairs 500 --seed 2 --out {}/k.csv", {"k.csv"}},
      {"nystrom-rate", "nystrom-rate --m 4,8,16,32 --trials 5 --seed 2 --quadrature 257 --out {}/n.csv", {"n.csv"}},
      {"baseline nn", "baseline --method nn --data " + data + " --n-train 6 --n-test 3 --epochs 3 --seed 2 --out {}/b1.csv",
       {"b1.csv"}},
      {"baseline pca-nn",
       "baseline --method pca-nn --data " + data + " --n-train 6 --n-test 3 --rank-in 4 --rank-out 4 --epochs 3 --seed 2 --out {}/b2.csv",
       {"b2.csv"}},
      {"baseline rbm", "baseline --method rbm --data " + data + " --n-train 6 --n-test 3 --rank-out 4 --seed 2 --out {}/b3.csv",
       {"b3.csv"}},
  };
  auto run = [&](const std::string& args, const fs::path& dir) {
    std::string expanded = args;
    for (std::size_t pos; (pos = expanded.find("{}")) != std::string::npos;) expanded.replace(pos, 2, dir.string());
    const std::string cmd = cli + " " + expanded + " > " + (dir / "stdout.txt").string() + " 2> " +
                            (dir / "stderr.txt").string();
    return std::system(cmd.c_str());
  };

  fs::create_directories(root);
  // shared inputs for the commands that read a dataset or model
  if (run("generate --resolution 31 --samples 9 --seed 5 --out " + data, root) != 0 ||
      run("train --data " + data + small + " --seed 2 --out " + model, root) != 0) {
    return {false, "could not prepare shared inputs"};
  }
  std::vector<std::string> bad;
  for (const auto& c : commands) {
    const fs::path a = root / "a";
    const fs::path b = root / "b";
    fs::remove_all(a);
    fs::remove_all(b);
    fs::create_directories(a);
    fs::create_directories(b);
    if (run(c.args, a) != 0 || run(c.args, b) != 0) {
      bad.push_back(c.name + " (exit status)");
      continue;
    }
    for (const auto& out : c.outputs) {
      if (!fs::exists(a / out) || file_bytes(a / out) != file_bytes(b / out)) bad.push_back(c.name + ":" + out);
    }
    if (file_bytes(a / "stdout.txt") != file_bytes(b / "stdout.txt")) bad.push_back(c.name + ":stdout");
  }
  fs::remove_all(root);
  std::string detail = std::to_string(commands.size()) + " subcommands run twice";
  if (bad.empty()) return {true, detail + ", all outputs byte-identical"};
  detail += ", differing:";
  for (const auto& b : bad) detail += " " + b;
  return {false, detail};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> all{
      {1, "resolution invariance", resolution_invariance},
      {2, "sample-efficiency trend", sample_efficiency},
      {3, "1-d Green's function recovery", green_1d_recovery},
      {4, "Monte Carlo rate of the empirical kernel operator", nystrom_rate},
      {5, "finite-difference solver", fd_solver},
      {6, "gradient integrity", gradient_integrity},
      {7, "disk Green's function identities", disk_green},
      {8, "baseline contracts", baseline_contracts},
      {9, "mesh-refinement mechanism", mesh_refinement},
      {10, "CLI reproducibility", reproducibility},
  };
  // Usage: acceptance [--expected-fail k]... [k]...
  // An expected failure still prints FAIL; only failures outside that set set the exit code.
  std::set<int> chosen;
  std::set<int> expected_fail;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--expected-fail" && i + 1 < argc) {
      expected_fail.insert(std::atoi(argv[++i]));
    } else {
      chosen.insert(std::atoi(argv[i]));
    }
  }

  std::vector<int> failed;
  for (const auto& c : all) {
    if (!chosen.empty() && !chosen.count(c.id)) continue;
    std::cerr << "criterion " << c.id << ": " << c.name << std::endl;
    const auto start = Clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    if (!o.pass) failed.push_back(c.id);
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " (" << c.name << "): " << o.detail << " ["
              << fmt(seconds_since(start), 4) << " s]" << std::endl;
  }
  int unexpected = 0;
  std::string summary;
  for (int id : failed) {
    const bool known = expected_fail.count(id) != 0;
    if (!known) ++unexpected;
    summary += " " + std::to_string(id) + (known ? " (expected)" : "");
  }
  std::cout << failed.size() << " criteria failed" << (failed.empty() ? "" : ":") << summary << std::endl;
  return unexpected == 0 ? 0 : 1;
}
