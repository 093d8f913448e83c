// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0

#include "gkn/baselines.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>

namespace gkn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

constexpr std::uint64_t kMlpInitStream = 11;
constexpr std::uint64_t kMlpShuffleStream = 12;

Eigen::Map<const RowMat> as_matrix(const ad::Tensor& t) {
  return {t.data(), static_cast<Eigen::Index>(t.rows()), static_cast<Eigen::Index>(t.cols())};
}

// Modified Gram-Schmidt over the rows, applied twice. Rows whose remaining
// norm falls below `drop` are removed.
RowMat orthonormalize_rows(const RowMat& in, double drop) {
  std::vector<Eigen::RowVectorXd> kept;
  for (Eigen::Index i = 0; i < in.rows(); ++i) {
    Eigen::RowVectorXd v = in.row(i);
    const double scale = v.norm();
    if (scale == 0.0) continue;
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : kept) v -= v.dot(q) * q;
    }
    if (v.norm() <= drop * scale) continue;
    kept.push_back(v / v.norm());
  }
  RowMat out(static_cast<Eigen::Index>(kept.size()), in.cols());
  for (std::size_t i = 0; i < kept.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = kept[i];
  return out;
}

ad::Tensor to_tensor(const RowMat& m) {
  ad::Tensor t({static_cast<std::size_t>(m.rows()), static_cast<std::size_t>(m.cols())});
  Eigen::Map<RowMat>(t.data(), m.rows(), m.cols()) = m;
  return t;
}

ChannelStats scalar_stats(std::span<const double> v) {
  const GridField f(v.size(), 1, std::vector<double>(v.begin(), v.end()));
  const GridField* p = &f;
  return channel_stats(std::span<const GridField* const>(&p, 1));
}

std::vector<double> unit_forcing(std::size_t s) { return std::vector<double>(s * s, 1.0); }

std::vector<double> as_vector(const GridField& f) { return {f.values().begin(), f.values().end()}; }

void check_sizes(const Dataset& data, const BaselineConfig& config) {
  if (config.n_train < 1 || config.n_test < 1) throw std::invalid_argument("baseline: need train and test pairs");
  if (config.n_train + config.n_test > data.size()) {
    throw std::invalid_argument("baseline: dataset has " + std::to_string(data.size()) + " pairs, " +
                                std::to_string(config.n_train + config.n_test) + " required");
  }
}

}  // namespace

std::vector<double> PcaBasis::encode(std::span<const double> field) const {
  if (field.size() != dimension()) {
    throw ResolutionError("pca: field has " + std::to_string(field.size()) + " values, basis expects " +
                          std::to_string(dimension()));
  }
  const Eigen::Map<const Eigen::VectorXd> x(field.data(), static_cast<Eigen::Index>(field.size()));
  const Eigen::Map<const Eigen::VectorXd> mu(mean.data(), static_cast<Eigen::Index>(mean.size()));
  const Eigen::VectorXd c = as_matrix(components) * (x - mu);
  return {c.data(), c.data() + c.size()};
}

std::vector<double> PcaBasis::decode(std::span<const double> coefficients) const {
  if (coefficients.size() != rank()) throw ad::DimensionError("pca: coefficient count differs from the rank");
  const Eigen::Map<const Eigen::VectorXd> c(coefficients.data(), static_cast<Eigen::Index>(coefficients.size()));
  const Eigen::Map<const Eigen::VectorXd> mu(mean.data(), static_cast<Eigen::Index>(mean.size()));
  const Eigen::VectorXd x = mu + as_matrix(components).transpose() * c;
  return {x.data(), x.data() + x.size()};
}

PcaBasis compute_pca(std::span<const std::vector<double>> fields, std::size_t rank) {
  const std::size_t n = fields.size();
  if (n == 0) throw std::invalid_argument("pca: no training fields");
  if (rank > n) throw std::invalid_argument("pca: rank " + std::to_string(rank) + " exceeds " + std::to_string(n) + " fields");
  const std::size_t k = fields[0].size();
  if (rank > k) throw std::invalid_argument("pca: rank exceeds the field dimension");

  RowMat x(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(k));
  for (std::size_t i = 0; i < n; ++i) {
    if (fields[i].size() != k) throw ResolutionError("pca: training fields differ in length");
    x.row(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::RowVectorXd>(fields[i].data(), static_cast<Eigen::Index>(k));
  }
  const Eigen::RowVectorXd mu = x.colwise().mean();
  x.rowwise() -= mu;

  const Eigen::MatrixXd gram = x * x.transpose();
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(gram);
  const Eigen::VectorXd& lambda = eig.eigenvalues();  // ascending
  const double top = std::max(lambda(lambda.size() - 1), 0.0);
  const double floor = top * static_cast<double>(n) * 1e-13;

  RowMat rows(static_cast<Eigen::Index>(rank), static_cast<Eigen::Index>(k));
  std::vector<double> sv;
  Eigen::Index filled = 0;
  for (std::size_t r = 0; r < rank; ++r) {
    const Eigen::Index col = lambda.size() - 1 - static_cast<Eigen::Index>(r);
    if (!(lambda(col) > floor)) break;
    rows.row(filled++) = (x.transpose() * eig.eigenvectors().col(col)).transpose() / std::sqrt(lambda(col));
    sv.push_back(std::sqrt(lambda(col)));
  }
  RowMat basis = orthonormalize_rows(rows.topRows(filled), 1e-8);
  // complete with coordinate directions when the data has lower rank
  for (Eigen::Index j = 0; basis.rows() < static_cast<Eigen::Index>(rank) && j < static_cast<Eigen::Index>(k); ++j) {
    RowMat grown(basis.rows() + 1, basis.cols());
    grown.topRows(basis.rows()) = basis;
    grown.row(basis.rows()) = Eigen::RowVectorXd::Unit(static_cast<Eigen::Index>(k), j);
    RowMat next = orthonormalize_rows(grown, 1e-6);
    if (next.rows() > basis.rows()) basis = std::move(next);
  }
  sv.resize(rank, 0.0);

  PcaBasis out;
  out.mean.assign(mu.data(), mu.data() + mu.size());
  out.components = to_tensor(basis);
  out.singular_values = std::move(sv);
  return out;
}

std::vector<ad::Tensor*> MlpParams::tensors() {
  std::vector<ad::Tensor*> out;
  for (auto& l : layers) {
    out.push_back(&l.weight);
    out.push_back(&l.bias);
  }
  return out;
}

MlpParams init_mlp(std::span<const std::size_t> widths, std::uint64_t seed) {
  if (widths.size() < 2) throw std::invalid_argument("mlp: need at least input and output widths");
  Rng rng = child_stream(seed, kMlpInitStream);
  MlpParams mlp;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(widths[l]));
    std::uniform_real_distribution<double> dist(-bound, bound);
    ad::Tensor w({widths[l + 1], widths[l]});
    for (double& v : w.values()) v = dist(rng);
    mlp.layers.push_back({std::move(w), ad::Tensor({widths[l + 1]})});
  }
  return mlp;
}

ad::Tensor mlp_predict(const MlpParams& mlp, const ad::Tensor& x) {
  RowMat h = as_matrix(x);
  for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
    const auto& layer = mlp.layers[l];
    RowMat next = h * as_matrix(layer.weight).transpose();
    next.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(layer.bias.data(), static_cast<Eigen::Index>(layer.bias.size()));
    if (l + 1 < mlp.layers.size()) next = next.cwiseMax(0.0);
    h = std::move(next);
  }
  return to_tensor(h);
}

std::vector<double> train_mlp(MlpParams& mlp, std::span<const ad::Tensor> inputs, std::span<const ad::Tensor> targets,
                              std::size_t epochs, double lr, std::uint64_t seed) {
  if (inputs.size() != targets.size() || inputs.empty()) throw std::invalid_argument("mlp: need matching batches");
  const auto tensors = mlp.tensors();
  AdamState state = adam_init(tensors);
  Rng rng = child_stream(seed, kMlpShuffleStream);
  std::vector<std::size_t> order(inputs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<const ad::Tensor*> grads(tensors.size());
  std::vector<double> history;
  for (std::size_t epoch = 0; epoch < epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t b : order) {
      ad::Tape tape;
      std::vector<ad::Var> w;
      std::vector<ad::Var> bias;
      for (const auto& layer : mlp.layers) {
        w.push_back(tape.parameter(layer.weight));
        bias.push_back(tape.parameter(layer.bias));
      }
      const ad::Var pred = mlp_forward(tape, w, bias, tape.constant(inputs[b]));
      const ad::Var loss = tape.mse_loss(pred, tape.constant(targets[b]));
      const double value = tape.value(loss).item();
      if (!std::isfinite(value)) throw DivergenceError(epoch);
      const auto g = tape.backward(loss);
      for (std::size_t l = 0; l < mlp.layers.size(); ++l) {
        grads[2 * l] = &g[w[l]];
        grads[2 * l + 1] = &g[bias[l]];
      }
      adam_step(tensors, grads, state, lr);
      total += value;
    }
    history.push_back(total / static_cast<double>(inputs.size()));
  }
  return history;
}

namespace {

ad::Tensor pointwise_features(const GridField& a, const ChannelStats& stats) {
  const std::size_t s = a.resolution();
  ad::Tensor x({a.size(), 3});
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      double* row = x.data() + (i * s + j) * 3;
      row[0] = a.coord(i);
      row[1] = a.coord(j);
      row[2] = stats.normalize(a.at(i, j));
    }
  }
  return x;
}

std::vector<std::size_t> widths_for(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<std::size_t> w{in};
  w.insert(w.end(), hidden.begin(), hidden.end());
  w.push_back(out);
  return w;
}

}  // namespace

PointwiseModel train_pointwise_nn(std::span<const GridField> a, std::span<const GridField> u,
                                  const BaselineConfig& config) {
  if (a.size() != u.size() || a.empty()) throw std::invalid_argument("pointwise nn: need matching a/u fields");
  PointwiseModel model;
  std::vector<const GridField*> pa;
  std::vector<const GridField*> pu;
  for (std::size_t i = 0; i < a.size(); ++i) {
    pa.push_back(&a[i]);
    pu.push_back(&u[i]);
  }
  model.a = channel_stats(pa);
  model.u = channel_stats(pu);
  std::vector<ad::Tensor> inputs;
  std::vector<ad::Tensor> targets;
  for (std::size_t i = 0; i < a.size(); ++i) {
    inputs.push_back(pointwise_features(a[i], model.a));
    ad::Tensor t({u[i].size(), 1});
    for (std::size_t k = 0; k < u[i].size(); ++k) t[k] = model.u.normalize(u[i][k]);
    targets.push_back(std::move(t));
  }
  const auto widths = widths_for(3, config.hidden, 1);
  model.mlp = init_mlp(widths, config.seed);
  model.loss_history = train_mlp(model.mlp, inputs, targets, config.epochs, config.lr, config.seed);
  return model;
}

std::vector<double> pointwise_predict(const PointwiseModel& model, const GridField& a) {
  const ad::Tensor out = mlp_predict(model.mlp, pointwise_features(a, model.a));
  std::vector<double> u(out.size());
  for (std::size_t k = 0; k < u.size(); ++k) u[k] = model.u.denormalize(out[k]);
  return u;
}

PcaNnModel train_pca_nn(std::span<const std::vector<double>> a, std::span<const std::vector<double>> u,
                        const BaselineConfig& config) {
  if (a.size() != u.size() || a.empty()) throw std::invalid_argument("pca nn: need matching a/u fields");
  PcaNnModel model;
  model.input = compute_pca(a, config.rank_in);
  model.output = compute_pca(u, config.rank_out);
  const std::size_t n = a.size();
  std::vector<std::vector<double>> ca(n);
  std::vector<std::vector<double>> cu(n);
  for (std::size_t i = 0; i < n; ++i) {
    ca[i] = model.input.encode(a[i]);
    cu[i] = model.output.encode(u[i]);
  }
  auto column_stats = [n](const std::vector<std::vector<double>>& c, std::size_t r) {
    std::vector<ChannelStats> out;
    for (std::size_t j = 0; j < r; ++j) {
      std::vector<double> col(n);
      for (std::size_t i = 0; i < n; ++i) col[i] = c[i][j];
      out.push_back(scalar_stats(col));
    }
    return out;
  };
  model.input_scale = column_stats(ca, config.rank_in);
  model.output_scale = column_stats(cu, config.rank_out);

  std::vector<ad::Tensor> inputs;
  std::vector<ad::Tensor> targets;
  for (std::size_t i = 0; i < n; ++i) {
    ad::Tensor x({1, config.rank_in});
    ad::Tensor y({1, config.rank_out});
    for (std::size_t j = 0; j < config.rank_in; ++j) x[j] = model.input_scale[j].normalize(ca[i][j]);
    for (std::size_t j = 0; j < config.rank_out; ++j) y[j] = model.output_scale[j].normalize(cu[i][j]);
    inputs.push_back(std::move(x));
    targets.push_back(std::move(y));
  }
  model.mlp = init_mlp(widths_for(config.rank_in, config.hidden, config.rank_out), config.seed);
  model.loss_history = train_mlp(model.mlp, inputs, targets, config.epochs, config.lr, config.seed);
  return model;
}

std::vector<double> pca_nn_predict(const PcaNnModel& model, std::span<const double> a) {
  const auto ca = model.input.encode(a);
  ad::Tensor x({1, ca.size()});
  for (std::size_t j = 0; j < ca.size(); ++j) x[j] = model.input_scale[j].normalize(ca[j]);
  const ad::Tensor y = mlp_predict(model.mlp, x);
  std::vector<double> cu(y.size());
  for (std::size_t j = 0; j < cu.size(); ++j) cu[j] = model.output_scale[j].denormalize(y[j]);
  return model.output.decode(cu);
}

RbmResult rbm_solve(const SparseSystem& system, const ad::Tensor& basis) {
  if (basis.cols() != system.dimension) throw ad::DimensionError("rbm: basis length differs from the system");
  const std::size_t r = basis.rows();
  const auto b = as_matrix(basis);
  RowMat ab(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(system.dimension));
  std::vector<double> col(system.dimension);
  std::vector<double> prod(system.dimension);
  for (std::size_t j = 0; j < r; ++j) {
    std::copy_n(basis.data() + j * system.dimension, system.dimension, col.begin());
    system.multiply(col, prod);
    ab.row(static_cast<Eigen::Index>(j)) = Eigen::Map<const Eigen::RowVectorXd>(prod.data(), static_cast<Eigen::Index>(prod.size()));
  }
  Eigen::MatrixXd reduced = b * ab.transpose();
  reduced = 0.5 * (reduced + reduced.transpose());
  const Eigen::Map<const Eigen::VectorXd> f(system.rhs.data(), static_cast<Eigen::Index>(system.rhs.size()));
  const Eigen::VectorXd rhs = b * f;

  RbmResult out;
  Eigen::LLT<Eigen::MatrixXd> llt(reduced);
  Eigen::VectorXd c;
  if (llt.info() == Eigen::Success) {
    c = llt.solve(rhs);
  } else {
    std::cerr << "warning: reduced system is singular, adding " << kRbmRegularization << " to the diagonal\n";
    reduced.diagonal().array() += kRbmRegularization;
    c = reduced.ldlt().solve(rhs);
    out.regularized = true;
  }
  const Eigen::VectorXd u = b.transpose() * c;
  out.solution.assign(u.data(), u.data() + u.size());
  out.coefficients.assign(c.data(), c.data() + c.size());
  return out;
}

ad::Tensor rbm_basis(std::span<const std::vector<double>> interior_solutions, std::size_t rank) {
  const PcaBasis pca = compute_pca(interior_solutions, rank);
  const auto k = static_cast<Eigen::Index>(pca.dimension());
  RowMat rows(static_cast<Eigen::Index>(rank) + 1, k);
  rows.row(0) = Eigen::Map<const Eigen::RowVectorXd>(pca.mean.data(), k);
  if (rank > 0) rows.bottomRows(static_cast<Eigen::Index>(rank)) = as_matrix(pca.components);
  return to_tensor(orthonormalize_rows(rows, 1e-10));
}

BaselineReport run_pointwise_nn(const Dataset& data, const BaselineConfig& config) {
  check_sizes(data, config);
  std::vector<GridField> a;
  std::vector<GridField> u;
  for (std::size_t i = 0; i < config.n_train; ++i) {
    a.push_back(downsample(data.coefficients[i], config.train_res));
    u.push_back(downsample(data.solutions[i], config.train_res));
  }
  const PointwiseModel model = train_pointwise_nn(a, u, config);
  double total = 0.0;
  for (std::size_t i = 0; i < config.n_test; ++i) {
    const std::size_t idx = config.n_train + i;
    const GridField at = downsample(data.coefficients[idx], config.test_res);
    const GridField ut = downsample(data.solutions[idx], config.test_res);
    total += relative_l2(pointwise_predict(model, at), ut.values());
  }
  return {total / static_cast<double>(config.n_test), model.loss_history};
}

BaselineReport run_pca_nn(const Dataset& data, const BaselineConfig& config) {
  check_sizes(data, config);
  if (config.train_res != config.test_res) {
    throw ResolutionError("pca nn: the encoders are tied to the training grid (train and test resolutions differ)");
  }
  const std::size_t s = config.train_res;
  std::vector<std::vector<double>> a;
  std::vector<std::vector<double>> u;
  for (std::size_t i = 0; i < config.n_train; ++i) {
    a.push_back(as_vector(downsample(data.coefficients[i], s)));
    u.push_back(as_vector(downsample(data.solutions[i], s)));
  }
  const PcaNnModel model = train_pca_nn(a, u, config);
  double total = 0.0;
  for (std::size_t i = 0; i < config.n_test; ++i) {
    const std::size_t idx = config.n_train + i;
    const auto at = as_vector(downsample(data.coefficients[idx], s));
    const GridField ut = downsample(data.solutions[idx], s);
    total += relative_l2(pca_nn_predict(model, at), ut.values());
  }
  return {total / static_cast<double>(config.n_test), model.loss_history};
}

BaselineReport run_rbm(const Dataset& data, const BaselineConfig& config) {
  check_sizes(data, config);
  const std::size_t s = config.test_res;
  std::vector<std::vector<double>> train;
  for (std::size_t i = 0; i < config.n_train; ++i) train.push_back(grid_to_interior(downsample(data.solutions[i], s)));
  const ad::Tensor basis = rbm_basis(train, config.rank_out);
  const GridField forcing(s, 2, unit_forcing(s));
  double total = 0.0;
  for (std::size_t i = 0; i < config.n_test; ++i) {
    const std::size_t idx = config.n_train + i;
    const SparseSystem system = assemble_darcy(downsample(data.coefficients[idx], s), forcing);
    const RbmResult res = rbm_solve(system, basis);
    const GridField pred = interior_to_grid(res.solution, s);
    total += relative_l2(pred.values(), downsample(data.solutions[idx], s).values());
  }
  return {total / static_cast<double>(config.n_test), {}};
}

}  // namespace gkn
