// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "gkn/baselines.hpp"

using namespace gkn;
using gkn::ad::Tensor;

namespace {

std::vector<std::vector<double>> random_rows(std::size_t n, std::size_t k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<std::vector<double>> rows(n, std::vector<double>(k));
  for (auto& r : rows)
    for (auto& v : r) v = g(rng);
  return rows;
}

double max_row_dot_error(const Tensor& rows) {
  double worst = 0.0;
  for (std::size_t i = 0; i < rows.rows(); ++i)
    for (std::size_t j = 0; j < rows.rows(); ++j) {
      double dot = 0.0;
      for (std::size_t c = 0; c < rows.cols(); ++c) dot += rows.at(i, c) * rows.at(j, c);
      worst = std::max(worst, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  return worst;
}

double reconstruction_error(const PcaBasis& b, const std::vector<std::vector<double>>& rows) {
  double num = 0.0;
  double den = 0.0;
  for (const auto& r : rows) {
    const auto back = b.decode(b.encode(r));
    for (std::size_t i = 0; i < r.size(); ++i) {
      num += (back[i] - r[i]) * (back[i] - r[i]);
      den += r[i] * r[i];
    }
  }
  return std::sqrt(num / den);
}

SparseSystem darcy_system(std::size_t s, std::uint64_t seed, double forcing) {
  Rng rng = child_stream(seed, 0);
  const GridField a = threshold_psi(sample_grf(darcy_coefficient_spec(seed), s, 2, rng));
  return assemble_darcy(a, GridField(s, 2, std::vector<double>(s * s, forcing)));
}

}  // namespace

TEST_CASE("PCA of two orthogonal directions") {
  const std::vector<std::vector<double>> rows{{3, 0, 0}, {-3, 0, 0}, {0, 1, 0}, {0, -1, 0}};
  const PcaBasis b = compute_pca(rows, 2);
  REQUIRE(b.rank() == 2);
  for (double m : b.mean) CHECK(m == doctest::Approx(0.0));
  CHECK(std::abs(std::abs(b.components.at(0, 0)) - 1.0) <= 1e-12);
  CHECK(std::abs(std::abs(b.components.at(1, 1)) - 1.0) <= 1e-12);
  CHECK(b.singular_values[0] / b.singular_values[1] == doctest::Approx(3.0).epsilon(1e-12));
  CHECK_THROWS(compute_pca(rows, 5));
  CHECK_THROWS_AS(b.encode(std::vector<double>{1, 2}), ResolutionError);
}

TEST_CASE("Gram-matrix PCA matches an SVD of the centered data") {
  const auto rows = random_rows(12, 40, 3);
  const std::size_t r = 5;
  const PcaBasis b = compute_pca(rows, r);
  Eigen::MatrixXd x(12, 40);
  for (int i = 0; i < 12; ++i)
    for (int j = 0; j < 40; ++j) x(i, j) = rows[i][j];
  x.rowwise() -= x.colwise().mean();
  const Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinV);
  for (std::size_t c = 0; c < r; ++c) {
    double dot = 0.0;
    for (int j = 0; j < 40; ++j) dot += b.components.at(c, j) * svd.matrixV()(j, static_cast<int>(c));
    CHECK(std::abs(std::abs(dot) - 1.0) <= 1e-8);
    if (c > 0) CHECK(b.singular_values[c] <= b.singular_values[c - 1]);
  }
  CHECK(max_row_dot_error(b.components) <= 1e-10);
}

TEST_CASE("PCA projection properties") {
  const auto rows = random_rows(10, 30, 8);
  double previous = 1e300;
  for (std::size_t r : {1u, 3u, 6u, 9u}) {
    const double err = reconstruction_error(compute_pca(rows, r), rows);
    CHECK(err < previous);
    previous = err;
  }
  // 10 centered rows span 9 dimensions
  CHECK(reconstruction_error(compute_pca(rows, 9), rows) <= 1e-10);

  const PcaBasis b = compute_pca(rows, 4);
  const auto probe = random_rows(1, 30, 99)[0];
  const auto c1 = b.encode(probe);
  const auto c2 = b.encode(b.decode(c1));
  for (std::size_t i = 0; i < c1.size(); ++i) CHECK(std::abs(c1[i] - c2[i]) <= 1e-10);

  const PcaBasis full = compute_pca(rows, 10);
  CHECK(full.singular_values.back() == 0.0);
  CHECK(max_row_dot_error(full.components) <= 1e-10);
}

TEST_CASE("reduced basis Galerkin solves") {
  const SparseSystem sys = darcy_system(9, 4, 1.0);
  const std::size_t n = sys.dimension;
  Tensor eye({n, n});
  for (std::size_t i = 0; i < n; ++i) eye.at(i, i) = 1.0;
  const RbmResult full = rbm_solve(sys, eye);
  const auto truth = solve_cg(sys, 1e-13).solution;
  for (std::size_t i = 0; i < n; ++i) CHECK(std::abs(full.solution[i] - truth[i]) <= 1e-8 * std::abs(truth[0]) + 1e-14);
  CHECK_FALSE(full.regularized);

  std::vector<std::vector<double>> train;
  for (std::uint64_t seed = 10; seed < 20; ++seed) train.push_back(solve_cg(darcy_system(9, seed, 1.0)).solution);
  const Tensor basis = rbm_basis(train, 4);
  CHECK(basis.rows() == 5);
  CHECK(max_row_dot_error(basis) <= 1e-10);
  const RbmResult red = rbm_solve(sys, basis);
  std::vector<double> ax(n);
  sys.multiply(red.solution, ax);
  for (std::size_t r = 0; r < basis.rows(); ++r) {
    double proj = 0.0;
    double scale = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      proj += basis.at(r, i) * (ax[i] - sys.rhs[i]);
      scale += std::abs(basis.at(r, i) * sys.rhs[i]);
    }
    CHECK(std::abs(proj) <= 1e-8 * scale);
  }

  const RbmResult zero = rbm_solve(darcy_system(9, 4, 0.0), basis);
  for (double v : zero.solution) CHECK(v == 0.0);
}

TEST_CASE("reduced basis error falls as the rank grows") {
  const Dataset data = generate_darcy_dataset(61, 70, 12);
  BaselineConfig c;
  c.n_train = 60;
  c.n_test = 10;
  c.train_res = 61;
  c.test_res = 61;
  double previous = 1e300;
  for (std::size_t r : {5u, 20u, 50u}) {
    c.rank_out = r;
    const double err = run_rbm(data, c).test_error;
    CAPTURE(r);
    CHECK(err < previous);
    previous = err;
  }
  CHECK(previous < 0.1);
}

TEST_CASE("pointwise network") {
  const Dataset data = generate_darcy_dataset(61, 4, 6);
  std::vector<GridField> a;
  std::vector<GridField> flat;
  for (std::size_t i = 0; i < 3; ++i) {
    a.push_back(downsample(data.coefficients[i], 16));
    flat.emplace_back(16, 2, std::vector<double>(256, 0.75));
  }
  BaselineConfig c;
  c.epochs = 30;
  c.hidden = {16, 16};
  const PointwiseModel constant = train_pointwise_nn(a, flat, c);
  const auto pred = pointwise_predict(constant, a[0]);
  CHECK(relative_l2(pred, flat[0].values()) <= 1e-3);

  std::vector<GridField> u;
  for (std::size_t i = 0; i < 3; ++i) u.push_back(downsample(data.solutions[i], 16));
  const PointwiseModel model = train_pointwise_nn(a, u, c);
  const auto coarse = pointwise_predict(model, downsample(data.coefficients[3], 16));
  const auto fine = pointwise_predict(model, data.coefficients[3]);
  for (std::size_t i = 0; i < 16; ++i)
    for (std::size_t j = 0; j < 16; ++j) CHECK(coarse[i * 16 + j] == fine[(4 * i) * 61 + 4 * j]);

  BaselineConfig zero = c;
  zero.epochs = 0;
  zero.n_train = 3;
  zero.n_test = 1;
  const BaselineReport r = run_pointwise_nn(data, zero);
  CHECK(std::isfinite(r.test_error));
  CHECK(r.loss_history.empty());
}

TEST_CASE("PCA plus network on an identity task") {
  const Dataset data = generate_darcy_dataset(16, 520, 2);
  std::vector<std::vector<double>> train;
  std::vector<std::vector<double>> test;
  for (std::size_t i = 0; i < 520; ++i) {
    const auto v = data.coefficients[i].values();
    (i < 500 ? train : test).emplace_back(v.begin(), v.end());
  }
  BaselineConfig c;
  c.rank_in = 20;
  c.rank_out = 20;
  c.hidden = {32, 32};
  c.epochs = 400;
  c.lr = 1e-3;
  const PcaNnModel model = train_pca_nn(train, train, c);
  double floor = 0.0;
  double err = 0.0;
  for (const auto& a : test) {
    floor += relative_l2(model.output.decode(model.output.encode(a)), a);
    err += relative_l2(pca_nn_predict(model, a), a);
  }
  floor /= static_cast<double>(test.size());
  err /= static_cast<double>(test.size());
  CAPTURE(floor);
  CHECK(err <= floor + 0.01);

  BaselineConfig mismatch;
  mismatch.test_res = 31;
  CHECK_THROWS(run_pca_nn(data, mismatch));
}
