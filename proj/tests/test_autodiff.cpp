// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <cmath>
#include <random>

#include "gkn/autodiff.hpp"

using gkn::ad::Gradients;
using gkn::ad::Tape;
using gkn::ad::Tensor;
using gkn::ad::Var;

namespace {

Tensor random_matrix(std::size_t r, std::size_t c, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t({r, c});
  for (double& v : t.values()) v = n(rng);
  return t;
}

// Central differences written out independently of grad_check.
Tensor numeric_gradient(const std::function<double(const Tensor&)>& f, Tensor x, double h = 1e-6) {
  Tensor g(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double keep = x[i];
    x[i] = keep + h;
    const double up = f(x);
    x[i] = keep - h;
    const double down = f(x);
    x[i] = keep;
    g[i] = (up - down) / (2 * h);
  }
  return g;
}

double max_rel(const Tensor& a, const Tensor& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a[i] - b[i]) / (std::abs(a[i]) + std::abs(b[i]) + 1e-12));
  }
  return worst;
}

}  // namespace

TEST_CASE("tensor shape must match the value count") {
  CHECK_THROWS_AS(Tensor({2, 3}, {1, 2, 3}), gkn::ad::DimensionError);
  const Tensor t({2, 3});
  CHECK(t.size() == 6);
  CHECK(t.rows() == 2);
  CHECK(t.cols() == 3);
  CHECK(Tensor::scalar(4.0).item() == 4.0);
  const Tensor empty({0, 5});
  CHECK(empty.cols() == 5);
}

TEST_CASE("matmul hand product and identity") {
  Tape tape;
  const Var a = tape.constant(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const Var b = tape.constant(Tensor::matrix(2, 1, {1, 1}));
  CHECK(tape.value(tape.matmul(a, b)) == Tensor::matrix(2, 1, {3, 7}));

  const Var eye = tape.constant(Tensor::matrix(2, 2, {1, 0, 0, 1}));
  const Tensor same = tape.value(tape.matmul(a, eye));
  CHECK(same.shape() == tape.value(a).shape());
  CHECK(std::vector<double>(same.values().begin(), same.values().end()) == std::vector<double>{1, 2, 3, 4});
  CHECK_THROWS_AS(tape.matmul(b, b), gkn::ad::DimensionError);
}

TEST_CASE("matmul gradient of sum(A B) matches central differences") {
  std::mt19937_64 rng(1);
  const Tensor A = random_matrix(3, 4, rng);
  const Tensor B = random_matrix(4, 2, rng);
  Tape tape;
  const Var a = tape.parameter(A);
  const Var loss = tape.sum(tape.matmul(a, tape.constant(B)));
  const Gradients g = tape.backward(loss);

  const auto f = [&](const Tensor& x) {
    double s = 0.0;
    for (std::size_t i = 0; i < 3; ++i)
      for (std::size_t j = 0; j < 2; ++j)
        for (std::size_t k = 0; k < 4; ++k) s += x.at(i, k) * B.at(k, j);
    return s;
  };
  CHECK(max_rel(g[a], numeric_gradient(f, A)) <= 1e-6);
}

TEST_CASE("relu values and subgradient at zero") {
  Tape tape;
  const Var x = tape.parameter(Tensor::vector({-1, 0, 2}));
  const Var y = tape.relu(x);
  CHECK(tape.value(y) == Tensor::vector({0, 0, 2}));
  const Gradients g = tape.backward(tape.sum(y));
  CHECK(g[x] == Tensor::vector({0, 0, 1}));

  Tape t2;
  const Tensor pos = Tensor::vector({0.5, 3.0, 0.0});
  CHECK(t2.value(t2.relu(t2.constant(pos))) == pos);

  const double err = gkn::ad::grad_check([](Tape& t, Var v) { return t.sum(t.relu(v)); }, Tensor::vector({0.5, -0.7, 1.3}));
  CHECK(err <= 1e-6);
}

TEST_CASE("scatter_mean hand mean, empty rows and index errors") {
  Tape tape;
  const Var m = tape.constant(Tensor::matrix(2, 1, {2, 4}));
  const std::vector<std::size_t> both{0, 0};
  CHECK(tape.value(tape.scatter_mean(m, both, 2)) == Tensor::matrix(2, 1, {3, 0}));

  const Var rows = tape.constant(Tensor::matrix(3, 2, {1, 2, 3, 4, 5, 6}));
  const std::vector<std::size_t> perm{2, 0, 1};
  CHECK(tape.value(tape.scatter_mean(rows, perm, 3)) == Tensor::matrix(3, 2, {3, 4, 5, 6, 1, 2}));

  const std::vector<std::size_t> bad{0, 5};
  CHECK_THROWS_AS(tape.scatter_mean(m, bad, 2), gkn::ad::IndexError);
}

TEST_CASE("scatter_mean backward divides by the neighbourhood size") {
  std::mt19937_64 rng(2);
  const Tensor M = random_matrix(5, 3, rng);
  const Tensor W = random_matrix(4, 3, rng);
  const std::vector<std::size_t> targets{0, 0, 0, 2, 3};
  Tape tape;
  const Var m = tape.parameter(M);
  const Var s = tape.scatter_mean(m, targets, 4);
  // weight the output so each row's gradient is distinct
  const Var loss = tape.sum(tape.relu(tape.add(s, tape.constant(W))));
  const Gradients g = tape.backward(loss);

  const auto f = [&](const Tensor& x) {
    Tape t;
    return t.value(t.sum(t.relu(t.add(t.scatter_mean(t.constant(x), targets, 4), t.constant(W))))).item();
  };
  CHECK(max_rel(g[m], numeric_gradient(f, M)) <= 1e-6);
  // rows feeding node 0 share a 1/3 factor
  const Tensor& d = g[m];
  for (std::size_t c = 0; c < 3; ++c) {
    const double expect = (tape.value(s).at(0, c) + W.at(0, c)) > 0 ? 1.0 / 3.0 : 0.0;
    CHECK(d.at(1, c) == doctest::Approx(expect).epsilon(1e-15));
  }
}

TEST_CASE("scatter_mean is linear") {
  std::mt19937_64 rng(3);
  const Tensor m1 = random_matrix(30, 4, rng);
  const Tensor m2 = random_matrix(30, 4, rng);
  std::uniform_int_distribution<std::size_t> pick(0, 9);
  std::vector<std::size_t> targets(30);
  for (auto& t : targets) t = pick(rng);
  const double alpha = 0.7;
  const double beta = -1.9;
  Tensor mix(m1.shape());
  for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = alpha * m1[i] + beta * m2[i];
  Tape tape;
  const Tensor s1 = tape.value(tape.scatter_mean(tape.constant(m1), targets, 10));
  const Tensor s2 = tape.value(tape.scatter_mean(tape.constant(m2), targets, 10));
  const Tensor sm = tape.value(tape.scatter_mean(tape.constant(mix), targets, 10));
  for (std::size_t i = 0; i < sm.size(); ++i) CHECK(std::abs(sm[i] - (alpha * s1[i] + beta * s2[i])) <= 1e-12);
}

TEST_CASE("mse_loss values and gradient") {
  Tape tape;
  CHECK(tape.value(tape.mse_loss(tape.constant(Tensor::vector({1, 2})), tape.constant(Tensor::vector({1, 0})))).item() == 2.0);
  const Tensor same = Tensor::vector({0.3, -4.0});
  CHECK(tape.value(tape.mse_loss(tape.constant(same), tape.constant(same))).item() == 0.0);
  CHECK_THROWS_AS(tape.mse_loss(tape.constant(Tensor::vector({1})), tape.constant(Tensor::vector({1, 2}))),
                  gkn::ad::DimensionError);

  Tape t2;
  const Var x = t2.parameter(Tensor::vector({3}));
  const Gradients g = t2.backward(t2.mse_loss(x, t2.constant(Tensor::vector({0}))));
  CHECK(g[x][0] == doctest::Approx(6.0));

  Tape t3;
  const Tensor p = Tensor::vector({0.5, -1.0, 2.0, 0.25});
  const Tensor q = Tensor::vector({1.0, 1.0, -1.0, 0.0});
  const Var px = t3.parameter(p);
  const Gradients g3 = t3.backward(t3.mse_loss(px, t3.constant(q)));
  for (std::size_t i = 0; i < 4; ++i) CHECK(g3[px][i] == doctest::Approx(2.0 * (p[i] - q[i]) / 4.0).epsilon(1e-14));
}

TEST_CASE("backward contracts") {
  Tape tape;
  const Var x = tape.parameter(Tensor::vector({1, 2}));
  const Var c = tape.constant(Tensor::vector({5, 5}));
  CHECK_THROWS_AS(tape.backward(tape.add(x, c)), std::logic_error);
  const Var unused = tape.parameter(Tensor::matrix(2, 2, {1, 2, 3, 4}));
  const Gradients g = tape.backward(tape.sum(tape.add(x, c)));
  CHECK_FALSE(g.has(c));
  REQUIRE(g.has(unused));
  CHECK(g[unused] == Tensor({2, 2}));
  CHECK(g[x] == Tensor::vector({1, 1}));
}

TEST_CASE("grad_check examples") {
  const auto mse0 = [](Tape& t, Var v) { return t.mse_loss(v, t.constant(Tensor::vector({0, 0, 0}))); };
  CHECK(gkn::ad::grad_check(mse0, Tensor::vector({1, 2, 3})) <= 1e-7);

  const Tensor w = Tensor::matrix(1, 3, {0.5, -2.0, 1.5});
  const auto linear = [&w](Tape& t, Var v) { return t.sum(t.linear(v, t.constant(w))); };
  CHECK(gkn::ad::grad_check(linear, Tensor::matrix(2, 3, {1, 2, 3, 4, 5, 6})) <= 1e-9);

  const auto relu = [](Tape& t, Var v) { return t.sum(t.relu(v)); };
  CHECK(gkn::ad::grad_check(relu, Tensor::scalar(0.5)) <= 1e-7);
}

TEST_CASE("linear, gather_rows and edge_matvec gradients on random shapes") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> dim(1, 8);
    std::uniform_int_distribution<std::size_t> nodes(2, 20);
    const std::size_t n = dim(rng);
    const std::size_t k = nodes(rng);
    const std::size_t e = 2 * k;
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    std::vector<std::size_t> src(e);
    std::vector<std::size_t> dst(e);
    for (std::size_t i = 0; i < e; ++i) {
      src[i] = pick(rng);
      dst[i] = pick(rng);
    }
    const Tensor mats = random_matrix(e, n * n, rng);
    const Tensor w = random_matrix(n, n, rng);
    const Tensor b = random_matrix(1, n, rng);
    const Tensor v0 = random_matrix(k, n, rng);
    const Tensor bias({n}, std::vector<double>(b.values().begin(), b.values().end()));

    // d/dv through one message-passing step
    const auto step_in_v = [&](Tape& t, Var v) {
      const Var msg = t.edge_matvec(t.constant(mats), t.gather_rows(v, src));
      const Var agg = t.scatter_mean(msg, dst, k);
      return t.sum(t.relu(t.add(t.linear(v, t.constant(w), t.constant(bias)), agg)));
    };
    CHECK(gkn::ad::grad_check(step_in_v, v0) <= 1e-5);

    // d/dmats; a plain sum keeps gradient entries O(1) so the relative
    // finite-difference error is not dominated by rounding
    const auto step_in_mats = [&](Tape& t, Var m) {
      const Var msg = t.edge_matvec(m, t.gather_rows(t.constant(v0), src));
      return t.sum(t.scatter_mean(msg, dst, k));
    };
    CHECK(gkn::ad::grad_check(step_in_mats, mats) <= 1e-5);

    // d/dW and d/dbias
    const auto in_w = [&](Tape& t, Var wv) { return t.sum(t.relu(t.linear(t.constant(v0), wv, t.constant(bias)))); };
    CHECK(gkn::ad::grad_check(in_w, w) <= 1e-5);
    const auto in_b = [&](Tape& t, Var bv) { return t.mse_loss(t.linear(t.constant(v0), t.constant(w), bv), t.constant(Tensor({k, n}))); };
    CHECK(gkn::ad::grad_check(in_b, bias) <= 1e-5);
  }
}

TEST_CASE("forward results are bit-identical across runs") {
  std::mt19937_64 rng(9);
  const Tensor m = random_matrix(50, 6, rng);
  std::vector<std::size_t> targets(50);
  for (std::size_t i = 0; i < 50; ++i) targets[i] = (i * 7) % 11;
  Tape a;
  Tape b;
  CHECK(a.value(a.scatter_mean(a.constant(m), targets, 11)) == b.value(b.scatter_mean(b.constant(m), targets, 11)));
}
