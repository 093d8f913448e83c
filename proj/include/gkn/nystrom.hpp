// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0
//
// Monte Carlo convergence of empirical kernel operators in Hilbert-Schmidt
// norm on [0, 1] with the uniform measure.
//
// With T_y = k_y (x) k_y and <T_x, T_y>_HS = k(x, y)^2,
//   ||T_m - T||^2 = (1/m^2) sum_ij k(y_i, y_j)^2
//                 - (2/m) sum_i int k(y_i, z)^2 dz + int int k(x, z)^2 dx dz.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <utility>
#include <vector>

namespace gkn {

using Kernel1d = std::function<double(double, double)>;

// exp(-(x - y)^2 / sigma^2)
Kernel1d gaussian_kernel(double sigma);

inline constexpr std::size_t kDefaultQuadrature = 2049;

// Composite Simpson rule on [0, 1]; `points` is odd and >= 3.
struct Quadrature {
  std::vector<double> nodes;
  std::vector<double> weights;
};
Quadrature simpson_rule(std::size_t points);

// Squared HS distance with integrals precomputed once per kernel.
class HsDistance {
 public:
  HsDistance(Kernel1d kernel, std::size_t quadrature_points = kDefaultQuadrature);

  double squared(std::span<const double> sample) const;
  double double_integral() const { return double_integral_; }
  // int_0^1 k(y, z)^2 dz
  double row_integral(double y) const;

 private:
  Kernel1d kernel_;
  Quadrature rule_;
  double double_integral_ = 0.0;
};

double hs_distance_squared(const Kernel1d& kernel, std::span<const double> sample,
                           std::size_t quadrature_points = kDefaultQuadrature);

struct RateReport {
  std::vector<std::size_t> m_values;
  std::vector<double> mean_distance;  // mean over trials of ||T_m - T||_HS
  std::size_t trials = 0;
  double slope = 0.0;                 // least squares of log distance on log m
  double intercept = 0.0;             // exp(intercept) estimates the rate constant
  double sigma = 0.0;
  std::size_t quadrature_points = 0;
};

// Trial t at the i-th m draws m uniform points from child stream i * trials + t.
RateReport mc_rate_experiment(std::span<const std::size_t> m_values, std::size_t trials, double sigma,
                              std::uint64_t seed, std::size_t quadrature_points = kDefaultQuadrature);

// Least-squares line through (x, y); returns (slope, intercept).
std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y);

}  // namespace gkn
