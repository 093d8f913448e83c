// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0
//
// Grid fields on [0,1]^d, Gaussian random field sampling by truncated
// Karhunen-Loeve expansion, and coefficient preprocessing (thresholding,
// Gaussian smoothing, gradients).

#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

namespace gkn {

// Scalar field on a uniform grid over [0,1]^d, d in {1,2}, row-major with
// the first coordinate varying slowest. Node (i, j) sits at (i, j) / (s - 1).
class GridField {
 public:
  GridField() = default;
  GridField(std::size_t resolution, int dim);  // zero-filled
  GridField(std::size_t resolution, int dim, std::vector<double> values);

  std::size_t resolution() const { return s_; }
  int dim() const { return d_; }
  double spacing() const { return 1.0 / static_cast<double>(s_ - 1); }
  std::size_t size() const { return values_.size(); }

  std::span<const double> values() const { return values_; }
  std::span<double> values() { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double& operator[](std::size_t i) { return values_[i]; }
  double at(std::size_t i, std::size_t j) const { return values_[i * s_ + j]; }
  double& at(std::size_t i, std::size_t j) { return values_[i * s_ + j]; }

  // Physical coordinate of grid index i along any axis.
  double coord(std::size_t i) const { return static_cast<double>(i) / static_cast<double>(s_ - 1); }

  friend bool operator==(const GridField&, const GridField&) = default;

 private:
  std::size_t s_ = 0;
  int d_ = 0;
  std::vector<double> values_;
};

enum class Boundary : std::uint32_t { Neumann = 0, Periodic = 1 };

// Covariance (-Laplacian + shift I)^(-exponent) with the given boundary condition.
struct GrfSpec {
  double shift = 9.0;
  double exponent = 2.0;
  Boundary boundary = Boundary::Neumann;
  std::size_t kmax = 0;  // 0 selects s - 1
  std::uint64_t seed = 0;

  void validate() const;
  friend bool operator==(const GrfSpec&, const GrfSpec&) = default;
};

GrfSpec darcy_coefficient_spec(std::uint64_t seed);  // shift 9, exponent 2, Neumann
GrfSpec poisson_forcing_spec(std::uint64_t seed);    // shift 1, exponent 1, periodic

using Rng = std::mt19937_64;

// Child stream `index` of a root seed: mt19937_64 seeded with
// splitmix64(seed ^ splitmix64(index + 1)). Used once per sample index.
Rng child_stream(std::uint64_t seed, std::uint64_t index);
std::uint64_t splitmix64(std::uint64_t x);

class AliasingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// One KL mode: per-axis wave numbers and sqrt eigenvalue.
struct KlMode {
  int k1 = 0;
  int k2 = 0;
  bool sine = false;  // periodic modes come in cosine/sine pairs
  double sqrt_lambda = 0.0;
};

// Modes in the order their standard normal coefficients are drawn.
std::vector<KlMode> kl_modes(const GrfSpec& spec, std::size_t resolution, int dim);

// Evaluate sum_k xi_k sqrt(lambda_k) phi_k on the grid for given coefficients.
GridField kl_synthesize(const GrfSpec& spec, std::size_t resolution, int dim, std::span<const double> xi);

GridField sample_grf(const GrfSpec& spec, std::size_t resolution, int dim, Rng& rng);
GridField sample_grf(const GrfSpec& spec, std::size_t resolution, int dim);  // uses spec.seed

// Pointwise: >= 0 -> 12, < 0 -> 3.
GridField threshold_psi(const GridField& field);
inline constexpr double kPsiHigh = 12.0;
inline constexpr double kPsiLow = 3.0;

GridField sample_forcing_1d(const GrfSpec& spec, std::size_t resolution, Rng& rng);

// Normalized isotropic Gaussian blur, variance in grid-index units squared,
// truncated at 3 standard deviations per axis, whole-sample mirror padding.
inline constexpr double kSmoothingVariance = 5.0;
GridField gaussian_smooth(const GridField& field, double variance = kSmoothingVariance);

// (d/dx1, d/dx2) by central differences inside, one-sided on the boundary.
std::pair<GridField, GridField> gradient_field(const GridField& field);

}  // namespace gkn
