// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0
//
// Reference solvers: finite-difference Darcy flow on the unit square with
// homogeneous Dirichlet data, analytic Green's functions, and resolution
// downsampling.

#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "gkn/random_fields.hpp"

namespace gkn {

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class ResolutionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(std::size_t iterations, double residual);
  std::size_t iterations() const { return iterations_; }
  double residual() const { return residual_; }

 private:
  std::size_t iterations_;
  double residual_;
};

// Symmetric positive definite system in compressed sparse row form.
struct SparseSystem {
  std::size_t dimension = 0;
  std::vector<std::size_t> row_ptr;
  std::vector<std::size_t> col_idx;
  std::vector<double> values;
  std::vector<double> rhs;

  double entry(std::size_t i, std::size_t j) const;
  void multiply(const std::vector<double>& x, std::vector<double>& y) const;
  std::vector<double> diagonal() const;
};

enum class InterfaceMean { Arithmetic, Harmonic };

// Five-point discretization of -div(a grad u) = f on the interior nodes,
// boundary nodes eliminated. Unknown ordering: interior (i, j) row-major.
SparseSystem assemble_darcy(const GridField& a, const GridField& f,
                            InterfaceMean mean = InterfaceMean::Arithmetic);

struct CgResult {
  std::vector<double> solution;
  std::size_t iterations = 0;
  double relative_residual = 0.0;
};

// Jacobi-preconditioned conjugate gradients; throws ConvergenceError past max_iter.
CgResult solve_cg(const SparseSystem& system, double tol = 1e-10, std::size_t max_iter = 100000);

// Gaussian elimination with partial pivoting on the dense matrix; small systems only.
std::vector<double> solve_dense(const SparseSystem& system);
inline constexpr std::size_t kDenseSolveLimit = 15 * 15;

// Interior vector <-> full grid with zero boundary.
GridField interior_to_grid(const std::vector<double>& interior, std::size_t resolution);
std::vector<double> grid_to_interior(const GridField& field);

GridField solve_darcy(const GridField& a, const GridField& f, double tol = 1e-10,
                      InterfaceMean mean = InterfaceMean::Arithmetic);

// Strided subsampling; (s - 1) must be a multiple of (s_target - 1).
GridField downsample(const GridField& field, std::size_t s_target);

// Green's function of -u'' = f on [0,1] with u(0) = u(1) = 0.
double green_1d(double x, double y);

// u(x_i) = int_0^1 G(x_i, y) f(y) dy by the trapezoidal rule on the grid of f.
GridField solve_poisson_1d_green(const GridField& f);

// Green's function on the unit disk in polar coordinates, field point (rho, theta),
// source (rho_t, theta_t).
double green_disk(double rho, double theta, double rho_t, double theta_t);

// Largest deviations from G = 0 on the unit circle and from G(x, y) = G(y, x),
// over `pairs` random (field, source) points of the open disk, each measured
// relative to max(1, |G|).
struct DiskGreenCheck {
  std::size_t pairs = 0;
  double max_boundary = 0.0;
  double max_symmetry = 0.0;
};
DiskGreenCheck disk_green_identities(std::size_t pairs, std::uint64_t seed);

}  // namespace gkn
