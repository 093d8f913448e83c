// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0

#include "gkn/pde.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <utility>

namespace gkn {

ConvergenceError::ConvergenceError(std::size_t iterations, double residual)
    : std::runtime_error("cg: no convergence after " + std::to_string(iterations) +
                         " iterations, relative residual " + std::to_string(residual)),
      iterations_(iterations),
      residual_(residual) {}

double SparseSystem::entry(std::size_t i, std::size_t j) const {
  for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) {
    if (col_idx[p] == j) return values[p];
  }
  return 0.0;
}

void SparseSystem::multiply(const std::vector<double>& x, std::vector<double>& y) const {
  y.assign(dimension, 0.0);
  for (std::size_t i = 0; i < dimension; ++i) {
    double acc = 0.0;
    for (std::size_t p = row_ptr[i]; p < row_ptr[i + 1]; ++p) acc += values[p] * x[col_idx[p]];
    y[i] = acc;
  }
}

std::vector<double> SparseSystem::diagonal() const {
  std::vector<double> d(dimension, 0.0);
  for (std::size_t i = 0; i < dimension; ++i) d[i] = entry(i, i);
  return d;
}

SparseSystem assemble_darcy(const GridField& a, const GridField& f, InterfaceMean mean) {
  if (a.dim() != 2 || f.dim() != 2) throw std::invalid_argument("assemble_darcy: fields must be 2d");
  if (a.resolution() != f.resolution()) throw ResolutionError("assemble_darcy: a and f resolutions differ");
  const std::size_t s = a.resolution();
  if (s < 3) throw ResolutionError("assemble_darcy: resolution must be at least 3");
  for (double v : a.values()) {
    if (!(v > 0.0)) throw DomainError("assemble_darcy: coefficient must be positive everywhere");
  }
  const std::size_t n = s - 2;
  const double h = a.spacing();
  const double inv_h2 = 1.0 / (h * h);
  auto face = [mean](double lhs, double rhs) {
    return mean == InterfaceMean::Arithmetic ? 0.5 * (lhs + rhs) : 2.0 * lhs * rhs / (lhs + rhs);
  };
  auto unknown = [n](std::size_t i, std::size_t j) { return (i - 1) * n + (j - 1); };

  SparseSystem sys;
  sys.dimension = n * n;
  sys.row_ptr.reserve(sys.dimension + 1);
  sys.col_idx.reserve(5 * sys.dimension);
  sys.values.reserve(5 * sys.dimension);
  sys.rhs.resize(sys.dimension);
  sys.row_ptr.push_back(0);

  for (std::size_t i = 1; i + 1 < s; ++i) {
    for (std::size_t j = 1; j + 1 < s; ++j) {
      const double c = a.at(i, j);
      const double north = face(c, a.at(i - 1, j)) * inv_h2;
      const double south = face(c, a.at(i + 1, j)) * inv_h2;
      const double west = face(c, a.at(i, j - 1)) * inv_h2;
      const double east = face(c, a.at(i, j + 1)) * inv_h2;
      // columns emitted in increasing order
      if (i > 1) {
        sys.col_idx.push_back(unknown(i - 1, j));
        sys.values.push_back(-north);
      }
      if (j > 1) {
        sys.col_idx.push_back(unknown(i, j - 1));
        sys.values.push_back(-west);
      }
      sys.col_idx.push_back(unknown(i, j));
      sys.values.push_back(north + south + west + east);
      if (j + 2 < s) {
        sys.col_idx.push_back(unknown(i, j + 1));
        sys.values.push_back(-east);
      }
      if (i + 2 < s) {
        sys.col_idx.push_back(unknown(i + 1, j));
        sys.values.push_back(-south);
      }
      sys.row_ptr.push_back(sys.col_idx.size());
      sys.rhs[unknown(i, j)] = f.at(i, j);
    }
  }
  return sys;
}

CgResult solve_cg(const SparseSystem& system, double tol, std::size_t max_iter) {
  const std::size_t n = system.dimension;
  const std::vector<double>& b = system.rhs;
  const std::vector<double> diag = system.diagonal();
  CgResult out;
  out.solution.assign(n, 0.0);

  double b_norm = 0.0;
  for (double v : b) b_norm += v * v;
  b_norm = std::sqrt(b_norm);
  if (b_norm == 0.0) return out;

  std::vector<double> r = b;
  std::vector<double> z(n);
  std::vector<double> p(n);
  std::vector<double> q(n);
  for (std::size_t i = 0; i < n; ++i) z[i] = r[i] / diag[i];
  p = z;
  double rz = 0.0;
  for (std::size_t i = 0; i < n; ++i) rz += r[i] * z[i];

  auto& x = out.solution;
  for (std::size_t it = 1; it <= max_iter; ++it) {
    system.multiply(p, q);
    double pq = 0.0;
    for (std::size_t i = 0; i < n; ++i) pq += p[i] * q[i];
    const double alpha = rz / pq;
    double r_norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      x[i] += alpha * p[i];
      r[i] -= alpha * q[i];
      r_norm += r[i] * r[i];
    }
    r_norm = std::sqrt(r_norm);
    out.iterations = it;
    out.relative_residual = r_norm / b_norm;
    if (out.relative_residual <= tol) break;
    if (it == max_iter) throw ConvergenceError(it, out.relative_residual);
    double rz_next = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = r[i] / diag[i];
      rz_next += r[i] * z[i];
    }
    const double beta = rz_next / rz;
    rz = rz_next;
    for (std::size_t i = 0; i < n; ++i) p[i] = z[i] + beta * p[i];
  }

  // Report the true residual rather than the recursively updated one.
  std::vector<double> ax;
  system.multiply(x, ax);
  double res = 0.0;
  for (std::size_t i = 0; i < n; ++i) res += (b[i] - ax[i]) * (b[i] - ax[i]);
  out.relative_residual = std::sqrt(res) / b_norm;
  return out;
}

std::vector<double> solve_dense(const SparseSystem& system) {
  const std::size_t n = system.dimension;
  if (n > kDenseSolveLimit) throw std::invalid_argument("solve_dense: system too large for a dense solve");
  std::vector<double> m(n * n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t p = system.row_ptr[i]; p < system.row_ptr[i + 1]; ++p) m[i * n + system.col_idx[p]] = system.values[p];
  }
  std::vector<double> x = system.rhs;
  for (std::size_t k = 0; k < n; ++k) {
    std::size_t piv = k;
    for (std::size_t i = k + 1; i < n; ++i) {
      if (std::abs(m[i * n + k]) > std::abs(m[piv * n + k])) piv = i;
    }
    if (m[piv * n + k] == 0.0) throw std::runtime_error("solve_dense: singular matrix");
    if (piv != k) {
      for (std::size_t j = 0; j < n; ++j) std::swap(m[k * n + j], m[piv * n + j]);
      std::swap(x[k], x[piv]);
    }
    for (std::size_t i = k + 1; i < n; ++i) {
      const double factor = m[i * n + k] / m[k * n + k];
      if (factor == 0.0) continue;
      for (std::size_t j = k; j < n; ++j) m[i * n + j] -= factor * m[k * n + j];
      x[i] -= factor * x[k];
    }
  }
  for (std::size_t k = n; k-- > 0;) {
    double acc = x[k];
    for (std::size_t j = k + 1; j < n; ++j) acc -= m[k * n + j] * x[j];
    x[k] = acc / m[k * n + k];
  }
  return x;
}

GridField interior_to_grid(const std::vector<double>& interior, std::size_t resolution) {
  const std::size_t n = resolution - 2;
  if (interior.size() != n * n) throw ResolutionError("interior_to_grid: size mismatch");
  GridField out(resolution, 2);
  for (std::size_t i = 1; i + 1 < resolution; ++i) {
    for (std::size_t j = 1; j + 1 < resolution; ++j) out.at(i, j) = interior[(i - 1) * n + (j - 1)];
  }
  return out;
}

std::vector<double> grid_to_interior(const GridField& field) {
  const std::size_t s = field.resolution();
  std::vector<double> out;
  out.reserve((s - 2) * (s - 2));
  for (std::size_t i = 1; i + 1 < s; ++i) {
    for (std::size_t j = 1; j + 1 < s; ++j) out.push_back(field.at(i, j));
  }
  return out;
}

GridField solve_darcy(const GridField& a, const GridField& f, double tol, InterfaceMean mean) {
  const SparseSystem sys = assemble_darcy(a, f, mean);
  return interior_to_grid(solve_cg(sys, tol).solution, a.resolution());
}

GridField downsample(const GridField& field, std::size_t s_target) {
  const std::size_t s = field.resolution();
  if (s_target < 2 || s_target > s || (s - 1) % (s_target - 1) != 0) {
    throw ResolutionError("downsample: cannot reach " + std::to_string(s_target) + " from " + std::to_string(s));
  }
  const std::size_t stride = (s - 1) / (s_target - 1);
  GridField out(s_target, field.dim());
  if (field.dim() == 1) {
    for (std::size_t i = 0; i < s_target; ++i) out[i] = field[i * stride];
    return out;
  }
  for (std::size_t i = 0; i < s_target; ++i) {
    for (std::size_t j = 0; j < s_target; ++j) out.at(i, j) = field.at(i * stride, j * stride);
  }
  return out;
}

double green_1d(double x, double y) {
  if (!(x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0)) {
    throw DomainError("green_1d: arguments must lie in [0,1]");
  }
  // min(x, y) (1 - max(x, y)) vanishes exactly on the boundary
  return std::min(x, y) * (1.0 - std::max(x, y));
}

GridField solve_poisson_1d_green(const GridField& f) {
  if (f.dim() != 1) throw std::invalid_argument("solve_poisson_1d_green: expects a 1d field");
  const std::size_t s = f.resolution();
  const double h = f.spacing();
  GridField u(s, 1);
  for (std::size_t i = 0; i < s; ++i) {
    const double x = f.coord(i);
    double acc = 0.0;
    for (std::size_t j = 0; j < s; ++j) {
      const double w = (j == 0 || j == s - 1) ? 0.5 * h : h;
      acc += w * green_1d(x, f.coord(j)) * f[j];
    }
    u[i] = acc;
  }
  return u;
}

double green_disk(double rho, double theta, double rho_t, double theta_t) {
  if (!(rho >= 0.0 && rho <= 1.0 && rho_t >= 0.0 && rho_t <= 1.0)) {
    throw DomainError("green_disk: radii must lie in [0,1]");
  }
  const double cross = 2.0 * rho * rho_t * std::cos(theta_t - theta);
  const double num = (rho_t * rho_t + rho * rho) - cross;
  const double den = (rho_t * rho_t * (rho * rho) + 1.0) - cross;
  if (!(num > 0.0)) throw DomainError("green_disk: field and source points coincide");
  return std::log(num / den) / (4.0 * std::numbers::pi);
}

DiskGreenCheck disk_green_identities(std::size_t pairs, std::uint64_t seed) {
  Rng rng(seed);
  std::uniform_real_distribution<double> radius(0.0, 1.0);
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  DiskGreenCheck out;
  while (out.pairs < pairs) {
    const double rho = radius(rng);
    const double theta = angle(rng);
    const double rho_t = radius(rng);
    const double theta_t = angle(rng);
    if (rho == rho_t && theta == theta_t) continue;
    const double g = green_disk(rho, theta, rho_t, theta_t);
    const double swapped = green_disk(rho_t, theta_t, rho, theta);
    out.max_symmetry = std::max(out.max_symmetry, std::abs(g - swapped) / std::max(1.0, std::abs(g)));
    out.max_boundary = std::max(out.max_boundary, std::abs(green_disk(1.0, theta, rho_t, theta_t)));
    ++out.pairs;
  }
  return out;
}

}  // namespace gkn
