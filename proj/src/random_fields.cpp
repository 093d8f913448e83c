// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0

#include "gkn/random_fields.hpp"

#include <Eigen/Core>

#include <cmath>
#include <numbers>
#include <string>

namespace gkn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::size_t effective_kmax(const GrfSpec& spec, std::size_t s) {
  const std::size_t kmax = spec.kmax == 0 ? s - 1 : spec.kmax;
  if (kmax > s) {
    throw AliasingError("kl: kmax " + std::to_string(kmax) + " exceeds resolution " + std::to_string(s));
  }
  return kmax;
}

void check_grid(std::size_t s, int d) {
  if (s < 2) throw std::invalid_argument("grid: resolution must be at least 2");
  if (d != 1 && d != 2) throw std::invalid_argument("grid: dimension must be 1 or 2");
}

double eigenvalue_sqrt(const GrfSpec& spec, double wave_sq) {
  return std::pow(wave_sq + spec.shift, -0.5 * spec.exponent);
}

// Basis tables: table[i][k] = trig(freq * k * x_i) for k in [kmin, kmax].
RowMat trig_table(std::size_t s, int kmin, int kmax, double freq, bool sine) {
  RowMat t(static_cast<Eigen::Index>(s), kmax - kmin + 1);
  const double h = 1.0 / static_cast<double>(s - 1);
  for (std::size_t i = 0; i < s; ++i) {
    const double x = static_cast<double>(i) * h;
    for (int k = kmin; k <= kmax; ++k) {
      const double arg = freq * k * x;
      t(static_cast<Eigen::Index>(i), k - kmin) = sine ? std::sin(arg) : std::cos(arg);
    }
  }
  return t;
}

std::size_t mirror(long idx, std::size_t s) {
  const long period = 2 * (static_cast<long>(s) - 1);
  if (period == 0) return 0;
  long r = idx % period;
  if (r < 0) r += period;
  if (r >= static_cast<long>(s)) r = period - r;
  return static_cast<std::size_t>(r);
}

}  // namespace

GridField::GridField(std::size_t resolution, int dim) : s_(resolution), d_(dim) {
  check_grid(resolution, dim);
  values_.assign(dim == 1 ? s_ : s_ * s_, 0.0);
}

GridField::GridField(std::size_t resolution, int dim, std::vector<double> values)
    : s_(resolution), d_(dim), values_(std::move(values)) {
  check_grid(resolution, dim);
  const std::size_t expected = dim == 1 ? s_ : s_ * s_;
  if (values_.size() != expected) {
    throw std::invalid_argument("grid: expected " + std::to_string(expected) + " values, got " +
                                std::to_string(values_.size()));
  }
}

void GrfSpec::validate() const {
  if (!(shift > 0.0)) throw std::invalid_argument("grf: shift must be positive");
  if (!(exponent > 0.0)) throw std::invalid_argument("grf: exponent must be positive");
}

GrfSpec darcy_coefficient_spec(std::uint64_t seed) {
  return GrfSpec{.shift = 9.0, .exponent = 2.0, .boundary = Boundary::Neumann, .kmax = 0, .seed = seed};
}

GrfSpec poisson_forcing_spec(std::uint64_t seed) {
  return GrfSpec{.shift = 1.0, .exponent = 1.0, .boundary = Boundary::Periodic, .kmax = 0, .seed = seed};
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

Rng child_stream(std::uint64_t seed, std::uint64_t index) {
  return Rng(splitmix64(seed ^ splitmix64(index + 1)));
}

std::vector<KlMode> kl_modes(const GrfSpec& spec, std::size_t resolution, int dim) {
  spec.validate();
  check_grid(resolution, dim);
  const int kmax = static_cast<int>(effective_kmax(spec, resolution));
  constexpr double pi = std::numbers::pi;
  std::vector<KlMode> modes;
  if (spec.boundary == Boundary::Neumann) {
    const int k2max = dim == 2 ? kmax : 0;
    for (int k1 = 0; k1 <= kmax; ++k1) {
      for (int k2 = 0; k2 <= k2max; ++k2) {
        const double wave_sq = pi * pi * static_cast<double>(k1 * k1 + k2 * k2);
        modes.push_back({k1, k2, false, eigenvalue_sqrt(spec, wave_sq)});
      }
    }
    return modes;
  }
  const double two_pi = 2.0 * pi;
  modes.push_back({0, 0, false, eigenvalue_sqrt(spec, 0.0)});
  const int k2lo = dim == 2 ? -kmax : 0;
  const int k2hi = dim == 2 ? kmax : 0;
  for (int k1 = 0; k1 <= kmax; ++k1) {
    for (int k2 = k2lo; k2 <= k2hi; ++k2) {
      if (k1 == 0 && k2 <= 0) continue;  // half-plane of wave vectors
      const double wave_sq = two_pi * two_pi * static_cast<double>(k1 * k1 + k2 * k2);
      const double sl = eigenvalue_sqrt(spec, wave_sq);
      modes.push_back({k1, k2, false, sl});
      modes.push_back({k1, k2, true, sl});
    }
  }
  return modes;
}

GridField kl_synthesize(const GrfSpec& spec, std::size_t resolution, int dim, std::span<const double> xi) {
  const auto modes = kl_modes(spec, resolution, dim);
  if (xi.size() != modes.size()) {
    throw std::invalid_argument("kl: expected " + std::to_string(modes.size()) + " coefficients");
  }
  const std::size_t s = resolution;
  const int kmax = static_cast<int>(effective_kmax(spec, s));
  constexpr double pi = std::numbers::pi;
  const double sqrt2 = std::numbers::sqrt2;
  GridField out(s, dim);

  if (spec.boundary == Boundary::Neumann) {
    const int k2max = dim == 2 ? kmax : 0;
    RowMat coef = RowMat::Zero(kmax + 1, k2max + 1);
    for (std::size_t m = 0; m < modes.size(); ++m) {
      const auto& md = modes[m];
      const double c = (md.k1 == 0 ? 1.0 : sqrt2) * (md.k2 == 0 ? 1.0 : sqrt2);
      coef(md.k1, md.k2) = xi[m] * md.sqrt_lambda * c;
    }
    const RowMat c1 = trig_table(s, 0, kmax, pi, false);
    if (dim == 1) {
      Eigen::Map<Eigen::VectorXd>(out.values().data(), static_cast<Eigen::Index>(s)) = c1 * coef.col(0);
    } else {
      Eigen::Map<RowMat>(out.values().data(), static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) =
          c1 * coef * c1.transpose();
    }
    return out;
  }

  const double two_pi = 2.0 * pi;
  const int k2lo = dim == 2 ? -kmax : 0;
  const int k2hi = dim == 2 ? kmax : 0;
  RowMat ca = RowMat::Zero(kmax + 1, k2hi - k2lo + 1);
  RowMat sa = RowMat::Zero(kmax + 1, k2hi - k2lo + 1);
  double constant = 0.0;
  for (std::size_t m = 0; m < modes.size(); ++m) {
    const auto& md = modes[m];
    if (md.k1 == 0 && md.k2 == 0) {
      constant = xi[m] * md.sqrt_lambda;
      continue;
    }
    (md.sine ? sa : ca)(md.k1, md.k2 - k2lo) = xi[m] * md.sqrt_lambda * sqrt2;
  }
  const RowMat c1 = trig_table(s, 0, kmax, two_pi, false);
  const RowMat s1 = trig_table(s, 0, kmax, two_pi, true);
  if (dim == 1) {
    Eigen::Map<Eigen::VectorXd> v(out.values().data(), static_cast<Eigen::Index>(s));
    v = c1 * ca.col(0) + s1 * sa.col(0);
    v.array() += constant;
    return out;
  }
  const RowMat c2 = trig_table(s, k2lo, k2hi, two_pi, false);
  const RowMat s2 = trig_table(s, k2lo, k2hi, two_pi, true);
  // cos(a+b) = cos a cos b - sin a sin b; sin(a+b) = sin a cos b + cos a sin b
  RowMat f = c1 * ca * c2.transpose() - s1 * ca * s2.transpose() + s1 * sa * c2.transpose() + c1 * sa * s2.transpose();
  f.array() += constant;
  Eigen::Map<RowMat>(out.values().data(), static_cast<Eigen::Index>(s), static_cast<Eigen::Index>(s)) = f;
  return out;
}

GridField sample_grf(const GrfSpec& spec, std::size_t resolution, int dim, Rng& rng) {
  const std::size_t count = kl_modes(spec, resolution, dim).size();
  std::normal_distribution<double> normal(0.0, 1.0);
  std::vector<double> xi(count);
  for (double& v : xi) v = normal(rng);
  return kl_synthesize(spec, resolution, dim, xi);
}

GridField sample_grf(const GrfSpec& spec, std::size_t resolution, int dim) {
  Rng rng(spec.seed);
  return sample_grf(spec, resolution, dim, rng);
}

GridField threshold_psi(const GridField& field) {
  GridField out = field;
  for (double& v : out.values()) v = v >= 0.0 ? kPsiHigh : kPsiLow;
  return out;
}

GridField sample_forcing_1d(const GrfSpec& spec, std::size_t resolution, Rng& rng) {
  if (spec.boundary != Boundary::Periodic) {
    throw std::invalid_argument("forcing: the 1d forcing measure uses periodic boundary conditions");
  }
  return sample_grf(spec, resolution, 1, rng);
}

GridField gaussian_smooth(const GridField& field, double variance) {
  if (field.dim() != 2) throw std::invalid_argument("gaussian_smooth: expects a 2d field");
  if (!(variance > 0.0)) throw std::invalid_argument("gaussian_smooth: variance must be positive");
  const double sigma = std::sqrt(variance);
  const long radius = static_cast<long>(std::floor(3.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (long t = -radius; t <= radius; ++t) {
    const double v = std::exp(-static_cast<double>(t * t) / (2.0 * variance));
    w[static_cast<std::size_t>(t + radius)] = v;
    total += v;
  }
  for (double& v : w) v /= total;

  const std::size_t s = field.resolution();
  GridField rows(s, 2);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      double acc = 0.0;
      for (long t = -radius; t <= radius; ++t) {
        acc += w[static_cast<std::size_t>(t + radius)] * field.at(i, mirror(static_cast<long>(j) + t, s));
      }
      rows.at(i, j) = acc;
    }
  }
  GridField out(s, 2);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      double acc = 0.0;
      for (long t = -radius; t <= radius; ++t) {
        acc += w[static_cast<std::size_t>(t + radius)] * rows.at(mirror(static_cast<long>(i) + t, s), j);
      }
      out.at(i, j) = acc;
    }
  }
  return out;
}

std::pair<GridField, GridField> gradient_field(const GridField& field) {
  if (field.dim() != 2) throw std::invalid_argument("gradient_field: expects a 2d field");
  const std::size_t s = field.resolution();
  if (s < 3) throw std::invalid_argument("gradient_field: resolution must be at least 3");
  const double h = field.spacing();
  auto diff = [&](auto get) {
    // get(k) reads the field along the differentiated axis
    return [=](std::size_t k) {
      if (k == 0) return (-3.0 * get(0) + 4.0 * get(1) - get(2)) / (2.0 * h);
      if (k == s - 1) return (3.0 * get(s - 1) - 4.0 * get(s - 2) + get(s - 3)) / (2.0 * h);
      return (get(k + 1) - get(k - 1)) / (2.0 * h);
    };
  };
  GridField d1(s, 2);
  GridField d2(s, 2);
  for (std::size_t i = 0; i < s; ++i) {
    for (std::size_t j = 0; j < s; ++j) {
      d1.at(i, j) = diff([&, j](std::size_t k) { return field.at(k, j); })(i);
      d2.at(i, j) = diff([&, i](std::size_t k) { return field.at(i, k); })(j);
    }
  }
  return {std::move(d1), std::move(d2)};
}

}  // namespace gkn
