// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0

#include "gkn/nystrom.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <tuple>

#include "gkn/random_fields.hpp"

namespace gkn {

Kernel1d gaussian_kernel(double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("gaussian kernel: sigma must be positive");
  return [sigma](double x, double y) {
    const double d = (x - y) / sigma;
    return std::exp(-d * d);
  };
}

Quadrature simpson_rule(std::size_t points) {
  if (points < 3 || points % 2 == 0) throw std::invalid_argument("simpson: point count must be odd and >= 3");
  Quadrature q;
  const double h = 1.0 / static_cast<double>(points - 1);
  for (std::size_t i = 0; i < points; ++i) {
    q.nodes.push_back(static_cast<double>(i) / static_cast<double>(points - 1));
    const double w = (i == 0 || i + 1 == points) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    q.weights.push_back(w * h / 3.0);
  }
  return q;
}

HsDistance::HsDistance(Kernel1d kernel, std::size_t quadrature_points)
    : kernel_(std::move(kernel)), rule_(simpson_rule(quadrature_points)) {
  double total = 0.0;
  for (std::size_t i = 0; i < rule_.nodes.size(); ++i) total += rule_.weights[i] * row_integral(rule_.nodes[i]);
  double_integral_ = total;
}

double HsDistance::row_integral(double y) const {
  double total = 0.0;
  for (std::size_t j = 0; j < rule_.nodes.size(); ++j) {
    const double k = kernel_(y, rule_.nodes[j]);
    total += rule_.weights[j] * k * k;
  }
  return total;
}

double HsDistance::squared(std::span<const double> sample) const {
  if (sample.empty()) throw std::invalid_argument("hs distance: empty sample");
  const double m = static_cast<double>(sample.size());
  double pair = 0.0;
  for (double yi : sample) {
    for (double yj : sample) {
      const double k = kernel_(yi, yj);
      pair += k * k;
    }
  }
  double cross = 0.0;
  for (double yi : sample) cross += row_integral(yi);
  return pair / (m * m) - 2.0 * cross / m + double_integral_;
}

double hs_distance_squared(const Kernel1d& kernel, std::span<const double> sample, std::size_t quadrature_points) {
  return HsDistance(kernel, quadrature_points).squared(sample);
}

std::pair<double, double> fit_line(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("fit_line: need two or more points");
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  const double slope = sxy / sxx;
  return {slope, my - slope * mx};
}

RateReport mc_rate_experiment(std::span<const std::size_t> m_values, std::size_t trials, double sigma,
                              std::uint64_t seed, std::size_t quadrature_points) {
  if (m_values.size() < 2) throw std::invalid_argument("rate experiment: need at least two m values");
  if (trials < 1) throw std::invalid_argument("rate experiment: need at least one trial");
  for (std::size_t i = 0; i < m_values.size(); ++i) {
    if (m_values[i] < 1 || (i > 0 && m_values[i] <= m_values[i - 1])) {
      throw std::invalid_argument("rate experiment: m values must be positive and strictly increasing");
    }
  }
  const HsDistance hs(gaussian_kernel(sigma), quadrature_points);
  RateReport report;
  report.trials = trials;
  report.sigma = sigma;
  report.quadrature_points = quadrature_points;
  std::vector<double> lx;
  std::vector<double> ly;
  std::vector<double> sample;
  for (std::size_t i = 0; i < m_values.size(); ++i) {
    const std::size_t m = m_values[i];
    double total = 0.0;
    for (std::size_t t = 0; t < trials; ++t) {
      Rng rng = child_stream(seed, i * trials + t);
      std::uniform_real_distribution<double> unit(0.0, 1.0);
      sample.resize(m);
      for (double& y : sample) y = unit(rng);
      total += std::sqrt(std::max(hs.squared(sample), 0.0));
    }
    report.m_values.push_back(m);
    report.mean_distance.push_back(total / static_cast<double>(trials));
    lx.push_back(std::log(static_cast<double>(m)));
    ly.push_back(std::log(report.mean_distance.back()));
  }
  std::tie(report.slope, report.intercept) = fit_line(lx, ly);
  return report;
}

}  // namespace gkn
