// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0

#include "gkn/dataset.hpp"

#include <numeric>
#include <stdexcept>

#include "gkn/pde.hpp"

namespace gkn {

void Dataset::validate() const {
  if (dim != 2) throw std::invalid_argument("dataset: only 2-d Darcy data is supported");
  if (resolution < 3) throw std::invalid_argument("dataset: resolution must be at least 3");
  if (coefficients.size() != solutions.size()) throw std::invalid_argument("dataset: a/u count mismatch");
  for (std::size_t i = 0; i < size(); ++i) {
    const auto& a = coefficients[i];
    const auto& u = solutions[i];
    if (a.resolution() != resolution || u.resolution() != resolution || a.dim() != dim || u.dim() != dim) {
      throw std::invalid_argument("dataset: sample " + std::to_string(i) + " has the wrong grid");
    }
  }
}

Dataset generate_darcy_dataset(std::size_t resolution, std::size_t samples, std::uint64_t seed, double tol,
                               const std::function<void(std::size_t)>& on_sample) {
  Dataset data;
  data.resolution = resolution;
  data.grf = darcy_coefficient_spec(seed);
  data.seed = seed;
  const GridField forcing(resolution, 2, std::vector<double>(resolution * resolution, 1.0));
  for (std::size_t i = 0; i < samples; ++i) {
    Rng rng = child_stream(seed, i);
    GridField a = threshold_psi(sample_grf(data.grf, resolution, 2, rng));
    GridField u = solve_darcy(a, forcing, tol);
    data.coefficients.push_back(std::move(a));
    data.solutions.push_back(std::move(u));
    if (on_sample) on_sample(i);
  }
  return data;
}

std::vector<NodeFields> prepare_fields(const Dataset& data, std::span<const std::size_t> indices, std::size_t s) {
  data.validate();
  std::vector<NodeFields> out;
  out.reserve(indices.size());
  for (std::size_t idx : indices) {
    if (idx >= data.size()) throw std::out_of_range("dataset: sample index " + std::to_string(idx));
    const GridField& a = data.coefficients[idx];
    const GridField smooth = gaussian_smooth(a);
    const auto [g1, g2] = gradient_field(smooth);
    NodeFields f;
    f.edge_value = downsample(a, s);
    f.channels = {f.edge_value, downsample(smooth, s), downsample(g1, s), downsample(g2, s)};
    f.target = downsample(data.solutions[idx], s);
    out.push_back(std::move(f));
  }
  return out;
}

std::vector<std::size_t> index_range(std::size_t first, std::size_t count) {
  std::vector<std::size_t> v(count);
  std::iota(v.begin(), v.end(), first);
  return v;
}

}  // namespace gkn
