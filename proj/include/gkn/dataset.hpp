// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0
//
// Darcy coefficient/solution pairs and their per-node feature channels.

#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "gkn/graph.hpp"
#include "gkn/random_fields.hpp"

namespace gkn {

inline constexpr const char* kUnitForcing = "constant:1";

struct Dataset {
  int dim = 2;
  std::size_t resolution = 0;
  std::string forcing = kUnitForcing;
  GrfSpec grf;
  std::uint64_t seed = 0;
  std::vector<GridField> coefficients;  // a
  std::vector<GridField> solutions;     // u

  std::size_t size() const { return coefficients.size(); }
  void validate() const;
  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// Sample i draws a = psi(GRF) from child stream i of `seed` and solves
// -div(a grad u) = 1 with zero Dirichlet data.
Dataset generate_darcy_dataset(std::size_t resolution, std::size_t samples, std::uint64_t seed,
                               double tol = 1e-10,
                               const std::function<void(std::size_t)>& on_sample = {});

// Raw (unnormalized) node channels of the listed pairs at resolution s:
// edge value a, channels (a, a_eps, d a_eps/dx1, d a_eps/dx2), target u.
// Smoothing and gradients are taken on the dataset grid, then downsampled.
std::vector<NodeFields> prepare_fields(const Dataset& data, std::span<const std::size_t> indices,
                                       std::size_t s);

// Indices [first, first + count).
std::vector<std::size_t> index_range(std::size_t first, std::size_t count);

}  // namespace gkn
