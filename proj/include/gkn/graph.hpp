// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0
//
// Spatial graphs over grid nodes: radius-ball connectivity, edge and node
// features, Nystrom node subsampling and evaluation partitioning.

#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "gkn/autodiff.hpp"
#include "gkn/random_fields.hpp"

namespace gkn {

class SamplingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Relative slack on the ball test so that pairs at distance exactly r on a
// uniform grid are treated the same everywhere despite rounding of coordinates.
inline constexpr double kRadiusSlack = 1e-12;

// Messages flow from source y to target x; edges are sorted by target, then source.
struct SpatialGraph {
  int dim = 2;
  std::vector<double> node_coords;       // K x d
  std::vector<std::size_t> node_index;   // position of each node in the parent grid
  std::vector<std::size_t> sources;      // y, length E
  std::vector<std::size_t> targets;      // x, length E
  ad::Tensor edge_features;              // E x 2(d+1): x, y, a(x), a(y)
  ad::Tensor node_inputs;                // K x 2(d+1): x, a(x), a_eps(x), grad a_eps(x)
  std::optional<std::vector<double>> node_targets;  // u at the nodes

  std::size_t num_nodes() const { return node_index.size(); }
  std::size_t num_edges() const { return sources.size(); }
  std::span<const double> coords(std::size_t k) const {
    return {node_coords.data() + k * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
  }
  // Incoming edge count per node.
  std::vector<std::size_t> in_degrees() const;
};

// Per-node channels of one sample on a full grid. Node inputs are the
// coordinates followed by `channels`; edges carry `edge_value` at both ends.
struct NodeFields {
  GridField edge_value;
  std::vector<GridField> channels;
  std::optional<GridField> target;

  std::size_t resolution() const { return edge_value.resolution(); }
  int dim() const { return edge_value.dim(); }
  std::size_t num_nodes() const { return edge_value.size(); }
  void validate() const;
};

// Ordered pairs with 0 < |x - y| <= r. `node_inputs` must already hold K rows.
SpatialGraph build_radius_graph(std::span<const double> coords, int dim, std::span<const double> a_values,
                                ad::Tensor node_inputs, double r);

// Radius graph on the listed grid nodes of `fields`.
SpatialGraph graph_on_nodes(const NodeFields& fields, std::span<const std::size_t> nodes, double r);
SpatialGraph full_grid_graph(const NodeFields& fields, double r);

struct SamplingPlan {
  std::size_t m = 200;
  std::size_t l = 2;
  std::size_t m_test = 200;
  std::size_t l_test = 1;
  double r = 0.25;
  double r_test = 0.25;
  std::uint64_t seed = 0;

  void validate() const;
};

// l independent subgraphs, each on m grid nodes drawn uniformly without replacement.
std::vector<SpatialGraph> nystrom_subsample(const NodeFields& fields, std::size_t m, std::size_t l, double r,
                                            Rng& rng);

// Random permutation of all grid nodes cut into blocks of m (last block may be short).
std::vector<SpatialGraph> partition_for_evaluation(const NodeFields& fields, std::size_t m, double r,
                                                   std::uint64_t seed);

}  // namespace gkn
