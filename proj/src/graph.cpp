// Copyright (c) 2026, The gkn authors
// SPDX-License-Identifier: Apache-2.0

#include "gkn/graph.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <string>

namespace gkn {

namespace {

// Uniform bins of side >= r over the bounding box of the nodes.
class CellIndex {
 public:
  CellIndex(std::span<const double> coords, int dim, double r) : dim_(dim) {
    const std::size_t k = coords.size() / static_cast<std::size_t>(dim);
    lo_.assign(2, 0.0);
    std::vector<double> hi(2, 0.0);
    for (int a = 0; a < dim; ++a) {
      lo_[a] = hi[a] = k ? coords[a] : 0.0;
      for (std::size_t i = 0; i < k; ++i) {
        lo_[a] = std::min(lo_[a], coords[i * dim + a]);
        hi[a] = std::max(hi[a], coords[i * dim + a]);
      }
    }
    // bins no smaller than r, and no more of them per axis than ~sqrt(K)
    const double cap = dim == 1 ? static_cast<double>(k) : std::ceil(std::sqrt(static_cast<double>(k)));
    for (int a = 0; a < 2; ++a) {
      const double extent = a < dim ? hi[a] - lo_[a] : 0.0;
      cell_[a] = std::max(r, extent / std::max(cap, 1.0));
      n_[a] = static_cast<std::size_t>(std::floor(extent / cell_[a])) + 1;
    }
    bins_.resize(n_[0] * n_[1]);
    for (std::size_t i = 0; i < k; ++i) bins_[bin_of(coords.subspan(i * dim, dim))].push_back(i);
  }

  std::array<std::size_t, 2> cell_of(std::span<const double> p) const {
    std::array<std::size_t, 2> c{0, 0};
    for (int a = 0; a < dim_; ++a) {
      const double v = std::floor((p[a] - lo_[a]) / cell_[a]);
      c[a] = static_cast<std::size_t>(std::clamp(v, 0.0, static_cast<double>(n_[a] - 1)));
    }
    return c;
  }

  std::size_t bin_of(std::span<const double> p) const {
    const auto c = cell_of(p);
    return c[0] * n_[1] + c[1];
  }

  template <typename Fn>
  void for_each_near(std::span<const double> p, Fn&& fn) const {
    const auto c = cell_of(p);
    const std::size_t i0 = c[0] > 0 ? c[0] - 1 : 0;
    const std::size_t j0 = c[1] > 0 ? c[1] - 1 : 0;
    const std::size_t i1 = std::min(c[0] + 1, n_[0] - 1);
    const std::size_t j1 = std::min(c[1] + 1, n_[1] - 1);
    for (std::size_t i = i0; i <= i1; ++i) {
      for (std::size_t j = j0; j <= j1; ++j) {
        for (std::size_t node : bins_[i * n_[1] + j]) fn(node);
      }
    }
  }

 private:
  int dim_;
  std::array<double, 2> cell_{1.0, 1.0};
  std::vector<double> lo_;
  std::array<std::size_t, 2> n_{1, 1};
  std::vector<std::vector<std::size_t>> bins_;
};

}  // namespace

std::vector<std::size_t> SpatialGraph::in_degrees() const {
  std::vector<std::size_t> deg(num_nodes(), 0);
  for (std::size_t t : targets) ++deg[t];
  return deg;
}

void NodeFields::validate() const {
  const std::size_t s = edge_value.resolution();
  if (s < 2) throw std::invalid_argument("node fields: empty grid");
  if (channels.size() != static_cast<std::size_t>(dim() + 2)) {
    throw std::invalid_argument("node fields: expected " + std::to_string(dim() + 2) + " input channels");
  }
  for (const auto& c : channels) {
    if (c.resolution() != s || c.dim() != dim()) throw std::invalid_argument("node fields: channel grid mismatch");
  }
  if (target && (target->resolution() != s || target->dim() != dim())) {
    throw std::invalid_argument("node fields: target grid mismatch");
  }
}

SpatialGraph build_radius_graph(std::span<const double> coords, int dim, std::span<const double> a_values,
                                ad::Tensor node_inputs, double r) {
  if (!(r > 0.0)) throw std::invalid_argument("radius graph: r must be positive");
  if (dim != 1 && dim != 2) throw std::invalid_argument("radius graph: dimension must be 1 or 2");
  const std::size_t d = static_cast<std::size_t>(dim);
  const std::size_t k = coords.size() / d;
  if (coords.size() != k * d || a_values.size() != k) {
    throw std::invalid_argument("radius graph: coordinate / value count mismatch");
  }
  if (node_inputs.rank() != 2 || node_inputs.rows() != k || node_inputs.cols() != 2 * (d + 1)) {
    throw ad::DimensionError("radius graph: node inputs must be K x 2(d+1)");
  }

  SpatialGraph g;
  g.dim = dim;
  g.node_coords.assign(coords.begin(), coords.end());
  g.node_index.resize(k);
  std::iota(g.node_index.begin(), g.node_index.end(), std::size_t{0});
  g.node_inputs = std::move(node_inputs);

  const double bound = r * (1.0 + kRadiusSlack);
  const CellIndex index(coords, dim, r);
  std::vector<std::size_t> near;
  for (std::size_t x = 0; x < k; ++x) {
    const auto px = coords.subspan(x * d, d);
    near.clear();
    index.for_each_near(px, [&](std::size_t y) {
      if (y == x) return;
      double dist2 = 0.0;
      for (std::size_t a = 0; a < d; ++a) {
        const double diff = px[a] - coords[y * d + a];
        dist2 += diff * diff;
      }
      if (std::sqrt(dist2) <= bound) near.push_back(y);
    });
    std::sort(near.begin(), near.end());
    for (std::size_t y : near) {
      g.sources.push_back(y);
      g.targets.push_back(x);
    }
  }

  const std::size_t e = g.sources.size();
  const std::size_t width = 2 * (d + 1);
  g.edge_features = ad::Tensor({e, width});
  for (std::size_t i = 0; i < e; ++i) {
    double* row = g.edge_features.data() + i * width;
    const std::size_t x = g.targets[i];
    const std::size_t y = g.sources[i];
    for (std::size_t a = 0; a < d; ++a) {
      row[a] = coords[x * d + a];
      row[d + a] = coords[y * d + a];
    }
    row[2 * d] = a_values[x];
    row[2 * d + 1] = a_values[y];
  }
  return g;
}

SpatialGraph graph_on_nodes(const NodeFields& fields, std::span<const std::size_t> nodes, double r) {
  fields.validate();
  const int dim = fields.dim();
  const std::size_t d = static_cast<std::size_t>(dim);
  const std::size_t s = fields.resolution();
  const std::size_t k = nodes.size();
  const std::size_t width = 2 * (d + 1);

  std::vector<double> coords(k * d);
  std::vector<double> a_values(k);
  ad::Tensor inputs({k, width});
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t node = nodes[i];
    if (node >= fields.num_nodes()) throw ad::IndexError("graph: node index outside the grid");
    // i / (s - 1) rather than i * h so that coinciding nodes of different grids agree bit-exactly
    const GridField& grid = fields.edge_value;
    if (dim == 1) {
      coords[i] = grid.coord(node);
    } else {
      coords[i * 2] = grid.coord(node / s);
      coords[i * 2 + 1] = grid.coord(node % s);
    }
    a_values[i] = fields.edge_value[node];
    double* row = inputs.data() + i * width;
    for (std::size_t a = 0; a < d; ++a) row[a] = coords[i * d + a];
    for (std::size_t c = 0; c < fields.channels.size(); ++c) row[d + c] = fields.channels[c][node];
  }

  SpatialGraph g = build_radius_graph(coords, dim, a_values, std::move(inputs), r);
  g.node_index.assign(nodes.begin(), nodes.end());
  if (fields.target) {
    std::vector<double> u(k);
    for (std::size_t i = 0; i < k; ++i) u[i] = (*fields.target)[nodes[i]];
    g.node_targets = std::move(u);
  }
  return g;
}

SpatialGraph full_grid_graph(const NodeFields& fields, double r) {
  std::vector<std::size_t> nodes(fields.num_nodes());
  std::iota(nodes.begin(), nodes.end(), std::size_t{0});
  return graph_on_nodes(fields, nodes, r);
}

void SamplingPlan::validate() const {
  if (m < 2 || m_test < 2) throw SamplingError("sampling plan: m must be at least 2");
  if (l < 1 || l_test < 1) throw SamplingError("sampling plan: l must be at least 1");
  if (!(r > 0.0) || !(r_test > 0.0)) throw SamplingError("sampling plan: radius must be positive");
}

std::vector<SpatialGraph> nystrom_subsample(const NodeFields& fields, std::size_t m, std::size_t l, double r,
                                            Rng& rng) {
  const std::size_t k = fields.num_nodes();
  if (m > k) {
    throw SamplingError("nystrom: cannot draw " + std::to_string(m) + " nodes from " + std::to_string(k));
  }
  std::vector<SpatialGraph> out;
  out.reserve(l);
  std::vector<std::size_t> pool(k);
  for (std::size_t rep = 0; rep < l; ++rep) {
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    // partial Fisher-Yates: the first m entries are a uniform draw without replacement
    for (std::size_t i = 0; i < m; ++i) {
      std::uniform_int_distribution<std::size_t> pick(i, k - 1);
      std::swap(pool[i], pool[pick(rng)]);
    }
    std::vector<std::size_t> nodes(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(m));
    std::sort(nodes.begin(), nodes.end());
    out.push_back(graph_on_nodes(fields, nodes, r));
  }
  return out;
}

std::vector<SpatialGraph> partition_for_evaluation(const NodeFields& fields, std::size_t m, double r,
                                                   std::uint64_t seed) {
  const std::size_t k = fields.num_nodes();
  if (m == 0 || m > k) throw SamplingError("partition: block size must be in [1, K]");
  std::vector<std::size_t> perm(k);
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  Rng rng(seed);
  std::shuffle(perm.begin(), perm.end(), rng);
  std::vector<SpatialGraph> out;
  for (std::size_t start = 0; start < k; start += m) {
    const std::size_t stop = std::min(start + m, k);
    std::vector<std::size_t> block(perm.begin() + static_cast<std::ptrdiff_t>(start),
                                   perm.begin() + static_cast<std::ptrdiff_t>(stop));
    std::sort(block.begin(), block.end());
    out.push_back(graph_on_nodes(fields, block, r));
  }
  return out;
}

}  // namespace gkn
