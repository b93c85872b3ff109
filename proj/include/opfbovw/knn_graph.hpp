#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "opfbovw/core.hpp"
#include "opfbovw/parallel.hpp"

namespace opfbovw {

struct Arc {
  std::size_t target = 0;
  double weight = 0.0;
  friend bool operator==(const Arc&, const Arc&) = default;
};

// Directed k-NN adjacency with Gaussian node densities.
//
// adjacency[i] starts as the k nearest neighbors of i sorted by (distance, index).
// Once densities are known, plateau arcs are appended: when j is a neighbor of i with
// rho(i) == rho(j) (to kPlateauTolerance) and i is not a neighbor of j, the reverse arc
// j -> i is added. `knn_degree[i]` keeps the original neighbor count.
struct KnnGraph {
  static constexpr double kPlateauTolerance = 1e-12;

  std::size_t k = 0;
  std::vector<std::vector<Arc>> adjacency;
  std::vector<std::size_t> knn_degree;
  double d_max = 0.0;
  double sigma = 0.0;  // d_max / 3
  std::vector<double> rho;
  // Set when every arc has zero weight; densities then use sigma = 1.
  bool degenerate = false;

  std::size_t size() const noexcept { return adjacency.size(); }
  double effective_sigma() const noexcept { return degenerate ? 1.0 : sigma; }
};

// All neighbors of every node up to k_max, sorted by (distance, index). Graphs for any
// k <= k_max are prefixes of these lists.
struct NeighborTable {
  std::size_t k_max = 0;
  std::vector<std::vector<Arc>> neighbors;
};

inline NeighborTable compute_neighbor_table(const DescriptorSet& samples, std::size_t k_max,
                                            std::size_t workers = worker_count()) {
  const std::size_t n = samples.size();
  if (n < 2) throw InputError("k-NN graph needs at least 2 samples");
  if (k_max < 1 || k_max >= n)
    throw InputError("k = " + std::to_string(k_max) + " outside [1, " + std::to_string(n - 1) +
                     "]");
  NeighborTable table{k_max, std::vector<std::vector<Arc>>(n)};
  parallel_for(
      n,
      [&](std::size_t i) {
        std::vector<Arc> all;
        all.reserve(n - 1);
        for (std::size_t j = 0; j < n; ++j)
          if (j != i) all.push_back({j, detail::euclidean(samples[i], samples[j])});
        auto closer = [](const Arc& a, const Arc& b) {
          return a.weight < b.weight || (a.weight == b.weight && a.target < b.target);
        };
        std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(k_max),
                          all.end(), closer);
        all.resize(k_max);
        table.neighbors[i] = std::move(all);
      },
      workers);
  return table;
}

// Wraps explicit arcs (e.g. a hand-built fixture) into a graph; d_max is the largest arc.
inline KnnGraph graph_from_arcs(std::vector<std::vector<Arc>> adjacency, std::size_t k) {
  KnnGraph g;
  g.k = k;
  g.adjacency = std::move(adjacency);
  g.knn_degree.reserve(g.size());
  for (const auto& arcs : g.adjacency) {
    g.knn_degree.push_back(arcs.size());
    for (const auto& a : arcs) {
      if (a.weight < 0.0 || !std::isfinite(a.weight))
        throw InputError("arc weights must be finite and non-negative");
      g.d_max = std::max(g.d_max, a.weight);
    }
  }
  g.sigma = g.d_max / 3.0;
  g.degenerate = g.d_max == 0.0;
  return g;
}

inline KnnGraph graph_from_table(const NeighborTable& table, std::size_t k) {
  if (k < 1 || k > table.k_max) throw InputError("k outside the neighbor table range");
  std::vector<std::vector<Arc>> adjacency(table.neighbors.size());
  for (std::size_t i = 0; i < adjacency.size(); ++i)
    adjacency[i].assign(table.neighbors[i].begin(),
                        table.neighbors[i].begin() + static_cast<std::ptrdiff_t>(k));
  return graph_from_arcs(std::move(adjacency), k);
}

inline KnnGraph build_knn_graph(const DescriptorSet& samples, std::size_t k) {
  return graph_from_table(compute_neighbor_table(samples, k), k);
}

namespace detail {

inline void extend_plateaus(KnnGraph& g) {
  const std::size_t n = g.size();
  for (std::size_t i = 0; i < n; ++i) g.adjacency[i].resize(g.knn_degree[i]);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < g.knn_degree[i]; ++a) {
      const auto [j, w] = g.adjacency[i][a];
      if (std::abs(g.rho[i] - g.rho[j]) > KnnGraph::kPlateauTolerance) continue;
      auto& back = g.adjacency[j];
      const bool has = std::any_of(back.begin(), back.end(),
                                   [i](const Arc& arc) { return arc.target == i; });
      if (!has) back.push_back({i, w});
    }
  }
}

}  // namespace detail

// Gaussian density over each node's k-NN arcs:
//   rho(i) = 1 / (sqrt(2 pi sigma^2) k) * sum_j exp(-d(i, j) / (2 sigma^2)),  sigma = d_max / 3.
// Applies plateau extension afterwards. Returns the stored densities.
inline const std::vector<double>& compute_densities(KnnGraph& g) {
  const double sigma = g.effective_sigma();
  const double two_var = 2.0 * sigma * sigma;
  const double norm = 1.0 / (std::sqrt(2.0 * std::numbers::pi * sigma * sigma) *
                             static_cast<double>(g.k));
  g.rho.assign(g.size(), 0.0);
  for (std::size_t i = 0; i < g.size(); ++i) {
    double acc = 0.0;
    for (std::size_t a = 0; a < g.knn_degree[i]; ++a)
      acc += std::exp(-g.adjacency[i][a].weight / two_var);
    g.rho[i] = norm * acc;
  }
  detail::extend_plateaus(g);
  return g.rho;
}

// Installs externally supplied densities (fixtures, replays) and applies plateau extension.
inline void set_densities(KnnGraph& g, std::vector<double> rho) {
  if (rho.size() != g.size()) throw InputError("density count does not match node count");
  g.rho = std::move(rho);
  detail::extend_plateaus(g);
}

}  // namespace opfbovw
