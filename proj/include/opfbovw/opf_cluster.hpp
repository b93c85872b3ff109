#pragma once

#include <algorithm>
#include <limits>
#include <map>
#include <optional>
#include <queue>
#include <tuple>
#include <vector>

#include "opfbovw/core.hpp"
#include "opfbovw/knn_graph.hpp"
#include "opfbovw/parallel.hpp"

namespace opfbovw {

inline constexpr std::size_t kNil = std::numeric_limits<std::size_t>::max();

// Output of an optimum-path competition. pred[i] == kNil exactly for prototypes.
struct Forest {
  std::vector<double> cost;
  std::vector<std::size_t> pred;
  std::vector<std::size_t> root;
  std::vector<std::size_t> label;
  std::vector<std::size_t> prototypes;  // in election order

  std::size_t size() const noexcept { return cost.size(); }
  friend bool operator==(const Forest&, const Forest&) = default;
};

struct Delta {
  double value = 0.0;
  // No adjacent pair has distinct densities: the whole graph is one plateau.
  bool degenerate = false;
};

// Smallest density gap over arcs whose endpoints differ in density.
inline Delta compute_delta(const KnnGraph& g) {
  if (g.rho.size() != g.size()) throw InputError("densities not computed");
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < g.size(); ++i)
    for (const auto& arc : g.adjacency[i]) {
      const double gap = std::abs(g.rho[i] - g.rho[arc.target]);
      if (gap > KnnGraph::kPlateauTolerance) best = std::min(best, gap);
    }
  if (best == std::numeric_limits<double>::infinity()) return {0.0, true};
  return {best, false};
}

namespace detail {

// Max-heap competition shared by clustering and the k-NN classifier.
//
// Every node starts at rho - delta without predecessor. The node with the highest cost
// (lowest index on ties) is popped; if nobody conquered it, it becomes a prototype with
// cost rho and label root_label(node, prototype_ordinal). It then offers
// min(cost[node], rho[t]) to each neighbor t still queued; only offers strictly greater
// than cost[t] conquer t.
template <class RootLabel>
Forest compete(const KnnGraph& g, double delta, RootLabel&& root_label) {
  const std::size_t n = g.size();
  if (g.rho.size() != n) throw InputError("densities not computed");
  Forest f;
  f.cost.resize(n);
  f.pred.assign(n, kNil);
  f.root.assign(n, kNil);
  f.label.assign(n, 0);
  for (std::size_t i = 0; i < n; ++i) f.cost[i] = g.rho[i] - delta;

  using Entry = std::pair<double, std::size_t>;
  auto lower_priority = [](const Entry& a, const Entry& b) {
    return a.first < b.first || (a.first == b.first && a.second > b.second);
  };
  std::priority_queue<Entry, std::vector<Entry>, decltype(lower_priority)> queue(lower_priority);
  for (std::size_t i = 0; i < n; ++i) queue.emplace(f.cost[i], i);

  std::vector<bool> done(n, false);
  while (!queue.empty()) {
    const auto [c, s] = queue.top();
    queue.pop();
    if (done[s] || c != f.cost[s]) continue;
    done[s] = true;
    if (f.pred[s] == kNil) {
      f.root[s] = s;
      f.cost[s] = g.rho[s];
      f.label[s] = root_label(s, f.prototypes.size());
      f.prototypes.push_back(s);
    } else {
      f.root[s] = f.root[f.pred[s]];
      f.label[s] = f.label[f.pred[s]];
    }
    for (const auto& arc : g.adjacency[s]) {
      const std::size_t t = arc.target;
      if (done[t]) continue;
      const double offer = std::min(f.cost[s], g.rho[t]);
      if (offer > f.cost[t]) {
        f.cost[t] = offer;
        f.pred[t] = s;
        queue.emplace(offer, t);
      }
    }
  }
  return f;
}

}  // namespace detail

// Unsupervised OPF: each prototype's tree becomes a cluster, numbered in election order.
inline Forest cluster(const KnnGraph& g) {
  const Delta delta = compute_delta(g);
  return detail::compete(g, delta.value,
                         [](std::size_t, std::size_t ordinal) { return ordinal; });
}

// Sum over clusters c of W'(c) / (W(c) + W'(c)). Arcs are taken as undirected edges (each
// node pair once) with similarity 1 / (d + 1e-12); W is the weight inside c and W' the
// weight of edges with exactly one endpoint in c.
inline double normalized_cut(const KnnGraph& g, std::span<const std::size_t> labels) {
  constexpr double kEps = 1e-12;
  if (labels.size() != g.size()) throw InputError("label count does not match node count");
  std::vector<std::tuple<std::size_t, std::size_t, double>> edges;
  for (std::size_t i = 0; i < g.size(); ++i)
    for (const auto& arc : g.adjacency[i])
      edges.emplace_back(std::min(i, arc.target), std::max(i, arc.target), arc.weight);
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end(),
                          [](const auto& a, const auto& b) {
                            return std::get<0>(a) == std::get<0>(b) &&
                                   std::get<1>(a) == std::get<1>(b);
                          }),
              edges.end());

  const std::size_t n_labels =
      labels.empty() ? 0 : *std::max_element(labels.begin(), labels.end()) + 1;
  std::vector<double> internal(n_labels, 0.0), leaving(n_labels, 0.0);
  for (const auto& [a, b, d] : edges) {
    const double w = 1.0 / (d + kEps);
    if (labels[a] == labels[b]) {
      internal[labels[a]] += w;
    } else {
      leaving[labels[a]] += w;
      leaving[labels[b]] += w;
    }
  }
  double cut = 0.0;
  for (std::size_t c = 0; c < n_labels; ++c) {
    const double total = internal[c] + leaving[c];
    if (total > 0.0) cut += leaving[c] / total;
  }
  return cut;
}

struct ClusterRun {
  std::size_t k = 0;
  Forest forest;
  std::size_t n_clusters = 0;
  double cut = 0.0;
  // Neighborhood bound actually searched, and whether the requested bound was clamped.
  std::size_t k_max = 0;
  bool k_max_clamped = false;
};

inline ClusterRun cluster_with_k(const NeighborTable& table, std::size_t k) {
  KnnGraph g = graph_from_table(table, k);
  compute_densities(g);
  ClusterRun run;
  run.k = k;
  run.forest = cluster(g);
  run.n_clusters = run.forest.prototypes.size();
  run.cut = normalized_cut(g, run.forest.label);
  return run;
}

// Caches per-k clustering outcomes over one sample pool so several neighborhood bounds
// (best-k searches, dictionary size targeting) can be evaluated without recomputation.
class ClusterSweep {
 public:
  struct Summary {
    std::size_t k = 0;
    std::size_t n_clusters = 0;
    double cut = 0.0;
  };

  ClusterSweep(const DescriptorSet& samples, std::size_t k_cap, std::size_t stride = 1,
               std::size_t workers = worker_count())
      : stride_(std::max<std::size_t>(stride, 1)), workers_(workers) {
    if (samples.size() < 2) throw InputError("clustering needs at least 2 samples");
    if (k_cap < 1) throw InputError("k_max must be >= 1");
    if (k_cap >= samples.size()) {
      k_cap = samples.size() - 1;
      clamped_ = true;
    }
    table_ = compute_neighbor_table(samples, k_cap, workers_);
    for (std::size_t k = 1; k <= k_cap; k += stride_) ks_.push_back(k);
  }

  std::size_t k_cap() const noexcept { return table_.k_max; }
  bool clamped() const noexcept { return clamped_; }
  const std::vector<std::size_t>& ks() const noexcept { return ks_; }

  // Summaries for every searched k <= k_max, computing missing ones.
  std::vector<Summary> summaries(std::size_t k_max) {
    std::vector<std::size_t> missing;
    for (auto k : ks_)
      if (k <= k_max && !cache_.contains(k)) missing.push_back(k);
    std::vector<Summary> fresh(missing.size());
    parallel_for(
        missing.size(),
        [&](std::size_t i) {
          const ClusterRun r = cluster_with_k(table_, missing[i]);
          fresh[i] = {r.k, r.n_clusters, r.cut};
        },
        workers_);
    for (const auto& s : fresh) cache_.emplace(s.k, s);
    std::vector<Summary> out;
    for (const auto& [k, s] : cache_)
      if (k <= k_max) out.push_back(s);
    return out;
  }

  // Minimum-cut summary over searched k <= k_max; ties go to the smaller k.
  Summary best_summary(std::size_t k_max) {
    const auto all = summaries(k_max);
    if (all.empty()) throw InputError("no neighborhood size to search");
    Summary best = all.front();
    for (const auto& s : all)
      if (s.cut < best.cut) best = s;
    return best;
  }

  ClusterRun run(std::size_t k) const {
    ClusterRun r = cluster_with_k(table_, k);
    r.k_max = table_.k_max;
    r.k_max_clamped = clamped_;
    return r;
  }

  ClusterRun best(std::size_t k_max) { return run(best_summary(k_max).k); }

 private:
  std::size_t stride_;
  std::size_t workers_;
  bool clamped_ = false;
  NeighborTable table_;
  std::vector<std::size_t> ks_;
  std::map<std::size_t, Summary> cache_;
};

// Clusters with the neighborhood size in 1..k_max (every `stride`-th value) that minimizes
// the normalized cut. k_max >= samples.size() is clamped to samples.size() - 1 and flagged.
inline ClusterRun best_k(const DescriptorSet& samples, std::size_t k_max, std::size_t stride = 1,
                         std::size_t workers = worker_count()) {
  ClusterSweep sweep(samples, k_max, stride, workers);
  return sweep.best(sweep.k_cap());
}

}  // namespace opfbovw
