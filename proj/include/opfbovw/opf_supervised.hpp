#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>
#include <span>
#include <utility>
#include <vector>

#include "opfbovw/core.hpp"
#include "opfbovw/knn_graph.hpp"
#include "opfbovw/opf_cluster.hpp"
#include "opfbovw/parallel.hpp"
#include "opfbovw/split.hpp"

namespace opfbovw {

struct Prediction {
  Label label = 0;
  double score = 0.0;
  std::size_t node = kNil;  // training node that decided the label
};

namespace detail {

inline void check_training(const DescriptorSet& samples, std::span<const Label> labels) {
  if (samples.size() != labels.size())
    throw InputError("sample count does not match label count");
  if (samples.size() < 2) throw InputError("training needs at least 2 samples");
}

}  // namespace detail

// Prim's MST over the complete graph (ties resolved towards lower node indices), then every
// endpoint of an MST edge joining two different labels. Equal-weight MSTs are not unique,
// so on exact distance ties the prototype set depends on node order.
inline std::vector<std::size_t> mst_prototypes(const DescriptorSet& samples,
                                               std::span<const Label> labels) {
  detail::check_training(samples, labels);
  const std::size_t n = samples.size();
  constexpr double kInf = std::numeric_limits<double>::infinity();
  std::vector<double> key(n, kInf);
  std::vector<std::size_t> parent(n, kNil);
  std::vector<bool> in_tree(n, false);
  std::vector<bool> is_proto(n, false);
  key[0] = 0.0;
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t u = kNil;
    for (std::size_t v = 0; v < n; ++v)
      if (!in_tree[v] && (u == kNil || key[v] < key[u])) u = v;
    in_tree[u] = true;
    if (parent[u] != kNil && labels[u] != labels[parent[u]]) is_proto[u] = is_proto[parent[u]] = true;
    for (std::size_t v = 0; v < n; ++v) {
      if (in_tree[v]) continue;
      const double d = detail::euclidean(samples[u], samples[v]);
      if (d < key[v]) {
        key[v] = d;
        parent[v] = u;
      }
    }
  }
  std::vector<std::size_t> protos;
  for (std::size_t i = 0; i < n; ++i)
    if (is_proto[i]) protos.push_back(i);
  if (protos.empty()) throw InputError("single class: OPF classifier is undefined");
  return protos;
}

// Complete-graph OPF classifier trained with the f_max (max arc along the path) cost.
struct CplModel {
  DescriptorSet samples;
  std::vector<Label> truth;
  std::vector<double> cost;
  std::vector<Label> label;  // propagated from the conquering prototype
  std::vector<std::size_t> pred;
  std::vector<std::size_t> prototypes;
  std::vector<std::size_t> order;  // nodes by ascending (cost, index)

  friend bool operator==(const CplModel&, const CplModel&) = default;
};

inline CplModel train_cpl(const DescriptorSet& samples, std::span<const Label> labels) {
  CplModel m;
  m.prototypes = mst_prototypes(samples, labels);
  const std::size_t n = samples.size();
  m.samples = samples;
  m.truth.assign(labels.begin(), labels.end());
  m.cost.assign(n, std::numeric_limits<double>::infinity());
  m.label.assign(n, 0);
  m.pred.assign(n, kNil);
  for (auto p : m.prototypes) {
    m.cost[p] = 0.0;
    m.label[p] = m.truth[p];
  }
  // Dense graph: linear-scan Dijkstra is O(n^2) and needs no heap.
  std::vector<bool> done(n, false);
  for (std::size_t step = 0; step < n; ++step) {
    std::size_t s = kNil;
    for (std::size_t v = 0; v < n; ++v)
      if (!done[v] && (s == kNil || m.cost[v] < m.cost[s])) s = v;
    done[s] = true;
    for (std::size_t t = 0; t < n; ++t) {
      if (done[t]) continue;
      const double offer = std::max(m.cost[s], detail::euclidean(samples[s], samples[t]));
      if (offer < m.cost[t]) {
        m.cost[t] = offer;
        m.label[t] = m.label[s];
        m.pred[t] = s;
      }
    }
  }
  m.order.resize(n);
  std::iota(m.order.begin(), m.order.end(), std::size_t{0});
  std::stable_sort(m.order.begin(), m.order.end(),
                   [&](std::size_t a, std::size_t b) { return m.cost[a] < m.cost[b]; });
  return m;
}

// Label of argmin_s max(cost[s], d(s, x)); scanning in cost order stops once no remaining
// node can beat the current score. Ties keep the earlier node in that order.
inline Prediction classify_cpl(const CplModel& m, DescriptorView x) {
  if (x.size() != m.samples.dim())
    throw InputError("dimension mismatch: model " + std::to_string(m.samples.dim()) +
                     ", sample " + std::to_string(x.size()));
  Prediction best{0, std::numeric_limits<double>::infinity(), kNil};
  for (auto s : m.order) {
    if (m.cost[s] >= best.score) break;
    const double v = std::max(m.cost[s], detail::euclidean(m.samples[s], x));
    if (v < best.score) best = {m.label[s], v, s};
  }
  return best;
}

// k-NN OPF classifier: the unsupervised competition where each elected root keeps its own
// true label.
struct KnnModel {
  DescriptorSet samples;
  std::vector<Label> truth;
  std::size_t k = 0;
  double sigma = 1.0;  // effective training sigma
  Forest forest;       // forest.label holds the propagated class labels
  std::vector<double> rho;

  friend bool operator==(const KnnModel&, const KnnModel&) = default;
};

namespace detail {

inline KnnModel train_knn_on(const DescriptorSet& samples, std::span<const Label> labels,
                             const NeighborTable& table, std::size_t k) {
  KnnGraph g = graph_from_table(table, k);
  compute_densities(g);
  KnnModel m;
  m.samples = samples;
  m.truth.assign(labels.begin(), labels.end());
  m.k = k;
  m.sigma = g.effective_sigma();
  m.forest = compete(g, compute_delta(g).value,
                     [&](std::size_t node, std::size_t) { return m.truth[node]; });
  m.rho = g.rho;
  return m;
}

}  // namespace detail

inline KnnModel train_knn(const DescriptorSet& samples, std::span<const Label> labels,
                          std::size_t k) {
  detail::check_training(samples, labels);
  if (k < 1 || k >= samples.size())
    throw InputError("k = " + std::to_string(k) + " outside [1, " +
                     std::to_string(samples.size() - 1) + "]");
  return detail::train_knn_on(samples, labels, compute_neighbor_table(samples, k, 1), k);
}

inline Prediction classify_knn(const KnnModel& m, DescriptorView x) {
  if (x.size() != m.samples.dim())
    throw InputError("dimension mismatch: model " + std::to_string(m.samples.dim()) +
                     ", sample " + std::to_string(x.size()));
  const std::size_t n = m.samples.size();
  std::vector<Arc> near;
  near.reserve(n);
  for (std::size_t s = 0; s < n; ++s) near.push_back({s, detail::euclidean(m.samples[s], x)});
  const std::size_t k = std::min(m.k, n);
  std::partial_sort(near.begin(), near.begin() + static_cast<std::ptrdiff_t>(k), near.end(),
                    [](const Arc& a, const Arc& b) {
                      return a.weight < b.weight || (a.weight == b.weight && a.target < b.target);
                    });
  const double two_var = 2.0 * m.sigma * m.sigma;
  double acc = 0.0;
  for (std::size_t i = 0; i < k; ++i) acc += std::exp(-near[i].weight / two_var);
  const double rho_x = acc / (std::sqrt(2.0 * std::numbers::pi * m.sigma * m.sigma) *
                              static_cast<double>(m.k));

  Prediction best{0, -std::numeric_limits<double>::infinity(), kNil};
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t s = near[i].target;
    const double offer = std::min(m.forest.cost[s], rho_x);
    if (offer > best.score || (offer == best.score && s < best.node))
      best = {m.forest.label[s], offer, s};
  }
  return best;
}

struct KScore {
  std::size_t k = 0;
  double accuracy = 0.0;
  friend bool operator==(const KScore&, const KScore&) = default;
};

// Highest accuracy wins; ties go to the smaller k.
inline std::size_t select_best_k(std::span<const KScore> scores) {
  if (scores.empty()) throw InputError("empty viable k range");
  KScore best = scores.front();
  for (const auto& s : scores)
    if (s.accuracy > best.accuracy || (s.accuracy == best.accuracy && s.k < best.k)) best = s;
  return best.k;
}

struct TuneResult {
  std::size_t k = 0;
  std::vector<KScore> scores;
};

// Stratified 50/50 holdout inside the training set: fit on one half, score accuracy on the
// other, for each k that the fitting half can support.
inline TuneResult tune_k(const DescriptorSet& samples, std::span<const Label> labels,
                         std::span<const std::size_t> k_range, std::uint64_t seed,
                         std::size_t workers = worker_count()) {
  detail::check_training(samples, labels);
  const IndexSplit split = stratified_indices(labels, 0.5, seed, true);
  if (split.test.empty()) throw InputError("tuning split left no evaluation samples");
  const DescriptorSet fit = samples.subset(split.train);
  std::vector<Label> fit_labels;
  for (auto i : split.train) fit_labels.push_back(labels[i]);

  std::vector<std::size_t> viable;
  for (auto k : k_range)
    if (k >= 1 && k < fit.size()) viable.push_back(k);
  std::sort(viable.begin(), viable.end());
  viable.erase(std::unique(viable.begin(), viable.end()), viable.end());
  if (viable.empty()) throw InputError("empty viable k range");

  const NeighborTable table = compute_neighbor_table(fit, viable.back(), 1);
  TuneResult out;
  out.scores.resize(viable.size());
  parallel_for(
      viable.size(),
      [&](std::size_t i) {
        const KnnModel m = detail::train_knn_on(fit, fit_labels, table, viable[i]);
        std::size_t correct = 0;
        for (auto t : split.test)
          if (classify_knn(m, samples[t]).label == labels[t]) ++correct;
        out.scores[i] = {viable[i],
                         static_cast<double>(correct) / static_cast<double>(split.test.size())};
      },
      workers);
  out.k = select_best_k(out.scores);
  return out;
}

}  // namespace opfbovw
