#pragma once

// Fixtures and brute-force reference implementations shared by the unit tests and the
// acceptance runner. Nothing here calls into the library's search or competition code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "opfbovw/opfbovw.hpp"

namespace testsupport {

using namespace opfbovw;

// Two-cluster toy graph, k = 3. Node order: H I J K G L A B C D E F.
struct Toy {
  static constexpr const char* kNames = "HIJKGLABCDEF";
  static std::size_t id(char c) { return static_cast<std::size_t>(std::string(kNames).find(c)); }

  static double weight(char a, char b) {
    static const std::map<std::string, double> w{
        {"AB", .217}, {"AC", .023}, {"AD", .193}, {"BC", .030}, {"BD", .096}, {"BE", .217}, {"CF", 1.2},
        {"DE", .192}, {"DF", .009}, {"EF", .106}, {"GH", .130}, {"GI", .160}, {"GL", .202}, {"HI", .137},
        {"HJ", .133}, {"HK", .127}, {"IJ", .144}, {"JK", .134}, {"JL", .171}, {"KL", .150}};
    std::string key{std::min(a, b), std::max(a, b)};
    return w.at(key);
  }

  static KnnGraph graph() {
    const std::map<char, std::string> adj{{'H', "IJK"}, {'I', "HJG"}, {'J', "HKI"}, {'K', "HJL"},
                                          {'G', "IHL"}, {'L', "KGJ"}, {'A', "BCD"}, {'B', "ACE"},
                                          {'C', "ABF"}, {'D', "AEB"}, {'E', "DBF"}, {'F', "CED"}};
    std::vector<std::vector<Arc>> arcs(12);
    for (const auto& [from, to] : adj)
      for (char t : to) arcs[id(from)].push_back({id(t), weight(from, t)});
    return graph_from_arcs(std::move(arcs), 3);
  }

  static std::vector<double> densities() {
    return {.66, .63, .65, .65, .60, .58, .66, .64, .62, .61, .59, .57};
  }
};

inline DescriptorSet random_points(std::mt19937_64& rng, std::size_t n, std::size_t dim, double grid = 0.0) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  DescriptorSet s(dim);
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    for (auto& v : x) {
      v = u(rng);
      if (grid > 0.0) v = std::round(v / grid) * grid;  // coarse grid: ties and duplicates
    }
    s.push_back(x);
  }
  return s;
}

// Random graph: geometric k-NN with computed densities, or arbitrary arcs with densities
// drawn from a tiny set so plateaus are common.
inline KnnGraph random_graph(std::mt19937_64& rng, int trial) {
  const std::size_t n = 2 + static_cast<std::size_t>(trial % 11);
  if (trial % 2 == 0) {
    const auto s = testsupport::random_points(rng, n, 2, trial % 4 == 0 ? 2.0 : 0.0);
    const std::size_t k = 1 + static_cast<std::size_t>(rng() % (n - 1));
    KnnGraph g = build_knn_graph(s, k);
    compute_densities(g);
    return g;
  }
  std::vector<std::vector<Arc>> arcs(n);
  std::uniform_real_distribution<double> w(0.1, 2.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      if (i != j && rng() % 3 == 0) arcs[i].push_back({j, w(rng)});
  std::vector<double> rho(n);
  static const double levels[] = {0.2, 0.35, 0.5, 0.5, 0.8};
  for (auto& r : rho) r = levels[rng() % 5];
  KnnGraph g = graph_from_arcs(std::move(arcs), 1);
  set_densities(g, std::move(rho));
  return g;
}

// Brute-force k-NN by full sort on (distance, index).
inline std::vector<std::vector<std::pair<double, std::size_t>>> brute_knn(const DescriptorSet& s, std::size_t k) {
  std::vector<std::vector<std::pair<double, std::size_t>>> out(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (j == i) continue;
      double acc = 0.0;
      for (std::size_t c = 0; c < s.dim(); ++c) acc += (s[i][c] - s[j][c]) * (s[i][c] - s[j][c]);
      out[i].push_back({std::sqrt(acc), j});
    }
    std::sort(out[i].begin(), out[i].end());
    out[i].resize(k);
  }
  return out;
}

// Density by the textbook formula from raw samples.
inline std::vector<double> reference_density(const DescriptorSet& s, std::size_t k) {
  const auto nn = brute_knn(s, k);
  double d_max = 0.0;
  for (const auto& row : nn)
    for (const auto& [d, j] : row) d_max = std::max(d_max, d);
  const double sigma = d_max > 0.0 ? d_max / 3.0 : 1.0;
  std::vector<double> rho(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    double sum = 0.0;
    for (const auto& [d, j] : nn[i]) sum += std::exp(-d / (2.0 * sigma * sigma));
    rho[i] = sum / (std::sqrt(2.0 * std::numbers::pi * sigma * sigma) * static_cast<double>(k));
  }
  return rho;
}

// Best path value into every node over all simple paths that start at a prototype, by
// dynamic programming over (visited set, last node). A path's value is the smallest
// density along it, with the prototype itself contributing its density.
inline std::vector<double> path_oracle(const KnnGraph& g, const std::vector<std::size_t>& prototypes) {
  const std::size_t n = g.size();
  constexpr double kNone = -std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> table(std::size_t{1} << n, std::vector<double>(n, kNone));
  for (auto p : prototypes) table[std::size_t{1} << p][p] = g.rho[p];
  std::vector<double> out(n, kNone);
  for (std::size_t mask = 1; mask < table.size(); ++mask)
    for (std::size_t v = 0; v < n; ++v) {
      const double val = table[mask][v];
      if (val == kNone) continue;
      out[v] = std::max(out[v], val);
      for (const auto& arc : g.adjacency[v]) {
        const std::size_t t = arc.target;
        if (mask & (std::size_t{1} << t)) continue;
        double& slot = table[mask | (std::size_t{1} << t)][t];
        slot = std::max(slot, std::min(val, g.rho[t]));
      }
    }
  return out;
}

// Minimax (bottleneck) distances with Floyd-Warshall on the complete graph, then the best
// prototype for every node.
inline std::vector<double> minmax_oracle(const DescriptorSet& s, const std::vector<std::size_t>& prototypes) {
  const std::size_t n = s.size();
  std::vector<std::vector<double>> d(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) d[i][j] = i == j ? 0.0 : distance(s[i], s[j]);
  for (std::size_t m = 0; m < n; ++m)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) d[i][j] = std::min(d[i][j], std::max(d[i][m], d[m][j]));
  std::vector<double> cost(n, std::numeric_limits<double>::infinity());
  for (std::size_t t = 0; t < n; ++t)
    for (auto p : prototypes) cost[t] = std::min(cost[t], d[p][t]);
  return cost;
}

// Two-sided Wilcoxon p by listing all 2^n sign patterns; ranks are computed here from
// scratch (mid-ranks for exact ties of |d|).
inline double enumerate_wilcoxon_p(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> d;
  for (std::size_t i = 0; i < x.size(); ++i)
    if (y[i] - x[i] != 0.0) d.push_back(y[i] - x[i]);
  const std::size_t n = d.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      const double a = std::abs(d[j]), b = std::abs(d[i]);
      if (std::abs(a - b) <= 1e-9 * std::max(1.0, b)) ++equal;
      else if (a < b) ++below;
    }
    rank[i] = below + (equal + 1.0) / 2.0;
  }
  double wp = 0, wm = 0;
  for (std::size_t i = 0; i < n; ++i) (d[i] > 0 ? wp : wm) += rank[i];
  const double observed = std::min(wp, wm);
  std::size_t hits = 0;
  for (std::uint32_t pattern = 0; pattern < (1u << n); ++pattern) {
    double p = 0, m = 0;
    for (std::size_t i = 0; i < n; ++i) ((pattern >> i) & 1u ? p : m) += rank[i];
    if (std::min(p, m) <= observed + 1e-9) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(1u << n);
}

// Labeled points around `n_classes` random centres.
inline std::pair<DescriptorSet, std::vector<Label>> labeled_blobs(std::mt19937_64& rng, std::size_t n,
                                                                  std::size_t dim, std::size_t n_classes,
                                                                  double spread) {
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::normal_distribution<double> noise(0.0, spread);
  std::vector<std::vector<double>> centre(n_classes, std::vector<double>(dim));
  for (auto& c : centre)
    for (auto& v : c) v = u(rng);
  DescriptorSet s(dim);
  std::vector<Label> labels;
  std::vector<double> x(dim);
  for (std::size_t i = 0; i < n; ++i) {
    const Label l = i < n_classes ? i : std::uniform_int_distribution<Label>(0, n_classes - 1)(rng);
    for (std::size_t j = 0; j < dim; ++j) x[j] = centre[l][j] + noise(rng);
    s.push_back(x);
    labels.push_back(l);
  }
  return {s, labels};
}

}  // namespace testsupport
