#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support.hpp"

using namespace opfbovw;
using testsupport::Toy;

namespace {

KnnGraph graph_with_rho(std::vector<std::vector<Arc>> arcs, std::vector<double> rho, std::size_t k = 1) {
  KnnGraph g = graph_from_arcs(std::move(arcs), k);
  set_densities(g, std::move(rho));
  return g;
}

void expect_forest_invariants(const KnnGraph& g, const Forest& f) {
  const std::size_t n = g.size();
  const std::set<std::size_t> protos(f.prototypes.begin(), f.prototypes.end());
  ASSERT_EQ(protos.size(), f.prototypes.size());
  ASSERT_LE(protos.size(), n);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(f.pred[i] == kNil, protos.contains(i));
    std::size_t v = i, steps = 0;
    while (f.pred[v] != kNil) {
      EXPECT_GE(f.cost[f.pred[v]], f.cost[v]);
      v = f.pred[v];
      ASSERT_LE(++steps, n) << "cycle";
    }
    EXPECT_EQ(f.root[i], v);
    EXPECT_EQ(f.label[i], f.label[v]);
    EXPECT_GE(g.rho[f.root[i]], f.cost[i]);
    // cost is the smallest density on the root path
    double m = g.rho[v];
    for (std::size_t u = i; u != v; u = f.pred[u]) m = std::min(m, g.rho[u]);
    EXPECT_EQ(f.cost[i], m);
  }
}

}  // namespace

TEST(Delta, HandExamples) {
  // path H - J - I with densities 0.66, 0.65, 0.63
  auto g = graph_with_rho({{{1, 1.0}}, {{0, 1.0}, {2, 1.0}}, {{1, 1.0}}}, {0.66, 0.65, 0.63});
  EXPECT_NEAR(compute_delta(g).value, 0.01, 1e-12);
  EXPECT_FALSE(compute_delta(g).degenerate);

  auto flat = graph_with_rho({{{1, 1.0}}, {{0, 1.0}}}, {0.4, 0.4});
  EXPECT_TRUE(compute_delta(flat).degenerate);
  EXPECT_EQ(compute_delta(flat).value, 0.0);

  auto tiny = graph_with_rho({{{1, 1.0}}, {{0, 1.0}}}, {0.5, 0.5000000001});
  EXPECT_NEAR(compute_delta(tiny).value, 1e-10, 1e-15);
}

TEST(Cluster, ToyGraphElectsTwoPrototypes) {
  KnnGraph g = Toy::graph();
  set_densities(g, Toy::densities());
  const Forest f = cluster(g);
  ASSERT_EQ(f.prototypes.size(), 2u);
  EXPECT_EQ(f.prototypes[0], Toy::id('H'));
  EXPECT_EQ(f.prototypes[1], Toy::id('A'));
  EXPECT_DOUBLE_EQ(f.cost[Toy::id('H')], 0.66);
  for (char c : std::string("IJK")) EXPECT_EQ(f.pred[Toy::id(c)], Toy::id('H')) << c;
  EXPECT_DOUBLE_EQ(f.cost[Toy::id('I')], 0.63);
  EXPECT_DOUBLE_EQ(f.cost[Toy::id('J')], 0.65);
  EXPECT_DOUBLE_EQ(f.cost[Toy::id('K')], 0.65);
  for (char c : std::string("HIJKGL")) EXPECT_EQ(f.root[Toy::id(c)], Toy::id('H'));
  for (char c : std::string("ABCDEF")) EXPECT_EQ(f.root[Toy::id(c)], Toy::id('A'));
  expect_forest_invariants(g, f);
}

TEST(Cluster, SingleNode) {
  KnnGraph g = graph_with_rho({{}}, {0.3}, 1);
  const Forest f = cluster(g);
  ASSERT_EQ(f.prototypes.size(), 1u);
  EXPECT_EQ(f.cost[0], 0.3);
}

TEST(Cluster, CostMapMatchesPathEnumeration) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 200; ++trial) {
    const KnnGraph g = testsupport::random_graph(rng, trial);
    const Forest f = cluster(g);
    const auto oracle = testsupport::path_oracle(g, f.prototypes);
    for (std::size_t i = 0; i < g.size(); ++i) ASSERT_EQ(f.cost[i], oracle[i]) << "trial " << trial << " node " << i;
    expect_forest_invariants(g, f);
    EXPECT_EQ(cluster(g), f);
  }
}

TEST(Cluster, PrototypesAreLocalMaximaOnSymmetricGraphs) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 3 + trial % 20;
    const auto s = testsupport::random_points(rng, n, 2);
    const KnnGraph knn = build_knn_graph(s, 1 + trial % (n - 1));
    // symmetric closure of the k-NN arcs
    std::vector<std::vector<Arc>> arcs(knn.adjacency);
    for (std::size_t i = 0; i < n; ++i)
      for (const auto& a : knn.adjacency[i]) {
        auto& back = arcs[a.target];
        if (std::none_of(back.begin(), back.end(), [&](const Arc& b) { return b.target == i; }))
          back.push_back({i, a.weight});
      }
    KnnGraph g = graph_from_arcs(arcs, knn.k);
    compute_densities(g);
    const Forest f = cluster(g);
    const double delta = compute_delta(g).value;
    for (auto p : f.prototypes)
      for (const auto& a : g.adjacency[p]) EXPECT_GE(g.rho[p], g.rho[a.target] - delta);
  }
}

TEST(NormalizedCut, HandExamples) {
  const auto s = DescriptorSet::from_rows({{0}, {1}, {2}, {3}});
  const KnnGraph path = build_knn_graph(s, 1);
  const std::vector<std::size_t> halves{0, 0, 1, 1}, one{0, 0, 0, 0};
  EXPECT_NEAR(normalized_cut(path, halves), 1.0, 1e-12);
  EXPECT_EQ(normalized_cut(path, one), 0.0);

  const auto apart = DescriptorSet::from_rows({{0}, {1}, {100}, {101}});
  const KnnGraph g = build_knn_graph(apart, 1);
  EXPECT_EQ(normalized_cut(g, halves), 0.0);
}

namespace {

DescriptorSet two_blobs(std::mt19937_64& rng, std::size_t per_blob, double gap) {
  std::normal_distribution<double> noise(0.0, 0.2);
  DescriptorSet s(2);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < per_blob; ++i) s.push_back(std::vector<double>{b * gap + noise(rng), noise(rng)});
  return s;
}

// Number of weakly connected components of the undirected closure of the arcs among `nodes`.
std::size_t components(const KnnGraph& g, const std::vector<std::size_t>& nodes) {
  std::set<std::size_t> inside(nodes.begin(), nodes.end()), seen;
  std::vector<std::vector<std::size_t>> und(g.size());
  for (std::size_t i = 0; i < g.size(); ++i)
    for (const auto& a : g.adjacency[i]) {
      und[i].push_back(a.target);
      und[a.target].push_back(i);
    }
  std::size_t count = 0;
  for (auto start : nodes) {
    if (seen.contains(start)) continue;
    ++count;
    std::vector<std::size_t> stack{start};
    seen.insert(start);
    while (!stack.empty()) {
      const auto v = stack.back();
      stack.pop_back();
      for (auto t : und[v])
        if (inside.contains(t) && seen.insert(t).second) stack.push_back(t);
    }
  }
  return count;
}

}  // namespace

TEST(BestK, TwoSeparatedBlobs) {
  std::mt19937_64 rng(31);
  for (int trial = 0; trial < 10; ++trial) {
    const auto s = two_blobs(rng, 10, 100.0);
    // k = 9 makes each blob a complete graph with a single density maximum: two clusters,
    // exactly the blobs, and no edge leaves either one.
    const ClusterRun whole = cluster_with_k(compute_neighbor_table(s, 9), 9);
    EXPECT_EQ(whole.n_clusters, 2u);
    for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(whole.forest.label[i] == whole.forest.label[0], i < 10);
    EXPECT_EQ(whole.cut, 0.0);
    const ClusterRun upto9 = best_k(s, 9);
    EXPECT_EQ(upto9.cut, 0.0);

    // Smaller bounds may split a blob around several local maxima, but clusters never
    // straddle the blobs.
    const ClusterRun run = best_k(s, 5);
    EXPECT_GE(run.n_clusters, 2u);
    for (std::size_t i = 0; i < 20; ++i)
      for (std::size_t j = 0; j < 20; ++j)
        if (run.forest.label[i] == run.forest.label[j]) EXPECT_EQ(i < 10, j < 10);
  }
}

TEST(BestK, SingletonRange) {
  std::mt19937_64 rng(33);
  const auto s = two_blobs(rng, 6, 5.0);
  const ClusterRun run = best_k(s, 1);
  EXPECT_EQ(run.k, 1u);
  EXPECT_EQ(run.n_clusters, run.forest.prototypes.size());
}

TEST(BestK, UniformBlobClustersAreContiguous) {
  std::mt19937_64 rng(35);
  std::normal_distribution<double> noise(0.0, 1.0);
  DescriptorSet s(2);
  for (int i = 0; i < 40; ++i) s.push_back(std::vector<double>{noise(rng), noise(rng)});
  const ClusterRun run = best_k(s, 5);
  KnnGraph g = build_knn_graph(s, run.k);
  compute_densities(g);
  for (std::size_t c = 0; c < run.n_clusters; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < s.size(); ++i)
      if (run.forest.label[i] == c) members.push_back(i);
    EXPECT_EQ(components(g, members), 1u);
  }
}

TEST(BestK, ClampsOversizedBound) {
  std::mt19937_64 rng(37);
  const auto s = two_blobs(rng, 4, 10.0);
  const ClusterRun run = best_k(s, 50);
  EXPECT_TRUE(run.k_max_clamped);
  EXPECT_EQ(run.k_max, 7u);
}

TEST(BestK, MinimizesCutWithSmallestKOnTies) {
  std::mt19937_64 rng(39);
  const auto s = testsupport::random_points(rng, 30, 2);
  const ClusterRun run = best_k(s, 8);
  const NeighborTable table = compute_neighbor_table(s, 8);
  for (std::size_t k = 1; k <= 8; ++k) {
    const ClusterRun other = cluster_with_k(table, k);
    if (k < run.k) EXPECT_GT(other.cut, run.cut);
    else EXPECT_GE(other.cut, run.cut);
  }
}

TEST(ClusterSweep, StrideAndCacheAgree) {
  std::mt19937_64 rng(41);
  const auto s = testsupport::random_points(rng, 25, 2);
  ClusterSweep sweep(s, 10, 3);
  EXPECT_EQ(sweep.ks(), (std::vector<std::size_t>{1, 4, 7, 10}));
  const auto a = sweep.best_summary(10);
  const auto b = sweep.best_summary(10);
  EXPECT_EQ(a.k, b.k);
  EXPECT_EQ(sweep.run(a.k).cut, a.cut);
}
