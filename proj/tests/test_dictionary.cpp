#include <gtest/gtest.h>

#include <random>
#include <set>

#include "support.hpp"

using namespace opfbovw;

namespace {

std::vector<double> row(DescriptorView v) { return {v.begin(), v.end()}; }

std::set<std::vector<double>> rows_of(const DescriptorSet& s) {
  std::set<std::vector<double>> out;
  for (std::size_t i = 0; i < s.size(); ++i) out.insert(row(s[i]));
  return out;
}

DescriptorSet two_blobs(std::mt19937_64& rng, std::size_t per_blob, double gap, std::size_t dim = 2) {
  std::normal_distribution<double> noise(0.0, 0.5);
  DescriptorSet s(dim);
  std::vector<double> x(dim);
  for (int b = 0; b < 2; ++b)
    for (std::size_t i = 0; i < per_blob; ++i) {
      for (auto& v : x) v = noise(rng);
      x[0] += b * gap;
      s.push_back(x);
    }
  return s;
}

}  // namespace

TEST(BuildRandom, FullSizeIsPermutation) {
  std::mt19937_64 rng(1);
  const auto pool = testsupport::random_points(rng, 50, 3);
  const Dictionary d = build_random(pool, 50, 9);
  EXPECT_EQ(d.size(), 50u);
  EXPECT_EQ(rows_of(d.words), rows_of(pool));
}

TEST(BuildRandom, Deterministic) {
  std::mt19937_64 rng(2);
  const auto pool = testsupport::random_points(rng, 200, 4);
  EXPECT_EQ(build_random(pool, 30, 5), build_random(pool, 30, 5));
  EXPECT_NE(build_random(pool, 30, 5).words, build_random(pool, 30, 6).words);
}

TEST(BuildRandom, DistinctMembersOfLargePool) {
  std::mt19937_64 rng(3);
  const auto pool = testsupport::random_points(rng, 16024, 8);
  const Dictionary d = build_random(pool, 100, 42);
  const auto members = rows_of(pool);
  const auto words = rows_of(d.words);
  EXPECT_EQ(words.size(), 100u);
  for (const auto& w : words) EXPECT_TRUE(members.count(w));
}

TEST(BuildRandom, Errors) {
  std::mt19937_64 rng(4);
  const auto pool = testsupport::random_points(rng, 5, 2);
  EXPECT_THROW(build_random(pool, 6, 1), InputError);
  EXPECT_THROW(build_random(pool, 0, 1), InputError);
}

TEST(KMeans, SingleWordIsPoolMean) {
  std::mt19937_64 rng(5);
  const auto pool = testsupport::random_points(rng, 100, 3);
  const Dictionary d = build_kmeans(pool, 1, 7);
  ASSERT_EQ(d.size(), 1u);
  for (std::size_t c = 0; c < 3; ++c) {
    double mean = 0.0;
    for (std::size_t i = 0; i < pool.size(); ++i) mean += pool[i][c];
    mean /= 100.0;
    EXPECT_NEAR(d.words[0][c], mean, 1e-9);
  }
}

TEST(KMeans, SizeEqualsDistinctPointCount) {
  std::mt19937_64 rng(6);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pool = testsupport::random_points(rng, 12, 2);
    const Dictionary d = build_kmeans(pool, 12, trial);
    auto want = rows_of(pool);
    for (std::size_t w = 0; w < d.size(); ++w) {
      double best = std::numeric_limits<double>::infinity();
      for (const auto& p : want) best = std::min(best, distance(d.words[w], p));
      EXPECT_LT(best, 1e-9);
    }
    EXPECT_EQ(rows_of(d.words).size(), 12u);
  }
}

TEST(KMeans, TwoBlobsGiveBlobMeans) {
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pool = two_blobs(rng, 30, 20.0, 3);
    std::vector<std::vector<double>> mean(2, std::vector<double>(3, 0.0));
    for (std::size_t i = 0; i < pool.size(); ++i)
      for (std::size_t c = 0; c < 3; ++c) mean[i / 30][c] += pool[i][c] / 30.0;
    const Dictionary d = build_kmeans(pool, 2, trial);
    ASSERT_EQ(d.size(), 2u);
    const std::size_t first = d.words[0][0] < d.words[1][0] ? 0 : 1;
    for (std::size_t c = 0; c < 3; ++c) {
      EXPECT_NEAR(d.words[first][c], mean[0][c], 1e-6);
      EXPECT_NEAR(d.words[1 - first][c], mean[1][c], 1e-6);
    }
  }
}

TEST(KMeans, ObjectiveNonIncreasingAndFullSize) {
  std::mt19937_64 rng(8);
  for (int trial = 0; trial < 40; ++trial) {
    // Grid-snapped pools have duplicates, which provoke empty clusters.
    const auto pool = testsupport::random_points(rng, 150, 2, trial % 2 ? 2.0 : 0.0);
    const std::size_t size = 5 + trial % 20;
    const KMeansResult r = kmeans(pool, size, trial, 300, 1e-6);
    EXPECT_EQ(r.centroids.size(), size);
    for (std::size_t i = 1; i < r.objective.size(); ++i)
      EXPECT_LE(r.objective[i], r.objective[i - 1]) << "trial " << trial << " iteration " << i;
  }
}

TEST(KMeans, CentroidsAreSyntheticAndErrors) {
  std::mt19937_64 rng(9);
  const auto pool = testsupport::random_points(rng, 200, 3);
  const Dictionary d = build_kmeans(pool, 10, 3);
  const auto members = rows_of(pool);
  std::size_t outside = 0;
  for (std::size_t w = 0; w < d.size(); ++w) outside += !members.count(row(d.words[w]));
  EXPECT_GT(outside, 0u);
  EXPECT_THROW(build_kmeans(pool, 201, 1), InputError);
  EXPECT_THROW(build_kmeans(pool, 0, 1), InputError);
}

TEST(BuildOpf, WordsArePrototypesOfSelectedRun) {
  std::mt19937_64 rng(10);
  for (int trial = 0; trial < 10; ++trial) {
    const auto pool = two_blobs(rng, 15, 100.0);
    const Dictionary d = build_opf(pool, 9);
    const ClusterRun run = best_k(pool, 9);
    EXPECT_EQ(d.params.chosen_k, run.k);
    std::vector<std::size_t> protos = run.forest.prototypes;
    std::sort(protos.begin(), protos.end());
    EXPECT_EQ(d.words, pool.subset(protos));
    // both blobs are represented, and each word's cluster stays inside its blob
    std::size_t left = 0;
    for (auto p : protos) left += p < 15;
    EXPECT_GE(left, 1u);
    EXPECT_GE(protos.size() - left, 1u);
    for (std::size_t i = 0; i < 30; ++i) {
      const std::size_t root = run.forest.root[i];
      EXPECT_EQ(root < 15, i < 15);
    }
  }
}

TEST(BuildOpf, OneNeighborBound) {
  std::mt19937_64 rng(11);
  const auto pool = testsupport::random_points(rng, 25, 2);
  const Dictionary d = build_opf(pool, 1);
  KnnGraph g = build_knn_graph(pool, 1);
  compute_densities(g);
  auto protos = cluster(g).prototypes;
  std::sort(protos.begin(), protos.end());
  EXPECT_EQ(d.words, pool.subset(protos));
  EXPECT_EQ(d.params.chosen_k, 1u);
  EXPECT_THROW(build_opf(pool, 25), InputError);
}

TEST(BuildOpf, TargetSizeNearestAchievableCount) {
  std::mt19937_64 rng(12);
  const auto pool = testsupport::random_points(rng, 160, 2);
  const std::size_t k_max = 24;
  std::vector<std::size_t> count(k_max + 1);
  for (std::size_t b = 1; b <= k_max; ++b) count[b] = best_k(pool, b).n_clusters;
  for (std::size_t target : {3u, 8u, 15u, 40u, 200u}) {
    std::size_t upper = 1;
    while (upper < k_max && count[upper] > target) upper = std::min(k_max, upper * 2);
    std::size_t want = count[1];
    auto gap = [&](std::size_t c) { return c > target ? c - target : target - c; };
    for (std::size_t b = 1; b <= upper; ++b)
      if (gap(count[b]) < gap(want) || (gap(count[b]) == gap(want) && count[b] < want)) want = count[b];
    const Dictionary d = build_opf(pool, k_max, target);
    EXPECT_EQ(d.size(), want) << "target " << target;
    EXPECT_EQ(d.params.size, d.size());
    EXPECT_EQ(d.params.target_size, target);
    const auto members = rows_of(pool);
    for (std::size_t w = 0; w < d.size(); ++w) EXPECT_TRUE(members.count(row(d.words[w])));
  }
}

TEST(Quantize, SingleDescriptorOnWordThree) {
  const Dictionary d{DescriptorSet::from_rows({{0, 0}, {1, 0}, {2, 0}, {3, 0}, {4, 0}}), Builder::random, {}};
  const auto h = quantize(DescriptorSet::from_rows({{3, 0}}), d);
  EXPECT_EQ(h.counts, (std::vector<std::uint64_t>{0, 0, 0, 1, 0}));
}

TEST(Quantize, DictionaryAgainstItself) {
  std::mt19937_64 rng(13);
  const Dictionary d{testsupport::random_points(rng, 20, 4), Builder::random, {}};
  EXPECT_EQ(quantize(d.words, d).counts, std::vector<std::uint64_t>(20, 1));
}

TEST(Quantize, ConstructedSevenDescriptors) {
  const Dictionary d{DescriptorSet::from_rows({{0, 0}, {10, 0}, {0, 10}, {10, 10}}), Builder::random, {}};
  const auto img = DescriptorSet::from_rows({{1, 0}, {0, 2}, {9, 1}, {8, 0}, {11, -1}, {0, 9}, {1, 11}});
  const auto h = quantize(img, d, "x");
  EXPECT_EQ(h.counts, (std::vector<std::uint64_t>{2, 3, 2, 0}));
  EXPECT_EQ(h.total(), 7u);
  EXPECT_EQ(h.image_id, "x");
}

TEST(Quantize, TiesGoToLowerWord) {
  const Dictionary d{DescriptorSet::from_rows({{0}, {2}}), Builder::random, {}};
  EXPECT_EQ(quantize(DescriptorSet::from_rows({{1}}), d).counts, (std::vector<std::uint64_t>{1, 0}));
}

TEST(Quantize, PermutationEquivariantAndConserving) {
  std::mt19937_64 rng(14);
  for (int trial = 0; trial < 30; ++trial) {
    const auto words = testsupport::random_points(rng, 15, 3);
    const auto img = testsupport::random_points(rng, 60 + trial, 3);
    std::vector<std::size_t> perm(15);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    const Dictionary a{words, Builder::random, {}}, b{words.subset(perm), Builder::random, {}};
    const auto ha = quantize(img, a), hb = quantize(img, b);
    for (std::size_t j = 0; j < 15; ++j) EXPECT_EQ(hb.counts[j], ha.counts[perm[j]]);
    EXPECT_EQ(ha.total(), img.size());
  }
}

TEST(Quantize, Errors) {
  const Dictionary d{DescriptorSet::from_rows({{0, 0}}), Builder::random, {}};
  EXPECT_THROW(quantize(DescriptorSet(2), d), InputError);
  EXPECT_THROW(quantize(DescriptorSet::from_rows({{0, 0, 0}}), d), InputError);
}
