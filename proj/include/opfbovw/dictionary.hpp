#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <vector>

#include "opfbovw/core.hpp"
#include "opfbovw/opf_cluster.hpp"
#include "opfbovw/parallel.hpp"

namespace opfbovw {

enum class Builder { opf, kmeans, random };

inline std::string_view to_string(Builder b) {
  switch (b) {
    case Builder::opf: return "opf";
    case Builder::kmeans: return "kmeans";
    case Builder::random: return "random";
  }
  return "?";
}

inline Builder parse_builder(std::string_view s) {
  if (s == "opf") return Builder::opf;
  if (s == "kmeans") return Builder::kmeans;
  if (s == "random") return Builder::random;
  throw InputError("unknown dictionary builder '" + std::string(s) + "'");
}

// Builder provenance. Fields that do not apply to a builder stay at their defaults.
struct DictionaryParams {
  std::size_t size = 0;  // requested size (random/kmeans) or emergent size (opf)
  std::uint64_t seed = 0;
  std::size_t k_max = 0;          // opf: neighborhood bound searched
  std::size_t chosen_k = 0;       // opf: neighborhood size of the selected clustering
  std::size_t target_size = 0;    // opf: 0 when no target was requested
  std::size_t max_iter = 0;       // kmeans
  double tol = 0.0;               // kmeans
  std::size_t iterations = 0;     // kmeans: Lloyd iterations performed

  friend bool operator==(const DictionaryParams&, const DictionaryParams&) = default;
};

struct Dictionary {
  DescriptorSet words;
  Builder builder = Builder::random;
  DictionaryParams params;

  std::size_t size() const noexcept { return words.size(); }
  std::size_t dim() const noexcept { return words.dim(); }
  friend bool operator==(const Dictionary&, const Dictionary&) = default;
};

struct Histogram {
  std::string image_id;
  std::vector<std::uint64_t> counts;

  std::uint64_t total() const {
    return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  }
  friend bool operator==(const Histogram&, const Histogram&) = default;
};

// Uniform sample of `size` pool members without replacement.
inline Dictionary build_random(const DescriptorSet& pool, std::size_t size, std::uint64_t seed) {
  if (size < 1) throw InputError("dictionary size must be >= 1");
  if (size > pool.size())
    throw InputError("dictionary size " + std::to_string(size) + " exceeds pool of " +
                     std::to_string(pool.size()));
  std::vector<std::size_t> idx(pool.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Partial Fisher-Yates: the first `size` slots are the sample.
  for (std::size_t i = 0; i < size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, idx.size() - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(size);
  Dictionary d;
  d.words = pool.subset(idx);
  d.builder = Builder::random;
  d.params.size = size;
  d.params.seed = seed;
  return d;
}

struct KMeansResult {
  DescriptorSet centroids;
  // Sum of squared point-to-centroid distances after each assignment step.
  std::vector<double> objective;
  std::size_t iterations = 0;
  std::size_t reseeded = 0;  // empty clusters re-seeded
};

namespace detail {

inline double squared(DescriptorView a, DescriptorView b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return acc;
}

inline std::size_t nearest_row(const DescriptorSet& rows, DescriptorView x, double* dist2 = nullptr) {
  std::size_t best = 0;
  double best_d = std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const double d = squared(rows[r], x);
    if (d < best_d) {
      best_d = d;
      best = r;
    }
  }
  if (dist2) *dist2 = best_d;
  return best;
}

}  // namespace detail

// k-means++ seeding followed by Lloyd iterations. Stops when the largest centroid shift is
// below tol relative to max(1, largest centroid norm), or after max_iter iterations.
// A centroid that loses all its points is moved to the pool point farthest from it.
inline KMeansResult kmeans(const DescriptorSet& pool, std::size_t size, std::uint64_t seed,
                           std::size_t max_iter = 300, double tol = 1e-6) {
  const std::size_t n = pool.size();
  const std::size_t dim = pool.dim();
  if (size < 1) throw InputError("dictionary size must be >= 1");
  if (size > n)
    throw InputError("dictionary size " + std::to_string(size) + " exceeds pool of " +
                     std::to_string(n));
  std::mt19937_64 rng(seed);

  DescriptorSet centroids(dim);
  centroids.reserve(size);
  {
    std::uniform_int_distribution<std::size_t> first(0, n - 1);
    centroids.push_back(pool[first(rng)]);
    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = detail::squared(pool[i], centroids[0]);
    while (centroids.size() < size) {
      const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
      std::size_t chosen = 0;
      if (total > 0.0) {
        std::uniform_real_distribution<double> u(0.0, total);
        double target = u(rng), run = 0.0;
        chosen = n - 1;
        for (std::size_t i = 0; i < n; ++i) {
          run += d2[i];
          if (d2[i] > 0.0 && run >= target) {
            chosen = i;
            break;
          }
        }
      } else {
        std::uniform_int_distribution<std::size_t> any(0, n - 1);
        chosen = any(rng);
      }
      centroids.push_back(pool[chosen]);
      const auto c = centroids[centroids.size() - 1];
      for (std::size_t i = 0; i < n; ++i) d2[i] = std::min(d2[i], detail::squared(pool[i], c));
    }
  }

  KMeansResult out;
  std::vector<std::size_t> assign(n);
  std::vector<double> dist2(n);
  auto assign_all = [&] {
    double objective = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      assign[i] = detail::nearest_row(centroids, pool[i], &dist2[i]);
      objective += dist2[i];
    }
    out.objective.push_back(objective);
  };

  assign_all();
  std::vector<double> sums(size * dim);
  std::vector<std::size_t> counts(size);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      ++counts[assign[i]];
      const auto x = pool[i];
      for (std::size_t j = 0; j < dim; ++j) sums[assign[i] * dim + j] += x[j];
    }
    std::vector<double> next(size * dim);
    for (std::size_t c = 0; c < size; ++c) {
      const auto old = centroids[c];
      if (counts[c] == 0) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
          const double d = detail::squared(pool[i], old);
          if (d > far_d) {
            far_d = d;
            far = i;
          }
        }
        std::copy(pool[far].begin(), pool[far].end(), next.begin() + static_cast<std::ptrdiff_t>(c * dim));
        ++out.reseeded;
        continue;
      }
      for (std::size_t j = 0; j < dim; ++j)
        next[c * dim + j] = sums[c * dim + j] / static_cast<double>(counts[c]);
    }
    DescriptorSet updated(dim, std::move(next));
    double shift = 0.0, scale = 1.0;
    for (std::size_t c = 0; c < size; ++c) {
      shift = std::max(shift, std::sqrt(detail::squared(updated[c], centroids[c])));
      const auto w = updated[c];
      scale = std::max(scale, std::sqrt(std::inner_product(w.begin(), w.end(), w.begin(), 0.0)));
    }
    centroids = std::move(updated);
    ++out.iterations;
    assign_all();
    if (shift < tol * scale) break;
  }
  out.centroids = std::move(centroids);
  return out;
}

inline Dictionary build_kmeans(const DescriptorSet& pool, std::size_t size, std::uint64_t seed,
                               std::size_t max_iter = 300, double tol = 1e-6) {
  KMeansResult km = kmeans(pool, size, seed, max_iter, tol);
  Dictionary d;
  d.words = std::move(km.centroids);
  d.builder = Builder::kmeans;
  d.params.size = size;
  d.params.seed = seed;
  d.params.max_iter = max_iter;
  d.params.tol = tol;
  d.params.iterations = km.iterations;
  return d;
}

namespace detail {

inline Dictionary dictionary_from_run(const DescriptorSet& pool, const ClusterRun& run,
                                      std::size_t target) {
  std::vector<std::size_t> protos = run.forest.prototypes;
  std::sort(protos.begin(), protos.end());
  Dictionary d;
  d.words = pool.subset(protos);
  d.builder = Builder::opf;
  d.params.size = protos.size();
  d.params.k_max = run.k_max;
  d.params.chosen_k = run.k;
  d.params.target_size = target;
  return d;
}

}  // namespace detail

// Visual words are the OPF prototypes (real pool members, ascending pool order) of the
// minimum-cut clustering with neighborhood sizes up to k_max.
//
// With a target size the neighborhood bound itself is searched: the bound is doubled from
// 1 while the selected clustering still has more clusters than the target (larger bounds
// usually yield fewer clusters), up to k_max. Among all bounds inside that bracket the one
// whose cluster count is nearest the target wins, ties to the smaller count and then to the
// smaller bound. The emergent size is recorded in params.size.
inline Dictionary build_opf(ClusterSweep& sweep, const DescriptorSet& pool,
                            std::size_t target_size = 0) {
  if (target_size == 0) return detail::dictionary_from_run(pool, sweep.best(sweep.k_cap()), 0);

  std::size_t upper = 1;
  while (upper < sweep.k_cap() && sweep.best_summary(upper).n_clusters > target_size)
    upper = std::min(sweep.k_cap(), upper * 2);

  const auto all = sweep.summaries(upper);
  std::size_t best_bound = 0, best_count = 0;
  ClusterSweep::Summary prefix_best = all.front();
  auto distance_to_target = [&](std::size_t c) {
    return c > target_size ? c - target_size : target_size - c;
  };
  for (const auto& s : all) {
    if (s.cut < prefix_best.cut) prefix_best = s;
    const std::size_t count = prefix_best.n_clusters;
    const bool better =
        best_bound == 0 || distance_to_target(count) < distance_to_target(best_count) ||
        (distance_to_target(count) == distance_to_target(best_count) && count < best_count);
    if (better) {
      best_bound = s.k;
      best_count = count;
    }
  }
  ClusterRun chosen = sweep.run(sweep.best_summary(best_bound).k);
  Dictionary d = detail::dictionary_from_run(pool, chosen, target_size);
  d.params.k_max = best_bound;
  return d;
}

inline Dictionary build_opf(const DescriptorSet& pool, std::size_t k_max,
                            std::size_t target_size = 0, std::size_t stride = 1,
                            std::size_t workers = worker_count()) {
  if (k_max >= pool.size())
    throw InputError("k_max " + std::to_string(k_max) + " must be below the pool size " +
                     std::to_string(pool.size()));
  ClusterSweep sweep(pool, k_max, stride, workers);
  return build_opf(sweep, pool, target_size);
}

// Nearest-word voting (ties to the lower word index).
inline Histogram quantize(const DescriptorSet& image, const Dictionary& dict,
                          std::string image_id = {}) {
  if (image.empty()) throw InputError("cannot quantize an image without descriptors");
  if (image.dim() != dict.dim())
    throw InputError("dimension mismatch: image " + std::to_string(image.dim()) +
                     ", dictionary " + std::to_string(dict.dim()));
  Histogram h{std::move(image_id), std::vector<std::uint64_t>(dict.size(), 0)};
  for (std::size_t i = 0; i < image.size(); ++i) ++h.counts[detail::nearest_row(dict.words, image[i])];
  return h;
}

}  // namespace opfbovw
