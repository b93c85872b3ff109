#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <numeric>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "opfbovw/core.hpp"
#include "opfbovw/dictionary.hpp"
#include "opfbovw/eval.hpp"
#include "opfbovw/metrics.hpp"
#include "opfbovw/opf_supervised.hpp"
#include "opfbovw/parallel.hpp"
#include "opfbovw/split.hpp"
#include "opfbovw/wilcoxon.hpp"

namespace opfbovw {

enum class ClassifierKind { opf_cpl, opf_knn, external };
enum class Normalization { none, l1, l2 };

inline std::string_view to_string(ClassifierKind c) {
  switch (c) {
    case ClassifierKind::opf_cpl: return "opf_cpl";
    case ClassifierKind::opf_knn: return "opf_knn";
    case ClassifierKind::external: return "external";
  }
  return "?";
}

inline ClassifierKind parse_classifier(std::string_view s) {
  if (s == "opf_cpl") return ClassifierKind::opf_cpl;
  if (s == "opf_knn") return ClassifierKind::opf_knn;
  if (s == "external") return ClassifierKind::external;
  throw InputError("unknown classifier '" + std::string(s) + "'");
}

inline std::string_view to_string(Normalization n) {
  switch (n) {
    case Normalization::none: return "none";
    case Normalization::l1: return "l1";
    case Normalization::l2: return "l2";
  }
  return "?";
}

inline Normalization parse_normalization(std::string_view s) {
  if (s == "none") return Normalization::none;
  if (s == "l1") return Normalization::l1;
  if (s == "l2") return Normalization::l2;
  throw InputError("unknown normalization '" + std::string(s) + "'");
}

inline std::vector<double> histogram_features(const Histogram& h, Normalization norm) {
  std::vector<double> v(h.counts.begin(), h.counts.end());
  double scale = 0.0;
  if (norm == Normalization::l1) scale = std::accumulate(v.begin(), v.end(), 0.0);
  if (norm == Normalization::l2) scale = std::sqrt(std::inner_product(v.begin(), v.end(), v.begin(), 0.0));
  if (scale > 0.0)
    for (auto& x : v) x /= scale;
  return v;
}

// Predicted label names from an outside classifier, keyed by run index then image id.
using ExternalPredictions = std::map<std::size_t, std::map<std::string, std::string>>;

struct ExperimentConfig {
  std::string feature_source = "external";  // sift | surf | akaze | external
  std::vector<Builder> builders{Builder::opf};
  std::vector<std::size_t> sizes{100, 500, 1000};
  std::vector<ClassifierKind> classifiers{ClassifierKind::opf_cpl};
  std::size_t runs = 20;
  double train_fraction = 0.7;
  std::uint64_t seed = 0;
  std::size_t k_max = 500;   // OPF clustering neighborhood bound
  std::size_t stride = 1;    // step of the k sweep
  bool opf_pin_size = true;  // search k_max for the dictionary size nearest each size
  Normalization normalization = Normalization::none;
  std::size_t knn_k_max = 500;  // OPF_knn tuning range is [1, knn_k_max]
  std::size_t kmeans_max_iter = 300;
  double kmeans_tol = 1e-6;
  std::string positive_label;   // empty: last entry of the label set
  bool grouped = false;         // keep records of one group on one side of each split

  friend bool operator==(const ExperimentConfig&, const ExperimentConfig&) = default;
};

struct RunResult {
  std::size_t run = 0;
  std::uint64_t seed = 0;
  bool complete = false;
  std::string error;
  ConfusionCounts counts;
  double accuracy = 0.0;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
  std::size_t dictionary_size = 0;
  std::size_t knn_k = 0;  // tuned k for opf_knn, else 0
  std::size_t train_images = 0, test_images = 0;
  std::uint64_t pois = 0;            // descriptors over train + test images
  std::uint64_t quantized_votes = 0; // histogram mass over train + test images

  friend bool operator==(const RunResult&, const RunResult&) = default;
};

struct ResultRow {
  Builder builder = Builder::opf;
  std::size_t size = 0;
  ClassifierKind classifier = ClassifierKind::opf_cpl;
  std::vector<RunResult> runs;
  std::size_t completed = 0;
  std::optional<double> mean_accuracy;
  std::optional<double> std_accuracy;
  std::optional<double> mean_sensitivity;
  std::optional<double> mean_specificity;
  double mean_dictionary_size = 0.0;
  // Highlighting in the style of the published tables: best row of its builder, rows not
  // significantly different from that best (Wilcoxon), and the best row overall.
  bool best_in_builder = false;
  bool similar_to_builder_best = false;
  bool best_overall = false;

  friend bool operator==(const ResultRow&, const ResultRow&) = default;
};

struct Comparison {
  std::size_t baseline = 0;  // row index of the best row
  std::size_t other = 0;
  std::string scope;         // "builder" or "overall"
  WilcoxonResult result;

  friend bool operator==(const Comparison&, const Comparison&) = default;
};

struct ExperimentReport {
  ExperimentConfig config;
  std::vector<std::string> label_set;
  std::string positive_label;
  std::vector<ResultRow> rows;
  std::vector<Comparison> comparisons;

  friend bool operator==(const ExperimentReport&, const ExperimentReport&) = default;
};

// Histograms of one run, passed to ExperimentHooks::on_features.
struct FeatureExport {
  std::size_t run = 0;
  Builder builder = Builder::opf;
  std::size_t size = 0;
  const Dataset* dataset = nullptr;
  const IndexSplit* split = nullptr;
  const std::vector<Histogram>* histograms = nullptr;  // one per dataset record
};

struct ExperimentHooks {
  // May be called concurrently from worker threads.
  std::function<void(const FeatureExport&)> on_features;
  const ExternalPredictions* external = nullptr;
  std::size_t workers = worker_count();
};

namespace detail {

inline std::size_t row_index(const ExperimentConfig& c, std::size_t b, std::size_t s, std::size_t k) {
  return (b * c.sizes.size() + s) * c.classifiers.size() + k;
}

inline double mean_of(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

inline void summarize(ResultRow& row) {
  std::vector<double> acc, sens, spec, dict;
  for (const auto& r : row.runs) {
    if (!r.complete) continue;
    acc.push_back(r.accuracy);
    dict.push_back(static_cast<double>(r.dictionary_size));
    if (r.sensitivity) sens.push_back(*r.sensitivity);
    if (r.specificity) spec.push_back(*r.specificity);
  }
  row.completed = acc.size();
  if (acc.empty()) return;
  const double m = mean_of(acc);
  row.mean_accuracy = m;
  double ss = 0.0;
  for (auto a : acc) ss += (a - m) * (a - m);
  row.std_accuracy = acc.size() > 1 ? std::sqrt(ss / static_cast<double>(acc.size() - 1)) : 0.0;
  if (!sens.empty()) row.mean_sensitivity = mean_of(sens);
  if (!spec.empty()) row.mean_specificity = mean_of(spec);
  row.mean_dictionary_size = mean_of(dict);
}

// Per-run accuracies of runs complete in both rows.
inline WilcoxonResult compare_rows(const ResultRow& best, const ResultRow& other) {
  std::vector<double> x, y;
  for (std::size_t r = 0; r < best.runs.size(); ++r)
    if (best.runs[r].complete && other.runs[r].complete) {
      x.push_back(best.runs[r].accuracy);
      y.push_back(other.runs[r].accuracy);
    }
  return wilcoxon_signed_rank(x, y);
}

inline void highlight(ExperimentReport& report) {
  auto better = [&](std::size_t a, std::size_t b) {
    return *report.rows[a].mean_accuracy > *report.rows[b].mean_accuracy;
  };
  std::optional<std::size_t> overall;
  std::map<Builder, std::vector<std::size_t>> by_builder;
  for (std::size_t i = 0; i < report.rows.size(); ++i) {
    if (!report.rows[i].mean_accuracy) continue;
    by_builder[report.rows[i].builder].push_back(i);
    if (!overall || better(i, *overall)) overall = i;
  }
  for (const auto& builder : report.config.builders) {
    const auto& members = by_builder[builder];
    if (members.empty()) continue;
    std::size_t best = members.front();
    for (auto i : members)
      if (better(i, best)) best = i;
    report.rows[best].best_in_builder = true;
    report.rows[best].similar_to_builder_best = true;
    for (auto i : members) {
      if (i == best) continue;
      Comparison c{best, i, "builder", compare_rows(report.rows[best], report.rows[i])};
      report.rows[i].similar_to_builder_best = !c.result.reject;
      report.comparisons.push_back(std::move(c));
    }
  }
  if (overall) {
    report.rows[*overall].best_overall = true;
    for (std::size_t i = 0; i < report.rows.size(); ++i) {
      if (i == *overall || !report.rows[i].mean_accuracy) continue;
      report.comparisons.push_back(
          {*overall, i, "overall", compare_rows(report.rows[*overall], report.rows[i])});
    }
  }
}

}  // namespace detail

inline void validate_config(const ExperimentConfig& c) {
  if (c.runs < 1) throw InputError("runs must be >= 1");
  if (!(c.train_fraction > 0.0 && c.train_fraction < 1.0))
    throw InputError("train fraction must lie in (0, 1)");
  if (c.builders.empty() || c.sizes.empty() || c.classifiers.empty())
    throw InputError("builders, sizes and classifiers must be non-empty");
  if (c.k_max < 1) throw InputError("k_max must be >= 1");
  if (c.knn_k_max < 1) throw InputError("knn_k_max must be >= 1");
  for (auto s : c.sizes)
    if (s < 1) throw InputError("dictionary sizes must be >= 1");
  static const std::vector<std::string> sources{"sift", "surf", "akaze", "external"};
  if (std::find(sources.begin(), sources.end(), c.feature_source) == sources.end())
    throw InputError("unknown feature source '" + c.feature_source + "'");
}

// Per run: stratified split, dictionary from the training images' descriptors only,
// quantization of every image against that dictionary, classifier training on the training
// histograms and evaluation on the test histograms. Stage failures mark the run incomplete.
// Run r uses seed config.seed + r, so results do not depend on scheduling.
inline ExperimentReport run_experiment(const Dataset& data, const ExperimentConfig& config,
                                       const ExperimentHooks& hooks = {}) {
  validate_config(config);
  if (const auto issues = validate_dataset(data); !issues.empty()) {
    std::string msg = "invalid dataset:";
    for (const auto& v : issues) msg += " [" + (v.record.empty() ? "dataset" : v.record) + ": " + v.rule + "]";
    throw InputError(msg);
  }
  Label positive = data.label_set.size() - 1;
  if (!config.positive_label.empty()) {
    const auto it = std::find(data.label_set.begin(), data.label_set.end(), config.positive_label);
    if (it == data.label_set.end())
      throw InputError("positive label '" + config.positive_label + "' not in the label set");
    positive = static_cast<Label>(it - data.label_set.begin());
  }
  const bool wants_external = std::find(config.classifiers.begin(), config.classifiers.end(),
                                        ClassifierKind::external) != config.classifiers.end();
  if (wants_external && hooks.external == nullptr)
    throw InputError("external classifier requested without a predictions file");

  ExperimentReport report;
  report.config = config;
  report.label_set = data.label_set;
  report.positive_label = data.label_set[positive];
  for (auto b : config.builders)
    for (auto s : config.sizes)
      for (auto c : config.classifiers) {
        ResultRow row;
        row.builder = b;
        row.size = s;
        row.classifier = c;
        row.runs.resize(config.runs);
        report.rows.push_back(std::move(row));
      }

  const std::size_t outer = std::min(hooks.workers, config.runs);
  const std::size_t inner = outer > 1 ? 1 : hooks.workers;

  parallel_for(
      config.runs,
      [&](std::size_t run) {
        const std::uint64_t run_seed = config.seed + run;
        auto fail_all = [&](const std::string& why) {
          for (auto& row : report.rows) {
            row.runs[run].run = run;
            row.runs[run].seed = run_seed;
            row.runs[run].error = why;
          }
        };
        IndexSplit split;
        DescriptorSet pool(data.dim);
        std::uint64_t pois = 0;
        try {
          split = stratified_split(data, config.train_fraction, derive_seed(run_seed, 1), config.grouped);
          for (auto i : split.train) pool.append(data.records[i].descriptors);
          for (const auto& r : data.records) pois += r.descriptors.size();
        } catch (const std::exception& e) {
          fail_all(std::string("split: ") + e.what());
          return;
        }
        std::vector<Label> train_labels, test_labels;
        for (auto i : split.train) train_labels.push_back(data.records[i].label);
        for (auto i : split.test) test_labels.push_back(data.records[i].label);

        std::optional<ClusterSweep> sweep;
        std::optional<Dictionary> emergent_opf;
        for (std::size_t b = 0; b < config.builders.size(); ++b)
          for (std::size_t s = 0; s < config.sizes.size(); ++s) {
            const Builder builder = config.builders[b];
            const std::size_t size = config.sizes[s];
            auto mark = [&](std::size_t c) -> RunResult& {
              RunResult& rr = report.rows[detail::row_index(config, b, s, c)].runs[run];
              rr.run = run;
              rr.seed = run_seed;
              rr.train_images = split.train.size();
              rr.test_images = split.test.size();
              rr.pois = pois;
              return rr;
            };
            Dictionary dict;
            std::vector<Histogram> hist;
            DescriptorSet train_x, test_x;
            try {
              const std::uint64_t dict_seed = derive_seed(run_seed, (b + 1) * 1'000'003ULL + size);
              switch (builder) {
                case Builder::random: dict = build_random(pool, size, dict_seed); break;
                case Builder::kmeans:
                  dict = build_kmeans(pool, size, dict_seed, config.kmeans_max_iter, config.kmeans_tol);
                  break;
                case Builder::opf:
                  if (!sweep) sweep.emplace(pool, config.k_max, config.stride, inner);
                  if (config.opf_pin_size) {
                    dict = build_opf(*sweep, pool, size);
                  } else {
                    if (!emergent_opf) emergent_opf = build_opf(*sweep, pool, 0);
                    dict = *emergent_opf;
                  }
                  break;
              }
              hist.reserve(data.records.size());
              std::uint64_t votes = 0;
              for (const auto& r : data.records) {
                hist.push_back(quantize(r.descriptors, dict, r.image_id));
                if (hist.back().total() != r.descriptors.size())
                  throw std::logic_error("quantization lost votes for image " + r.image_id);
                votes += hist.back().total();
              }
              if (votes != pois) throw std::logic_error("quantization mass differs from PoI count");
              for (std::size_t c = 0; c < config.classifiers.size(); ++c) {
                mark(c).quantized_votes = votes;
                mark(c).dictionary_size = dict.size();
              }
              train_x = DescriptorSet(dict.size());
              test_x = DescriptorSet(dict.size());
              for (auto i : split.train) train_x.push_back(histogram_features(hist[i], config.normalization));
              for (auto i : split.test) test_x.push_back(histogram_features(hist[i], config.normalization));
              if (hooks.on_features)
                hooks.on_features(FeatureExport{run, builder, size, &data, &split, &hist});
            } catch (const std::exception& e) {
              for (std::size_t c = 0; c < config.classifiers.size(); ++c)
                mark(c).error = std::string("dictionary/quantize: ") + e.what();
              continue;
            }

            for (std::size_t c = 0; c < config.classifiers.size(); ++c) {
              RunResult& rr = mark(c);
              try {
                std::vector<Label> predicted(split.test.size());
                switch (config.classifiers[c]) {
                  case ClassifierKind::opf_cpl: {
                    const CplModel m = train_cpl(train_x, train_labels);
                    for (std::size_t t = 0; t < split.test.size(); ++t)
                      predicted[t] = classify_cpl(m, test_x[t]).label;
                    break;
                  }
                  case ClassifierKind::opf_knn: {
                    std::vector<std::size_t> range(std::min(config.knn_k_max, train_x.size() - 1));
                    std::iota(range.begin(), range.end(), std::size_t{1});
                    const TuneResult tuned = tune_k(train_x, train_labels, range, derive_seed(run_seed, 3), inner);
                    const KnnModel m = train_knn(train_x, train_labels, tuned.k);
                    rr.knn_k = tuned.k;
                    for (std::size_t t = 0; t < split.test.size(); ++t)
                      predicted[t] = classify_knn(m, test_x[t]).label;
                    break;
                  }
                  case ClassifierKind::external: {
                    const auto per_run = hooks.external->find(run);
                    if (per_run == hooks.external->end())
                      throw InputError("no external predictions for run " + std::to_string(run));
                    for (std::size_t t = 0; t < split.test.size(); ++t) {
                      const auto& id = data.records[split.test[t]].image_id;
                      const auto hit = per_run->second.find(id);
                      if (hit == per_run->second.end())
                        throw InputError("no external prediction for image " + id);
                      const auto l = std::find(data.label_set.begin(), data.label_set.end(), hit->second);
                      if (l == data.label_set.end())
                        throw InputError("external prediction label '" + hit->second + "' unknown");
                      predicted[t] = static_cast<Label>(l - data.label_set.begin());
                    }
                    break;
                  }
                }
                ConfusionCounts counts;
                std::size_t correct = 0;
                for (std::size_t t = 0; t < predicted.size(); ++t) {
                  record(counts, test_labels[t], predicted[t], positive);
                  correct += predicted[t] == test_labels[t];
                }
                const Metrics m = metrics(counts);
                rr.counts = counts;
                // One-vs-rest counts only give the accuracy formula for two labels.
                rr.accuracy = data.label_set.size() == 2
                                  ? m.accuracy
                                  : 100.0 * static_cast<double>(correct) / static_cast<double>(predicted.size());
                rr.sensitivity = m.sensitivity;
                rr.specificity = m.specificity;
                rr.complete = true;
              } catch (const std::exception& e) {
                rr.error = std::string(to_string(config.classifiers[c])) + ": " + e.what();
              }
            }
          }
      },
      outer);

  for (auto& row : report.rows) detail::summarize(row);
  detail::highlight(report);
  return report;
}

}  // namespace opfbovw
