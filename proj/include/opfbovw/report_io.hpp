#pragma once

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "opfbovw/experiment.hpp"
#include "opfbovw/io.hpp"

namespace opfbovw {

using nlohmann::json;

namespace detail {

template <class T>
json opt_to_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

template <class T>
std::optional<T> opt_from_json(const json& j) {
  if (j.is_null()) return std::nullopt;
  return j.get<T>();
}

}  // namespace detail

inline void to_json(json& j, const ConfusionCounts& c) {
  j = json{{"tp", c.tp}, {"tn", c.tn}, {"fp", c.fp}, {"fn", c.fn}};
}
inline void from_json(const json& j, ConfusionCounts& c) {
  j.at("tp").get_to(c.tp);
  j.at("tn").get_to(c.tn);
  j.at("fp").get_to(c.fp);
  j.at("fn").get_to(c.fn);
}

inline void to_json(json& j, const ExperimentConfig& c) {
  std::vector<std::string> builders, classifiers;
  for (auto b : c.builders) builders.emplace_back(to_string(b));
  for (auto k : c.classifiers) classifiers.emplace_back(to_string(k));
  j = json{{"feature_source", c.feature_source},
           {"builders", builders},
           {"sizes", c.sizes},
           {"classifiers", classifiers},
           {"runs", c.runs},
           {"train_fraction", c.train_fraction},
           {"seed", c.seed},
           {"k_max", c.k_max},
           {"stride", c.stride},
           {"opf_pin_size", c.opf_pin_size},
           {"normalization", to_string(c.normalization)},
           {"knn_k_max", c.knn_k_max},
           {"kmeans_max_iter", c.kmeans_max_iter},
           {"kmeans_tol", c.kmeans_tol},
           {"positive_label", c.positive_label},
           {"grouped", c.grouped}};
}
inline void from_json(const json& j, ExperimentConfig& c) {
  j.at("feature_source").get_to(c.feature_source);
  c.builders.clear();
  for (const auto& b : j.at("builders")) c.builders.push_back(parse_builder(b.get<std::string>()));
  j.at("sizes").get_to(c.sizes);
  c.classifiers.clear();
  for (const auto& k : j.at("classifiers")) c.classifiers.push_back(parse_classifier(k.get<std::string>()));
  j.at("runs").get_to(c.runs);
  j.at("train_fraction").get_to(c.train_fraction);
  j.at("seed").get_to(c.seed);
  j.at("k_max").get_to(c.k_max);
  j.at("stride").get_to(c.stride);
  j.at("opf_pin_size").get_to(c.opf_pin_size);
  c.normalization = parse_normalization(j.at("normalization").get<std::string>());
  j.at("knn_k_max").get_to(c.knn_k_max);
  j.at("kmeans_max_iter").get_to(c.kmeans_max_iter);
  j.at("kmeans_tol").get_to(c.kmeans_tol);
  j.at("positive_label").get_to(c.positive_label);
  j.at("grouped").get_to(c.grouped);
}

inline void to_json(json& j, const RunResult& r) {
  j = json{{"run", r.run},
           {"seed", r.seed},
           {"complete", r.complete},
           {"error", r.error},
           {"counts", r.counts},
           {"accuracy", r.accuracy},
           {"sensitivity", detail::opt_to_json(r.sensitivity)},
           {"specificity", detail::opt_to_json(r.specificity)},
           {"dictionary_size", r.dictionary_size},
           {"knn_k", r.knn_k},
           {"train_images", r.train_images},
           {"test_images", r.test_images},
           {"pois", r.pois},
           {"quantized_votes", r.quantized_votes}};
}
inline void from_json(const json& j, RunResult& r) {
  j.at("run").get_to(r.run);
  j.at("seed").get_to(r.seed);
  j.at("complete").get_to(r.complete);
  j.at("error").get_to(r.error);
  j.at("counts").get_to(r.counts);
  j.at("accuracy").get_to(r.accuracy);
  r.sensitivity = detail::opt_from_json<double>(j.at("sensitivity"));
  r.specificity = detail::opt_from_json<double>(j.at("specificity"));
  j.at("dictionary_size").get_to(r.dictionary_size);
  j.at("knn_k").get_to(r.knn_k);
  j.at("train_images").get_to(r.train_images);
  j.at("test_images").get_to(r.test_images);
  j.at("pois").get_to(r.pois);
  j.at("quantized_votes").get_to(r.quantized_votes);
}

inline void to_json(json& j, const ResultRow& r) {
  j = json{{"builder", to_string(r.builder)},
           {"size", r.size},
           {"classifier", to_string(r.classifier)},
           {"runs", r.runs},
           {"completed", r.completed},
           {"mean_accuracy", detail::opt_to_json(r.mean_accuracy)},
           {"std_accuracy", detail::opt_to_json(r.std_accuracy)},
           {"mean_sensitivity", detail::opt_to_json(r.mean_sensitivity)},
           {"mean_specificity", detail::opt_to_json(r.mean_specificity)},
           {"mean_dictionary_size", r.mean_dictionary_size},
           {"best_in_builder", r.best_in_builder},
           {"similar_to_builder_best", r.similar_to_builder_best},
           {"best_overall", r.best_overall}};
}
inline void from_json(const json& j, ResultRow& r) {
  r.builder = parse_builder(j.at("builder").get<std::string>());
  j.at("size").get_to(r.size);
  r.classifier = parse_classifier(j.at("classifier").get<std::string>());
  j.at("runs").get_to(r.runs);
  j.at("completed").get_to(r.completed);
  r.mean_accuracy = detail::opt_from_json<double>(j.at("mean_accuracy"));
  r.std_accuracy = detail::opt_from_json<double>(j.at("std_accuracy"));
  r.mean_sensitivity = detail::opt_from_json<double>(j.at("mean_sensitivity"));
  r.mean_specificity = detail::opt_from_json<double>(j.at("mean_specificity"));
  j.at("mean_dictionary_size").get_to(r.mean_dictionary_size);
  j.at("best_in_builder").get_to(r.best_in_builder);
  j.at("similar_to_builder_best").get_to(r.similar_to_builder_best);
  j.at("best_overall").get_to(r.best_overall);
}

inline void to_json(json& j, const WilcoxonResult& w) {
  j = json{{"statistic", w.statistic}, {"p", w.p},         {"reject", w.reject}, {"decided", w.decided},
           {"exact", w.exact},         {"n", w.n},         {"note", w.note}};
}
inline void from_json(const json& j, WilcoxonResult& w) {
  j.at("statistic").get_to(w.statistic);
  j.at("p").get_to(w.p);
  j.at("reject").get_to(w.reject);
  j.at("decided").get_to(w.decided);
  j.at("exact").get_to(w.exact);
  j.at("n").get_to(w.n);
  j.at("note").get_to(w.note);
}

inline void to_json(json& j, const Comparison& c) {
  j = json{{"baseline", c.baseline}, {"other", c.other}, {"scope", c.scope}, {"wilcoxon", c.result}};
}
inline void from_json(const json& j, Comparison& c) {
  j.at("baseline").get_to(c.baseline);
  j.at("other").get_to(c.other);
  j.at("scope").get_to(c.scope);
  j.at("wilcoxon").get_to(c.result);
}

inline constexpr std::string_view kReportFormat = "opfbovw-report";
inline constexpr int kReportVersion = 1;

inline void to_json(json& j, const ExperimentReport& r) {
  j = json{{"format", kReportFormat},   {"version", kReportVersion},         {"config", r.config},
           {"label_set", r.label_set}, {"positive_label", r.positive_label}, {"rows", r.rows},
           {"comparisons", r.comparisons}};
}
inline void from_json(const json& j, ExperimentReport& r) {
  if (j.at("format").get<std::string>() != kReportFormat) throw InputError("not a report file");
  if (j.at("version").get<int>() != kReportVersion) throw InputError("report version mismatch");
  j.at("config").get_to(r.config);
  j.at("label_set").get_to(r.label_set);
  j.at("positive_label").get_to(r.positive_label);
  j.at("rows").get_to(r.rows);
  j.at("comparisons").get_to(r.comparisons);
}

inline std::string report_json(const ExperimentReport& r) { return json(r).dump(2) + "\n"; }

inline ExperimentReport parse_report_json(std::string_view text) {
  try {
    return json::parse(text).get<ExperimentReport>();
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed report: ") + e.what());
  }
}

// Plain-text table, one line per (builder, size, classifier). Mark: `B` = best of its
// builder or not significantly different from it, `*` = best overall.
inline std::string report_table(const ExperimentReport& r) {
  const std::vector<std::string> head{"Dictionary", "Size", "Classifier", "Accuracy", "Std",
                                      "Sens", "Spec", "Words", "Runs", "Mark"};
  auto num = [](const std::optional<double>& v, int prec = 2) {
    if (!v) return std::string("-");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.*f", prec, *v);
    return std::string(buf);
  };
  std::vector<std::vector<std::string>> cells{head};
  for (const auto& row : r.rows) {
    std::string mark;
    if (row.similar_to_builder_best) mark += 'B';
    if (row.best_overall) mark += '*';
    cells.push_back({std::string(to_string(row.builder)), std::to_string(row.size),
                     std::string(to_string(row.classifier)), num(row.mean_accuracy), num(row.std_accuracy),
                     num(row.mean_sensitivity), num(row.mean_specificity),
                     row.completed ? num(row.mean_dictionary_size, 1) : "-",
                     std::to_string(row.completed) + "/" + std::to_string(row.runs.size()), mark});
  }
  std::vector<std::size_t> width(head.size(), 0);
  for (const auto& line : cells)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  std::string out;
  auto emit = [&](const std::vector<std::string>& line) {
    std::string text;
    for (std::size_t c = 0; c < line.size(); ++c) {
      const std::size_t pad = width[c] - line[c].size();
      // text columns left-aligned, numbers right-aligned
      if (c < 3 || c == line.size() - 1) text += line[c] + std::string(pad, ' ');
      else text += std::string(pad, ' ') + line[c];
      if (c + 1 < line.size()) text += "  ";
    }
    while (!text.empty() && text.back() == ' ') text.pop_back();
    out += text + "\n";
  };
  emit(cells.front());
  std::size_t rule = 0;
  for (auto w : width) rule += w + 2;
  out += std::string(rule - 2, '-') + "\n";
  for (std::size_t i = 1; i < cells.size(); ++i) emit(cells[i]);
  return out;
}

enum class ReportFormat { json, table };

inline void write_report(const ExperimentReport& r, const std::filesystem::path& path, ReportFormat f) {
  io::write_file(path, f == ReportFormat::json ? report_json(r) : report_table(r));
}

inline ExperimentReport read_report(const std::filesystem::path& path) {
  return parse_report_json(io::read_file(path));
}

}  // namespace opfbovw
