// Command-line front end: validate, build-dict, quantize, train, classify, experiment,
// stats-wilcoxon, poi-ratio, gen-synth. Exit 0 on success, 1 on data errors, 2 on usage errors.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <numeric>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "opfbovw/opfbovw.hpp"

namespace fs = std::filesystem;
using namespace opfbovw;

namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::string> label_order(const std::vector<io::LabeledHistogram>& rows) {
  std::vector<std::string> out;
  for (const auto& r : rows)
    if (std::find(out.begin(), out.end(), r.label) == out.end()) out.push_back(r.label);
  return out;
}

DescriptorSet feature_matrix(const std::vector<io::LabeledHistogram>& rows, Normalization norm) {
  if (rows.empty()) throw InputError("histogram file has no rows");
  DescriptorSet x(rows.front().histogram.counts.size());
  for (const auto& r : rows) x.push_back(histogram_features(r.histogram, norm));
  return x;
}

DescriptorSet pool_descriptors(const Dataset& d) {
  DescriptorSet pool(d.dim);
  for (const auto& r : d.records) pool.append(r.descriptors);
  return pool;
}

void require_valid(const Dataset& d) {
  const auto issues = validate_dataset(d);
  if (issues.empty()) return;
  std::string msg = "invalid dataset:";
  for (const auto& v : issues) msg += "\n  " + (v.record.empty() ? std::string("dataset") : v.record) + ": " + v.rule;
  throw InputError(msg);
}

std::vector<double> read_column(const fs::path& path) {
  std::vector<double> out;
  const std::string text = io::read_file(path);
  io::detail::LineReader lines(text);
  std::string_view line;
  while (lines.next(line)) {
    const auto body = io::detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto v = io::detail::parse_double(body);
    if (!v) throw InputError(path.string() + ":" + std::to_string(lines.number()) + ": not a number");
    out.push_back(*v);
  }
  return out;
}

// Experiment options that mirror config keys; given flags override the config file.
const std::vector<std::pair<std::string, std::string>> kExperimentFlags{
    {"feature-source", "feature_source"}, {"builders", "builders"},
    {"sizes", "sizes"},                   {"classifiers", "classifiers"},
    {"runs", "runs"},                     {"train-fraction", "train_fraction"},
    {"seed", "seed"},                     {"k-max", "k_max"},
    {"stride", "stride"},                 {"opf-pin-size", "opf_pin_size"},
    {"normalization", "normalization"},   {"knn-k-max", "knn_k_max"},
    {"kmeans-max-iter", "kmeans_max_iter"}, {"kmeans-tol", "kmeans_tol"},
    {"positive-label", "positive_label"}, {"grouped", "grouped"}};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Optimum-path forest bag-of-visual-words toolkit"};
  app.require_subcommand(1);

  // validate
  auto* validate = app.add_subcommand("validate", "Check a manifest and its descriptor files");
  std::string v_manifest;
  validate->add_option("--manifest", v_manifest, "Manifest CSV")->required();

  // build-dict
  auto* build = app.add_subcommand("build-dict", "Build a visual dictionary from a manifest's descriptors");
  std::string b_manifest, b_out, b_builder = "opf";
  std::size_t b_size = 100, b_k_max = 500, b_stride = 1, b_max_iter = 300;
  std::uint64_t b_seed = 0;
  double b_tol = 1e-6;
  bool b_emergent = false;
  build->add_option("--manifest", b_manifest, "Manifest CSV")->required();
  build->add_option("--out", b_out, "Dictionary file to write")->required();
  build->add_option("--builder", b_builder, "opf | kmeans | random")
      ->capture_default_str()
      ->check(CLI::IsMember({"opf", "kmeans", "random"}));
  build->add_option("--size", b_size, "Dictionary size (opf: target size)")->capture_default_str();
  build->add_option("--k-max", b_k_max, "opf: neighborhood bound")->capture_default_str();
  build->add_option("--stride", b_stride, "opf: step of the k sweep")->capture_default_str();
  build->add_option("--seed", b_seed, "random / kmeans seed")->capture_default_str();
  build->add_option("--max-iter", b_max_iter, "kmeans: iteration cap")->capture_default_str();
  build->add_option("--tol", b_tol, "kmeans: relative centroid shift tolerance")->capture_default_str();
  build->add_flag("--emergent", b_emergent, "opf: keep the cluster count found at k_max, ignore --size");

  // quantize
  auto* quant = app.add_subcommand("quantize", "Turn every image of a manifest into a word histogram");
  std::string q_manifest, q_dict, q_out;
  quant->add_option("--manifest", q_manifest, "Manifest CSV")->required();
  quant->add_option("--dict", q_dict, "Dictionary file")->required();
  quant->add_option("--out", q_out, "Histogram CSV to write")->required();

  // train
  auto* train = app.add_subcommand("train", "Train an OPF classifier on histograms");
  std::string t_hist, t_out, t_classifier = "opf_cpl", t_norm = "none";
  std::size_t t_k_max = 500;
  std::uint64_t t_seed = 0;
  train->add_option("--histograms", t_hist, "Histogram CSV")->required();
  train->add_option("--out", t_out, "Model file to write")->required();
  train->add_option("--classifier", t_classifier, "opf_cpl | opf_knn")
      ->capture_default_str()
      ->check(CLI::IsMember({"opf_cpl", "opf_knn"}));
  train->add_option("--normalization", t_norm, "none | l1 | l2")
      ->capture_default_str()
      ->check(CLI::IsMember({"none", "l1", "l2"}));
  train->add_option("--k-max", t_k_max, "opf_knn: tuning range [1, k_max]")->capture_default_str();
  train->add_option("--seed", t_seed, "opf_knn: tuning split seed")->capture_default_str();

  // classify
  auto* classify = app.add_subcommand("classify", "Label histograms with a trained model");
  std::string c_model, c_hist, c_out;
  classify->add_option("--model", c_model, "Model file")->required();
  classify->add_option("--histograms", c_hist, "Histogram CSV")->required();
  classify->add_option("--out", c_out, "Predictions CSV (default: stdout)");

  // experiment
  auto* exper = app.add_subcommand("experiment", "Repeated split / dictionary / classifier protocol");
  std::string e_manifest, e_config, e_out, e_table, e_export, e_predictions;
  exper->add_option("--manifest", e_manifest, "Manifest CSV")->required();
  exper->add_option("--config", e_config, "key=value configuration file");
  exper->add_option("--out", e_out, "JSON report to write (default: stdout)");
  exper->add_option("--table", e_table, "Plain-text table to write");
  exper->add_option("--export-features", e_export, "Directory for per-run histogram CSVs");
  exper->add_option("--predictions", e_predictions, "External predictions CSV (run,image_id,label)");
  std::map<std::string, std::string> e_flags;
  for (const auto& [flag, key] : kExperimentFlags) exper->add_option("--" + flag, e_flags[key], "config key " + key);

  // stats-wilcoxon
  auto* wil = app.add_subcommand("stats-wilcoxon", "Paired Wilcoxon signed-rank test");
  std::string w_x, w_y;
  double w_alpha = 0.05;
  wil->add_option("--x", w_x, "First sample, one value per line")->required();
  wil->add_option("--y", w_y, "Second sample, one value per line")->required();
  wil->add_option("--alpha", w_alpha, "Significance level")->capture_default_str();

  // poi-ratio
  auto* poi = app.add_subcommand("poi-ratio", "Percentage of keypoints inside the intersection of masks");
  std::string p_coords;
  std::vector<std::string> p_masks;
  poi->add_option("--coords", p_coords, "Coordinate file (x,y per line)")->required();
  poi->add_option("--mask", p_masks, "PGM mask; repeat to intersect")->required();

  // gen-synth
  auto* gen = app.add_subcommand("gen-synth", "Write a synthetic two-class descriptor dataset");
  std::string g_out;
  SyntheticSpec g_spec;
  bool g_binary = false;
  gen->add_option("--out", g_out, "Output directory")->required();
  gen->add_option("--images-per-class", g_spec.images_per_class)->capture_default_str();
  gen->add_option("--pois", g_spec.pois_per_image, "Descriptors per image")->capture_default_str();
  gen->add_option("--dim", g_spec.dim)->capture_default_str();
  gen->add_option("--separation", g_spec.separation)->capture_default_str();
  gen->add_option("--components", g_spec.components, "Mixture components per class")->capture_default_str();
  gen->add_option("--seed", g_spec.seed)->capture_default_str();
  gen->add_flag("--binary", g_binary, "Write binary descriptor files");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (*validate) {
      const Dataset d = io::load_dataset(v_manifest);
      const auto issues = validate_dataset(d);
      for (const auto& v : issues)
        std::cout << (v.record.empty() ? std::string("dataset") : v.record) << ": " << v.rule << "\n";
      std::size_t pois = 0;
      for (const auto& r : d.records) pois += r.descriptors.size();
      std::cout << d.records.size() << " images, " << pois << " descriptors, dim " << d.dim << ", "
                << issues.size() << " violations\n";
      return issues.empty() ? 0 : 1;
    }

    if (*build) {
      const Dataset d = io::load_dataset(b_manifest);
      require_valid(d);
      const DescriptorSet pool = pool_descriptors(d);
      Dictionary dict;
      switch (parse_builder(b_builder)) {
        case Builder::random: dict = build_random(pool, b_size, b_seed); break;
        case Builder::kmeans: dict = build_kmeans(pool, b_size, b_seed, b_max_iter, b_tol); break;
        case Builder::opf: dict = build_opf(pool, b_k_max, b_emergent ? 0 : b_size, b_stride); break;
      }
      io::write_dictionary(dict, b_out);
      std::cout << dict.size() << " words";
      if (dict.builder == Builder::opf) std::cout << " (k = " << dict.params.chosen_k << ")";
      std::cout << "\n";
      return 0;
    }

    if (*quant) {
      const Dataset d = io::load_dataset(q_manifest);
      require_valid(d);
      const Dictionary dict = io::read_dictionary(q_dict);
      std::vector<io::LabeledHistogram> rows;
      for (const auto& r : d.records) rows.push_back({quantize(r.descriptors, dict, r.image_id), d.label_set[r.label]});
      io::write_histograms(q_out, rows);
      return 0;
    }

    if (*train) {
      const auto rows = io::read_histograms(t_hist);
      io::StoredModel m;
      m.kind = parse_classifier(t_classifier);
      m.normalization = parse_normalization(t_norm);
      m.label_set = label_order(rows);
      const DescriptorSet x = feature_matrix(rows, m.normalization);
      std::vector<Label> y;
      for (const auto& r : rows)
        y.push_back(static_cast<Label>(std::find(m.label_set.begin(), m.label_set.end(), r.label) - m.label_set.begin()));
      if (m.kind == ClassifierKind::opf_cpl) {
        m.cpl = train_cpl(x, y);
      } else if (m.kind == ClassifierKind::opf_knn) {
        if (x.size() < 2) throw InputError("opf_knn needs at least 2 training samples");
        std::vector<std::size_t> range(std::min(t_k_max, x.size() - 1));
        std::iota(range.begin(), range.end(), std::size_t{1});
        const TuneResult tuned = tune_k(x, y, range, t_seed);
        m.knn = train_knn(x, y, tuned.k);
        std::cout << "k = " << tuned.k << "\n";
      } else {
        throw UsageError("train supports opf_cpl and opf_knn");
      }
      io::write_model(t_out, m);
      return 0;
    }

    if (*classify) {
      const io::StoredModel m = io::read_model(c_model);
      const auto rows = io::read_histograms(c_hist);
      const DescriptorSet x = feature_matrix(rows, m.normalization);
      const std::size_t dim = m.cpl ? m.cpl->samples.dim() : m.knn->samples.dim();
      if (x.dim() != dim)
        throw InputError("histograms have " + std::to_string(x.dim()) + " bins, model expects " + std::to_string(dim));
      std::string out = "image_id,label,predicted\n";
      std::size_t correct = 0;
      for (std::size_t i = 0; i < rows.size(); ++i) {
        const Prediction p = m.cpl ? classify_cpl(*m.cpl, x[i]) : classify_knn(*m.knn, x[i]);
        const std::string& name = m.label_set.at(p.label);
        correct += name == rows[i].label;
        out += rows[i].histogram.image_id + "," + rows[i].label + "," + name + "\n";
      }
      if (c_out.empty()) std::cout << out;
      else io::write_file(c_out, out);
      std::cerr << correct << "/" << rows.size() << " match the given labels\n";
      return 0;
    }

    if (*exper) {
      ExperimentConfig config;
      if (!e_config.empty()) config = io::read_config(e_config);
      for (const auto& [flag, key] : kExperimentFlags)
        if (exper->count("--" + flag) > 0) {
          try {
            io::apply_config_value(config, key, e_flags[key]);
          } catch (const InputError& e) {
            throw UsageError("--" + flag + ": " + e.what());
          }
        }
      const Dataset d = io::load_dataset(e_manifest);
      ExperimentHooks hooks;
      ExternalPredictions external;
      if (!e_predictions.empty()) {
        external = io::read_predictions(e_predictions);
        hooks.external = &external;
      }
      if (!e_export.empty()) {
        fs::create_directories(e_export);
        hooks.on_features = [&](const FeatureExport& f) {
          for (const bool is_train : {true, false}) {
            std::vector<io::LabeledHistogram> rows;
            for (auto i : is_train ? f.split->train : f.split->test)
              rows.push_back({(*f.histograms)[i], f.dataset->label_set[f.dataset->records[i].label]});
            const std::string name = "run" + std::to_string(f.run) + "_" + std::string(to_string(f.builder)) + "_" +
                                     std::to_string(f.size) + (is_train ? "_train.csv" : "_test.csv");
            io::write_histograms(fs::path(e_export) / name, rows);
          }
        };
      }
      const ExperimentReport report = run_experiment(d, config, hooks);
      if (e_out.empty()) std::cout << report_json(report);
      else write_report(report, e_out, ReportFormat::json);
      if (!e_table.empty()) write_report(report, e_table, ReportFormat::table);
      if (!e_out.empty()) std::cout << report_table(report);
      return 0;
    }

    if (*wil) {
      const auto x = read_column(w_x);
      const auto y = read_column(w_y);
      const WilcoxonResult r = wilcoxon_signed_rank(x, y, w_alpha);
      std::printf("n=%zu W=%g ", r.n, r.statistic);
      if (!r.decided) {
        std::printf("no decision (%s)\n", r.note.c_str());
      } else {
        std::printf("p=%.6g (%s) %s at alpha=%g\n", r.p, r.exact ? "exact" : "normal approximation",
                    r.reject ? "reject" : "do not reject", w_alpha);
      }
      return 0;
    }

    if (*poi) {
      const auto points = io::read_coords(p_coords);
      std::vector<RegionMask> masks;
      for (const auto& m : p_masks) masks.push_back(io::read_pgm(m));
      std::printf("%.4f\n", poi_region_ratio(points, masks));
      return 0;
    }

    if (*gen) {
      const Dataset d = gen_synthetic(g_spec);
      io::write_dataset(g_out, d, "manifest.csv", g_binary);
      std::cout << d.records.size() << " images written to " << g_out << "\n";
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 2;
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
