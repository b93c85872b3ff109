#pragma once

#include <array>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "opfbovw/core.hpp"
#include "opfbovw/dictionary.hpp"
#include "opfbovw/eval.hpp"
#include "opfbovw/experiment.hpp"
#include "opfbovw/opf_supervised.hpp"

namespace opfbovw::io {

namespace fs = std::filesystem;

inline std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return std::move(buf).str();
}

inline void write_file(const fs::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw InputError("write failed for " + path.string());
}

// Shortest text form that parses back to the same double.
inline std::string format_double(double v) {
  std::array<char, 32> buf{};
  auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), end);
}

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i)
    if (i == s.size() || s[i] == sep) {
      out.push_back(trim(s.substr(start, i - start)));
      start = i + 1;
    }
  return out;
}

// Iterates lines of a buffer, keeping 1-based line numbers.
class LineReader {
 public:
  explicit LineReader(std::string_view text) : text_(text) {}
  bool next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    const std::size_t nl = text_.find('\n', pos_);
    const std::size_t end = nl == std::string_view::npos ? text_.size() : nl;
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++number_;
    return true;
  }
  std::size_t number() const noexcept { return number_; }

 private:
  std::string_view text_;
  std::size_t pos_ = 0;
  std::size_t number_ = 0;
};

inline std::optional<double> parse_double(std::string_view s) {
  double v = 0.0;
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

template <class Int>
inline std::optional<Int> parse_int(std::string_view s) {
  Int v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) return std::nullopt;
  return v;
}

inline std::string where(const std::string& source, std::size_t line) {
  return source + ":" + std::to_string(line) + ": ";
}

template <class Int>
Int le_read(const std::string& buf, std::size_t off) {
  Int v = 0;
  for (std::size_t b = 0; b < sizeof(Int); ++b)
    v |= static_cast<Int>(static_cast<unsigned char>(buf[off + b])) << (8 * b);
  return v;
}

template <class Int>
void le_write(std::string& buf, Int v) {
  for (std::size_t b = 0; b < sizeof(Int); ++b) buf.push_back(static_cast<char>((v >> (8 * b)) & 0xff));
}

}  // namespace detail

// ---------------------------------------------------------------------------------------
// Descriptor interchange files.
//
// Text (canonical): line 1 `dim=<n>`, then one descriptor per line as comma-separated
// decimal reals. Binary: magic `OPFD`, version byte 1, little-endian u32 dim, u32 count,
// then count * dim little-endian IEEE-754 float32 values.

inline constexpr std::string_view kBinaryMagic = "OPFD";
inline constexpr std::uint8_t kBinaryVersion = 1;

inline DescriptorSet parse_descriptor_text(std::string_view text, const std::string& source = "<text>") {
  detail::LineReader lines(text);
  std::string_view line;
  if (!lines.next(line)) throw InputError(source + ": missing `dim=<n>` header");
  const auto header = detail::trim(line);
  if (!header.starts_with("dim="))
    throw InputError(detail::where(source, 1) + "expected `dim=<n>` header");
  const auto dim = detail::parse_int<std::size_t>(header.substr(4));
  if (!dim || *dim == 0) throw InputError(detail::where(source, 1) + "invalid dimension");

  DescriptorSet set(*dim);
  std::vector<double> row(*dim);
  while (lines.next(line)) {
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    std::size_t col = 0, start = 0;
    for (std::size_t i = 0; i <= body.size(); ++i) {
      if (i != body.size() && body[i] != ',') continue;
      if (col == *dim)
        throw InputError(detail::where(source, lines.number()) + "more than " + std::to_string(*dim) + " values");
      const auto token = detail::trim(body.substr(start, i - start));
      const auto v = detail::parse_double(token);
      if (!v)
        throw InputError(detail::where(source, lines.number()) + "cannot parse '" + std::string(token) + "'");
      if (!std::isfinite(*v))
        throw InputError(detail::where(source, lines.number()) + "non-finite value '" + std::string(token) + "'");
      row[col++] = *v;
      start = i + 1;
    }
    if (col != *dim)
      throw InputError(detail::where(source, lines.number()) + "expected " + std::to_string(*dim) +
                       " values, found " + std::to_string(col));
    set.push_back(row);
  }
  return set;
}

inline DescriptorSet parse_descriptor_binary(const std::string& buf, const std::string& source = "<binary>") {
  if (buf.size() < 13 || std::string_view(buf).substr(0, 4) != kBinaryMagic)
    throw InputError(source + ": not a binary descriptor file");
  if (static_cast<std::uint8_t>(buf[4]) != kBinaryVersion)
    throw InputError(source + ": unsupported binary version " + std::to_string(static_cast<unsigned>(static_cast<std::uint8_t>(buf[4]))));
  const auto dim = detail::le_read<std::uint32_t>(buf, 5);
  const auto count = detail::le_read<std::uint32_t>(buf, 9);
  if (dim == 0) throw InputError(source + ": invalid dimension");
  const std::size_t expected = 13 + std::size_t{dim} * count * 4;
  if (buf.size() != expected)
    throw InputError(source + ": expected " + std::to_string(expected) + " bytes, found " + std::to_string(buf.size()));
  std::vector<double> values(std::size_t{dim} * count);
  for (std::size_t i = 0; i < values.size(); ++i) {
    const float f = std::bit_cast<float>(detail::le_read<std::uint32_t>(buf, 13 + 4 * i));
    if (!std::isfinite(f))
      throw InputError(source + ": non-finite value in descriptor " + std::to_string(i / dim));
    values[i] = f;
  }
  return DescriptorSet(dim, std::move(values));
}

inline DescriptorSet read_descriptor_file(const fs::path& path) {
  const std::string buf = read_file(path);
  if (std::string_view(buf).starts_with(kBinaryMagic)) return parse_descriptor_binary(buf, path.string());
  return parse_descriptor_text(buf, path.string());
}

inline std::string format_descriptor_text(const DescriptorSet& set) {
  std::string out = "dim=" + std::to_string(set.dim()) + "\n";
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto row = set[i];
    for (std::size_t j = 0; j < row.size(); ++j) {
      if (j) out += ',';
      out += format_double(row[j]);
    }
    out += '\n';
  }
  return out;
}

inline std::string format_descriptor_binary(const DescriptorSet& set) {
  std::string out(kBinaryMagic);
  out.push_back(static_cast<char>(kBinaryVersion));
  detail::le_write<std::uint32_t>(out, static_cast<std::uint32_t>(set.dim()));
  detail::le_write<std::uint32_t>(out, static_cast<std::uint32_t>(set.size()));
  for (const double v : set.data()) detail::le_write<std::uint32_t>(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  return out;
}

inline void write_descriptor_file(const fs::path& path, const DescriptorSet& set, bool binary = false) {
  write_file(path, binary ? format_descriptor_binary(set) : format_descriptor_text(set));
}

// ---------------------------------------------------------------------------------------
// Region masks: plain PGM (P2 ascii or P5 binary); nonzero pixels are `in`.

inline RegionMask parse_pgm(const std::string& buf, const std::string& source = "<pgm>") {
  std::size_t pos = 0;
  auto next_token = [&]() -> std::string {
    while (pos < buf.size()) {
      if (buf[pos] == '#') {
        while (pos < buf.size() && buf[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(buf[pos]))) {
        ++pos;
      } else {
        break;
      }
    }
    const std::size_t start = pos;
    while (pos < buf.size() && !std::isspace(static_cast<unsigned char>(buf[pos]))) ++pos;
    return buf.substr(start, pos - start);
  };
  const std::string magic = next_token();
  if (magic != "P2" && magic != "P5") throw InputError(source + ": not a P2/P5 PGM file");
  const auto width = detail::parse_int<std::size_t>(next_token());
  const auto height = detail::parse_int<std::size_t>(next_token());
  const auto maxval = detail::parse_int<std::size_t>(next_token());
  if (!width || !height || !maxval || *width == 0 || *height == 0 || *maxval == 0 || *maxval > 65535)
    throw InputError(source + ": invalid PGM header");
  RegionMask m{*width, *height, std::vector<std::uint8_t>(*width * *height)};
  if (magic == "P2") {
    for (auto& px : m.inside) {
      const auto v = detail::parse_int<std::size_t>(next_token());
      if (!v) throw InputError(source + ": truncated or malformed PGM pixel data");
      px = *v != 0;
    }
  } else {
    ++pos;  // single whitespace after maxval
    const std::size_t bytes = *maxval > 255 ? 2 : 1;
    if (buf.size() < pos + m.inside.size() * bytes) throw InputError(source + ": truncated PGM pixel data");
    for (std::size_t i = 0; i < m.inside.size(); ++i) {
      std::size_t v = static_cast<unsigned char>(buf[pos + i * bytes]);
      if (bytes == 2) v = (v << 8) | static_cast<unsigned char>(buf[pos + i * bytes + 1]);
      m.inside[i] = v != 0;
    }
  }
  return m;
}

inline RegionMask read_pgm(const fs::path& path) { return parse_pgm(read_file(path), path.string()); }

inline void write_pgm(const fs::path& path, const RegionMask& m) {
  std::string out = "P5\n" + std::to_string(m.width) + " " + std::to_string(m.height) + "\n255\n";
  for (auto px : m.inside) out.push_back(px ? static_cast<char>(255) : '\0');
  write_file(path, out);
}

// Keypoint coordinates: one `x,y` pair per line, aligned with descriptor rows. A leading
// `x,y` header and `#` comment lines are skipped.
inline std::vector<Point> parse_coords(std::string_view text, const std::string& source = "<coords>") {
  std::vector<Point> out;
  detail::LineReader lines(text);
  std::string_view line;
  while (lines.next(line)) {
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    if (out.empty() && body == "x,y") continue;
    const auto cols = detail::split(body, ',');
    if (cols.size() != 2) throw InputError(detail::where(source, lines.number()) + "expected `x,y`");
    const auto x = detail::parse_double(cols[0]);
    const auto y = detail::parse_double(cols[1]);
    if (!x || !y || !std::isfinite(*x) || !std::isfinite(*y))
      throw InputError(detail::where(source, lines.number()) + "invalid coordinate");
    out.push_back({*x, *y});
  }
  return out;
}

inline std::vector<Point> read_coords(const fs::path& path) { return parse_coords(read_file(path), path.string()); }

// ---------------------------------------------------------------------------------------
// Manifest: CSV with header `image_id,label,descriptors,mask` and an optional trailing
// `group` column. Paths are relative to the manifest. `#` lines are comments, except a
// `# labels=A,B` line which fixes the label order (otherwise order of first appearance).

struct ManifestEntry {
  std::string image_id;
  std::string label;
  fs::path descriptors;
  std::optional<fs::path> mask;
  std::string group;
};

struct Manifest {
  std::vector<std::string> label_set;
  std::vector<ManifestEntry> entries;
};

inline Manifest parse_manifest(std::string_view text, const fs::path& base, const std::string& source = "<manifest>") {
  Manifest m;
  bool declared = false, header = false, has_group = false;
  detail::LineReader lines(text);
  std::string_view line;
  while (lines.next(line)) {
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    if (body.front() == '#') {
      auto comment = detail::trim(body.substr(1));
      if (comment.starts_with("labels=")) {
        for (auto l : detail::split(comment.substr(7), ','))
          if (!l.empty()) m.label_set.emplace_back(l);
        declared = true;
      }
      continue;
    }
    const auto cols = detail::split(body, ',');
    if (!header) {
      if (cols.size() < 4 || cols[0] != "image_id" || cols[1] != "label" || cols[2] != "descriptors" ||
          cols[3] != "mask" || (cols.size() == 5 && cols[4] != "group") || cols.size() > 5)
        throw InputError(detail::where(source, lines.number()) +
                         "expected header `image_id,label,descriptors,mask[,group]`");
      has_group = cols.size() == 5;
      header = true;
      continue;
    }
    if (cols.size() != (has_group ? 5u : 4u))
      throw InputError(detail::where(source, lines.number()) + "wrong number of columns");
    ManifestEntry e;
    e.image_id = std::string(cols[0]);
    e.label = std::string(cols[1]);
    if (e.image_id.empty() || e.label.empty() || cols[2].empty())
      throw InputError(detail::where(source, lines.number()) + "image_id, label and descriptors are required");
    e.descriptors = base / fs::path(std::string(cols[2]));
    if (!cols[3].empty()) e.mask = base / fs::path(std::string(cols[3]));
    if (has_group) e.group = std::string(cols[4]);
    const bool known = std::find(m.label_set.begin(), m.label_set.end(), e.label) != m.label_set.end();
    if (!known) {
      if (declared)
        throw InputError(detail::where(source, lines.number()) + "label '" + e.label + "' not declared");
      m.label_set.push_back(e.label);
    }
    m.entries.push_back(std::move(e));
  }
  if (!header) throw InputError(source + ": missing manifest header");
  return m;
}

inline Manifest read_manifest(const fs::path& path) {
  return parse_manifest(read_file(path), path.parent_path(), path.string());
}

inline Dataset load_dataset(const Manifest& m) {
  Dataset d;
  d.label_set = m.label_set;
  for (const auto& e : m.entries) {
    ImageRecord r;
    r.image_id = e.image_id;
    r.label = static_cast<Label>(std::find(m.label_set.begin(), m.label_set.end(), e.label) - m.label_set.begin());
    r.descriptors = read_descriptor_file(e.descriptors);
    if (e.mask) r.mask = read_pgm(*e.mask);
    r.group = e.group;
    if (d.dim == 0) d.dim = r.descriptors.dim();
    d.records.push_back(std::move(r));
  }
  return d;
}

inline Dataset load_dataset(const fs::path& manifest) { return load_dataset(read_manifest(manifest)); }

// Writes a dataset as one text descriptor file per record plus a manifest, under `dir`.
inline void write_dataset(const fs::path& dir, const Dataset& d, const std::string& manifest_name = "manifest.csv",
                          bool binary = false) {
  fs::create_directories(dir / "descriptors");
  std::string manifest = "# labels=";
  for (std::size_t i = 0; i < d.label_set.size(); ++i) manifest += (i ? "," : "") + d.label_set[i];
  manifest += "\nimage_id,label,descriptors,mask,group\n";
  for (const auto& r : d.records) {
    const std::string rel = "descriptors/" + r.image_id + (binary ? ".opfd" : ".txt");
    write_descriptor_file(dir / rel, r.descriptors, binary);
    std::string mask_rel;
    if (r.mask) {
      mask_rel = "masks/" + r.image_id + ".pgm";
      fs::create_directories(dir / "masks");
      write_pgm(dir / mask_rel, *r.mask);
    }
    manifest += r.image_id + "," + d.label_set[r.label] + "," + rel + "," + mask_rel + "," + r.group + "\n";
  }
  write_file(dir / manifest_name, manifest);
}

// ---------------------------------------------------------------------------------------
// Dictionary files.
//
//   OPFBOVW-DICTIONARY 1
//   builder=<opf|kmeans|random>
//   <provenance key=value lines>
//   dim=<n>
//   words=<count>
//   <count comma-separated rows>

inline constexpr std::string_view kDictionaryMagic = "OPFBOVW-DICTIONARY";
inline constexpr int kDictionaryVersion = 1;

inline std::string format_dictionary(const Dictionary& d) {
  const auto& p = d.params;
  std::string out = std::string(kDictionaryMagic) + " " + std::to_string(kDictionaryVersion) + "\n";
  out += "builder=" + std::string(to_string(d.builder)) + "\n";
  out += "size=" + std::to_string(p.size) + "\n";
  out += "seed=" + std::to_string(p.seed) + "\n";
  out += "k_max=" + std::to_string(p.k_max) + "\n";
  out += "chosen_k=" + std::to_string(p.chosen_k) + "\n";
  out += "target_size=" + std::to_string(p.target_size) + "\n";
  out += "max_iter=" + std::to_string(p.max_iter) + "\n";
  out += "tol=" + format_double(p.tol) + "\n";
  out += "iterations=" + std::to_string(p.iterations) + "\n";
  out += "dim=" + std::to_string(d.dim()) + "\n";
  out += "words=" + std::to_string(d.size()) + "\n";
  const std::string body = format_descriptor_text(d.words);
  out += body.substr(body.find('\n') + 1);
  return out;
}

inline Dictionary parse_dictionary(std::string_view text, const std::string& source = "<dictionary>") {
  detail::LineReader lines(text);
  std::string_view line;
  if (!lines.next(line)) throw InputError(source + ": empty dictionary file");
  const auto head = detail::split(detail::trim(line), ' ');
  if (head.size() != 2 || head[0] != kDictionaryMagic) throw InputError(source + ": not a dictionary file");
  if (detail::parse_int<int>(head[1]) != kDictionaryVersion)
    throw InputError(source + ": dictionary version mismatch (file " + std::string(head[1]) + ", expected " +
                     std::to_string(kDictionaryVersion) + ")");

  std::map<std::string, std::string, std::less<>> kv;
  while (!kv.contains("words")) {
    if (!lines.next(line)) throw InputError(source + ": truncated dictionary header");
    const auto body = detail::trim(line);
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw InputError(detail::where(source, lines.number()) + "expected key=value");
    kv.emplace(std::string(body.substr(0, eq)), std::string(body.substr(eq + 1)));
  }
  auto need = [&](std::string_view key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw InputError(source + ": missing `" + std::string(key) + "`");
    return it->second;
  };
  auto need_int = [&](std::string_view key) {
    const auto v = detail::parse_int<std::uint64_t>(need(key));
    if (!v) throw InputError(source + ": invalid `" + std::string(key) + "`");
    return *v;
  };
  Dictionary d;
  d.builder = parse_builder(need("builder"));
  d.params.size = need_int("size");
  d.params.seed = need_int("seed");
  d.params.k_max = need_int("k_max");
  d.params.chosen_k = need_int("chosen_k");
  d.params.target_size = need_int("target_size");
  d.params.max_iter = need_int("max_iter");
  const auto tol = detail::parse_double(need("tol"));
  if (!tol) throw InputError(source + ": invalid `tol`");
  d.params.tol = *tol;
  d.params.iterations = need_int("iterations");
  const auto dim = need_int("dim");
  const auto words = need_int("words");
  const std::size_t consumed = [&] {
    std::size_t off = 0;
    for (std::size_t i = 0; i < lines.number(); ++i) off = text.find('\n', off) + 1;
    return off;
  }();
  DescriptorSet set = parse_descriptor_text("dim=" + std::to_string(dim) + "\n" + std::string(text.substr(consumed)), source);
  if (set.size() != words)
    throw InputError(source + ": expected " + std::to_string(words) + " words, found " + std::to_string(set.size()));
  if (words == 0) throw InputError(source + ": dictionary has no words");
  d.words = std::move(set);
  return d;
}

inline void write_dictionary(const Dictionary& d, const fs::path& path) { write_file(path, format_dictionary(d)); }
inline Dictionary read_dictionary(const fs::path& path) { return parse_dictionary(read_file(path), path.string()); }

// ---------------------------------------------------------------------------------------
// Histogram files: CSV `image_id,label,w0,...,w<n-1>` with raw counts.

struct LabeledHistogram {
  Histogram histogram;
  std::string label;
};

inline std::string format_histograms(const std::vector<LabeledHistogram>& rows) {
  const std::size_t n = rows.empty() ? 0 : rows.front().histogram.counts.size();
  std::string out = "image_id,label";
  for (std::size_t i = 0; i < n; ++i) out += ",w" + std::to_string(i);
  out += '\n';
  for (const auto& r : rows) {
    out += r.histogram.image_id + "," + r.label;
    for (auto c : r.histogram.counts) out += "," + std::to_string(c);
    out += '\n';
  }
  return out;
}

inline std::vector<LabeledHistogram> parse_histograms(std::string_view text, const std::string& source = "<histograms>") {
  detail::LineReader lines(text);
  std::string_view line;
  if (!lines.next(line)) throw InputError(source + ": empty histogram file");
  const auto header = detail::split(detail::trim(line), ',');
  if (header.size() < 3 || header[0] != "image_id" || header[1] != "label")
    throw InputError(detail::where(source, 1) + "expected header `image_id,label,w0,...`");
  const std::size_t bins = header.size() - 2;
  std::vector<LabeledHistogram> out;
  while (lines.next(line)) {
    const auto body = detail::trim(line);
    if (body.empty()) continue;
    const auto cols = detail::split(body, ',');
    if (cols.size() != bins + 2) throw InputError(detail::where(source, lines.number()) + "wrong number of columns");
    LabeledHistogram h;
    h.histogram.image_id = std::string(cols[0]);
    h.label = std::string(cols[1]);
    for (std::size_t i = 0; i < bins; ++i) {
      const auto v = detail::parse_int<std::uint64_t>(cols[i + 2]);
      if (!v) throw InputError(detail::where(source, lines.number()) + "invalid count '" + std::string(cols[i + 2]) + "'");
      h.histogram.counts.push_back(*v);
    }
    out.push_back(std::move(h));
  }
  return out;
}

inline void write_histograms(const fs::path& path, const std::vector<LabeledHistogram>& rows) {
  write_file(path, format_histograms(rows));
}
inline std::vector<LabeledHistogram> read_histograms(const fs::path& path) {
  return parse_histograms(read_file(path), path.string());
}

// ---------------------------------------------------------------------------------------
// Classifier model files (JSON).

using nlohmann::json;

inline constexpr std::string_view kModelFormat = "opfbovw-model";
inline constexpr int kModelVersion = 1;

struct StoredModel {
  ClassifierKind kind = ClassifierKind::opf_cpl;
  std::vector<std::string> label_set;
  Normalization normalization = Normalization::none;
  std::optional<CplModel> cpl;
  std::optional<KnnModel> knn;
};

namespace detail {

inline json rows_to_json(const DescriptorSet& s) {
  json rows = json::array();
  for (std::size_t i = 0; i < s.size(); ++i) rows.push_back(std::vector<double>(s[i].begin(), s[i].end()));
  return rows;
}

inline DescriptorSet rows_from_json(const json& rows, std::size_t dim) {
  DescriptorSet s(dim);
  for (const auto& r : rows) s.push_back(r.get<std::vector<double>>());
  return s;
}

inline json nil_to_json(const std::vector<std::size_t>& v) {
  json out = json::array();
  for (auto x : v) out.push_back(x == kNil ? json(nullptr) : json(x));
  return out;
}

inline std::vector<std::size_t> nil_from_json(const json& j) {
  std::vector<std::size_t> out;
  for (const auto& x : j) out.push_back(x.is_null() ? kNil : x.get<std::size_t>());
  return out;
}

}  // namespace detail

inline std::string format_model(const StoredModel& m) {
  json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["classifier"] = to_string(m.kind);
  j["labels"] = m.label_set;
  j["normalization"] = to_string(m.normalization);
  if (m.cpl) {
    const auto& c = *m.cpl;
    j["dim"] = c.samples.dim();
    j["samples"] = detail::rows_to_json(c.samples);
    j["truth"] = c.truth;
    j["cost"] = c.cost;
    j["label"] = c.label;
    j["pred"] = detail::nil_to_json(c.pred);
    j["prototypes"] = c.prototypes;
    j["order"] = c.order;
  } else if (m.knn) {
    const auto& k = *m.knn;
    j["dim"] = k.samples.dim();
    j["samples"] = detail::rows_to_json(k.samples);
    j["truth"] = k.truth;
    j["k"] = k.k;
    j["sigma"] = k.sigma;
    j["rho"] = k.rho;
    j["cost"] = k.forest.cost;
    j["pred"] = detail::nil_to_json(k.forest.pred);
    j["root"] = k.forest.root;
    j["label"] = k.forest.label;
    j["prototypes"] = k.forest.prototypes;
  } else {
    throw InputError("model has no trained classifier");
  }
  return j.dump(1) + "\n";
}

inline StoredModel parse_model(std::string_view text, const std::string& source = "<model>") {
  try {
    const json j = json::parse(text);
    if (j.at("format").get<std::string>() != kModelFormat) throw InputError(source + ": not a model file");
    if (j.at("version").get<int>() != kModelVersion) throw InputError(source + ": model version mismatch");
    StoredModel m;
    m.kind = parse_classifier(j.at("classifier").get<std::string>());
    m.label_set = j.at("labels").get<std::vector<std::string>>();
    m.normalization = parse_normalization(j.at("normalization").get<std::string>());
    const auto dim = j.at("dim").get<std::size_t>();
    if (m.kind == ClassifierKind::opf_cpl) {
      CplModel c;
      c.samples = detail::rows_from_json(j.at("samples"), dim);
      c.truth = j.at("truth").get<std::vector<Label>>();
      c.cost = j.at("cost").get<std::vector<double>>();
      c.label = j.at("label").get<std::vector<Label>>();
      c.pred = detail::nil_from_json(j.at("pred"));
      c.prototypes = j.at("prototypes").get<std::vector<std::size_t>>();
      c.order = j.at("order").get<std::vector<std::size_t>>();
      const std::size_t n = c.samples.size();
      if (c.truth.size() != n || c.cost.size() != n || c.label.size() != n || c.order.size() != n)
        throw InputError(source + ": inconsistent model arrays");
      m.cpl = std::move(c);
    } else if (m.kind == ClassifierKind::opf_knn) {
      KnnModel k;
      k.samples = detail::rows_from_json(j.at("samples"), dim);
      k.truth = j.at("truth").get<std::vector<Label>>();
      k.k = j.at("k").get<std::size_t>();
      k.sigma = j.at("sigma").get<double>();
      k.rho = j.at("rho").get<std::vector<double>>();
      k.forest.cost = j.at("cost").get<std::vector<double>>();
      k.forest.pred = detail::nil_from_json(j.at("pred"));
      k.forest.root = j.at("root").get<std::vector<std::size_t>>();
      k.forest.label = j.at("label").get<std::vector<std::size_t>>();
      k.forest.prototypes = j.at("prototypes").get<std::vector<std::size_t>>();
      const std::size_t n = k.samples.size();
      if (k.truth.size() != n || k.forest.cost.size() != n || k.forest.label.size() != n)
        throw InputError(source + ": inconsistent model arrays");
      m.knn = std::move(k);
    } else {
      throw InputError(source + ": external classifiers have no model file");
    }
    return m;
  } catch (const json::exception& e) {
    throw InputError(source + ": malformed model file (" + e.what() + ")");
  }
}

inline void write_model(const fs::path& path, const StoredModel& m) { write_file(path, format_model(m)); }
inline StoredModel read_model(const fs::path& path) { return parse_model(read_file(path), path.string()); }

// ---------------------------------------------------------------------------------------
// External predictions: CSV `run,image_id,label`.

inline ExternalPredictions parse_predictions(std::string_view text, const std::string& source = "<predictions>") {
  ExternalPredictions out;
  detail::LineReader lines(text);
  std::string_view line;
  bool header = false;
  while (lines.next(line)) {
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto cols = detail::split(body, ',');
    if (!header) {
      if (cols.size() != 3 || cols[0] != "run" || cols[1] != "image_id" || cols[2] != "label")
        throw InputError(detail::where(source, lines.number()) + "expected header `run,image_id,label`");
      header = true;
      continue;
    }
    const auto run = cols.size() == 3 ? detail::parse_int<std::size_t>(cols[0]) : std::nullopt;
    if (!run) throw InputError(detail::where(source, lines.number()) + "expected `run,image_id,label`");
    out[*run][std::string(cols[1])] = std::string(cols[2]);
  }
  return out;
}

inline ExternalPredictions read_predictions(const fs::path& path) {
  return parse_predictions(read_file(path), path.string());
}

// ---------------------------------------------------------------------------------------
// Flat `key=value` configuration; `#` starts a comment line.

inline std::map<std::string, std::string> parse_key_values(std::string_view text, const std::string& source = "<config>") {
  std::map<std::string, std::string> kv;
  detail::LineReader lines(text);
  std::string_view line;
  while (lines.next(line)) {
    const auto body = detail::trim(line);
    if (body.empty() || body.front() == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string_view::npos) throw InputError(detail::where(source, lines.number()) + "expected key=value");
    kv[std::string(detail::trim(body.substr(0, eq)))] = std::string(detail::trim(body.substr(eq + 1)));
  }
  return kv;
}

template <class T, class Parse>
std::vector<T> parse_list(std::string_view value, Parse&& parse) {
  std::vector<T> out;
  for (auto item : detail::split(value, ','))
    if (!item.empty()) out.push_back(parse(item));
  return out;
}

inline std::size_t parse_count(std::string_view key, std::string_view value) {
  const auto v = detail::parse_int<std::size_t>(value);
  if (!v) throw InputError("config `" + std::string(key) + "`: expected a non-negative integer, got '" + std::string(value) + "'");
  return *v;
}

inline bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  throw InputError("config `" + std::string(key) + "`: expected true/false, got '" + std::string(value) + "'");
}

inline void apply_config_value(ExperimentConfig& c, std::string_view key, std::string_view value) {
  if (key == "feature_source") c.feature_source = std::string(value);
  else if (key == "builders") c.builders = parse_list<Builder>(value, parse_builder);
  else if (key == "sizes") c.sizes = parse_list<std::size_t>(value, [&](auto v) { return parse_count(key, v); });
  else if (key == "classifiers") c.classifiers = parse_list<ClassifierKind>(value, parse_classifier);
  else if (key == "runs") c.runs = parse_count(key, value);
  else if (key == "train_fraction") {
    const auto v = detail::parse_double(value);
    if (!v) throw InputError("config `train_fraction`: expected a real number");
    c.train_fraction = *v;
  } else if (key == "seed") c.seed = parse_count(key, value);
  else if (key == "k_max") c.k_max = parse_count(key, value);
  else if (key == "stride") c.stride = parse_count(key, value);
  else if (key == "opf_pin_size") c.opf_pin_size = parse_bool(key, value);
  else if (key == "normalization") c.normalization = parse_normalization(value);
  else if (key == "knn_k_max") c.knn_k_max = parse_count(key, value);
  else if (key == "kmeans_max_iter") c.kmeans_max_iter = parse_count(key, value);
  else if (key == "kmeans_tol") {
    const auto v = detail::parse_double(value);
    if (!v) throw InputError("config `kmeans_tol`: expected a real number");
    c.kmeans_tol = *v;
  } else if (key == "positive_label") c.positive_label = std::string(value);
  else if (key == "grouped") c.grouped = parse_bool(key, value);
  else throw InputError("unknown config key `" + std::string(key) + "`");
}

inline ExperimentConfig read_config(const fs::path& path, ExperimentConfig base = {}) {
  for (const auto& [k, v] : parse_key_values(read_file(path), path.string())) apply_config_value(base, k, v);
  return base;
}

}  // namespace opfbovw::io
