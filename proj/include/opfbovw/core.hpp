#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <vector>

namespace opfbovw {

// Raised for malformed or inconsistent input data. The CLI maps it to exit code 1.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Descriptor = std::vector<double>;
using DescriptorView = std::span<const double>;

// Index into a Dataset's ordered label_set.
using Label = std::size_t;

// Dense row-major set of equal-dimension descriptors.
class DescriptorSet {
 public:
  DescriptorSet() = default;

  explicit DescriptorSet(std::size_t dim) : dim_(dim) {}

  DescriptorSet(std::size_t dim, std::vector<double> values)
      : dim_(dim), values_(std::move(values)) {
    if (dim_ == 0 && !values_.empty())
      throw InputError("descriptor dimension must be positive");
    if (dim_ != 0 && values_.size() % dim_ != 0)
      throw InputError("descriptor buffer is not a multiple of the dimension");
  }

  static DescriptorSet from_rows(const std::vector<Descriptor>& rows) {
    if (rows.empty()) return {};
    DescriptorSet set(rows.front().size());
    for (const auto& r : rows) set.push_back(r);
    return set;
  }

  std::size_t dim() const noexcept { return dim_; }
  std::size_t size() const noexcept { return dim_ == 0 ? 0 : values_.size() / dim_; }
  bool empty() const noexcept { return values_.empty(); }

  DescriptorView operator[](std::size_t i) const noexcept {
    return {values_.data() + i * dim_, dim_};
  }

  std::span<const double> data() const noexcept { return values_; }

  void push_back(DescriptorView d) {
    if (dim_ == 0) dim_ = d.size();
    if (d.size() != dim_ || dim_ == 0)
      throw InputError("descriptor of dimension " + std::to_string(d.size()) +
                       " added to a set of dimension " + std::to_string(dim_));
    values_.insert(values_.end(), d.begin(), d.end());
  }

  void append(const DescriptorSet& other) {
    if (other.empty()) return;
    if (dim_ == 0) dim_ = other.dim_;
    if (other.dim_ != dim_)
      throw InputError("cannot append descriptors of dimension " + std::to_string(other.dim_) +
                       " to a set of dimension " + std::to_string(dim_));
    values_.insert(values_.end(), other.values_.begin(), other.values_.end());
  }

  void reserve(std::size_t rows) { values_.reserve(rows * dim_); }

  DescriptorSet subset(std::span<const std::size_t> rows) const {
    DescriptorSet out(dim_);
    out.reserve(rows.size());
    for (auto r : rows) out.push_back((*this)[r]);
    return out;
  }

  friend bool operator==(const DescriptorSet&, const DescriptorSet&) = default;

 private:
  std::size_t dim_ = 0;
  std::vector<double> values_;
};

namespace detail {

inline double euclidean(DescriptorView a, DescriptorView b) noexcept {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    acc += d * d;
  }
  return std::sqrt(acc);
}

}  // namespace detail

// Plain (unsquared) Euclidean distance.
inline double distance(DescriptorView a, DescriptorView b) {
  if (a.size() != b.size())
    throw InputError("dimension mismatch: " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  return detail::euclidean(a, b);
}

// Binary region bitmap; true marks an `in` pixel.
struct RegionMask {
  std::size_t width = 0;
  std::size_t height = 0;
  std::vector<std::uint8_t> inside;  // row-major, width * height

  bool contains(std::size_t x, std::size_t y) const { return inside[y * width + x] != 0; }
  friend bool operator==(const RegionMask&, const RegionMask&) = default;
};

struct ImageRecord {
  std::string image_id;
  Label label = 0;
  DescriptorSet descriptors;
  std::optional<RegionMask> mask;
  // Optional grouping key (e.g. patient id) for grouped splits.
  std::string group;
};

struct Dataset {
  std::vector<ImageRecord> records;
  std::size_t dim = 0;
  std::vector<std::string> label_set;

  std::vector<Label> labels() const {
    std::vector<Label> out;
    out.reserve(records.size());
    for (const auto& r : records) out.push_back(r.label);
    return out;
  }
};

struct Violation {
  std::string record;  // empty for dataset-wide rules
  std::string rule;
  friend bool operator==(const Violation&, const Violation&) = default;
};

inline std::vector<Violation> validate_dataset(const Dataset& d) {
  std::vector<Violation> report;
  if (d.dim < 1) report.push_back({"", "dataset dimension must be >= 1"});

  std::unordered_set<std::string> seen;
  std::vector<bool> present(d.label_set.size(), false);
  for (const auto& r : d.records) {
    if (!seen.insert(r.image_id).second) report.push_back({r.image_id, "duplicate image_id"});
    if (r.label >= d.label_set.size())
      report.push_back({r.image_id, "label index outside label_set"});
    else
      present[r.label] = true;
    if (r.descriptors.empty()) {
      report.push_back({r.image_id, "empty descriptors"});
      continue;
    }
    if (r.descriptors.dim() != d.dim) {
      report.push_back({r.image_id, "descriptor dim " + std::to_string(r.descriptors.dim()) +
                                        " != dataset dim " + std::to_string(d.dim)});
      continue;
    }
    const auto values = r.descriptors.data();
    if (!std::all_of(values.begin(), values.end(), [](double v) { return std::isfinite(v); }))
      report.push_back({r.image_id, "non-finite descriptor value"});
  }
  if (std::count(present.begin(), present.end(), true) < 2)
    report.push_back({"", "fewer than 2 labels present"});
  return report;
}

}  // namespace opfbovw
