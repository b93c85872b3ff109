#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "opfbovw/core.hpp"
#include "opfbovw/split.hpp"

namespace opfbovw {

// Per-image stratified split of a dataset. With `grouped`, records sharing a non-empty
// group key (e.g. a patient) land on the same side; groups are stratified by their
// majority label. Records with an empty group key are their own group.
inline IndexSplit stratified_split(const Dataset& d, double train_fraction, std::uint64_t seed,
                                   bool grouped = false) {
  if (!grouped) return stratified_indices(d.labels(), train_fraction, seed);

  std::map<std::string, std::vector<std::size_t>> members;
  for (std::size_t i = 0; i < d.records.size(); ++i) {
    const auto& r = d.records[i];
    members[r.group.empty() ? "\x01" + r.image_id : r.group].push_back(i);
  }
  std::vector<std::vector<std::size_t>> groups;
  std::vector<Label> group_labels;
  for (auto& [key, idx] : members) {
    std::map<Label, std::size_t> votes;
    for (auto i : idx) ++votes[d.records[i].label];
    Label majority = votes.begin()->first;
    for (const auto& [label, count] : votes)
      if (count > votes[majority]) majority = label;
    groups.push_back(idx);
    group_labels.push_back(majority);
  }
  const IndexSplit by_group = stratified_indices(group_labels, train_fraction, seed);
  IndexSplit out;
  for (auto g : by_group.train) out.train.insert(out.train.end(), groups[g].begin(), groups[g].end());
  for (auto g : by_group.test) out.test.insert(out.test.end(), groups[g].begin(), groups[g].end());
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

struct Point {
  double x = 0.0;
  double y = 0.0;
};

// Pixel-wise intersection of several masks of equal size.
inline RegionMask intersect_masks(std::span<const RegionMask> masks) {
  if (masks.empty()) throw InputError("no region mask given");
  RegionMask out = masks.front();
  for (const auto& m : masks.subspan(1)) {
    if (m.width != out.width || m.height != out.height)
      throw InputError("region masks differ in size");
    for (std::size_t i = 0; i < out.inside.size(); ++i) out.inside[i] = out.inside[i] && m.inside[i];
  }
  return out;
}

// Percentage of points falling on `in` pixels of the intersection of all masks. A point
// (x, y) lies on pixel (floor(x), floor(y)).
inline double poi_region_ratio(std::span<const Point> points, std::span<const RegionMask> masks) {
  if (points.empty()) throw InputError("no points of interest");
  const RegionMask region = intersect_masks(masks);
  std::size_t inside = 0;
  for (const auto& p : points) {
    if (!(p.x >= 0.0 && p.y >= 0.0 && p.x < static_cast<double>(region.width) &&
          p.y < static_cast<double>(region.height)))
      throw InputError("point (" + std::to_string(p.x) + ", " + std::to_string(p.y) +
                       ") outside the " + std::to_string(region.width) + "x" +
                       std::to_string(region.height) + " mask");
    if (region.contains(static_cast<std::size_t>(p.x), static_cast<std::size_t>(p.y))) ++inside;
  }
  return 100.0 * static_cast<double>(inside) / static_cast<double>(points.size());
}

struct SyntheticSpec {
  std::size_t images_per_class = 25;
  std::size_t pois_per_image = 40;
  std::size_t dim = 8;
  double separation = 6.0;
  std::uint64_t seed = 0;
  std::size_t components = 4;  // Gaussian components per class mixture
  std::vector<std::string> labels{"BE", "Cancer"};
};

// Two-or-more-class descriptor data. Component m of class c is centred at
// base_m + separation * u_{c,m}, where base_m ~ N(0, 16 I) is shared by all classes and
// u_{c,m} is a random unit vector; descriptors add N(0, I) noise to a uniformly chosen
// component. With separation 0 every class draws from the same mixture.
inline Dataset gen_synthetic(const SyntheticSpec& s) {
  if (s.images_per_class < 1 || s.pois_per_image < 1 || s.dim < 1 || s.components < 1 ||
      s.labels.size() < 2 || !(s.separation >= 0.0))
    throw InputError("synthetic generator parameters must be positive");
  std::mt19937_64 rng(s.seed);
  std::normal_distribution<double> normal(0.0, 1.0);

  std::vector<std::vector<double>> base(s.components, std::vector<double>(s.dim));
  for (auto& b : base)
    for (auto& v : b) v = 4.0 * normal(rng);

  const std::size_t n_classes = s.labels.size();
  std::vector<std::vector<std::vector<double>>> means(n_classes, base);
  for (auto& cls : means)
    for (auto& mean : cls) {
      std::vector<double> u(s.dim);
      double norm = 0.0;
      for (auto& v : u) {
        v = normal(rng);
        norm += v * v;
      }
      norm = std::sqrt(norm);
      for (std::size_t j = 0; j < s.dim; ++j) mean[j] += s.separation * u[j] / norm;
    }

  Dataset d;
  d.dim = s.dim;
  d.label_set = s.labels;
  std::uniform_int_distribution<std::size_t> pick(0, s.components - 1);
  std::size_t serial = 0;
  for (std::size_t img = 0; img < s.images_per_class; ++img)
    for (std::size_t c = 0; c < n_classes; ++c) {
      ImageRecord r;
      char id[32];
      std::snprintf(id, sizeof id, "img%05zu", serial++);
      r.image_id = id;
      r.label = c;
      r.descriptors = DescriptorSet(s.dim);
      r.descriptors.reserve(s.pois_per_image);
      std::vector<double> x(s.dim);
      for (std::size_t p = 0; p < s.pois_per_image; ++p) {
        const auto& mean = means[c][pick(rng)];
        for (std::size_t j = 0; j < s.dim; ++j) x[j] = mean[j] + normal(rng);
        r.descriptors.push_back(x);
      }
      d.records.push_back(std::move(r));
    }
  return d;
}

}  // namespace opfbovw
