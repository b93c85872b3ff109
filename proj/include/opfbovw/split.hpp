#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <vector>

#include "opfbovw/core.hpp"

namespace opfbovw {

// Mixes a base seed with a stream tag so independent stages draw unrelated sequences.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t tag) {
  std::uint64_t z = base + 0x9e3779b97f4a7c15ULL * (tag + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

struct IndexSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Per-label proportional split: each label contributes round(fraction * count) items to
// train, clamped to [1, count - 1] when the label has at least 2 items. Labels with a
// single item go to train when allow_singletons is set, otherwise they are rejected.
// Both outputs are sorted ascending.
inline IndexSplit stratified_indices(std::span<const Label> labels, double fraction,
                                     std::uint64_t seed, bool allow_singletons = false) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw InputError("train fraction must lie in (0, 1)");
  std::map<Label, std::vector<std::size_t>> by_label;
  for (std::size_t i = 0; i < labels.size(); ++i) by_label[labels[i]].push_back(i);

  std::mt19937_64 rng(seed);
  IndexSplit out;
  for (auto& [label, members] : by_label) {
    if (members.size() < 2) {
      if (!allow_singletons)
        throw InputError("label " + std::to_string(label) + " has fewer than 2 items");
      out.train.insert(out.train.end(), members.begin(), members.end());
      continue;
    }
    std::shuffle(members.begin(), members.end(), rng);
    const auto count = static_cast<double>(members.size());
    auto n_train = static_cast<std::size_t>(std::llround(fraction * count));
    n_train = std::clamp<std::size_t>(n_train, 1, members.size() - 1);
    out.train.insert(out.train.end(), members.begin(),
                     members.begin() + static_cast<std::ptrdiff_t>(n_train));
    out.test.insert(out.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train),
                    members.end());
  }
  std::sort(out.train.begin(), out.train.end());
  std::sort(out.test.begin(), out.test.end());
  return out;
}

}  // namespace opfbovw
