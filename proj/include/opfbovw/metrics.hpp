#pragma once

#include <cstdint>
#include <optional>

#include "opfbovw/core.hpp"

namespace opfbovw {

// Binary confusion counts; positive = the cancer (adenocarcinoma) class.
struct ConfusionCounts {
  std::uint64_t tp = 0, tn = 0, fp = 0, fn = 0;

  std::uint64_t total() const noexcept { return tp + tn + fp + fn; }
  friend bool operator==(const ConfusionCounts&, const ConfusionCounts&) = default;
};

// Percentages. A rate whose denominator is zero is absent rather than 0.
struct Metrics {
  double accuracy = 0.0;
  std::optional<double> sensitivity;
  std::optional<double> specificity;
};

inline Metrics metrics(const ConfusionCounts& c) {
  if (c.total() == 0) throw InputError("metrics need at least one evaluated sample");
  Metrics m;
  m.accuracy = 100.0 * static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  if (c.tp + c.fn > 0) m.sensitivity = 100.0 * static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn);
  if (c.tn + c.fp > 0) m.specificity = 100.0 * static_cast<double>(c.tn) / static_cast<double>(c.tn + c.fp);
  return m;
}

inline void record(ConfusionCounts& c, Label truth, Label predicted, Label positive) {
  const bool pos_true = truth == positive;
  const bool pos_pred = predicted == positive;
  if (pos_true && pos_pred) ++c.tp;
  else if (pos_true) ++c.fn;
  else if (pos_pred) ++c.fp;
  else ++c.tn;
}

}  // namespace opfbovw
