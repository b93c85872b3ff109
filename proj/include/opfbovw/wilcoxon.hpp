#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "opfbovw/core.hpp"

namespace opfbovw {

// Ranks of the non-zero paired differences y - x. Ranks are stored doubled so mid-ranks of
// tied groups stay integral.
struct SignedRanks {
  std::vector<std::int64_t> doubled_rank;
  std::vector<int> sign;           // +1 when y > x
  double w_plus = 0.0, w_minus = 0.0;
  double tie_term = 0.0;           // sum over tie groups of t^3 - t

  std::size_t n() const noexcept { return sign.size(); }
  double statistic() const noexcept { return std::min(w_plus, w_minus); }
};

// |d| values within 1e-9 relative of each other are one tie group, so differences that are
// equal up to rounding (e.g. of percentages) share a mid-rank.
inline SignedRanks signed_ranks(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw InputError("paired samples differ in length");
  std::vector<double> diff;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = y[i] - x[i];
    if (!std::isfinite(d)) throw InputError("non-finite paired value");
    if (d != 0.0) diff.push_back(d);
  }
  const std::size_t n = diff.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return std::abs(diff[a]) < std::abs(diff[b]); });

  SignedRanks r;
  r.doubled_rank.resize(n);
  r.sign.resize(n);
  for (std::size_t start = 0; start < n;) {
    const double lead = std::abs(diff[order[start]]);
    std::size_t end = start + 1;
    while (end < n && std::abs(diff[order[end]]) - lead <= 1e-9 * std::max(1.0, lead)) ++end;
    // Ranks start+1 .. end share the mid-rank (start + 1 + end) / 2.
    const auto doubled = static_cast<std::int64_t>(start + 1 + end);
    const auto t = static_cast<double>(end - start);
    r.tie_term += t * t * t - t;
    for (std::size_t j = start; j < end; ++j) r.doubled_rank[order[j]] = doubled;
    start = end;
  }
  for (std::size_t i = 0; i < n; ++i) {
    r.sign[i] = diff[i] > 0.0 ? 1 : -1;
    (diff[i] > 0.0 ? r.w_plus : r.w_minus) += static_cast<double>(r.doubled_rank[i]) / 2.0;
  }
  return r;
}

// Two-sided exact p: P(min(W+, W-) <= observed) over all 2^n equally likely sign patterns,
// from the subset-sum distribution of the (doubled) ranks.
inline double wilcoxon_exact_p(const SignedRanks& r) {
  const std::int64_t total =
      std::accumulate(r.doubled_rank.begin(), r.doubled_rank.end(), std::int64_t{0});
  std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
  ways[0] = 1.0;
  std::int64_t reach = 0;
  for (const auto v : r.doubled_rank) {
    for (std::int64_t s = reach; s >= 0; --s) ways[static_cast<std::size_t>(s + v)] += ways[static_cast<std::size_t>(s)];
    reach += v;
  }
  const auto observed = static_cast<std::int64_t>(std::llround(2.0 * r.statistic()));
  double hits = 0.0;
  for (std::int64_t s = 0; s <= total; ++s)
    if (std::min(s, total - s) <= observed) hits += ways[static_cast<std::size_t>(s)];
  return std::min(1.0, hits / std::ldexp(1.0, static_cast<int>(r.n())));
}

// Two-sided normal approximation with tie and continuity corrections.
inline double wilcoxon_normal_p(const SignedRanks& r) {
  const auto n = static_cast<double>(r.n());
  const double mean = n * (n + 1.0) / 4.0;
  const double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - r.tie_term / 48.0;
  if (var <= 0.0) return 1.0;
  const double z = std::max(0.0, std::abs(r.statistic() - mean) - 0.5) / std::sqrt(var);
  return std::min(1.0, std::erfc(z / std::sqrt(2.0)));
}

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double p = 1.0;
  bool reject = false;
  bool decided = false;    // false when the test could not be run
  bool exact = false;
  std::size_t n = 0;       // non-zero differences
  std::string note;

  friend bool operator==(const WilcoxonResult&, const WilcoxonResult&) = default;
};

inline constexpr std::size_t kWilcoxonExactMax = 12;
inline constexpr std::size_t kWilcoxonMinPairs = 5;

inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> x, std::span<const double> y,
                                           double alpha = 0.05) {
  const SignedRanks r = signed_ranks(x, y);
  WilcoxonResult out;
  out.n = r.n();
  out.statistic = r.statistic();
  if (r.n() == 0) {
    out.note = "all differences are zero";
    return out;
  }
  if (r.n() < kWilcoxonMinPairs) {
    out.note = "fewer than 5 non-zero differences";
    return out;
  }
  out.exact = r.n() <= kWilcoxonExactMax;
  out.p = out.exact ? wilcoxon_exact_p(r) : wilcoxon_normal_p(r);
  out.decided = true;
  out.reject = out.p < alpha;
  return out;
}

}  // namespace opfbovw
