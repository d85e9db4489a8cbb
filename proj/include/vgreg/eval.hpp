// eval.hpp - matching accuracy, the paired Wilcoxon signed-rank test and
// summary statistics.
#pragma once

#include "graph.hpp"
#include "matchers/common.hpp"

#include <map>

namespace vgreg {

/// Reference correspondences node-of-A -> node-of-B.
struct GroundTruth {
  std::vector<std::pair<std::size_t, std::size_t>> pairs;

  static GroundTruth identity(std::size_t n) {
    GroundTruth t;
    for (std::size_t i = 0; i < n; ++i) t.pairs.emplace_back(i, i);
    return t;
  }

  /// Pairs nodes carrying the same label. Labels must be unique per graph.
  static GroundTruth from_labels(const SpatialGraph& A, const SpatialGraph& B) {
    std::map<std::string, std::size_t> inB;
    for (const auto& n : B.nodes())
      if (n.label && !inB.emplace(*n.label, n.id).second)
        throw ArgumentError("GroundTruth: label '" + *n.label + "' repeats in graph B");
    GroundTruth t;
    std::map<std::string, std::size_t> seenA;
    for (const auto& n : A.nodes()) {
      if (!n.label) continue;
      if (!seenA.emplace(*n.label, n.id).second)
        throw ArgumentError("GroundTruth: label '" + *n.label + "' repeats in graph A");
      if (auto it = inB.find(*n.label); it != inB.end()) t.pairs.emplace_back(n.id, it->second);
    }
    return t;
  }

  [[nodiscard]] bool injective() const {
    std::map<std::size_t, int> a, b;
    for (const auto& [i, j] : pairs)
      if (a[i]++ || b[j]++) return false;
    return true;
  }
};

/// Percentage of truth pairs reproduced by the permutation; unassigned or
/// out-of-range nodes count as wrong.
inline double matching_accuracy(const Permutation& p, const GroundTruth& truth) {
  if (truth.pairs.empty()) throw ArgumentError("matching_accuracy: empty ground truth");
  if (!truth.injective()) throw ArgumentError("matching_accuracy: ground truth is not injective");
  std::size_t hit = 0;
  for (const auto& [i, j] : truth.pairs)
    if (i < p.size() && p[i] == j) ++hit;
  return 100.0 * static_cast<double>(hit) / static_cast<double>(truth.pairs.size());
}

inline double matching_accuracy(const Assignment& a, const GroundTruth& truth) {
  return matching_accuracy(a.permutation, truth);
}

// ---------------------------------------------------------------------------
// Wilcoxon signed-rank test

struct WilcoxonResult {
  double statistic = 0.0;  // min(W+, W-)
  double p_value = 1.0;    // two-sided
  std::size_t n_effective = 0;
  bool exact = false;
  bool all_zero = false;   // every difference was zero
};

inline constexpr std::size_t kWilcoxonExactMax = 12;

namespace detail {

/// Midranks of |d| (1-based), and the tie-group sizes.
inline std::vector<double> midranks(const std::vector<double>& absd, std::vector<std::size_t>& ties) {
  const std::size_t n = absd.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return absd[a] < absd[b]; });
  std::vector<double> rank(n);
  ties.clear();
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && absd[order[j + 1]] == absd[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) rank[order[k]] = r;
    ties.push_back(j - i + 1);
    i = j + 1;
  }
  return rank;
}

inline double normal_two_sided(double z) { return std::erfc(std::abs(z) / std::sqrt(2.0)); }

}  // namespace detail

/// Two-sided paired test. Zero differences are dropped; |d| are ranked with
/// midranks for ties. Up to kWilcoxonExactMax non-zero differences the p
/// value is the fraction of the 2^n sign patterns with min(W+, W-) no larger
/// than observed; above that a normal approximation with continuity and tie
/// corrections is used.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw ArgumentError("wilcoxon_signed_rank: samples differ in length");
  if (a.size() < 2) throw ArgumentError("wilcoxon_signed_rank: need at least 2 pairs");
  std::vector<double> d;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (!std::isfinite(a[k]) || !std::isfinite(b[k])) throw ArgumentError("wilcoxon_signed_rank: non-finite sample");
    if (a[k] != b[k]) d.push_back(a[k] - b[k]);
  }
  WilcoxonResult r;
  r.n_effective = d.size();
  if (d.empty()) {
    r.all_zero = true;
    return r;
  }
  std::vector<double> absd(d.size());
  std::transform(d.begin(), d.end(), absd.begin(), [](double x) { return std::abs(x); });
  std::vector<std::size_t> ties;
  const auto rank = detail::midranks(absd, ties);
  double wplus = 0.0, wminus = 0.0;
  for (std::size_t k = 0; k < d.size(); ++k) (d[k] > 0.0 ? wplus : wminus) += rank[k];
  r.statistic = std::min(wplus, wminus);
  const std::size_t n = d.size();

  if (n <= kWilcoxonExactMax) {
    r.exact = true;
    const double eps = 1e-9;
    std::uint64_t hits = 0;
    const std::uint64_t patterns = std::uint64_t{1} << n;
    double total = 0.0;
    for (double x : rank) total += x;
    for (std::uint64_t mask = 0; mask < patterns; ++mask) {
      double wp = 0.0;
      for (std::size_t k = 0; k < n; ++k)
        if (mask >> k & 1U) wp += rank[k];
      if (std::min(wp, total - wp) <= r.statistic + eps) ++hits;
    }
    r.p_value = std::min(1.0, static_cast<double>(hits) / static_cast<double>(patterns));
    return r;
  }

  const auto nn = static_cast<double>(n);
  const double mean = nn * (nn + 1.0) / 4.0;
  double var = nn * (nn + 1.0) * (2.0 * nn + 1.0) / 24.0;
  for (auto t : ties) {
    const auto tt = static_cast<double>(t);
    var -= (tt * tt * tt - tt) / 48.0;
  }
  if (!(var > 0.0)) {
    r.p_value = 1.0;
    return r;
  }
  const double z = std::max(0.0, std::abs(r.statistic - mean) - 0.5) / std::sqrt(var);
  r.p_value = std::clamp(detail::normal_two_sided(z), 0.0, 1.0);
  return r;
}

// ---------------------------------------------------------------------------
// Descriptive statistics

struct Summary {
  std::size_t count = 0;
  double mean = 0.0;
  double sd = 0.0;  // sample standard deviation (n - 1); 0 for a single value
  double median = 0.0;
};

inline Summary describe(std::vector<double> v) {
  Summary s;
  s.count = v.size();
  if (v.empty()) return s;
  double sum = 0.0;
  for (double x : v) sum += x;
  s.mean = sum / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  s.median = v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
  return s;
}

}  // namespace vgreg
