#include "support.hpp"

#include <vgreg/eval.hpp>

#include <gtest/gtest.h>

using namespace vgreg;
using namespace vgreg::testing;

namespace {

/// Two-sided p value by listing all 2^n sign patterns over the given ranks.
double enumerate_p(const std::vector<double>& ranks, double w) {
  const std::size_t n = ranks.size();
  double total = 0.0;
  for (double r : ranks) total += r;
  std::uint64_t hits = 0;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << n); ++mask) {
    double wp = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      if (mask & (std::uint64_t{1} << k)) wp += ranks[k];
    hits += std::min(wp, total - wp) <= w + 1e-9;
  }
  return std::min(1.0, static_cast<double>(hits) / std::ldexp(1.0, static_cast<int>(n)));
}

/// Exact two-sided p for untied integer ranks 1..n by subset-sum counting.
double exact_p_untied(std::size_t n, double w) {
  const std::size_t top = n * (n + 1) / 2;
  std::vector<double> count(top + 1, 0.0);
  count[0] = 1.0;
  for (std::size_t r = 1; r <= n; ++r)
    for (std::size_t s = top; s >= r; --s) count[s] += count[s - r];
  double tail = 0.0;
  for (std::size_t s = 0; s <= static_cast<std::size_t>(w); ++s) tail += count[s];
  return std::min(1.0, 2.0 * tail / std::ldexp(1.0, static_cast<int>(n)));
}

}  // namespace

TEST(MatchingAccuracy, Examples) {
  const auto truth = GroundTruth::identity(80);
  EXPECT_EQ(matching_accuracy(identity_permutation(80), truth), 100.0);
  Permutation half = identity_permutation(80);
  for (std::size_t i = 0; i < 40; i += 2) std::swap(half[i], half[i + 1]);
  EXPECT_EQ(matching_accuracy(half, truth), 50.0);
}

TEST(MatchingAccuracy, RandomPermutationsAverageOneFixedPoint) {
  Rng rng(1);
  const auto truth = GroundTruth::identity(80);
  double total = 0.0;
  for (int k = 0; k < 1000; ++k) total += matching_accuracy(random_permutation(rng, 80), truth);
  EXPECT_NEAR(total / 1000.0, 1.25, 0.15);
}

TEST(MatchingAccuracy, UnassignedCountsAsWrong) {
  const auto truth = GroundTruth::identity(4);
  EXPECT_EQ(matching_accuracy(Permutation{0, kUnassigned, 2, kUnassigned}, truth), 50.0);
  EXPECT_EQ(matching_accuracy(Permutation{0, 1}, truth), 50.0);
}

TEST(MatchingAccuracy, InvariantUnderConsistentRelabeling) {
  Rng rng(2);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 10;
    const auto p = random_permutation(rng, n);
    GroundTruth truth;
    const auto t = random_permutation(rng, n);
    for (std::size_t i = 0; i < n; ++i) truth.pairs.emplace_back(i, t[i]);
    const double before = matching_accuracy(p, truth);
    // relabel A by sa and B by sb
    const auto sa = random_permutation(rng, n), sb = random_permutation(rng, n);
    Permutation q(n);
    for (std::size_t i = 0; i < n; ++i) q[sa[i]] = sb[p[i]];
    GroundTruth moved;
    for (const auto& [i, j] : truth.pairs) moved.pairs.emplace_back(sa[i], sb[j]);
    EXPECT_EQ(matching_accuracy(q, moved), before);
  }
}

TEST(MatchingAccuracy, RejectsBadTruth) {
  EXPECT_THROW(matching_accuracy(Permutation{0}, GroundTruth{}), ArgumentError);
  GroundTruth dup;
  dup.pairs = {{0, 1}, {1, 1}};
  EXPECT_THROW(matching_accuracy(Permutation{1, 0}, dup), ArgumentError);
}

TEST(GroundTruthLabels, PairsEqualLabels) {
  std::vector<Node> a(4), b(4);
  const char* la[] = {"ICA", "MCA", "ACA", nullptr};
  const char* lb[] = {"ACA", "ICA", "PCA", "MCA"};
  for (std::size_t i = 0; i < 4; ++i) {
    a[i].coord = b[i].coord = Vec3(static_cast<double>(i), 0, 0);
    if (la[i]) a[i].label = la[i];
    b[i].label = lb[i];
  }
  const SpatialGraph A(a, {}), B(b, {});
  const auto t = GroundTruth::from_labels(A, B);
  const std::vector<std::pair<std::size_t, std::size_t>> expect{{0, 1}, {1, 3}, {2, 0}};
  EXPECT_EQ(t.pairs, expect);
  EXPECT_EQ(matching_accuracy(Permutation{1, 3, 2, 0}, t), 100.0 * 2.0 / 3.0);
  b[2].label = "ICA";
  EXPECT_THROW(GroundTruth::from_labels(A, SpatialGraph(b, {})), ArgumentError);
}

// ---------------------------------------------------------------------------

TEST(Wilcoxon, IdenticalSamples) {
  const std::vector<double> a{1, 2, 3, 4};
  const auto r = wilcoxon_signed_rank(a, a);
  EXPECT_EQ(r.p_value, 1.0);
  EXPECT_EQ(r.n_effective, 0u);
  EXPECT_TRUE(r.all_zero);
}

TEST(Wilcoxon, FiveAllPositive) {
  const std::vector<double> a{1, 2, 3, 4, 5}, b(5, 0.0);
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_EQ(r.statistic, 0.0);
  EXPECT_EQ(r.p_value, 0.0625);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(wilcoxon_signed_rank(b, a).p_value, 0.0625);
}

TEST(Wilcoxon, ExactMatchesEnumerationUpToEight) {
  Rng rng(3);
  for (std::size_t n = 2; n <= 8; ++n) {
    for (int trial = 0; trial < 40; ++trial) {
      std::vector<double> a(n), b(n);
      for (std::size_t k = 0; k < n; ++k) {
        a[k] = static_cast<double>(rng.index(7));  // small integers force ties and zeros
        b[k] = static_cast<double>(rng.index(7));
      }
      const auto r = wilcoxon_signed_rank(a, b);
      std::vector<double> d, absd;
      for (std::size_t k = 0; k < n; ++k)
        if (a[k] != b[k]) {
          d.push_back(a[k] - b[k]);
          absd.push_back(std::abs(a[k] - b[k]));
        }
      if (d.empty()) {
        EXPECT_EQ(r.p_value, 1.0);
        continue;
      }
      // midranks by counting
      std::vector<double> ranks(absd.size());
      for (std::size_t i = 0; i < absd.size(); ++i) {
        double less = 0, equal = 0;
        for (double x : absd) {
          less += x < absd[i];
          equal += x == absd[i];
        }
        ranks[i] = less + (equal + 1.0) / 2.0;
      }
      double wp = 0, wm = 0;
      for (std::size_t i = 0; i < d.size(); ++i) (d[i] > 0 ? wp : wm) += ranks[i];
      EXPECT_EQ(r.statistic, std::min(wp, wm));
      EXPECT_EQ(r.p_value, enumerate_p(ranks, std::min(wp, wm))) << "n=" << n;
      EXPECT_EQ(r.n_effective, d.size());
    }
  }
}

TEST(Wilcoxon, ExactAtCrossoverMatchesSubsetSums) {
  for (double w = 0; w <= 39; w += 1) {
    std::vector<double> a(12), b(12, 0.0);
    // differences 1..12 with ranks summing to w on the negative side
    double left = w;
    for (int k = 12; k >= 1; --k) {
      const bool neg = left >= k;
      if (neg) left -= k;
      a[static_cast<std::size_t>(k - 1)] = neg ? -k : k;
    }
    ASSERT_EQ(left, 0.0);
    const auto r = wilcoxon_signed_rank(a, b);
    EXPECT_TRUE(r.exact);
    EXPECT_EQ(r.statistic, w);
    EXPECT_NEAR(r.p_value, exact_p_untied(12, w), 1e-15);
  }
}

TEST(Wilcoxon, NormalApproximationFormula) {
  // 20 untied differences: W = 52, mean 105, variance 717.5
  std::vector<double> a(20), b(20, 0.0);
  double left = 52;
  for (int k = 20; k >= 1; --k) {
    const bool neg = left >= k;
    if (neg) left -= k;
    a[static_cast<std::size_t>(k - 1)] = neg ? -k : k;
  }
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_FALSE(r.exact);
  EXPECT_EQ(r.statistic, 52.0);
  const double z = (105.0 - 52.0 - 0.5) / std::sqrt(717.5);
  EXPECT_NEAR(r.p_value, std::erfc(z / std::sqrt(2.0)), 1e-15);
}

TEST(Wilcoxon, TieCorrectionReducesVariance) {
  // ties {1,1,2,2,2} among 15 differences
  std::vector<double> a{1, 1, 2, 2, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12};
  std::vector<double> b(15, 0.0);
  a[0] = -1;
  a[5] = -3;
  const auto r = wilcoxon_signed_rank(a, b);
  // ranks: 1.5,1.5 | 4,4,4 | 6..15 ; W- = 1.5 + 6
  EXPECT_EQ(r.statistic, 7.5);
  const double var = 15.0 * 16.0 * 31.0 / 24.0 - ((8.0 - 2.0) + (27.0 - 3.0)) / 48.0;
  const double z = (60.0 - 7.5 - 0.5) / std::sqrt(var);
  EXPECT_NEAR(r.p_value, std::erfc(z / std::sqrt(2.0)), 1e-15);
}

TEST(Wilcoxon, ApproximationAgainstExactAtTwenty) {
  // The normal approximation is compared with the exact subset-sum
  // distribution over every attainable W for n = 20. The largest gap is
  // 0.0083 (at W = 84) and about 0.0016 at the p = 0.05 boundary (W = 52),
  // so agreement is checked to 0.01.
  double worst = 0.0;
  for (double w = 0; w <= 105; w += 1) {
    std::vector<double> a(20), b(20, 0.0);
    double left = w;
    for (int k = 20; k >= 1; --k) {
      const bool neg = left >= k;
      if (neg) left -= k;
      a[static_cast<std::size_t>(k - 1)] = neg ? -k : k;
    }
    const auto r = wilcoxon_signed_rank(a, b);
    const double gap = std::abs(r.p_value - exact_p_untied(20, w));
    worst = std::max(worst, gap);
  }
  EXPECT_LT(worst, 1e-2);
  RecordProperty("max_gap_n20", std::to_string(worst));
}

TEST(Wilcoxon, ValidatesInput) {
  const std::vector<double> one{1.0}, two{1.0, 2.0}, three{1, 2, 3};
  EXPECT_THROW(wilcoxon_signed_rank(one, one), ArgumentError);
  EXPECT_THROW(wilcoxon_signed_rank(two, three), ArgumentError);
  const std::vector<double> bad{1.0, std::nan("")};
  EXPECT_THROW(wilcoxon_signed_rank(bad, two), ArgumentError);
}

TEST(Wilcoxon, PValueInUnitInterval) {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng.index(30);
    std::vector<double> a(n), b(n);
    for (std::size_t k = 0; k < n; ++k) {
      a[k] = rng.normal();
      b[k] = rng.normal() + 0.3;
    }
    const auto r = wilcoxon_signed_rank(a, b);
    EXPECT_GE(r.p_value, 0.0);
    EXPECT_LE(r.p_value, 1.0);
  }
}

// ---------------------------------------------------------------------------

TEST(Describe, SingleValue) {
  const auto s = describe({42.0});
  EXPECT_EQ(s.mean, 42.0);
  EXPECT_EQ(s.sd, 0.0);
  EXPECT_EQ(s.median, 42.0);
}

TEST(Describe, TwoPoints) {
  const auto s = describe({40.0, 60.0});
  EXPECT_EQ(s.mean, 50.0);
  EXPECT_NEAR(s.sd, 14.142135623730951, 1e-12);
  EXPECT_EQ(s.median, 50.0);
}

TEST(Describe, OddMedianAndEmpty) {
  const auto s = describe({5.0, 1.0, 3.0});
  EXPECT_EQ(s.median, 3.0);
  EXPECT_EQ(s.sd, 2.0);
  EXPECT_EQ(describe({}).count, 0u);
}
