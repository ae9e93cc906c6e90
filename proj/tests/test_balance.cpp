#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "fedrisk/balance.hpp"
#include "fedrisk/random.hpp"

using namespace fedrisk;

namespace {

LabeledDataset points(const std::vector<std::vector<double>>& xs, const std::vector<int>& ys) {
  LabeledDataset ds;
  for (std::size_t j = 0; j < xs.front().size(); ++j) ds.feature_names.push_back("f" + std::to_string(j));
  ds.X = Matrix(0, xs.front().size());
  for (std::size_t i = 0; i < xs.size(); ++i) {
    ds.push_back(xs[i], ys[i], {"AAA", "2014J", static_cast<std::int64_t>(i)});
  }
  return ds;
}

LabeledDataset random_imbalanced(std::size_t majority, std::size_t minority, std::size_t d,
                                 std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<double>> xs;
  std::vector<int> ys;
  for (std::size_t i = 0; i < majority + minority; ++i) {
    std::vector<double> x(d);
    for (auto& v : x) v = rng.normal();
    xs.push_back(x);
    ys.push_back(i % (majority + minority) < minority ? 1 : 0);
  }
  // interleave classes so minority rows are not contiguous
  for (std::size_t i = 0; i < xs.size(); ++i) std::swap(xs[i], xs[rng.below(xs.size())]);
  return points(xs, ys);
}

}  // namespace

// ---------------------------------------------------------------------------
// knn_minority

TEST(Knn, NearestPoint) {
  const auto ds = points({{0.0}, {1.0}, {5.0}, {0.5}}, {1, 1, 1, 0});
  EXPECT_EQ(knn_minority(ds, 0, 1), (std::vector<std::size_t>{1}));
}

TEST(Knn, TruncatesToAvailableCandidates) {
  const auto ds = points({{0.0}, {1.0}, {5.0}}, {1, 1, 1});
  EXPECT_EQ(knn_minority(ds, 0, 10), (std::vector<std::size_t>{1, 2}));
}

TEST(Knn, TiesGoToLowerIndex) {
  const auto ds = points({{0.0}, {2.0}, {-2.0}, {2.0}}, {1, 1, 1, 1});
  EXPECT_EQ(knn_minority(ds, 0, 1), (std::vector<std::size_t>{1}));
  EXPECT_EQ(knn_minority(ds, 0, 2), (std::vector<std::size_t>{1, 2}));
}

TEST(Knn, MatchesBruteForceSort) {
  const auto ds = random_imbalanced(30, 25, 3, 8);
  for (std::size_t q = 0; q < ds.size(); ++q) {
    if (ds.y[q] != 1) continue;
    std::vector<std::pair<double, std::size_t>> all;
    for (std::size_t i = 0; i < ds.size(); ++i) {
      if (i != q && ds.y[i] == 1) all.emplace_back(squared_distance(ds.X.row(q), ds.X.row(i)), i);
    }
    std::sort(all.begin(), all.end());
    std::vector<std::size_t> expected;
    for (std::size_t i = 0; i < 5; ++i) expected.push_back(all[i].second);
    EXPECT_EQ(knn_minority(ds, q, 5), expected);
  }
}

// ---------------------------------------------------------------------------
// smote_oversample

TEST(Smote, BalancedInputIsUnchanged) {
  const auto ds = points({{0.0}, {1.0}, {2.0}, {3.0}}, {1, 0, 1, 0});
  EXPECT_EQ(smote_oversample(ds, {}), ds);
}

TEST(Smote, InterpolatesOnTheSegment) {
  const auto ds = points({{0.0, 0.0}, {1.0, 1.0}, {9.0, 9.0}, {8.0, 8.0}, {7.0, 7.0}},
                         {1, 1, 0, 0, 0});
  SmoteConfig cfg;
  cfg.k_neighbors = 1;
  const auto out = smote_oversample(ds, cfg);
  ASSERT_EQ(out.size(), 6u);
  const auto s = out.X.row(5);
  EXPECT_EQ(s[0], s[1]);
  EXPECT_GE(s[0], 0.0);
  EXPECT_LE(s[0], 1.0);
  EXPECT_EQ(out.y[5], 1);
  EXPECT_TRUE(is_synthetic(out.keys[5]));
  EXPECT_EQ(out.keys[5].code_module, "AAA");
}

TEST(Smote, CountsFollowTargetFormula) {
  const auto ds = random_imbalanced(10, 4, 2, 1);
  const auto out = smote_oversample(ds, {});
  EXPECT_EQ(out.size(), 20u);
  EXPECT_EQ(out.positives(), 10u);

  for (double ratio : {0.5, 0.75, 1.0}) {
    const auto big = random_imbalanced(101, 13, 3, 2);
    SmoteConfig cfg;
    cfg.target_ratio = ratio;
    const auto o = smote_oversample(big, cfg);
    EXPECT_EQ(o.positives(), static_cast<std::size_t>(std::floor(ratio * 101))) << ratio;
    EXPECT_EQ(o.size() - o.positives(), 101u);
  }
}

TEST(Smote, MinorityMayBeLabelZero) {
  const auto ds = points({{0.0}, {1.0}, {2.0}, {3.0}, {4.0}}, {0, 0, 1, 1, 1});
  const auto out = smote_oversample(ds, {});
  EXPECT_EQ(out.size(), 6u);
  EXPECT_EQ(out.y[5], 0);
}

TEST(Smote, SingleMinorityRowSkipsWithWarning) {
  const auto ds = points({{0.0}, {1.0}, {2.0}}, {1, 0, 0});
  Diagnostics diag;
  EXPECT_EQ(smote_oversample(ds, {}, &diag), ds);
  ASSERT_EQ(diag.warnings.size(), 1u);
}

TEST(Smote, RejectsBadConfig) {
  const auto ds = points({{0.0}, {1.0}}, {1, 0});
  EXPECT_THROW(smote_oversample(ds, {0, 1.0, 0}), ConfigError);
  EXPECT_THROW(smote_oversample(ds, {5, 0.0, 0}), ConfigError);
  EXPECT_THROW(smote_oversample(ds, {5, 1.5, 0}), ConfigError);
}

// Property sweep over random datasets: exact counts, per-dimension
// containment between the two parents, untouched originals, determinism.
TEST(Smote, PropertiesOnRandomData) {
  Rng meta(2024);
  for (int trial = 0; trial < 40; ++trial) {
    const std::size_t majority = 10 + meta.below(60);
    const std::size_t minority = 2 + meta.below(majority / 2);
    const std::size_t d = 1 + meta.below(5);
    const auto ds = random_imbalanced(majority, minority, d, 500 + trial);
    SmoteConfig cfg;
    cfg.k_neighbors = 1 + static_cast<int>(meta.below(6));
    cfg.seed = meta.next();

    const auto out = smote_oversample(ds, cfg);
    const auto again = smote_oversample(ds, cfg);
    EXPECT_EQ(out, again);
    ASSERT_EQ(out.positives(), majority);
    ASSERT_EQ(out.size(), 2 * majority);

    for (std::size_t r = 0; r < ds.size(); ++r) {
      const auto a = ds.X.row(r);
      const auto b = out.X.row(r);
      ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin()));
      ASSERT_EQ(out.y[r], ds.y[r]);
      ASSERT_EQ(out.keys[r], ds.keys[r]);
    }

    const std::size_t k = std::min<std::size_t>(cfg.k_neighbors, minority - 1);
    for (std::size_t r = ds.size(); r < out.size(); ++r) {
      ASSERT_EQ(out.y[r], 1);
      const auto s = out.X.row(r);
      // Some minority row and one of its k neighbours must bracket s.
      bool bracketed = false;
      for (std::size_t p = 0; p < ds.size() && !bracketed; ++p) {
        if (ds.y[p] != 1) continue;
        for (auto nb : knn_minority(ds, p, k)) {
          bool inside = true;
          for (std::size_t c = 0; c < d; ++c) {
            const double lo = std::min(ds.X(p, c), ds.X(nb, c));
            const double hi = std::max(ds.X(p, c), ds.X(nb, c));
            inside = inside && s[c] >= lo && s[c] <= hi;
          }
          if (inside) {
            bracketed = true;
            break;
          }
        }
      }
      EXPECT_TRUE(bracketed) << "trial " << trial << " row " << r;
    }
  }
}

TEST(Smote, ImbalanceTestUsesTargetRatio) {
  const auto ds = random_imbalanced(10, 6, 1, 3);
  EXPECT_TRUE(is_imbalanced(ds, 1.0));
  EXPECT_FALSE(is_imbalanced(ds, 0.6));
  EXPECT_FALSE(is_imbalanced(ds, 0.5));
}
