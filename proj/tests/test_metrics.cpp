// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "grassnet/metrics.hpp"

namespace grassnet {
namespace {

using Rng = std::mt19937_64;

double brute_auc(const std::vector<double>& s, const std::vector<double>& y) {
  double credit = 0, pairs = 0;
  for (std::size_t i = 0; i < s.size(); ++i)
    for (std::size_t j = 0; j < s.size(); ++j) {
      if (y[i] != 1 || y[j] != 0) continue;
      pairs += 1;
      credit += s[i] > s[j] ? 1.0 : (s[i] == s[j] ? 0.5 : 0.0);
    }
  return credit / pairs;
}

// Coarse scores so ties are common.
std::vector<double> coarse_scores(std::size_t n, Rng& rng) {
  std::uniform_int_distribution<int> d(0, 9);
  std::vector<double> s(n);
  for (auto& v : s) v = d(rng) / 10.0;
  return s;
}

TEST(RocAuc, Examples) {
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.2, 0.8, 0.9}, std::vector<double>{0, 0, 1, 1}), 1.0);
  EXPECT_EQ(roc_auc(std::vector<double>{0.3, 0.3, 0.3}, std::vector<double>{0, 1, 0}), 0.5);
  EXPECT_EQ(roc_auc(std::vector<double>{0.1, 0.4, 0.35, 0.8}, std::vector<double>{0, 0, 1, 1}), 0.75);
  EXPECT_TRUE(std::isnan(roc_auc(std::vector<double>{0.1, 0.4}, std::vector<double>{1, 1})));
  EXPECT_TRUE(std::isnan(roc_auc(std::vector<double>{}, std::vector<double>{})));
}

TEST(RocAuc, MatchesBruteForceWithTies) {
  Rng rng(90);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + rng() % 60;
    auto s = coarse_scores(n, rng);
    std::vector<double> y(n);
    for (auto& v : y) v = rng() % 2;
    y[0] = 1;
    y[1] = 0;
    EXPECT_EQ(roc_auc(s, y), brute_auc(s, y));
  }
}

TEST(RocAuc, ComplementAndMonotoneInvariance) {
  Rng rng(91);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 4 + rng() % 30;
    auto s = coarse_scores(n, rng);
    std::vector<double> y(n);
    for (auto& v : y) v = rng() % 2;
    y[0] = 1;
    y[1] = 0;
    const double a = roc_auc(s, y);
    std::vector<double> neg(n), ex(n), aff(n);
    for (std::size_t i = 0; i < n; ++i) {
      neg[i] = -s[i];
      ex[i] = std::exp(s[i]);
      aff[i] = 3.0 * s[i] - 7.0;
    }
    EXPECT_DOUBLE_EQ(roc_auc(neg, y), 1.0 - a);
    EXPECT_EQ(roc_auc(ex, y), a);
    EXPECT_EQ(roc_auc(aff, y), a);
  }
}

TEST(ConfusionRates, Examples) {
  const auto r = confusion_rates(std::vector<double>{0.7, 0.2, 0.9}, std::vector<double>{1, 1, 0});
  EXPECT_EQ(r.recall, 0.5);
  EXPECT_EQ(r.false_alarm, 1.0);
  const auto good = confusion_rates(std::vector<double>{0.99, 0.01}, std::vector<double>{1, 0});
  EXPECT_EQ(good.recall, 1.0);
  EXPECT_EQ(good.false_alarm, 0.0);
  const auto none = confusion_rates(std::vector<double>{0.9, 0.1}, std::vector<double>{0, 0});
  EXPECT_EQ(none.recall, 0.0);
  EXPECT_TRUE(none.zero_support());
  // exactly 0.5 is not positive
  EXPECT_EQ(confusion_rates(std::vector<double>{0.5}, std::vector<double>{1}).recall, 0.0);
}

TEST(Evaluate, SingleLabelReducesToPrimitives) {
  const std::vector<double> s{0.1, 0.7, 0.6, 0.3, 0.9};
  const std::vector<double> y{0, 1, 0, 1, 1};
  const auto rep = evaluate(s, LabeledBatchTargets::dense(5, 1, y));
  const auto cr = confusion_rates(s, y);
  EXPECT_EQ(rep.per_label[0].recall, cr.recall);
  EXPECT_EQ(rep.per_label[0].false_alarm, cr.false_alarm);
  EXPECT_EQ(*rep.per_label[0].auc, roc_auc(s, y));
  EXPECT_EQ(rep.overall_recall, cr.recall);
  EXPECT_EQ(*rep.overall_auc, roc_auc(s, y));
}

TEST(Evaluate, DuplicatingSamplesChangesNothing) {
  Rng rng(92);
  const std::size_t b = 20, c = 3;
  auto s = coarse_scores(b * c, rng);
  std::vector<double> y(b * c), m(b * c);
  for (std::size_t i = 0; i < y.size(); ++i) {
    y[i] = rng() % 3 == 0;
    m[i] = rng() % 5 != 0;
  }
  const auto a = evaluate(s, LabeledBatchTargets(b, c, y, m));
  auto s2 = s, y2 = y, m2 = m;
  s2.insert(s2.end(), s.begin(), s.end());
  y2.insert(y2.end(), y.begin(), y.end());
  m2.insert(m2.end(), m.begin(), m.end());
  const auto d = evaluate(s2, LabeledBatchTargets(2 * b, c, y2, m2));
  EXPECT_EQ(a.overall_recall, d.overall_recall);
  EXPECT_EQ(a.overall_false_alarm, d.overall_false_alarm);
  EXPECT_EQ(a.overall_auc, d.overall_auc);
  for (std::size_t l = 0; l < c; ++l) {
    EXPECT_EQ(a.per_label[l].recall, d.per_label[l].recall);
    EXPECT_EQ(a.per_label[l].auc, d.per_label[l].auc);
  }
}

TEST(Evaluate, Random50x3MatchesPerPairOracle) {
  Rng rng(93);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t b = 50, c = 3;
    auto s = coarse_scores(b * c, rng);
    std::vector<double> y(b * c), m(b * c);
    for (std::size_t i = 0; i < y.size(); ++i) {
      y[i] = rng() % 4 == 0;
      m[i] = rng() % 6 != 0;
    }
    const auto rep = evaluate(s, LabeledBatchTargets(b, c, y, m));
    // flat pooled loop
    double tp = 0, fn = 0, fp = 0, tn = 0;
    std::vector<double> ps, py;
    for (std::size_t i = 0; i < y.size(); ++i) {
      if (!m[i]) continue;
      const bool pred = s[i] > 0.5;
      if (y[i]) (pred ? tp : fn) += 1;
      else (pred ? fp : tn) += 1;
      ps.push_back(s[i]);
      py.push_back(y[i]);
    }
    EXPECT_EQ(rep.overall_recall, tp + fn ? tp / (tp + fn) : 0.0);
    EXPECT_EQ(rep.overall_false_alarm, fp + tn ? fp / (fp + tn) : 0.0);
    EXPECT_EQ(*rep.overall_auc, brute_auc(ps, py));
    double auc_sum = 0;
    int auc_n = 0;
    for (std::size_t l = 0; l < c; ++l) {
      std::vector<double> ls, ly;
      for (std::size_t r = 0; r < b; ++r)
        if (m[r * c + l]) {
          ls.push_back(s[r * c + l]);
          ly.push_back(y[r * c + l]);
        }
      const bool defined = std::count(ly.begin(), ly.end(), 1.0) && std::count(ly.begin(), ly.end(), 0.0);
      ASSERT_EQ(rep.per_label[l].auc.has_value(), defined);
      if (defined) {
        EXPECT_EQ(*rep.per_label[l].auc, brute_auc(ls, ly));
        auc_sum += brute_auc(ls, ly);
        ++auc_n;
      }
    }
    if (auc_n) {
      EXPECT_DOUBLE_EQ(*rep.mean_label_auc, auc_sum / auc_n);
    }
  }
}

TEST(Evaluate, UndefinedAucIsAbsentAndExcluded) {
  const std::vector<double> s{0.9, 0.2, 0.8, 0.4};
  // label 0: both classes; label 1: only negatives
  const auto rep = evaluate(s, LabeledBatchTargets::dense(2, 2, {1, 0, 0, 0}));
  EXPECT_TRUE(rep.per_label[0].auc.has_value());
  EXPECT_FALSE(rep.per_label[1].auc.has_value());
  EXPECT_EQ(*rep.mean_label_auc, *rep.per_label[0].auc);
  const auto j = to_json(rep);
  EXPECT_TRUE(j["per_label"][1]["auc"].is_null());
  EXPECT_NE(render_table(rep).find("overall"), std::string::npos);
}

}  // namespace
}  // namespace grassnet
