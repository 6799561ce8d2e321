// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "grassnet/targets.hpp"

namespace grassnet {

/// Mann-Whitney AUC: the fraction of (positive, negative) pairs ranked
/// correctly, ties counted as half. NaN when either class is absent.
inline double roc_auc(std::span<const double> scores, std::span<const double> labels) {
  if (scores.size() != labels.size()) throw ShapeError("roc_auc: scores and labels differ in length");
  std::vector<std::size_t> idx(scores.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Each positive earns one credit per lower-scored negative plus half per
  // tied negative; walk groups of equal score.
  double credit = 0.0, negatives_below = 0.0, positives = 0.0;
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    double pos = 0.0, neg = 0.0;
    while (j < idx.size() && scores[idx[j]] == scores[idx[i]]) {
      (labels[idx[j]] != 0.0 ? pos : neg) += 1.0;
      ++j;
    }
    credit += pos * (negatives_below + 0.5 * neg);
    negatives_below += neg;
    positives += pos;
    i = j;
  }
  if (positives == 0.0 || negatives_below == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return credit / (positives * negatives_below);
}

struct ConfusionRates {
  double recall = 0.0;
  double false_alarm = 0.0;
  std::size_t positives = 0;
  std::size_t negatives = 0;
  std::size_t true_pos = 0;
  std::size_t false_pos = 0;

  bool zero_support() const { return positives == 0; }
};

/// Predict positive iff score > threshold; 0/0 rates are 0.
inline ConfusionRates confusion_rates(std::span<const double> scores, std::span<const double> labels,
                                      double threshold = 0.5) {
  if (scores.size() != labels.size()) throw ShapeError("confusion_rates: scores and labels differ in length");
  ConfusionRates r;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] > threshold;
    if (labels[i] != 0.0) {
      ++r.positives;
      r.true_pos += pred;
    } else {
      ++r.negatives;
      r.false_pos += pred;
    }
  }
  r.recall = r.positives ? static_cast<double>(r.true_pos) / static_cast<double>(r.positives) : 0.0;
  r.false_alarm = r.negatives ? static_cast<double>(r.false_pos) / static_cast<double>(r.negatives) : 0.0;
  return r;
}

struct LabelReport {
  std::string name;
  double recall = 0.0;
  double false_alarm = 0.0;
  std::optional<double> auc;
  std::size_t positives = 0;
  std::size_t negatives = 0;
};

struct EvalReport {
  std::vector<LabelReport> per_label;
  // Micro: pooled over every observed (sample, label) pair.
  double overall_recall = 0.0;
  double overall_false_alarm = 0.0;
  std::optional<double> overall_auc;
  // Macro: per-label averages; undefined AUCs are skipped.
  double mean_label_recall = 0.0;
  double mean_label_false_alarm = 0.0;
  std::optional<double> mean_label_auc;
  std::size_t observed = 0;
};

inline EvalReport evaluate(std::span<const double> scores, const LabeledBatchTargets& t,
                           const std::vector<std::string>& label_names = {}, double threshold = 0.5) {
  if (scores.size() != t.rows * t.cols) throw ShapeError("evaluate: score matrix does not match targets");
  EvalReport rep;
  std::vector<double> all_s, all_y;
  double auc_sum = 0.0;
  std::size_t auc_count = 0;
  for (std::size_t c = 0; c < t.cols; ++c) {
    std::vector<double> s, y;
    for (std::size_t r = 0; r < t.rows; ++r) {
      if (!t.observed(r, c)) continue;
      s.push_back(scores[r * t.cols + c]);
      y.push_back(t.positive(r, c) ? 1.0 : 0.0);
    }
    const auto cr = confusion_rates(s, y, threshold);
    LabelReport lr;
    lr.name = c < label_names.size() ? label_names[c] : "label_" + std::to_string(c);
    lr.recall = cr.recall;
    lr.false_alarm = cr.false_alarm;
    lr.positives = cr.positives;
    lr.negatives = cr.negatives;
    const double auc = roc_auc(s, y);
    if (!std::isnan(auc)) {
      lr.auc = auc;
      auc_sum += auc;
      ++auc_count;
    }
    rep.mean_label_recall += lr.recall;
    rep.mean_label_false_alarm += lr.false_alarm;
    rep.per_label.push_back(std::move(lr));
    all_s.insert(all_s.end(), s.begin(), s.end());
    all_y.insert(all_y.end(), y.begin(), y.end());
  }
  if (t.cols) {
    rep.mean_label_recall /= static_cast<double>(t.cols);
    rep.mean_label_false_alarm /= static_cast<double>(t.cols);
  }
  if (auc_count) rep.mean_label_auc = auc_sum / static_cast<double>(auc_count);
  const auto overall = confusion_rates(all_s, all_y, threshold);
  rep.overall_recall = overall.recall;
  rep.overall_false_alarm = overall.false_alarm;
  const double oauc = roc_auc(all_s, all_y);
  if (!std::isnan(oauc)) rep.overall_auc = oauc;
  rep.observed = all_s.size();
  return rep;
}

namespace detail {
inline nlohmann::json opt_json(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }
}  // namespace detail

inline nlohmann::json to_json(const EvalReport& r) {
  nlohmann::json labels = nlohmann::json::array();
  for (const auto& l : r.per_label) {
    labels.push_back({{"name", l.name}, {"recall", l.recall}, {"false_alarm", l.false_alarm},
                      {"auc", detail::opt_json(l.auc)}, {"positives", l.positives}, {"negatives", l.negatives}});
  }
  return {{"per_label", labels},
          {"overall", {{"recall", r.overall_recall}, {"false_alarm", r.overall_false_alarm}, {"auc", detail::opt_json(r.overall_auc)}}},
          {"macro", {{"recall", r.mean_label_recall}, {"false_alarm", r.mean_label_false_alarm}, {"auc", detail::opt_json(r.mean_label_auc)}}},
          {"observed", r.observed}};
}

inline std::string render_table(const EvalReport& r) {
  auto fmt = [](const std::optional<double>& v) {
    std::ostringstream os;
    if (v) os << std::fixed << std::setprecision(4) << *v;
    else os << "-";
    return os.str();
  };
  std::size_t w = 7;
  for (const auto& l : r.per_label) w = std::max(w, l.name.size());
  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(w)) << "label" << std::right << std::setw(10) << "recall"
     << std::setw(10) << "f_alarm" << std::setw(10) << "auc" << std::setw(8) << "pos" << std::setw(8) << "neg" << '\n';
  for (const auto& l : r.per_label) {
    os << std::left << std::setw(static_cast<int>(w)) << l.name << std::right << std::setw(10) << fmt(l.recall)
       << std::setw(10) << fmt(l.false_alarm) << std::setw(10) << fmt(l.auc) << std::setw(8) << l.positives
       << std::setw(8) << l.negatives << '\n';
  }
  os << std::left << std::setw(static_cast<int>(w)) << "macro" << std::right << std::setw(10) << fmt(r.mean_label_recall)
     << std::setw(10) << fmt(r.mean_label_false_alarm) << std::setw(10) << fmt(r.mean_label_auc) << '\n';
  os << std::left << std::setw(static_cast<int>(w)) << "overall" << std::right << std::setw(10) << fmt(r.overall_recall)
     << std::setw(10) << fmt(r.overall_false_alarm) << std::setw(10) << fmt(r.overall_auc) << '\n';
  return os.str();
}

}  // namespace grassnet
