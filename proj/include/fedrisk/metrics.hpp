#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <filesystem>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "fedrisk/csv.hpp"
#include "fedrisk/error.hpp"

namespace fedrisk {

inline constexpr double kDefaultThreshold = 0.5;

struct Confusion {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }
  bool operator==(const Confusion&) const = default;
};

/// A score at or above the threshold is a positive prediction.
inline Confusion confusion_at_threshold(std::span<const int> labels, std::span<const double> scores,
                                        double threshold = kDefaultThreshold) {
  if (labels.size() != scores.size()) {
    throw DataError("confusion: " + std::to_string(labels.size()) + " labels vs " +
                    std::to_string(scores.size()) + " scores");
  }
  if (labels.empty()) throw DataError("confusion: no samples");
  Confusion c;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const bool predicted = scores[i] >= threshold;
    if (labels[i] == 1) {
      (predicted ? c.tp : c.fn)++;
    } else {
      (predicted ? c.fp : c.tn)++;
    }
  }
  return c;
}

struct ThresholdMetrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool zero_division = false;  // some ratio had a zero denominator and was set to 0
};

inline ThresholdMetrics precision_recall_f1_accuracy(const Confusion& c) {
  if (c.total() == 0) throw DataError("metrics: all confusion counts are zero");
  ThresholdMetrics m;
  auto ratio = [&m](std::size_t num, std::size_t den) {
    if (den == 0) {
      m.zero_division = true;
      return 0.0;
    }
    return static_cast<double>(num) / static_cast<double>(den);
  };
  m.precision = ratio(c.tp, c.tp + c.fp);
  m.recall = ratio(c.tp, c.tp + c.fn);
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.zero_division = true;
  }
  m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
  return m;
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;

  bool operator==(const RocPoint&) const = default;
};

struct RocCurve {
  std::vector<RocPoint> points;
};

/// One point per distinct score, sweeping the threshold downward, framed by
/// (0,0) and (1,1). The leading point carries threshold +inf and the
/// trailing one -inf.
inline RocCurve roc_curve(std::span<const int> labels, std::span<const double> scores) {
  if (labels.size() != scores.size()) throw DataError("roc_curve: labels/scores length mismatch");
  const auto pos = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const auto neg = labels.size() - pos;
  if (pos == 0 || neg == 0) throw DataError("AUC undefined for single-class labels");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double s = scores[order[i]];
    for (; i < order.size() && scores[order[i]] == s; ++i) {
      (labels[order[i]] == 1 ? tp : fp)++;
    }
    curve.points.push_back(
        {static_cast<double>(fp) / static_cast<double>(neg),
         static_cast<double>(tp) / static_cast<double>(pos), s});
  }
  curve.points.push_back({1.0, 1.0, -std::numeric_limits<double>::infinity()});
  return curve;
}

/// Trapezoidal area under the curve.
inline double roc_auc(const RocCurve& curve) {
  double area = 0.0;
  for (std::size_t i = 1; i < curve.points.size(); ++i) {
    const auto& a = curve.points[i - 1];
    const auto& b = curve.points[i];
    area += (b.fpr - a.fpr) * (a.tpr + b.tpr) * 0.5;
  }
  return std::clamp(area, 0.0, 1.0);
}

struct MetricBundle {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double roc_auc = 0.0;
  double threshold = kDefaultThreshold;
  std::size_t support_pos = 0;
  std::size_t support_neg = 0;
  bool zero_division = false;

  bool operator==(const MetricBundle&) const = default;
};

inline MetricBundle evaluate_scores(std::span<const int> labels, std::span<const double> scores,
                                    double threshold = kDefaultThreshold) {
  const auto c = confusion_at_threshold(labels, scores, threshold);
  const auto m = precision_recall_f1_accuracy(c);
  MetricBundle b;
  b.accuracy = m.accuracy;
  b.precision = m.precision;
  b.recall = m.recall;
  b.f1 = m.f1;
  b.zero_division = m.zero_division;
  b.threshold = threshold;
  b.support_pos = c.tp + c.fn;
  b.support_neg = c.fp + c.tn;
  b.roc_auc = roc_auc(roc_curve(labels, scores));
  return b;
}

inline void write_roc_csv(const RocCurve& curve, const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row("fpr", "tpr", "threshold");
  for (const auto& p : curve.points) {
    std::string t = std::isinf(p.threshold) ? (p.threshold > 0 ? "inf" : "-inf")
                                            : csv::format_double(p.threshold);
    w.row(p.fpr, p.tpr, t);
  }
}

}  // namespace fedrisk
