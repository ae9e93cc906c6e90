#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <string>
#include <vector>

#include "fedrisk/dataset.hpp"
#include "fedrisk/error.hpp"
#include "fedrisk/random.hpp"

namespace fedrisk {

struct SmoteConfig {
  int k_neighbors = 5;
  double target_ratio = 1.0;  // minority / majority after balancing
  std::uint64_t seed = 0;

  void validate() const {
    if (k_neighbors < 1) throw ConfigError("smote: k_neighbors must be >= 1");
    if (!(target_ratio > 0.0 && target_ratio <= 1.0)) {
      throw ConfigError("smote: target_ratio must be in (0, 1]");
    }
  }
};

struct ClassCounts {
  int minority_label = 1;
  std::size_t minority = 0;
  std::size_t majority = 0;
};

// On equal counts label 1 is reported as the minority; such data is never
// considered imbalanced.
inline ClassCounts class_counts(const LabeledDataset& ds) {
  const std::size_t pos = ds.positives();
  const std::size_t neg = ds.size() - pos;
  if (pos <= neg) return {1, pos, neg};
  return {0, neg, pos};
}

/// True when minority/majority < target_ratio.
inline bool is_imbalanced(const LabeledDataset& ds, double target_ratio) {
  const auto c = class_counts(ds);
  if (c.majority == 0) return false;
  return static_cast<double>(c.minority) < target_ratio * static_cast<double>(c.majority);
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

/// The k rows of the query's class closest to it in Euclidean distance,
/// excluding the query. Ties go to the lower row index; fewer than k
/// candidates returns all of them.
inline std::vector<std::size_t> knn_minority(const LabeledDataset& ds, std::size_t query_index,
                                             std::size_t k) {
  const int label = ds.y.at(query_index);
  const auto q = ds.X.row(query_index);
  std::vector<std::pair<double, std::size_t>> cand;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (i == query_index || ds.y[i] != label) continue;
    cand.emplace_back(squared_distance(q, ds.X.row(i)), i);
  }
  const std::size_t take = std::min(k, cand.size());
  std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(take), cand.end());
  std::vector<std::size_t> out;
  out.reserve(take);
  for (std::size_t i = 0; i < take; ++i) out.push_back(cand[i].second);
  return out;
}

/// SMOTE. Appends floor(target_ratio * majority) - minority synthetic
/// minority rows after the original rows, which are left untouched. Parent
/// rows are taken round-robin over the minority class, the partner uniformly
/// from the parent's k nearest minority neighbours, and the interpolation
/// weight fresh per row. Synthetic keys keep the parent's module code.
inline LabeledDataset smote_oversample(const LabeledDataset& ds, const SmoteConfig& cfg,
                                       Diagnostics* diag = nullptr) {
  cfg.validate();
  if (!is_imbalanced(ds, cfg.target_ratio)) return ds;

  const auto counts = class_counts(ds);
  const auto target = static_cast<std::size_t>(
      std::floor(cfg.target_ratio * static_cast<double>(counts.majority)));
  if (target <= counts.minority) return ds;
  if (counts.minority < 2) {
    if (diag) {
      diag->warn("smote skipped: minority class " + std::to_string(counts.minority_label) +
                 " has " + std::to_string(counts.minority) + " row(s)");
    }
    return ds;
  }

  std::vector<std::size_t> minority;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (ds.y[i] == counts.minority_label) minority.push_back(i);
  }
  const std::size_t k = std::min(static_cast<std::size_t>(cfg.k_neighbors), minority.size() - 1);
  std::vector<std::vector<std::size_t>> neighbours;
  neighbours.reserve(minority.size());
  for (auto idx : minority) neighbours.push_back(knn_minority(ds, idx, k));

  LabeledDataset out = ds;
  const std::size_t to_make = target - counts.minority;
  out.X.reserve_rows(ds.size() + to_make);
  Rng rng(cfg.seed);
  std::vector<double> synth(ds.feature_count());
  for (std::size_t j = 0; j < to_make; ++j) {
    const std::size_t slot = j % minority.size();
    const auto parent = ds.X.row(minority[slot]);
    const auto& nn = neighbours[slot];
    const auto partner = ds.X.row(nn[rng.below(nn.size())]);
    const double u = rng.uniform();
    for (std::size_t c = 0; c < synth.size(); ++c) {
      // Clamped so rounding can never leave the parent segment.
      synth[c] = std::clamp(parent[c] + u * (partner[c] - parent[c]),
                            std::min(parent[c], partner[c]), std::max(parent[c], partner[c]));
    }
    out.push_back(synth, counts.minority_label,
                  {ds.keys[minority[slot]].code_module, std::string(kSyntheticPresentation),
                   kSyntheticStudentId});
  }
  return out;
}

}  // namespace fedrisk
