#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "fedrisk/dataset.hpp"
#include "fedrisk/error.hpp"
#include "fedrisk/random.hpp"

namespace fedrisk {

struct SplitConfig {
  double test_fraction = 0.2;
  bool stratified = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(test_fraction > 0.0 && test_fraction < 1.0)) {
      throw ConfigError("split: test_fraction must be in (0, 1)");
    }
  }
};

struct TrainTestSplit {
  LabeledDataset train;
  LabeledDataset test;
};

inline std::size_t round_half_up(double x) { return static_cast<std::size_t>(std::floor(x + 0.5)); }

/// Seeded train/test split. The test set has round_half_up(f * N) rows; when
/// stratified the total is apportioned across classes by largest remainder
/// (ties to the lower label). Both outputs keep the input row order.
inline TrainTestSplit split_train_test(const LabeledDataset& ds, const SplitConfig& cfg) {
  cfg.validate();
  const std::size_t n = ds.size();
  const std::size_t n_test = round_half_up(cfg.test_fraction * static_cast<double>(n));
  Rng rng(cfg.seed);

  std::vector<char> in_test(n, 0);
  if (cfg.stratified) {
    std::array<std::vector<std::size_t>, 2> by_class;
    for (std::size_t i = 0; i < n; ++i) by_class[ds.y[i] != 0 ? 1 : 0].push_back(i);
    for (int c = 0; c < 2; ++c) {
      if (by_class[c].size() < 2) {
        throw DataError("stratified split impossible: class " + std::to_string(c) + " has " +
                        std::to_string(by_class[c].size()) + " row(s), need at least 2");
      }
    }
    std::array<std::size_t, 2> take{};
    std::array<double, 2> remainder{};
    std::size_t assigned = 0;
    for (int c = 0; c < 2; ++c) {
      const double quota = cfg.test_fraction * static_cast<double>(by_class[c].size());
      take[c] = static_cast<std::size_t>(std::floor(quota));
      remainder[c] = quota - std::floor(quota);
      assigned += take[c];
    }
    std::array<int, 2> order{0, 1};
    std::stable_sort(order.begin(), order.end(),
                     [&](int a, int b) { return remainder[a] > remainder[b]; });
    for (std::size_t k = 0; assigned < n_test; ++k, ++assigned) ++take[order[k % 2]];

    for (int c = 0; c < 2; ++c) {
      auto& rows = by_class[c];
      rng.shuffle(std::span<std::size_t>(rows));
      for (std::size_t k = 0; k < take[c]; ++k) in_test[rows[k]] = 1;
    }
  } else {
    std::vector<std::size_t> rows(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    rng.shuffle(std::span<std::size_t>(rows));
    for (std::size_t k = 0; k < n_test; ++k) in_test[rows[k]] = 1;
  }

  std::vector<std::size_t> train_rows, test_rows;
  for (std::size_t i = 0; i < n; ++i) (in_test[i] ? test_rows : train_rows).push_back(i);
  return {ds.subset(train_rows), ds.subset(test_rows)};
}

struct ScalerParams {
  std::vector<double> mean;
  std::vector<double> std;

  bool operator==(const ScalerParams&) const = default;
};

namespace detail {

// Variances at rounding-noise level relative to the squared mean are
// treated as zero so moment-aggregated and pooled statistics agree on
// which columns are constant.
inline double std_from_variance(double variance, double mean) {
  const double floor = 1e-20 * std::max(1.0, mean * mean);
  return variance > floor ? std::sqrt(variance) : 1.0;
}

struct ColumnMoments {
  std::size_t n = 0;
  std::vector<double> mean;
  std::vector<double> m2;  // sum of squared deviations from mean
};

inline ColumnMoments column_moments(const Matrix& X) {
  ColumnMoments mo;
  mo.n = X.rows();
  mo.mean.assign(X.cols(), 0.0);
  mo.m2.assign(X.cols(), 0.0);
  if (mo.n == 0) return mo;
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t c = 0; c < X.cols(); ++c) mo.mean[c] += X(r, c);
  }
  for (auto& m : mo.mean) m /= static_cast<double>(mo.n);
  for (std::size_t r = 0; r < X.rows(); ++r) {
    for (std::size_t c = 0; c < X.cols(); ++c) {
      const double d = X(r, c) - mo.mean[c];
      mo.m2[c] += d * d;
    }
  }
  return mo;
}

}  // namespace detail

/// Per-column mean and population standard deviation; constant columns get
/// std = 1.
inline ScalerParams fit_scaler(const LabeledDataset& train) {
  if (train.empty()) throw DataError("fit_scaler: empty training set");
  const auto mo = detail::column_moments(train.X);
  ScalerParams p{mo.mean, std::vector<double>(mo.mean.size())};
  for (std::size_t c = 0; c < p.mean.size(); ++c) {
    p.std[c] = detail::std_from_variance(mo.m2[c] / static_cast<double>(mo.n), p.mean[c]);
  }
  return p;
}

inline LabeledDataset apply_scaler(const ScalerParams& p, const LabeledDataset& ds) {
  if (p.mean.size() != ds.feature_count() || p.std.size() != ds.feature_count()) {
    throw DataError("apply_scaler: scaler has " + std::to_string(p.mean.size()) +
                    " features, dataset has " + std::to_string(ds.feature_count()));
  }
  LabeledDataset out = ds;
  for (std::size_t r = 0; r < out.size(); ++r) {
    auto row = out.X.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) row[c] = (row[c] - p.mean[c]) / p.std[c];
  }
  return out;
}

struct ClientPartition {
  std::string institution_id;
  LabeledDataset data;

  std::size_t n_k() const noexcept { return data.size(); }
};

/// One partition per code_module, in lexicographic order of module code.
inline std::vector<ClientPartition> partition_by_module(const LabeledDataset& train) {
  std::map<std::string, std::vector<std::size_t>> rows;
  for (std::size_t i = 0; i < train.size(); ++i) rows[train.keys[i].code_module].push_back(i);
  std::vector<ClientPartition> out;
  out.reserve(rows.size());
  for (const auto& [module, idx] : rows) out.push_back({module, train.subset(idx)});
  return out;
}

/// Global scaler from per-client moments (count, mean, sum of squared
/// deviations) combined on the server. Matches fit_scaler on the pooled rows.
inline ScalerParams federated_fit_scaler(std::span<const ClientPartition> partitions) {
  std::vector<detail::ColumnMoments> local;
  std::size_t total = 0;
  for (const auto& p : partitions) {
    if (p.n_k() == 0) continue;
    local.push_back(detail::column_moments(p.data.X));
    total += p.n_k();
  }
  if (total == 0) throw DataError("federated_fit_scaler: no training rows across partitions");

  const std::size_t d = local.front().mean.size();
  const double n = static_cast<double>(total);
  ScalerParams out{std::vector<double>(d, 0.0), std::vector<double>(d, 0.0)};
  for (const auto& mo : local) {
    if (mo.mean.size() != d) throw DataError("federated_fit_scaler: feature count mismatch");
    for (std::size_t c = 0; c < d; ++c) out.mean[c] += static_cast<double>(mo.n) * mo.mean[c];
  }
  for (auto& m : out.mean) m /= n;
  for (std::size_t c = 0; c < d; ++c) {
    double m2 = 0.0;
    for (const auto& mo : local) {
      const double delta = mo.mean[c] - out.mean[c];
      m2 += mo.m2[c] + static_cast<double>(mo.n) * delta * delta;
    }
    out.std[c] = detail::std_from_variance(m2 / n, out.mean[c]);
  }
  return out;
}

}  // namespace fedrisk
