#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <future>
#include <optional>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "fedrisk/balance.hpp"
#include "fedrisk/csv.hpp"
#include "fedrisk/error.hpp"
#include "fedrisk/metrics.hpp"
#include "fedrisk/models.hpp"
#include "fedrisk/preprocess.hpp"
#include "fedrisk/random.hpp"

namespace fedrisk {

struct FederationConfig {
  int rounds = 20;
  double participation = 1.0;
  TrainConfig local_train = [] {
    TrainConfig c = TrainConfig::lr_defaults();
    c.epochs = 5;
    return c;
  }();
  std::optional<SmoteConfig> smote;
  ModelFamily model_family = ModelFamily::lr;
  std::uint64_t seed = 0;
  double threshold = kDefaultThreshold;
  bool weight_by_post_smote_count = false;  // sensitivity analysis only
  bool parallel_clients = false;

  void validate() const {
    if (rounds < 1) throw ConfigError("federation: rounds must be >= 1");
    if (!(participation > 0.0 && participation <= 1.0)) {
      throw ConfigError("federation: participation must be in (0, 1]");
    }
    local_train.validate();
    if (smote) smote->validate();
  }
};

// Seed streams. Everything a client does in a round depends only on
// (seed, round, institution), never on scheduling.
inline std::uint64_t selection_seed(std::uint64_t seed, int round) {
  return derive_seed(seed, "select", static_cast<std::uint64_t>(round));
}
inline std::uint64_t client_shuffle_seed(std::uint64_t seed, int round, const std::string& id) {
  return derive_seed(seed, "shuffle", static_cast<std::uint64_t>(round), id);
}
inline std::uint64_t client_smote_seed(std::uint64_t seed, int round, const std::string& id) {
  return derive_seed(seed, "smote", static_cast<std::uint64_t>(round), id);
}
inline std::uint64_t model_init_seed(std::uint64_t seed) { return derive_seed(seed, "init"); }

inline std::size_t participants_per_round(std::size_t n, double participation) {
  return std::clamp<std::size_t>(round_half_up(participation * static_cast<double>(n)), 1, n);
}

/// K = max(1, round(C * n)) institutions drawn without replacement, returned
/// in lexicographic order.
inline std::vector<std::string> select_institutions(std::vector<std::string> all,
                                                    double participation, Rng& rng) {
  if (all.empty()) throw DataError("select_institutions: no institutions");
  const auto k = participants_per_round(all.size(), participation);
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = i + static_cast<std::size_t>(rng.below(all.size() - i));
    std::swap(all[i], all[j]);
  }
  all.resize(k);
  std::sort(all.begin(), all.end());
  return all;
}

struct ClientUpdate {
  std::string institution_id;
  std::size_t n_k = 0;  // weight used by aggregation
  ParamVector params;
};

/// Local step of one institution: optional SMOTE (logistic regression only,
/// and only when the data is imbalanced), then E local epochs from the
/// global parameters.
inline ClientUpdate institution_update(const ClientPartition& k, const ParamVector& global,
                                       const FederationConfig& cfg, int round) {
  const LabeledDataset* local = &k.data;
  LabeledDataset balanced;
  if (cfg.smote && cfg.model_family == ModelFamily::lr) {
    SmoteConfig sc = *cfg.smote;
    sc.seed = client_smote_seed(cfg.seed, round, k.institution_id);
    balanced = smote_oversample(k.data, sc);
    local = &balanced;
  }
  TrainConfig tc = cfg.local_train;
  tc.shuffle_seed = client_shuffle_seed(cfg.seed, round, k.institution_id);
  try {
    auto result = train(cfg.model_family, *local, tc, global);
    const std::size_t weight = cfg.weight_by_post_smote_count ? local->size() : k.n_k();
    return {k.institution_id, weight, std::move(result.params)};
  } catch (const TrainingError& e) {
    throw TrainingError("institution " + k.institution_id + ", round " + std::to_string(round) +
                        ": " + e.what());
  }
}

/// Weighted mean with weights n_k / sum(n_k), accumulated in lexicographic
/// institution order.
inline ParamVector fedavg_aggregate(std::vector<ClientUpdate> updates) {
  if (updates.empty()) throw DataError("fedavg: no updates");
  std::sort(updates.begin(), updates.end(),
            [](const ClientUpdate& a, const ClientUpdate& b) { return a.institution_id < b.institution_id; });
  if (updates.size() == 1) return updates.front().params;

  const auto& tag = updates.front().params.layout_tag;
  const auto len = updates.front().params.size();
  std::size_t total = 0;
  for (const auto& u : updates) {
    if (u.params.layout_tag != tag || u.params.size() != len) {
      throw DataError("fedavg: layout mismatch between '" + tag + "' and '" + u.params.layout_tag +
                      "' from institution " + u.institution_id);
    }
    total += u.n_k;
  }
  if (total == 0) throw DataError("fedavg: zero total weight");

  ParamVector out{std::vector<double>(len, 0.0), tag};
  for (const auto& u : updates) {
    const double weight = static_cast<double>(u.n_k) / static_cast<double>(total);
    for (std::size_t i = 0; i < len; ++i) out.values[i] += weight * u.params.values[i];
  }
  // Keep the aggregate inside the clients' coordinate range despite rounding.
  for (std::size_t i = 0; i < len; ++i) {
    double lo = updates.front().params.values[i], hi = lo;
    for (const auto& u : updates) {
      lo = std::min(lo, u.params.values[i]);
      hi = std::max(hi, u.params.values[i]);
    }
    out.values[i] = std::clamp(out.values[i], lo, hi);
  }
  return out;
}

struct RoundResult {
  int round = 0;
  ParamVector global_params;
  MetricBundle metrics;
  std::vector<std::string> participating;
};

struct FederationOutput {
  std::vector<RoundResult> rounds;
  std::vector<double> final_scores;  // test-set probabilities of the last global model
};

/// Server loop: initialise, then for each round select, update, aggregate
/// and evaluate on the held-out test set. Checkpoints are written per round
/// when `checkpoint_dir` is set.
inline FederationOutput run_federation(const std::vector<ClientPartition>& partitions,
                                       const LabeledDataset& test, const FederationConfig& cfg,
                                       const std::optional<std::filesystem::path>& checkpoint_dir =
                                           std::nullopt) {
  cfg.validate();
  if (partitions.empty()) throw DataError("run_federation: no partitions");
  const std::size_t d = partitions.front().data.feature_count();
  std::vector<std::string> ids;
  std::set<RegistrationKey> train_keys;
  for (const auto& p : partitions) {
    if (p.data.feature_count() != d) {
      throw DataError("run_federation: institution " + p.institution_id +
                      " has a different feature space");
    }
    ids.push_back(p.institution_id);
    for (const auto& key : p.data.keys) {
      if (!is_synthetic(key)) train_keys.insert(key);
    }
  }
  for (const auto& key : test.keys) {
    if (train_keys.contains(key)) {
      throw DataError("run_federation: test row (" + key.code_module + ", " +
                      key.code_presentation + ", " + std::to_string(key.id_student) +
                      ") also appears in institution training data");
    }
  }
  if (checkpoint_dir) {
    std::error_code ec;
    std::filesystem::create_directories(*checkpoint_dir, ec);
    if (ec) throw IoError("cannot create " + checkpoint_dir->string() + ": " + ec.message());
  }

  auto find = [&](const std::string& id) -> const ClientPartition& {
    return *std::find_if(partitions.begin(), partitions.end(),
                         [&](const ClientPartition& p) { return p.institution_id == id; });
  };

  FederationOutput out;
  ParamVector global = init_params(cfg.model_family, d, model_init_seed(cfg.seed));
  for (int round = 1; round <= cfg.rounds; ++round) {
    Rng select_rng(selection_seed(cfg.seed, round));
    const auto selected = select_institutions(ids, cfg.participation, select_rng);

    std::vector<ClientUpdate> updates;
    if (cfg.parallel_clients && selected.size() > 1) {
      std::vector<std::future<ClientUpdate>> pending;
      for (const auto& id : selected) {
        pending.push_back(std::async(std::launch::async, [&, id] {
          return institution_update(find(id), global, cfg, round);
        }));
      }
      for (auto& f : pending) updates.push_back(f.get());
    } else {
      for (const auto& id : selected) updates.push_back(institution_update(find(id), global, cfg, round));
    }
    global = fedavg_aggregate(std::move(updates));

    auto scores = predict_proba(cfg.model_family, global, test.X);
    RoundResult rr{round, global, evaluate_scores(test.y, scores, cfg.threshold), selected};
    if (checkpoint_dir) {
      save_params(global, *checkpoint_dir / ("round_" + std::to_string(round) + ".json"));
    }
    out.rounds.push_back(std::move(rr));
    if (round == cfg.rounds) out.final_scores = std::move(scores);
  }
  return out;
}

/// Round history: one row per round with the participant list
/// (semicolon-separated) and every metric.
inline void write_round_history(const std::vector<RoundResult>& rounds,
                                const std::filesystem::path& path) {
  csv::Writer w(path);
  w.row("round", "participating", "accuracy", "precision", "recall", "f1", "roc_auc", "threshold",
        "support_pos", "support_neg");
  for (const auto& r : rounds) {
    std::string who;
    for (const auto& id : r.participating) who += (who.empty() ? "" : ";") + id;
    const auto& m = r.metrics;
    w.row(r.round, who, m.accuracy, m.precision, m.recall, m.f1, m.roc_auc, m.threshold,
          m.support_pos, m.support_neg);
  }
}

}  // namespace fedrisk
