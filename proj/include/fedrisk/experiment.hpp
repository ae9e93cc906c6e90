#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <future>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fedrisk/balance.hpp"
#include "fedrisk/dataset.hpp"
#include "fedrisk/error.hpp"
#include "fedrisk/federation.hpp"
#include "fedrisk/metrics.hpp"
#include "fedrisk/models.hpp"
#include "fedrisk/preprocess.hpp"
#include "fedrisk/random.hpp"

namespace fedrisk {

using nlohmann::json;

inline constexpr int kConfigSchemaVersion = 1;

enum class ExperimentKind { centralized_lr, centralized_dnn, federated_lr_smote, federated_dnn };

inline constexpr std::array<ExperimentKind, 4> kAllExperiments = {
    ExperimentKind::centralized_lr, ExperimentKind::centralized_dnn,
    ExperimentKind::federated_lr_smote, ExperimentKind::federated_dnn};

inline std::string_view experiment_name(ExperimentKind k) {
  switch (k) {
    case ExperimentKind::centralized_lr: return "centralized_lr";
    case ExperimentKind::centralized_dnn: return "centralized_dnn";
    case ExperimentKind::federated_lr_smote: return "federated_lr_smote";
    case ExperimentKind::federated_dnn: return "federated_dnn";
  }
  return "";
}

inline ExperimentKind parse_experiment(std::string_view s) {
  for (auto k : kAllExperiments) {
    if (experiment_name(k) == s) return k;
  }
  throw ConfigError("unknown experiment '" + std::string(s) +
                    "' (expected centralized_lr, centralized_dnn, federated_lr_smote or "
                    "federated_dnn)");
}

inline bool is_federated(ExperimentKind k) {
  return k == ExperimentKind::federated_lr_smote || k == ExperimentKind::federated_dnn;
}

inline ModelFamily experiment_family(ExperimentKind k) {
  return k == ExperimentKind::centralized_lr || k == ExperimentKind::federated_lr_smote
             ? ModelFamily::lr
             : ModelFamily::mlp;
}

struct CentralizedSettings {
  TrainConfig train;
  std::optional<SmoteConfig> smote;  // off by default
};

struct ExperimentConfig {
  std::optional<std::filesystem::path> oulad_dir;
  std::optional<SyntheticCorpusConfig> synthetic;
  SplitConfig split;
  std::vector<ExperimentKind> experiments{kAllExperiments.begin(), kAllExperiments.end()};
  FeatureOptions features;
  double threshold = kDefaultThreshold;
  std::filesystem::path out_dir = "fedrisk_out";
  std::uint64_t master_seed = 42;
  bool parallel_experiments = false;
  bool checkpoints = false;

  CentralizedSettings centralized_lr{TrainConfig::lr_defaults(), std::nullopt};
  CentralizedSettings centralized_dnn{TrainConfig::mlp_defaults(), std::nullopt};
  FederationConfig federated_lr_smote = [] {
    FederationConfig c;
    c.model_family = ModelFamily::lr;
    c.smote = SmoteConfig{};
    return c;
  }();
  FederationConfig federated_dnn = [] {
    FederationConfig c;
    c.model_family = ModelFamily::mlp;
    c.local_train = TrainConfig::mlp_defaults();
    c.local_train.epochs = 5;
    return c;
  }();

  void validate() const {
    if (experiments.empty()) throw ConfigError("config: experiments list is empty");
    if (oulad_dir.has_value() == synthetic.has_value()) {
      throw ConfigError("config: exactly one data source (oulad_dir or synthetic) is required");
    }
    if (synthetic) synthetic->validate();
    split.validate();
    if (features.early_window_days <= 0) throw ConfigError("config: early_window_days must be > 0");
    if (!(threshold >= 0.0 && threshold <= 1.0)) throw ConfigError("config: threshold must be in [0, 1]");
    centralized_lr.train.validate();
    centralized_dnn.train.validate();
    if (centralized_lr.smote) centralized_lr.smote->validate();
    federated_lr_smote.validate();
    federated_dnn.validate();
  }
};

// ---------------------------------------------------------------------------
// JSON <-> config

namespace detail {

template <typename T>
void read_opt(const json& j, std::string_view key, T& into) {
  if (auto it = j.find(key); it != j.end() && !it->is_null()) {
    try {
      into = it->get<T>();
    } catch (const json::exception& e) {
      throw ConfigError("config: bad value for '" + std::string(key) + "': " + e.what());
    }
  }
}

inline void check_keys(const json& j, std::string_view where, std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw ConfigError("config: '" + std::string(where) + "' must be an object");
  for (const auto& [k, v] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), k) == allowed.end()) {
      throw ConfigError("config: unknown key '" + k + "' in " + std::string(where));
    }
  }
}

inline TrainConfig train_from_json(const json& j, TrainConfig c, std::string_view where) {
  check_keys(j, where,
             {"learning_rate", "epochs", "batch_size", "l2_lambda", "optimizer", "adam_beta1",
              "adam_beta2", "adam_epsilon"});
  read_opt(j, "learning_rate", c.learning_rate);
  read_opt(j, "epochs", c.epochs);
  read_opt(j, "batch_size", c.batch_size);
  read_opt(j, "l2_lambda", c.l2_lambda);
  if (j.contains("optimizer")) c.optimizer = parse_optimizer(j.at("optimizer").get<std::string>());
  read_opt(j, "adam_beta1", c.adam_beta1);
  read_opt(j, "adam_beta2", c.adam_beta2);
  read_opt(j, "adam_epsilon", c.adam_epsilon);
  return c;
}

inline json train_to_json(const TrainConfig& c) {
  return {{"learning_rate", c.learning_rate}, {"epochs", c.epochs},
          {"batch_size", c.batch_size},       {"l2_lambda", c.l2_lambda},
          {"optimizer", optimizer_name(c.optimizer)},
          {"adam_beta1", c.adam_beta1},       {"adam_beta2", c.adam_beta2},
          {"adam_epsilon", c.adam_epsilon}};
}

inline std::optional<SmoteConfig> smote_from_json(const json& j, std::optional<SmoteConfig> c,
                                                  std::string_view where) {
  if (j.is_null() || (j.is_boolean() && !j.get<bool>())) return std::nullopt;
  SmoteConfig s = c.value_or(SmoteConfig{});
  if (j.is_boolean()) return s;
  check_keys(j, where, {"k_neighbors", "target_ratio"});
  read_opt(j, "k_neighbors", s.k_neighbors);
  read_opt(j, "target_ratio", s.target_ratio);
  return s;
}

inline json smote_to_json(const std::optional<SmoteConfig>& s) {
  if (!s) return nullptr;
  return {{"k_neighbors", s->k_neighbors}, {"target_ratio", s->target_ratio}};
}

inline FederationConfig federation_from_json(const json& j, FederationConfig c, std::string_view where) {
  check_keys(j, where,
             {"rounds", "participation", "local_train", "smote", "weight_by_post_smote_count",
              "parallel_clients"});
  read_opt(j, "rounds", c.rounds);
  read_opt(j, "participation", c.participation);
  if (j.contains("local_train")) c.local_train = train_from_json(j.at("local_train"), c.local_train, "local_train");
  if (j.contains("smote")) c.smote = smote_from_json(j.at("smote"), c.smote, "smote");
  read_opt(j, "weight_by_post_smote_count", c.weight_by_post_smote_count);
  read_opt(j, "parallel_clients", c.parallel_clients);
  return c;
}

inline json synthetic_to_json(const SyntheticCorpusConfig& s) {
  return {{"n_modules", s.n_modules},
          {"students_per_module", s.students_per_module},
          {"fail_rate", s.fail_rate},
          {"signal_strength", s.signal_strength},
          {"seed", s.seed}};
}

}  // namespace detail

/// Parses a config document. Values absent from `j` keep the defaults in
/// `base`.
inline ExperimentConfig config_from_json(const json& j, ExperimentConfig base = {}) {
  using namespace detail;
  check_keys(j, "config",
             {"schema_version", "data", "split", "experiments", "features", "threshold",
              "master_seed", "out_dir", "parallel_experiments", "checkpoints", "centralized_lr",
              "centralized_dnn", "federated_lr_smote", "federated_dnn"});
  int version = kConfigSchemaVersion;
  read_opt(j, "schema_version", version);
  if (version != kConfigSchemaVersion) {
    throw ConfigError("config: unsupported schema_version " + std::to_string(version));
  }
  ExperimentConfig c = std::move(base);
  read_opt(j, "master_seed", c.master_seed);
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "data", {"oulad_dir", "synthetic"});
    if (d.contains("oulad_dir")) {
      c.oulad_dir = d.at("oulad_dir").get<std::string>();
      c.synthetic.reset();
    }
    if (d.contains("synthetic")) {
      const auto& s = d.at("synthetic");
      check_keys(s, "synthetic",
                 {"n_modules", "students_per_module", "fail_rate", "signal_strength", "seed"});
      SyntheticCorpusConfig sc;
      sc.seed = c.master_seed;
      read_opt(s, "n_modules", sc.n_modules);
      read_opt(s, "students_per_module", sc.students_per_module);
      read_opt(s, "fail_rate", sc.fail_rate);
      read_opt(s, "signal_strength", sc.signal_strength);
      read_opt(s, "seed", sc.seed);
      c.synthetic = sc;
      c.oulad_dir.reset();
    }
  }
  if (j.contains("split")) {
    const auto& s = j.at("split");
    check_keys(s, "split", {"test_fraction", "stratified"});
    read_opt(s, "test_fraction", c.split.test_fraction);
    read_opt(s, "stratified", c.split.stratified);
  }
  if (j.contains("experiments")) {
    c.experiments.clear();
    for (const auto& e : j.at("experiments")) c.experiments.push_back(parse_experiment(e.get<std::string>()));
  }
  if (j.contains("features")) {
    const auto& f = j.at("features");
    check_keys(f, "features", {"early_window_days", "early_clicks_only", "include_demographics"});
    read_opt(f, "early_window_days", c.features.early_window_days);
    read_opt(f, "early_clicks_only", c.features.early_clicks_only);
    read_opt(f, "include_demographics", c.features.include_demographics);
  }
  read_opt(j, "threshold", c.threshold);
  if (j.contains("out_dir")) c.out_dir = j.at("out_dir").get<std::string>();
  read_opt(j, "parallel_experiments", c.parallel_experiments);
  read_opt(j, "checkpoints", c.checkpoints);
  if (j.contains("centralized_lr")) {
    const auto& s = j.at("centralized_lr");
    check_keys(s, "centralized_lr", {"train", "smote"});
    if (s.contains("train")) c.centralized_lr.train = train_from_json(s.at("train"), c.centralized_lr.train, "train");
    if (s.contains("smote")) c.centralized_lr.smote = smote_from_json(s.at("smote"), c.centralized_lr.smote, "smote");
  }
  if (j.contains("centralized_dnn")) {
    const auto& s = j.at("centralized_dnn");
    check_keys(s, "centralized_dnn", {"train"});
    if (s.contains("train")) c.centralized_dnn.train = train_from_json(s.at("train"), c.centralized_dnn.train, "train");
  }
  if (j.contains("federated_lr_smote")) {
    c.federated_lr_smote = federation_from_json(j.at("federated_lr_smote"), c.federated_lr_smote, "federated_lr_smote");
  }
  if (j.contains("federated_dnn")) {
    c.federated_dnn = federation_from_json(j.at("federated_dnn"), c.federated_dnn, "federated_dnn");
  }
  return c;
}

inline ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("cannot parse config " + path.string() + ": " + e.what());
  }
  return config_from_json(j, std::move(base));
}

// ---------------------------------------------------------------------------
// Seeds. The master seed fans out by name so that toggling one stage never
// perturbs another.

inline std::uint64_t split_seed(std::uint64_t master) { return derive_seed(master, "split"); }

inline std::uint64_t experiment_seed(std::uint64_t master, ExperimentKind k) {
  return derive_seed(master, experiment_name(k));
}

// Centralized runs reuse the federation seed helpers with round 1 and the
// pseudo-institution "*".
inline constexpr std::string_view kPooledInstitution = "*";

// ---------------------------------------------------------------------------
// Data preparation shared by every experiment of one invocation

struct DatasetFingerprint {
  std::size_t rows = 0;
  double positive_fraction = 0.0;
  std::size_t feature_count = 0;
  std::size_t train_rows = 0;
  std::size_t test_rows = 0;
  std::size_t institutions = 0;
};

struct PreparedData {
  LabeledDataset dataset;  // unscaled, all labeled registrations
  Diagnostics diagnostics;
  std::vector<DemographicCount> demographics;
  ScalerParams scaler;
  LabeledDataset train;  // scaled
  LabeledDataset test;   // scaled
  std::vector<ClientPartition> partitions;  // scaled, one per module
  DatasetFingerprint fingerprint;
};

inline RawTables load_raw(const ExperimentConfig& cfg) {
  if (cfg.oulad_dir) return load_oulad(*cfg.oulad_dir);
  return generate_synthetic_corpus(*cfg.synthetic);
}

/// load/generate -> label -> features -> assemble -> split -> scale ->
/// partition. The scaler is fit once on the pooled training rows and shared
/// by all experiments; the moment-aggregated (federated) scaler is computed
/// as well and must agree with it.
inline PreparedData prepare_data(const ExperimentConfig& cfg) {
  cfg.validate();
  RawTables raw = load_raw(cfg);
  PreparedData p;
  p.dataset = build_dataset(raw, cfg.features);
  p.diagnostics = raw.diagnostics;
  p.demographics = summarize_demographics(raw.student_info);

  SplitConfig sc = cfg.split;
  sc.seed = split_seed(cfg.master_seed);
  auto split = split_train_test(p.dataset, sc);

  p.scaler = fit_scaler(split.train);
  const auto federated = federated_fit_scaler(partition_by_module(split.train));
  for (std::size_t c = 0; c < p.scaler.mean.size(); ++c) {
    auto close = [](double a, double b) {
      return std::abs(a - b) <= 1e-9 * std::max({1.0, std::abs(a), std::abs(b)});
    };
    if (!close(p.scaler.mean[c], federated.mean[c]) || !close(p.scaler.std[c], federated.std[c])) {
      throw Error(ErrorCategory::internal,
                  "federated scaler disagrees with pooled scaler on " + p.dataset.feature_names[c]);
    }
  }
  p.train = apply_scaler(p.scaler, split.train);
  p.test = apply_scaler(p.scaler, split.test);
  p.partitions = partition_by_module(p.train);
  p.fingerprint = {p.dataset.size(), p.dataset.positive_fraction(), p.dataset.feature_count(),
                   p.train.size(), p.test.size(), p.partitions.size()};
  return p;
}

// ---------------------------------------------------------------------------
// Running experiments

struct ExperimentReport {
  std::string name;
  json config;  // every resolved hyperparameter and seed
  MetricBundle metrics;
  RocCurve roc;
  std::vector<RoundResult> rounds;  // federated only
  std::vector<double> train_loss;   // centralized only
  std::string roc_file;
  std::optional<std::string> rounds_file;
  double wall_seconds = 0.0;
  DatasetFingerprint fingerprint;
};

inline json common_config_echo(const ExperimentConfig& cfg) {
  json data;
  if (cfg.oulad_dir) data["oulad_dir"] = cfg.oulad_dir->string();
  if (cfg.synthetic) data["synthetic"] = detail::synthetic_to_json(*cfg.synthetic);
  return {{"schema_version", kConfigSchemaVersion},
          {"data", data},
          {"master_seed", cfg.master_seed},
          {"split",
           {{"test_fraction", cfg.split.test_fraction},
            {"stratified", cfg.split.stratified},
            {"seed", split_seed(cfg.master_seed)}}},
          {"features",
           {{"early_window_days", cfg.features.early_window_days},
            {"early_clicks_only", cfg.features.early_clicks_only},
            {"include_demographics", cfg.features.include_demographics}}},
          {"threshold", cfg.threshold}};
}

/// Runs one experiment on already prepared data.
inline ExperimentReport run_experiment(const PreparedData& data, const ExperimentConfig& cfg,
                                       ExperimentKind kind) {
  const auto start = std::chrono::steady_clock::now();
  ExperimentReport rep;
  rep.name = std::string(experiment_name(kind));
  rep.fingerprint = data.fingerprint;
  rep.config = common_config_echo(cfg);
  const auto family = experiment_family(kind);
  const std::uint64_t seed = experiment_seed(cfg.master_seed, kind);
  std::vector<double> scores;

  if (is_federated(kind)) {
    FederationConfig fc = kind == ExperimentKind::federated_lr_smote ? cfg.federated_lr_smote
                                                                     : cfg.federated_dnn;
    fc.model_family = family;
    fc.seed = seed;
    fc.threshold = cfg.threshold;
    rep.config["model_family"] = family_name(family);
    rep.config["federation"] = {{"rounds", fc.rounds},
                                {"participation", fc.participation},
                                {"local_train", detail::train_to_json(fc.local_train)},
                                {"smote", detail::smote_to_json(fc.smote)},
                                {"weight_by_post_smote_count", fc.weight_by_post_smote_count},
                                {"seed", fc.seed},
                                {"institutions", data.partitions.size()}};
    std::optional<std::filesystem::path> ckpt;
    if (cfg.checkpoints) ckpt = cfg.out_dir / ("checkpoints_" + rep.name);
    auto out = run_federation(data.partitions, data.test, fc, ckpt);
    rep.rounds = std::move(out.rounds);
    scores = std::move(out.final_scores);
    rep.rounds_file = "rounds_" + rep.name + ".csv";
  } else {
    const auto& settings =
        kind == ExperimentKind::centralized_lr ? cfg.centralized_lr : cfg.centralized_dnn;
    TrainConfig tc = settings.train;
    tc.shuffle_seed = client_shuffle_seed(seed, 1, std::string(kPooledInstitution));
    const LabeledDataset* train_set = &data.train;
    LabeledDataset balanced;
    if (settings.smote && family == ModelFamily::lr) {
      SmoteConfig sc = *settings.smote;
      sc.seed = client_smote_seed(seed, 1, std::string(kPooledInstitution));
      balanced = smote_oversample(data.train, sc);
      train_set = &balanced;
    }
    rep.config["model_family"] = family_name(family);
    rep.config["train"] = detail::train_to_json(tc);
    rep.config["train"]["shuffle_seed"] = tc.shuffle_seed;
    rep.config["smote"] = detail::smote_to_json(settings.smote);
    rep.config["init_seed"] = model_init_seed(seed);
    const auto init = init_params(family, data.train.feature_count(), model_init_seed(seed));
    auto result = train(family, *train_set, tc, init);
    rep.train_loss = std::move(result.epoch_loss);
    scores = predict_proba(family, result.params, data.test.X);
  }

  rep.metrics = evaluate_scores(data.test.y, scores, cfg.threshold);
  rep.roc = roc_curve(data.test.y, scores);
  rep.roc_file = "roc_" + rep.name + ".csv";
  rep.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return rep;
}

inline ExperimentReport run_experiment(const ExperimentConfig& cfg, ExperimentKind kind) {
  return run_experiment(prepare_data(cfg), cfg, kind);
}

// ---------------------------------------------------------------------------
// Reports

struct FeatureCorrelation {
  std::string feature;
  double pearson_r = 0.0;
  bool constant = false;  // r forced to 0

  bool operator==(const FeatureCorrelation&) const = default;
};

/// Pearson correlation of every feature column with the label.
inline std::vector<FeatureCorrelation> correlation_report(const LabeledDataset& ds) {
  if (ds.empty()) throw DataError("correlation_report: empty dataset");
  const double n = static_cast<double>(ds.size());
  double y_mean = 0.0;
  for (int v : ds.y) y_mean += v;
  y_mean /= n;
  double syy = 0.0;
  for (int v : ds.y) syy += (v - y_mean) * (v - y_mean);

  std::vector<FeatureCorrelation> out;
  for (std::size_t c = 0; c < ds.feature_count(); ++c) {
    double x_mean = 0.0;
    for (std::size_t r = 0; r < ds.size(); ++r) x_mean += ds.X(r, c);
    x_mean /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t r = 0; r < ds.size(); ++r) {
      const double dx = ds.X(r, c) - x_mean;
      sxx += dx * dx;
      sxy += dx * (ds.y[r] - y_mean);
    }
    FeatureCorrelation fc{ds.feature_names[c], 0.0, false};
    if (sxx <= 0.0 || syy <= 0.0) {
      fc.constant = true;
    } else {
      fc.pearson_r = std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
    }
    out.push_back(fc);
  }
  return out;
}

struct RunSummary {
  json common_config;
  DatasetFingerprint fingerprint;
  Diagnostics diagnostics;
  std::vector<FeatureCorrelation> correlations;
  std::vector<DemographicCount> demographics;
  std::vector<ExperimentReport> reports;
};

/// Prepares the data once and runs every configured experiment on it.
inline RunSummary run_matrix(const ExperimentConfig& cfg) {
  const auto data = prepare_data(cfg);
  RunSummary s;
  s.common_config = common_config_echo(cfg);
  s.fingerprint = data.fingerprint;
  s.diagnostics = data.diagnostics;
  s.correlations = correlation_report(data.dataset);
  s.demographics = data.demographics;
  if (cfg.parallel_experiments) {
    std::vector<std::future<ExperimentReport>> pending;
    for (auto k : cfg.experiments) {
      pending.push_back(std::async(std::launch::async, [&, k] { return run_experiment(data, cfg, k); }));
    }
    for (auto& f : pending) s.reports.push_back(f.get());
  } else {
    for (auto k : cfg.experiments) s.reports.push_back(run_experiment(data, cfg, k));
  }
  return s;
}

inline json metrics_to_json(const MetricBundle& m) {
  return {{"accuracy", m.accuracy},   {"precision", m.precision},
          {"recall", m.recall},       {"f1", m.f1},
          {"roc_auc", m.roc_auc},     {"threshold", m.threshold},
          {"support_pos", m.support_pos}, {"support_neg", m.support_neg},
          {"zero_division", m.zero_division}};
}

inline json fingerprint_to_json(const DatasetFingerprint& f) {
  return {{"rows", f.rows},
          {"positive_fraction", f.positive_fraction},
          {"feature_count", f.feature_count},
          {"train_rows", f.train_rows},
          {"test_rows", f.test_rows},
          {"institutions", f.institutions}};
}

/// summary.json contents. Wall-clock time is kept out of it (it goes to
/// timings.json) so the file is byte-stable for a fixed config and seed.
inline json summary_json(const RunSummary& s) {
  json diag = json::object();
  for (const auto& [table, reasons] : s.diagnostics.skipped) {
    for (const auto& [reason, n] : reasons) diag[table][reason] = n;
  }
  json reports = json::array();
  for (const auto& r : s.reports) {
    json e = {{"name", r.name},
              {"config", r.config},
              {"metrics", metrics_to_json(r.metrics)},
              {"roc_file", r.roc_file},
              {"dataset", fingerprint_to_json(r.fingerprint)}};
    e["rounds_file"] = r.rounds_file ? json(*r.rounds_file) : json(nullptr);
    if (!r.rounds.empty()) {
      json aucs = json::array();
      for (const auto& rr : r.rounds) aucs.push_back(rr.metrics.roc_auc);
      e["round_roc_auc"] = aucs;
    }
    if (!r.train_loss.empty()) e["final_train_loss"] = r.train_loss.back();
    reports.push_back(std::move(e));
  }
  return {{"schema_version", kConfigSchemaVersion},
          {"config", s.common_config},
          {"dataset", fingerprint_to_json(s.fingerprint)},
          {"skipped_rows", diag},
          {"warnings", s.diagnostics.warnings},
          {"experiments", reports}};
}

/// Writes summary.json, timings.json, roc_<name>.csv, rounds_<name>.csv,
/// correlations.csv and demographics.csv into out_dir.
inline std::vector<std::filesystem::path> emit_reports(const RunSummary& s,
                                                       const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir, ec);
  if (ec) throw IoError("cannot create output directory " + out_dir.string() + ": " + ec.message());
  std::vector<std::filesystem::path> written;

  auto write_json = [&](const std::filesystem::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << j.dump(2) << '\n';
    if (!out) throw IoError("write failed: " + path.string());
    written.push_back(path);
  };

  write_json(out_dir / "summary.json", summary_json(s));
  json timings = json::object();
  for (const auto& r : s.reports) timings[r.name] = r.wall_seconds;
  write_json(out_dir / "timings.json", timings);

  for (const auto& r : s.reports) {
    write_roc_csv(r.roc, out_dir / r.roc_file);
    written.push_back(out_dir / r.roc_file);
    if (r.rounds_file) {
      write_round_history(r.rounds, out_dir / *r.rounds_file);
      written.push_back(out_dir / *r.rounds_file);
    }
  }
  {
    csv::Writer w(out_dir / "correlations.csv");
    w.row("feature", "pearson_r", "constant");
    for (const auto& c : s.correlations) w.row(c.feature, c.pearson_r, c.constant ? 1 : 0);
    written.push_back(out_dir / "correlations.csv");
  }
  {
    csv::Writer w(out_dir / "demographics.csv");
    w.row("column", "category", "count", "percentage");
    for (const auto& d : s.demographics) w.row(d.column, d.category, d.count, d.percentage);
    written.push_back(out_dir / "demographics.csv");
  }
  return written;
}

}  // namespace fedrisk
