// fedrisk: runs the centralized / federated at-risk prediction matrix and
// writes JSON + CSV reports.
//
//   fedrisk --synthetic --out-dir out
//   fedrisk --data-dir /data/oulad --experiment centralized_lr --experiment federated_dnn
//   fedrisk --config configs/synthetic.json --seed 7
//   fedrisk synth --out-dir corpus --modules 7 --students 300 --signal 1.5

#include <cstdint>
#include <iomanip>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "fedrisk/fedrisk.hpp"

namespace {

int exit_code(fedrisk::ErrorCategory c) {
  switch (c) {
    case fedrisk::ErrorCategory::config: return 2;
    case fedrisk::ErrorCategory::data: return 3;
    case fedrisk::ErrorCategory::io: return 4;
    case fedrisk::ErrorCategory::training: return 5;
    case fedrisk::ErrorCategory::internal: return 6;
  }
  return 1;
}

void print_summary(const fedrisk::RunSummary& s, std::ostream& os) {
  const auto& f = s.fingerprint;
  os << "dataset: " << f.rows << " rows, " << f.feature_count << " features, positive fraction "
     << std::fixed << std::setprecision(4) << f.positive_fraction << ", " << f.institutions
     << " institutions (train " << f.train_rows << ", test " << f.test_rows << ")\n";
  os << std::left << std::setw(20) << "experiment" << std::right << std::setw(10) << "roc_auc"
     << std::setw(10) << "accuracy" << std::setw(10) << "precision" << std::setw(10) << "recall"
     << std::setw(10) << "f1" << std::setw(10) << "seconds" << '\n';
  for (const auto& r : s.reports) {
    const auto& m = r.metrics;
    os << std::left << std::setw(20) << r.name << std::right << std::setprecision(4)
       << std::setw(10) << m.roc_auc << std::setw(10) << m.accuracy << std::setw(10)
       << m.precision << std::setw(10) << m.recall << std::setw(10) << m.f1
       << std::setprecision(2) << std::setw(10) << r.wall_seconds << '\n';
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Centralized vs federated at-risk student prediction"};
  app.require_subcommand(0, 1);

  std::optional<std::string> config_path, data_dir, out_dir;
  std::vector<std::string> experiments;
  std::optional<std::uint64_t> seed;
  bool synthetic = false;
  bool quiet = false;
  app.add_option("--config", config_path, "JSON config file");
  app.add_option("--data-dir", data_dir, "directory holding the five OULAD CSV files");
  app.add_option("--out-dir", out_dir, "report output directory");
  app.add_option("--experiment", experiments,
                 "centralized_lr | centralized_dnn | federated_lr_smote | federated_dnn "
                 "(repeatable; default all four)");
  app.add_option("--seed", seed, "master seed");
  app.add_flag("--synthetic", synthetic, "use the built-in synthetic corpus");
  app.add_flag("-q,--quiet", quiet, "suppress the metrics table");

  auto* synth = app.add_subcommand("synth", "write a synthetic OULAD-format corpus");
  fedrisk::SyntheticCorpusConfig sc;
  std::string synth_dir;
  synth->add_option("--out-dir", synth_dir, "destination directory")->required();
  synth->add_option("--modules", sc.n_modules, "number of course modules");
  synth->add_option("--students", sc.students_per_module, "students per module");
  synth->add_option("--fail-rate", sc.fail_rate, "Fail fraction among non-withdrawn students");
  synth->add_option("--signal", sc.signal_strength, "class separation in standard deviations");
  synth->add_option("--seed", sc.seed, "corpus seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (synth->parsed()) {
      fedrisk::write_oulad(fedrisk::generate_synthetic_corpus(sc), synth_dir);
      std::cout << "wrote synthetic corpus to " << synth_dir << '\n';
      return 0;
    }

    fedrisk::ExperimentConfig cfg;
    if (config_path) cfg = fedrisk::load_config(*config_path);
    if (seed) cfg.master_seed = *seed;
    if (data_dir) {
      cfg.oulad_dir = *data_dir;
      cfg.synthetic.reset();
    }
    if (synthetic) {
      fedrisk::SyntheticCorpusConfig corpus = cfg.synthetic.value_or(fedrisk::SyntheticCorpusConfig{});
      if (!cfg.synthetic) corpus.seed = cfg.master_seed;
      cfg.synthetic = corpus;
      cfg.oulad_dir.reset();
    }
    if (data_dir && synthetic) throw fedrisk::ConfigError("--data-dir and --synthetic are exclusive");
    if (!experiments.empty()) {
      cfg.experiments.clear();
      for (const auto& e : experiments) cfg.experiments.push_back(fedrisk::parse_experiment(e));
    }
    if (out_dir) cfg.out_dir = *out_dir;
    cfg.validate();

    const auto summary = fedrisk::run_matrix(cfg);
    fedrisk::emit_reports(summary, cfg.out_dir);
    if (!quiet) {
      print_summary(summary, std::cout);
      std::cout << "reports written to " << cfg.out_dir.string() << '\n';
    }
    return 0;
  } catch (const fedrisk::Error& e) {
    std::cerr << "error[" << fedrisk::category_name(e.category()) << "]: " << e.what() << '\n';
    return exit_code(e.category());
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << '\n';
    return 1;
  }
}
