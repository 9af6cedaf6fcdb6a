#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "invparse/benchmark.hpp"
#include "invparse/evaluate.hpp"
#include "invparse/model.hpp"

namespace invparse {

/// Everything one experiment needs. Loadable from a JSON file whose keys
/// mirror the field names; absent keys keep the defaults below.
struct ExperimentConfig {
  std::string corpus;                     // dataset TSV; empty means the built-in suite
  std::size_t samples_per_domain = 2000;  // built-in suite only
  std::uint64_t corpus_seed = 1;          // built-in suite only
  std::vector<std::string> scenarios;     // target domains; empty means all
  std::vector<int> ks{1, 2, 5, 10};
  double test_fraction = 0.2;
  std::uint64_t split_seed = 1;
  std::size_t max_test_samples = 300;  // evaluate at most this many per target; 0 means all
  std::vector<ParserMode> modes{ParserMode::InventoryPointer, ParserMode::CopyGenerate};
  std::string ablation_domain;  // empty means the first scenario
  std::vector<InventoryVariant> ablation_variants{InventoryVariant::IndexOnly, InventoryVariant::IndexType,
                                                  InventoryVariant::IndexTypeSpan};
  ModelConfig model;
  TrainConfig source_train;
  TrainConfig target_train;
  std::vector<std::uint64_t> seeds{1, 2, 3};
  std::string out = "experiment";

  ExperimentConfig();
  void validate() const;
};

ExperimentConfig parse_experiment_config(const std::string& json_text);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);
std::string experiment_config_json(const ExperimentConfig& config);

/// The configured corpus file, or the built-in suite.
Dataset load_corpus(const ExperimentConfig& config);

/// What target-stage adaptation did to the model.
struct AdaptationRecord {
  std::string domain;
  int k = 0;
  std::string mode;
  std::uint64_t seed = 0;
  std::size_t vocab_before = 0;
  std::size_t vocab_after = 0;
  std::size_t rows_added = 0;
  std::size_t unseen_labels = 0;     // target labels absent from the vocabulary before adaptation
  std::size_t shapes_changed = 0;    // tensors whose shape differs after adaptation
  double initial_target_loss = 0.0;  // target subset loss before the target stage
};

struct ExperimentResult {
  std::vector<RunResult> runs;
  std::vector<AdaptationRecord> adaptations;
  std::vector<DomainProfile> profiles;
  AggregateReport aggregate;
  /// Predicted frame lines per run, aligned with `runs` and `gold`.
  std::vector<std::vector<std::string>> predictions;
  std::vector<Dataset> gold;
};

using ProgressFn = std::function<void(const std::string&)>;

/// Source stage then target stage for every (scenario, mode, seed, k),
/// scored on each target's held-out test split. The source stage is
/// shared across k.
ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& corpus,
                                const ProgressFn& progress = {});

/// Inventory-pointer runs on one domain, one per inventory variant. The
/// run mode field carries the variant name.
ExperimentResult run_ablation(const ExperimentConfig& config, const Dataset& corpus, const ProgressFn& progress = {});

/// Rows per mode (or variant), columns per k.
std::string mode_table(const AggregateReport& report, const std::string& domain);

/// Writes config.json, aggregate.txt, aggregate.jsonl, runs.jsonl,
/// adaptation.jsonl, profile.tsv and per-run prediction files.
void write_experiment(const ExperimentResult& result, const ExperimentConfig& config,
                      const std::filesystem::path& dir);

}  // namespace invparse
