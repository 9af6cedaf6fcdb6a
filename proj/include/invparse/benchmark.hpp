#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "invparse/dataset.hpp"

namespace invparse {

struct SpisConfig {
  int k = 1;
  std::uint64_t seed = 0;
};

/// Samples-per-intent-and-slot subsampling. After a seeded Fisher-Yates
/// shuffle, a sample is kept iff one of its ontology tokens is still
/// below `k` occurrences in the subset; keeping it adds all of its token
/// occurrences to the counters. Output is in scan order.
Dataset spis_subsample(const Dataset& dataset, const SpisConfig& config);

/// The scan alone, over samples already in scan order.
Dataset spis_scan(const Dataset& ordered, int k);

struct Scenario {
  std::string target_domain;
  Dataset source;                        // every other domain
  Dataset target_test;                   // held out for evaluation; may be empty
  std::map<int, Dataset> target_subsets; // k -> SPIS subset of the target pool
};

struct ScenarioOptions {
  std::vector<int> ks{1, 2, 5, 10};
  std::uint64_t seed = 0;
  /// Fraction of each target domain held out as the test split before
  /// SPIS sampling runs on the remainder.
  double test_fraction = 0.0;
};

/// Leave-one-out scenarios, one per domain in order of first appearance.
std::vector<Scenario> make_scenarios(const Dataset& dataset, const ScenarioOptions& options);
std::vector<Scenario> make_scenarios(const Dataset& dataset, const std::vector<int>& ks, std::uint64_t seed);

/// Table-2 shaped summary: `domain \t source \t <k>... \t test`.
std::string manifest_summary(const std::vector<Scenario>& scenarios, const std::vector<int>& ks);

/// Writes `<dir>/<domain>/{source.tsv,target_<k>spis.tsv,target_test.tsv}`,
/// `<dir>/summary.tsv` and `<dir>/manifest.json`.
void write_manifest(const std::vector<Scenario>& scenarios, const std::filesystem::path& dir,
                    const ScenarioOptions& options);
void write_manifest(const std::vector<Scenario>& scenarios, const std::filesystem::path& dir);

struct Manifest {
  ScenarioOptions options;
  std::vector<Scenario> scenarios;
};

Manifest load_manifest(const std::filesystem::path& dir);

}  // namespace invparse
