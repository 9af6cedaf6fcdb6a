#pragma once

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "invparse/frame.hpp"
#include "invparse/inventory.hpp"

namespace invparse {

struct Sample {
  std::string domain;
  std::string utterance;
  Frame frame;

  bool operator==(const Sample&) const = default;
};

struct Dataset {
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  bool operator==(const Dataset&) const = default;
};

/// One sample per line: `domain \t utterance \t frame`. Errors carry the
/// 1-based line number.
Dataset load_dataset(const std::filesystem::path& path);
Dataset parse_dataset(const std::string& text);
void write_dataset(const Dataset& dataset, const std::filesystem::path& path);
std::string dataset_tsv(const Dataset& dataset);

/// Distinct intent/slot labels used by frames of `domain`.
std::vector<OntologyLabel> extract_ontology(const Dataset& dataset, const std::string& domain);

/// Domains in order of first appearance.
std::vector<std::string> domains(const Dataset& dataset);

Dataset filter_domain(const Dataset& dataset, const std::string& domain);

/// Inventory for every domain in the dataset.
InventoryMap build_inventories(const Dataset& dataset);

struct SampleWarning {
  std::size_t index;
  std::string message;
};

/// Soft check that every frame leaf occurs in the utterance (case-insensitive).
std::vector<SampleWarning> check_leaf_consistency(const Dataset& dataset);

}  // namespace invparse
