#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "invparse/frame.hpp"

namespace invparse {

enum class LabelKind { Intent, Slot };

std::string_view to_string(LabelKind kind);

struct OntologyLabel {
  std::string raw;  // e.g. `SL:TIME_ZONE`
  LabelKind kind = LabelKind::Intent;

  /// Throws MalformedLabel unless `raw` carries an IN:/SL: prefix and a name.
  static OntologyLabel parse(std::string_view raw);

  auto operator<=>(const OntologyLabel&) const = default;
};

struct InventoryComponent {
  int index = 0;
  LabelKind kind = LabelKind::Intent;
  std::string span;
  OntologyLabel label;

  bool operator==(const InventoryComponent&) const = default;
};

enum class InventoryVariant { IndexOnly, IndexType, IndexTypeSpan };

std::string_view to_string(InventoryVariant variant);
InventoryVariant parse_variant(std::string_view name);

class Inventory {
 public:
  Inventory() = default;
  Inventory(std::string domain, std::vector<InventoryComponent> components);

  const std::string& domain() const { return domain_; }
  const std::vector<InventoryComponent>& components() const { return components_; }
  std::size_t size() const { return components_.size(); }

  std::optional<int> index_of(std::string_view raw_label) const;
  /// Component with index `i` (1-based), if present.
  const InventoryComponent* at(int index) const;

  bool operator==(const Inventory&) const = default;

 private:
  std::string domain_;
  std::vector<InventoryComponent> components_;
  std::map<std::string, int, std::less<>> by_label_;
};

using InventoryMap = std::map<std::string, Inventory, std::less<>>;

/// `SL:TIME_ZONE` -> "time zone".
std::string derive_span(const OntologyLabel& label);

/// Intents first, then slots; lexicographic by raw label within each
/// group; indices assigned 1..m.
Inventory build_inventory(std::string domain, const std::vector<OntologyLabel>& ontology);

std::vector<std::string> linearize_tokens(const Inventory& inventory, InventoryVariant variant);
std::string linearize(const Inventory& inventory, InventoryVariant variant);

Frame to_index_frame(const Frame& frame, const Inventory& inventory);
Frame from_index_frame(const Frame& frame, const Inventory& inventory);

/// TSV with header `index\ttype\tspan\traw_label`.
std::string inventory_tsv(const Inventory& inventory);

}  // namespace invparse
