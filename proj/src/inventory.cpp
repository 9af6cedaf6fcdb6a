#include "invparse/inventory.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "invparse/error.hpp"

namespace invparse {

std::string_view to_string(LabelKind kind) { return kind == LabelKind::Intent ? "intent" : "slot"; }

std::string_view to_string(InventoryVariant variant) {
  switch (variant) {
    case InventoryVariant::IndexOnly: return "index";
    case InventoryVariant::IndexType: return "index_type";
    case InventoryVariant::IndexTypeSpan: return "index_type_span";
  }
  return "unknown";
}

InventoryVariant parse_variant(std::string_view name) {
  if (name == "index") return InventoryVariant::IndexOnly;
  if (name == "index_type") return InventoryVariant::IndexType;
  if (name == "index_type_span") return InventoryVariant::IndexTypeSpan;
  throw Error(ErrorKind::InvalidConfig, "unknown inventory variant '" + std::string(name) +
                                            "' (expected index, index_type or index_type_span)");
}

OntologyLabel OntologyLabel::parse(std::string_view raw) {
  OntologyLabel label;
  if (raw.starts_with("IN:")) {
    label.kind = LabelKind::Intent;
  } else if (raw.starts_with("SL:")) {
    label.kind = LabelKind::Slot;
  } else {
    throw Error(ErrorKind::MalformedLabel, "label '" + std::string(raw) + "' lacks an IN:/SL: prefix");
  }
  std::string_view name = raw.substr(3);
  const bool has_word = std::any_of(name.begin(), name.end(), [](char c) { return c != '_'; });
  const bool has_space = std::any_of(name.begin(), name.end(),
                                     [](char c) { return std::isspace(static_cast<unsigned char>(c)); });
  if (!has_word || has_space) {
    throw Error(ErrorKind::MalformedLabel, "label '" + std::string(raw) + "' has no usable name");
  }
  label.raw = std::string(raw);
  return label;
}

std::string derive_span(const OntologyLabel& label) {
  std::string name = OntologyLabel::parse(label.raw).raw.substr(3);
  std::replace(name.begin(), name.end(), '_', ' ');
  return to_lower(normalize_whitespace(name));
}

Inventory::Inventory(std::string domain, std::vector<InventoryComponent> components)
    : domain_(std::move(domain)), components_(std::move(components)) {
  for (std::size_t i = 0; i < components_.size(); ++i) {
    const auto& c = components_[i];
    if (c.index != static_cast<int>(i) + 1) {
      throw Error(ErrorKind::InvalidConfig, "inventory indices must run 1..m in order");
    }
    if (!by_label_.emplace(c.label.raw, c.index).second) {
      throw Error(ErrorKind::DuplicateLabel, "duplicate label '" + c.label.raw + "'");
    }
  }
}

std::optional<int> Inventory::index_of(std::string_view raw_label) const {
  auto it = by_label_.find(raw_label);
  if (it == by_label_.end()) return std::nullopt;
  return it->second;
}

const InventoryComponent* Inventory::at(int index) const {
  if (index < 1 || index > static_cast<int>(components_.size())) return nullptr;
  return &components_[static_cast<std::size_t>(index - 1)];
}

Inventory build_inventory(std::string domain, const std::vector<OntologyLabel>& ontology) {
  if (ontology.empty()) throw Error(ErrorKind::EmptyOntology, "ontology for '" + domain + "' is empty");
  std::vector<OntologyLabel> sorted;
  sorted.reserve(ontology.size());
  for (const auto& l : ontology) sorted.push_back(OntologyLabel::parse(l.raw));
  std::sort(sorted.begin(), sorted.end(), [](const OntologyLabel& a, const OntologyLabel& b) {
    if (a.kind != b.kind) return a.kind == LabelKind::Intent;
    return a.raw < b.raw;
  });
  for (std::size_t i = 1; i < sorted.size(); ++i) {
    if (sorted[i].raw == sorted[i - 1].raw) {
      throw Error(ErrorKind::DuplicateLabel, "duplicate label '" + sorted[i].raw + "'");
    }
  }
  std::vector<InventoryComponent> components;
  components.reserve(sorted.size());
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    components.push_back({static_cast<int>(i) + 1, sorted[i].kind, derive_span(sorted[i]), sorted[i]});
  }
  return Inventory(std::move(domain), std::move(components));
}

std::vector<std::string> linearize_tokens(const Inventory& inventory, InventoryVariant variant) {
  std::vector<std::string> out;
  for (const auto& c : inventory.components()) {
    out.emplace_back("[");
    out.push_back(std::to_string(c.index));
    if (variant == InventoryVariant::IndexOnly) continue;
    out.emplace_back("|");
    out.emplace_back(to_string(c.kind));
    if (variant == InventoryVariant::IndexType) continue;
    out.emplace_back("|");
    for (auto& word : split_whitespace(c.span)) out.push_back(std::move(word));
  }
  return out;
}

std::string linearize(const Inventory& inventory, InventoryVariant variant) {
  std::string out;
  for (const auto& tok : linearize_tokens(inventory, variant)) {
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

namespace {

FrameNode index_node(const FrameNode& node, const Inventory& inventory) {
  if (node.kind == NodeKind::Token) return node;
  if (node.kind == NodeKind::Pointer) {
    throw Error(ErrorKind::UnknownLabel, "frame is already in index form");
  }
  auto index = inventory.index_of(node.label);
  if (!index) {
    throw Error(ErrorKind::UnknownLabel,
                "label '" + node.label + "' is not in the inventory of domain '" + inventory.domain() + "'");
  }
  FrameNode out = FrameNode::pointer(*index);
  out.children.reserve(node.children.size());
  for (const auto& child : node.children) out.children.push_back(index_node(child, inventory));
  return out;
}

FrameNode label_node(const FrameNode& node, const Inventory& inventory) {
  if (node.kind == NodeKind::Token) return node;
  if (node.kind != NodeKind::Pointer) {
    throw Error(ErrorKind::UnknownIndex, "label node '" + node.label + "' in an index-form frame");
  }
  int index = 0;
  try {
    index = std::stoi(node.label);
  } catch (const std::exception&) {
    throw Error(ErrorKind::UnknownIndex, "UnknownIndex(" + node.label + ")");
  }
  const InventoryComponent* c = inventory.at(index);
  if (c == nullptr) throw Error(ErrorKind::UnknownIndex, "UnknownIndex(" + node.label + ")");
  FrameNode out;
  out.kind = c->kind == LabelKind::Intent ? NodeKind::Intent : NodeKind::Slot;
  out.label = c->label.raw;
  out.children.reserve(node.children.size());
  for (const auto& child : node.children) out.children.push_back(label_node(child, inventory));
  return out;
}

}  // namespace

Frame to_index_frame(const Frame& frame, const Inventory& inventory) {
  return Frame{index_node(frame.root, inventory)};
}

Frame from_index_frame(const Frame& frame, const Inventory& inventory) {
  return Frame{label_node(frame.root, inventory)};
}

std::string inventory_tsv(const Inventory& inventory) {
  std::ostringstream os;
  os << "index\ttype\tspan\traw_label\n";
  for (const auto& c : inventory.components()) {
    os << c.index << '\t' << to_string(c.kind) << '\t' << c.span << '\t' << c.label.raw << '\n';
  }
  return os.str();
}

}  // namespace invparse
