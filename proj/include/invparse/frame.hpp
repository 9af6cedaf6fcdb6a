#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

namespace invparse {

/// Node kinds in a bracketed frame. `Pointer` nodes only occur in
/// index-form frames, where the opening label is an inventory index.
enum class NodeKind { Intent, Slot, Token, Pointer };

struct FrameNode {
  NodeKind kind = NodeKind::Token;
  std::string label;  // `IN:NAME`, `SL:NAME`, or a decimal index; empty for tokens
  std::string text;   // utterance token; empty for internal nodes
  std::vector<FrameNode> children;

  static FrameNode token(std::string text);
  static FrameNode intent(std::string name, std::vector<FrameNode> children = {});
  static FrameNode slot(std::string name, std::vector<FrameNode> children = {});
  static FrameNode pointer(int index, std::vector<FrameNode> children = {});

  bool is_internal() const { return kind != NodeKind::Token; }
  bool operator==(const FrameNode&) const = default;
};

struct Frame {
  FrameNode root;
  bool operator==(const Frame&) const = default;
};

enum class IssueCode {
  RootNotIntent,
  SlotInSlot,
  TokenHasChildren,
  LabelMissing,
  BadLabelPrefix,
  IntentInIntent,
  UnexpectedPointer,
  TextOnInternal,
};

struct ValidationIssue {
  IssueCode code;
  std::vector<std::size_t> path;  // child indices from the root
  std::string message;
};

struct ValidationReport {
  std::vector<ValidationIssue> issues;
  bool ok() const { return issues.empty(); }
};

std::string_view to_string(IssueCode code);

/// Split on ASCII whitespace.
std::vector<std::string> split_whitespace(std::string_view text);

/// Parses a label-form frame such as `[IN:CREATE_ALARM [SL:DATE_TIME 6pm ] ]`.
/// Strict: malformed input throws `Error`.
Frame parse_frame(std::string_view text);

/// Parses an index-form frame such as `[ 1 [ 4 6pm ] ]`.
Frame parse_index_frame(std::string_view text);

std::string serialize_frame(const Frame& frame);
std::vector<std::string> frame_tokens(const Frame& frame);

ValidationReport validate_frame(const Frame& frame);

/// True iff some slot has an intent child.
bool is_nested(const Frame& frame);

/// Pre-order intent/slot labels, duplicates preserved.
std::vector<std::string> ontology_tokens(const Frame& frame);

/// Utterance tokens in leaf order.
std::vector<std::string> leaf_tokens(const Frame& frame);

std::string to_lower(std::string_view text);
std::string normalize_whitespace(std::string_view text);

}  // namespace invparse
