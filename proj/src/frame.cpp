#include "invparse/frame.hpp"

#include <cctype>
#include <charconv>

#include "invparse/error.hpp"

namespace invparse {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::UnbalancedBrackets: return "UnbalancedBrackets";
    case ErrorKind::EmptyFrame: return "EmptyFrame";
    case ErrorKind::RootNotIntent: return "RootNotIntent";
    case ErrorKind::LabelMissing: return "LabelMissing";
    case ErrorKind::MalformedLabel: return "MalformedLabel";
    case ErrorKind::EmptyOntology: return "EmptyOntology";
    case ErrorKind::DuplicateLabel: return "DuplicateLabel";
    case ErrorKind::UnknownLabel: return "UnknownLabel";
    case ErrorKind::UnknownIndex: return "UnknownIndex";
    case ErrorKind::Io: return "Io";
    case ErrorKind::BadFieldCount: return "BadFieldCount";
    case ErrorKind::FrameParse: return "FrameParse";
    case ErrorKind::SingleDomainDataset: return "SingleDomainDataset";
    case ErrorKind::SourceTooLong: return "SourceTooLong";
    case ErrorKind::TargetTooLong: return "TargetTooLong";
    case ErrorKind::ShapeMismatch: return "ShapeMismatch";
    case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
    case ErrorKind::InvalidConfig: return "InvalidConfig";
    case ErrorKind::InvalidSpec: return "InvalidSpec";
    case ErrorKind::LengthMismatch: return "LengthMismatch";
    case ErrorKind::UnknownDomain: return "UnknownDomain";
  }
  return "Unknown";
}

std::string_view to_string(IssueCode code) {
  switch (code) {
    case IssueCode::RootNotIntent: return "RootNotIntent";
    case IssueCode::SlotInSlot: return "SlotInSlot";
    case IssueCode::TokenHasChildren: return "TokenHasChildren";
    case IssueCode::LabelMissing: return "LabelMissing";
    case IssueCode::BadLabelPrefix: return "BadLabelPrefix";
    case IssueCode::IntentInIntent: return "IntentInIntent";
    case IssueCode::UnexpectedPointer: return "UnexpectedPointer";
    case IssueCode::TextOnInternal: return "TextOnInternal";
  }
  return "Unknown";
}

FrameNode FrameNode::token(std::string text) {
  FrameNode n;
  n.kind = NodeKind::Token;
  n.text = std::move(text);
  return n;
}

FrameNode FrameNode::intent(std::string name, std::vector<FrameNode> children) {
  FrameNode n;
  n.kind = NodeKind::Intent;
  n.label = "IN:" + name;
  n.children = std::move(children);
  return n;
}

FrameNode FrameNode::slot(std::string name, std::vector<FrameNode> children) {
  FrameNode n;
  n.kind = NodeKind::Slot;
  n.label = "SL:" + name;
  n.children = std::move(children);
  return n;
}

FrameNode FrameNode::pointer(int index, std::vector<FrameNode> children) {
  FrameNode n;
  n.kind = NodeKind::Pointer;
  n.label = std::to_string(index);
  n.children = std::move(children);
  return n;
}

std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t j = i;
    while (j < text.size() && !std::isspace(static_cast<unsigned char>(text[j]))) ++j;
    if (j > i) out.emplace_back(text.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string to_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  for (const auto& tok : split_whitespace(text)) {
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

namespace {

enum class Form { Label, Index };

bool parse_positive_int(std::string_view s, int& value) {
  if (s.empty() || s.front() == '-' || s.front() == '+') return false;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  return ec == std::errc() && ptr == s.data() + s.size() && value >= 1;
}

// Recursive descent over the token stream; grammar is LL(1) on the
// opening/closing tokens.
class FrameParser {
 public:
  FrameParser(std::vector<std::string> tokens, Form form)
      : tokens_(std::move(tokens)), form_(form) {}

  Frame parse() {
    if (tokens_.empty()) throw Error(ErrorKind::EmptyFrame, "empty frame");
    const auto& first = tokens_.front();
    if (first == "]") throw Error(ErrorKind::UnbalancedBrackets, "frame starts with ']'");
    if (first.front() != '[') {
      throw Error(ErrorKind::RootNotIntent, "frame root is an utterance token '" + first + "'");
    }
    Frame frame{parse_node()};
    if (form_ == Form::Label && frame.root.kind != NodeKind::Intent) {
      throw Error(ErrorKind::RootNotIntent, "frame root '" + frame.root.label + "' is not an intent");
    }
    if (pos_ != tokens_.size()) {
      throw Error(ErrorKind::UnbalancedBrackets,
                  "unexpected tokens after the root closes at position " + std::to_string(pos_));
    }
    return frame;
  }

 private:
  FrameNode parse_node() {
    FrameNode node = open_node();
    while (true) {
      if (pos_ >= tokens_.size()) {
        throw Error(ErrorKind::UnbalancedBrackets, "missing ']' for '" + node.label + "'");
      }
      const std::string& tok = tokens_[pos_];
      if (tok == "]") {
        ++pos_;
        return node;
      }
      if (tok.front() == '[') {
        node.children.push_back(parse_node());
      } else {
        node.children.push_back(FrameNode::token(tok));
        ++pos_;
      }
    }
  }

  FrameNode open_node() {
    const std::string& tok = tokens_[pos_++];
    FrameNode node;
    if (form_ == Form::Index) {
      if (tok != "[") throw Error(ErrorKind::MalformedLabel, "expected '[' in index frame, got '" + tok + "'");
      int index = 0;
      if (pos_ >= tokens_.size() || !parse_positive_int(tokens_[pos_], index)) {
        throw Error(ErrorKind::LabelMissing, "'[' not followed by an index at position " +
                                                 std::to_string(pos_));
      }
      ++pos_;
      return FrameNode::pointer(index);
    }
    std::string_view label = std::string_view(tok).substr(1);
    if (label.empty()) {
      throw Error(ErrorKind::LabelMissing, "'[' without a label at position " + std::to_string(pos_ - 1));
    }
    if (label.starts_with("IN:") && label.size() > 3) {
      node.kind = NodeKind::Intent;
    } else if (label.starts_with("SL:") && label.size() > 3) {
      node.kind = NodeKind::Slot;
    } else {
      throw Error(ErrorKind::MalformedLabel, "label '" + std::string(label) + "' lacks an IN:/SL: prefix");
    }
    node.label = std::string(label);
    return node;
  }

  std::vector<std::string> tokens_;
  Form form_;
  std::size_t pos_ = 0;
};

void serialize_into(const FrameNode& node, std::vector<std::string>& out) {
  switch (node.kind) {
    case NodeKind::Token:
      out.push_back(node.text);
      return;
    case NodeKind::Pointer:
      out.emplace_back("[");
      out.push_back(node.label);
      break;
    case NodeKind::Intent:
    case NodeKind::Slot:
      out.push_back("[" + node.label);
      break;
  }
  for (const auto& child : node.children) serialize_into(child, out);
  out.emplace_back("]");
}

void validate_node(const FrameNode& node, const FrameNode* parent, std::vector<std::size_t>& path,
                   ValidationReport& report) {
  auto add = [&](IssueCode code, std::string message) {
    report.issues.push_back({code, path, std::move(message)});
  };
  switch (node.kind) {
    case NodeKind::Token:
      if (!node.children.empty()) add(IssueCode::TokenHasChildren, "token '" + node.text + "' has children");
      break;
    case NodeKind::Pointer:
      add(IssueCode::UnexpectedPointer, "index node '" + node.label + "' in a label-form frame");
      break;
    case NodeKind::Intent:
    case NodeKind::Slot: {
      const bool intent = node.kind == NodeKind::Intent;
      const std::string_view prefix = intent ? "IN:" : "SL:";
      if (node.label.size() <= 3) {
        if (node.label.empty() || node.label.starts_with(prefix)) {
          add(IssueCode::LabelMissing, "internal node without a label");
        } else {
          add(IssueCode::BadLabelPrefix, "label '" + node.label + "' has the wrong prefix");
        }
      } else if (!node.label.starts_with(prefix)) {
        add(IssueCode::BadLabelPrefix, "label '" + node.label + "' has the wrong prefix");
      }
      if (!node.text.empty()) add(IssueCode::TextOnInternal, "internal node carries text");
      if (parent != nullptr && parent->kind == node.kind) {
        add(intent ? IssueCode::IntentInIntent : IssueCode::SlotInSlot,
            node.label + " nested directly in " + parent->label);
      }
      break;
    }
  }
  for (std::size_t i = 0; i < node.children.size(); ++i) {
    path.push_back(i);
    validate_node(node.children[i], &node, path, report);
    path.pop_back();
  }
}

bool nested_below(const FrameNode& node) {
  for (const auto& child : node.children) {
    if (node.kind == NodeKind::Slot && child.kind == NodeKind::Intent) return true;
    if (nested_below(child)) return true;
  }
  return false;
}

void collect_labels(const FrameNode& node, std::vector<std::string>& out) {
  if (node.kind == NodeKind::Intent || node.kind == NodeKind::Slot) out.push_back(node.label);
  for (const auto& child : node.children) collect_labels(child, out);
}

void collect_leaves(const FrameNode& node, std::vector<std::string>& out) {
  if (node.kind == NodeKind::Token) out.push_back(node.text);
  for (const auto& child : node.children) collect_leaves(child, out);
}

}  // namespace

Frame parse_frame(std::string_view text) {
  return FrameParser(split_whitespace(text), Form::Label).parse();
}

Frame parse_index_frame(std::string_view text) {
  return FrameParser(split_whitespace(text), Form::Index).parse();
}

std::vector<std::string> frame_tokens(const Frame& frame) {
  std::vector<std::string> out;
  serialize_into(frame.root, out);
  return out;
}

std::string serialize_frame(const Frame& frame) {
  std::string out;
  for (const auto& tok : frame_tokens(frame)) {
    if (!out.empty()) out += ' ';
    out += tok;
  }
  return out;
}

ValidationReport validate_frame(const Frame& frame) {
  ValidationReport report;
  if (frame.root.kind != NodeKind::Intent) {
    report.issues.push_back({IssueCode::RootNotIntent, {}, "frame root is not an intent"});
  }
  std::vector<std::size_t> path;
  validate_node(frame.root, nullptr, path, report);
  return report;
}

bool is_nested(const Frame& frame) { return nested_below(frame.root); }

std::vector<std::string> ontology_tokens(const Frame& frame) {
  std::vector<std::string> out;
  collect_labels(frame.root, out);
  return out;
}

std::vector<std::string> leaf_tokens(const Frame& frame) {
  std::vector<std::string> out;
  collect_leaves(frame.root, out);
  return out;
}

}  // namespace invparse
