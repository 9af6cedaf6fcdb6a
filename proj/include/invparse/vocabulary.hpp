#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "invparse/dataset.hpp"

namespace invparse {

/// Token <-> id map with a fixed reserved prefix:
/// `<pad> <s> </s> <unk> <sep> [ ] | intent slot 1 .. max_index`, then
/// lowercased corpus words, then (copy-generate only) ontology-label
/// tokens such as `[IN:CREATE_ALARM`.
class Vocabulary {
 public:
  static constexpr int kPad = 0;
  static constexpr int kBos = 1;
  static constexpr int kEos = 2;
  static constexpr int kUnk = 3;
  static constexpr int kSep = 4;
  static constexpr int kOpen = 5;
  static constexpr int kClose = 6;
  static constexpr int kBar = 7;
  static constexpr int kIntent = 8;
  static constexpr int kSlot = 9;
  static constexpr int kFirstIndex = 10;

  Vocabulary() = default;

  /// Reserved tokens plus the given words (lowercased, deduplicated, sorted).
  static Vocabulary build(const std::vector<std::string>& words, int max_index);
  static Vocabulary from_tokens(std::vector<std::string> tokens, int max_index);

  int max_index() const { return max_index_; }
  int size() const { return static_cast<int>(tokens_.size()); }
  const std::vector<std::string>& tokens() const { return tokens_; }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }

  std::optional<int> find(std::string_view token) const;
  /// Exact lookup falling back to the lowercased form, then `<unk>`.
  int id(std::string_view token) const;
  int index_id(int index) const;

  /// Appends a token; returns its id (existing id if already present).
  int add(const std::string& token);

  bool is_label_token(int id) const;
  std::size_t label_token_count() const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_ && max_index_ == other.max_index_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int max_index_ = 0;
};

/// Every lowercased word a corpus can put on either side of the model:
/// utterance tokens, frame leaves, and label span words.
std::vector<std::string> corpus_words(const Dataset& corpus);

/// `[` + raw label, the single decoder token a copy-generate parser emits.
std::string label_token(const std::string& raw_label);

}  // namespace invparse
