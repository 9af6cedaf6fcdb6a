#include "invparse/vocabulary.hpp"

#include <algorithm>
#include <set>

#include "invparse/error.hpp"

namespace invparse {

namespace {

std::vector<std::string> reserved_tokens(int max_index) {
  std::vector<std::string> out{"<pad>", "<s>", "</s>", "<unk>", "<sep>", "[", "]", "|", "intent", "slot"};
  for (int i = 1; i <= max_index; ++i) out.push_back(std::to_string(i));
  return out;
}

}  // namespace

Vocabulary Vocabulary::build(const std::vector<std::string>& words, int max_index) {
  if (max_index < 1) throw Error(ErrorKind::InvalidConfig, "max_index must be >= 1");
  Vocabulary v;
  v.max_index_ = max_index;
  for (auto& t : reserved_tokens(max_index)) v.add(t);
  std::set<std::string> sorted;
  for (const auto& w : words) sorted.insert(to_lower(w));
  for (const auto& w : sorted) v.add(w);
  return v;
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens, int max_index) {
  const auto reserved = reserved_tokens(max_index);
  if (tokens.size() < reserved.size() || !std::equal(reserved.begin(), reserved.end(), tokens.begin())) {
    throw Error(ErrorKind::InvalidConfig, "vocabulary does not start with the reserved tokens");
  }
  Vocabulary v;
  v.max_index_ = max_index;
  for (auto& t : tokens) {
    if (v.find(t)) throw Error(ErrorKind::InvalidConfig, "duplicate vocabulary token '" + t + "'");
    v.add(t);
  }
  return v;
}

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

int Vocabulary::id(std::string_view token) const {
  if (auto found = find(token)) return *found;
  if (auto lowered = find(to_lower(token))) return *lowered;
  return kUnk;
}

int Vocabulary::index_id(int index) const {
  if (index < 1 || index > max_index_) {
    throw Error(ErrorKind::InvalidConfig, "index " + std::to_string(index) + " exceeds the reserved range 1.." +
                                              std::to_string(max_index_));
  }
  return kFirstIndex + index - 1;
}

int Vocabulary::add(const std::string& token) {
  auto [it, inserted] = ids_.emplace(token, static_cast<int>(tokens_.size()));
  if (inserted) tokens_.push_back(token);
  return it->second;
}

bool Vocabulary::is_label_token(int id) const {
  const auto& t = token(id);
  return t.starts_with("[IN:") || t.starts_with("[SL:");
}

std::size_t Vocabulary::label_token_count() const {
  std::size_t n = 0;
  for (int i = 0; i < size(); ++i) n += is_label_token(i) ? 1 : 0;
  return n;
}

std::vector<std::string> corpus_words(const Dataset& corpus) {
  std::set<std::string> words;
  for (const auto& s : corpus.samples) {
    for (const auto& w : split_whitespace(s.utterance)) words.insert(to_lower(w));
    for (const auto& w : leaf_tokens(s.frame)) words.insert(to_lower(w));
    for (const auto& label : ontology_tokens(s.frame)) {
      for (const auto& w : split_whitespace(derive_span(OntologyLabel::parse(label)))) words.insert(w);
    }
  }
  return {words.begin(), words.end()};
}

std::string label_token(const std::string& raw_label) { return "[" + raw_label; }

}  // namespace invparse
