#include "invparse/dataset.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "invparse/error.hpp"

namespace invparse {

Dataset parse_dataset(const std::string& text) {
  Dataset ds;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string_view line(text.data() + start, end - start);
    start = end + 1;
    ++line_no;
    if (line.empty()) continue;

    std::vector<std::string_view> fields;
    std::size_t f = 0;
    while (true) {
      std::size_t tab = line.find('\t', f);
      fields.push_back(line.substr(f, tab == std::string_view::npos ? std::string_view::npos : tab - f));
      if (tab == std::string_view::npos) break;
      f = tab + 1;
    }
    if (fields.size() != 3) {
      throw Error(ErrorKind::BadFieldCount, "line " + std::to_string(line_no) + ": expected 3 tab-separated fields, got " +
                                                std::to_string(fields.size()));
    }
    Sample s;
    s.domain = std::string(fields[0]);
    s.utterance = std::string(fields[1]);
    try {
      s.frame = parse_frame(fields[2]);
    } catch (const Error& e) {
      throw Error(ErrorKind::FrameParse, "line " + std::to_string(line_no) + ": " +
                                             std::string(e.category()) + ": " + e.what());
    }
    ds.samples.push_back(std::move(s));
  }
  return ds;
}

Dataset load_dataset(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_dataset(buf.str());
}

std::string dataset_tsv(const Dataset& dataset) {
  std::string out;
  for (const auto& s : dataset.samples) {
    out += s.domain;
    out += '\t';
    out += s.utterance;
    out += '\t';
    out += serialize_frame(s.frame);
    out += '\n';
  }
  return out;
}

void write_dataset(const Dataset& dataset, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << dataset_tsv(dataset);
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

std::vector<OntologyLabel> extract_ontology(const Dataset& dataset, const std::string& domain) {
  std::set<std::string> raw;
  for (const auto& s : dataset.samples) {
    if (s.domain != domain) continue;
    for (auto& t : ontology_tokens(s.frame)) raw.insert(std::move(t));
  }
  std::vector<OntologyLabel> out;
  out.reserve(raw.size());
  for (const auto& r : raw) out.push_back(OntologyLabel::parse(r));
  return out;
}

std::vector<std::string> domains(const Dataset& dataset) {
  std::vector<std::string> out;
  std::unordered_set<std::string> seen;
  for (const auto& s : dataset.samples) {
    if (seen.insert(s.domain).second) out.push_back(s.domain);
  }
  return out;
}

Dataset filter_domain(const Dataset& dataset, const std::string& domain) {
  Dataset out;
  for (const auto& s : dataset.samples) {
    if (s.domain == domain) out.samples.push_back(s);
  }
  return out;
}

InventoryMap build_inventories(const Dataset& dataset) {
  InventoryMap out;
  for (const auto& d : domains(dataset)) out.emplace(d, build_inventory(d, extract_ontology(dataset, d)));
  return out;
}

std::vector<SampleWarning> check_leaf_consistency(const Dataset& dataset) {
  std::vector<SampleWarning> out;
  for (std::size_t i = 0; i < dataset.samples.size(); ++i) {
    const auto& s = dataset.samples[i];
    std::unordered_set<std::string> words;
    for (const auto& w : split_whitespace(s.utterance)) words.insert(to_lower(w));
    for (const auto& leaf : leaf_tokens(s.frame)) {
      if (!words.contains(to_lower(leaf))) {
        out.push_back({i, "frame token '" + leaf + "' does not occur in the utterance"});
      }
    }
  }
  return out;
}

}  // namespace invparse
