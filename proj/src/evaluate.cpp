#include "invparse/evaluate.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

#include "json.hpp"

#include "invparse/error.hpp"
#include "invparse/rng.hpp"

namespace invparse {

std::string comparison_key(const Frame& frame) { return to_lower(normalize_whitespace(serialize_frame(frame))); }

EvalReport exact_match(const std::vector<Prediction>& predictions, const std::vector<Frame>& golds) {
  if (predictions.size() != golds.size())
    throw Error(ErrorKind::LengthMismatch, std::to_string(predictions.size()) + " predictions for " +
                                              std::to_string(golds.size()) + " gold frames");
  EvalReport report;
  report.n = golds.size();
  std::size_t matches = 0;
  for (std::size_t i = 0; i < golds.size(); ++i) {
    SampleResult r{i, predictions[i], golds[i], false};
    if (const auto* f = std::get_if<Frame>(&predictions[i])) r.match = comparison_key(*f) == comparison_key(golds[i]);
    matches += r.match ? 1 : 0;
    report.per_sample.push_back(std::move(r));
  }
  report.em = report.n == 0 ? 0.0 : static_cast<double>(matches) / static_cast<double>(report.n);
  return report;
}

AggregateReport aggregate(const std::vector<RunResult>& runs) {
  std::map<CellKey, std::vector<double>> grouped;
  for (const auto& r : runs) grouped[{r.domain, r.k, r.mode}].push_back(r.report.em);
  AggregateReport out;
  for (const auto& [key, ems] : grouped) {
    CellStats s;
    s.runs = ems.size();
    for (double e : ems) s.mean += e;
    s.mean /= static_cast<double>(s.runs);
    double ss = 0.0;
    for (double e : ems) ss += (e - s.mean) * (e - s.mean);
    s.std = std::sqrt(ss / static_cast<double>(s.runs));
    out.cells[key] = s;
  }
  return out;
}

namespace {

std::string percent(double v, int precision = 2) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(precision) << 100.0 * v;
  return os.str();
}

std::string pad(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

}  // namespace

std::string AggregateReport::table() const {
  std::vector<std::string> domain_rows;
  std::set<std::pair<std::string, int>> columns;  // (mode, k)
  for (const auto& [key, _] : cells) {
    const auto& [domain, k, mode] = key;
    if (std::find(domain_rows.begin(), domain_rows.end(), domain) == domain_rows.end()) domain_rows.push_back(domain);
    columns.insert({mode, k});
  }
  std::size_t w0 = 8;
  for (const auto& d : domain_rows) w0 = std::max(w0, d.size() + 2);
  const std::size_t w = 18;
  std::ostringstream os;
  os << pad("domain", w0);
  for (const auto& [mode, k] : columns) os << pad(mode + "@" + std::to_string(k), w);
  os << '\n';
  for (const auto& d : domain_rows) {
    os << pad(d, w0);
    for (const auto& [mode, k] : columns) {
      auto it = cells.find({d, k, mode});
      os << pad(it == cells.end() ? "-" : percent(it->second.mean) + " ± " + percent(it->second.std), w);
    }
    os << '\n';
  }
  // Mean over domains as a final row.
  if (domain_rows.size() > 1) {
    os << pad("mean", w0);
    for (const auto& [mode, k] : columns) {
      double sum = 0.0;
      std::size_t n = 0;
      for (const auto& d : domain_rows) {
        auto it = cells.find({d, k, mode});
        if (it != cells.end()) sum += it->second.mean, ++n;
      }
      os << pad(n == 0 ? "-" : percent(sum / static_cast<double>(n)), w);
    }
    os << '\n';
  }
  return os.str();
}

std::string AggregateReport::jsonl() const {
  std::string out;
  for (const auto& [key, s] : cells) {
    const auto& [domain, k, mode] = key;
    nlohmann::json j{{"domain", domain}, {"k", k}, {"mode", mode}, {"mean_em", s.mean}, {"std_em", s.std},
                     {"runs", s.runs}};
    out += j.dump() + '\n';
  }
  return out;
}

DomainProfile domain_profile(const Dataset& dataset, const std::string& domain) {
  std::size_t n = 0, nested = 0;
  for (const auto& s : dataset.samples) {
    if (s.domain != domain) continue;
    ++n;
    nested += is_nested(s.frame) ? 1 : 0;
  }
  if (n == 0) throw Error(ErrorKind::UnknownDomain, "no samples for domain '" + domain + "'");
  return {domain, static_cast<double>(nested) / static_cast<double>(n), extract_ontology(dataset, domain).size()};
}

std::string profile_table(const std::vector<DomainProfile>& profiles, const AggregateReport& report, int k) {
  std::set<std::string> modes;
  for (const auto& [key, _] : report.cells)
    if (std::get<1>(key) == k) modes.insert(std::get<2>(key));
  std::ostringstream os;
  os << "domain\tcompositionality_pct\tontology_labels";
  for (const auto& m : modes) os << "\tem_" << m << "@" << k;
  os << '\n';
  for (const auto& p : profiles) {
    os << p.domain << '\t' << percent(p.compositionality, 1) << '\t' << p.ontology_size;
    for (const auto& m : modes) {
      auto it = report.cells.find({p.domain, k, m});
      os << '\t' << (it == report.cells.end() ? std::string("-") : percent(it->second.mean));
    }
    os << '\n';
  }
  return os.str();
}

EditScript token_diff(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  const std::size_t n = a.size(), m = b.size();
  // dist[i][j]: insert/delete distance between a[:i] and b[:j].
  std::vector<std::vector<std::size_t>> dist(n + 1, std::vector<std::size_t>(m + 1));
  for (std::size_t i = 0; i <= n; ++i) dist[i][0] = i;
  for (std::size_t j = 0; j <= m; ++j) dist[0][j] = j;
  for (std::size_t i = 1; i <= n; ++i)
    for (std::size_t j = 1; j <= m; ++j)
      dist[i][j] = a[i - 1] == b[j - 1] ? dist[i - 1][j - 1] : 1 + std::min(dist[i - 1][j], dist[i][j - 1]);

  EditScript script;
  script.distance = dist[n][m];
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && a[i - 1] == b[j - 1] && dist[i][j] == dist[i - 1][j - 1]) {
      script.ops.push_back({EditKind::Keep, a[i - 1]});
      --i, --j;
    } else if (j > 0 && (i == 0 || dist[i][j] == dist[i][j - 1] + 1)) {
      script.ops.push_back({EditKind::Insert, b[j - 1]});
      --j;
    } else {
      script.ops.push_back({EditKind::Delete, a[i - 1]});
      --i;
    }
  }
  std::reverse(script.ops.begin(), script.ops.end());
  return script;
}

EditScript frame_diff(const Frame& prediction, const Frame& gold) {
  return token_diff(frame_tokens(prediction), frame_tokens(gold));
}

std::string EditScript::render() const {
  std::string out;
  for (const auto& op : ops) {
    if (!out.empty()) out += ' ';
    if (op.kind == EditKind::Insert) out += '+';
    if (op.kind == EditKind::Delete) out += '-';
    out += op.token;
  }
  return out;
}

std::vector<std::string> EditScript::apply_to_source() const {
  std::vector<std::string> out;
  for (const auto& op : ops)
    if (op.kind != EditKind::Delete) out.push_back(op.token);
  return out;
}

std::vector<std::string> prediction_tokens(const Prediction& prediction) {
  if (const auto* f = std::get_if<Frame>(&prediction)) return frame_tokens(*f);
  return std::get<DecodeFailure>(prediction).tokens;
}

DiffReport diff_predictions(const std::vector<std::string>& prediction_lines, const Dataset& gold,
                            std::size_t sample, std::uint64_t seed) {
  if (prediction_lines.size() != gold.size())
    throw Error(ErrorKind::LengthMismatch, std::to_string(prediction_lines.size()) + " prediction lines for " +
                                              std::to_string(gold.size()) + " gold samples");
  std::vector<Prediction> predictions;
  for (const auto& line : prediction_lines) {
    try {
      predictions.emplace_back(parse_frame(line));
    } catch (const Error& e) {
      predictions.emplace_back(DecodeFailure{split_whitespace(line), e.kind(), e.what()});
    }
  }
  std::vector<Frame> golds;
  for (const auto& s : gold.samples) golds.push_back(s.frame);
  const EvalReport report = exact_match(predictions, golds);

  DiffReport out;
  out.total = report.n;
  for (const auto& r : report.per_sample) {
    if (r.match) continue;
    auto lower = [](std::vector<std::string> v) {
      for (auto& t : v) t = to_lower(t);
      return v;
    };
    DiffEntry e;
    e.id = r.id;
    e.utterance = gold.samples[r.id].utterance;
    e.decode_failure = std::holds_alternative<DecodeFailure>(r.prediction);
    e.script = token_diff(lower(prediction_tokens(r.prediction)), lower(frame_tokens(r.gold)));
    out.errors.push_back(std::move(e));
  }
  std::stable_sort(out.errors.begin(), out.errors.end(),
                   [](const DiffEntry& x, const DiffEntry& y) { return x.script.distance < y.script.distance; });
  std::vector<std::size_t> ids;
  for (const auto& e : out.errors) ids.push_back(e.id);
  Rng rng(seed);
  rng.shuffle(ids);
  ids.resize(std::min(sample, ids.size()));
  std::sort(ids.begin(), ids.end());
  out.flagged = ids;
  return out;
}

std::string DiffReport::render() const {
  std::ostringstream os;
  os << errors.size() << " errors in " << total << " predictions\n";
  for (const auto& e : errors) {
    const bool flag = std::binary_search(flagged.begin(), flagged.end(), e.id);
    os << "\n#" << e.id << " distance " << e.script.distance << (e.decode_failure ? " DecodeFailure" : "")
       << (flag ? " [inspect]" : "") << '\n';
    os << "  " << e.utterance << '\n';
    os << "  " << e.script.render() << '\n';
  }
  return os.str();
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

}  // namespace invparse
