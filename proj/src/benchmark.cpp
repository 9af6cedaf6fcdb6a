#include "invparse/benchmark.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

#include "invparse/error.hpp"
#include "invparse/rng.hpp"
#include "json.hpp"

namespace invparse {

Dataset spis_scan(const Dataset& ordered, int k) {
  if (k < 1) throw Error(ErrorKind::InvalidConfig, "SPIS k must be >= 1");
  Dataset subset;
  std::unordered_map<std::string, int> counts;
  for (const Sample& s : ordered.samples) {
    const auto tokens = ontology_tokens(s.frame);
    const bool under_cap = std::any_of(tokens.begin(), tokens.end(), [&](const std::string& t) {
      auto it = counts.find(t);
      return it == counts.end() || it->second < k;
    });
    if (!under_cap) continue;
    for (const auto& t : tokens) ++counts[t];
    subset.samples.push_back(s);
  }
  return subset;
}

Dataset spis_subsample(const Dataset& dataset, const SpisConfig& config) {
  if (config.k < 1) throw Error(ErrorKind::InvalidConfig, "SPIS k must be >= 1");
  std::vector<std::size_t> order(dataset.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(config.seed);
  rng.shuffle(order);
  Dataset shuffled;
  shuffled.samples.reserve(order.size());
  for (std::size_t i : order) shuffled.samples.push_back(dataset.samples[i]);
  return spis_scan(shuffled, config.k);
}

std::vector<Scenario> make_scenarios(const Dataset& dataset, const ScenarioOptions& options) {
  const auto all_domains = domains(dataset);
  if (all_domains.size() < 2) {
    throw Error(ErrorKind::SingleDomainDataset, "leave-one-out needs at least 2 domains, found " +
                                                    std::to_string(all_domains.size()));
  }
  if (options.test_fraction < 0.0 || options.test_fraction >= 1.0) {
    throw Error(ErrorKind::InvalidConfig, "test_fraction must lie in [0, 1)");
  }
  std::vector<Scenario> out;
  for (const auto& domain : all_domains) {
    Scenario sc;
    sc.target_domain = domain;
    Dataset target;
    for (const auto& s : dataset.samples) {
      (s.domain == domain ? target : sc.source).samples.push_back(s);
    }
    Dataset pool;
    if (options.test_fraction > 0.0) {
      std::vector<std::size_t> order(target.size());
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      // Offset keeps the split stream distinct from the SPIS shuffle.
      Rng rng(options.seed ^ 0x5bd1e995ULL);
      rng.shuffle(order);
      const auto n_test = static_cast<std::size_t>(std::round(options.test_fraction * static_cast<double>(target.size())));
      std::vector<bool> is_test(target.size(), false);
      for (std::size_t i = 0; i < n_test; ++i) is_test[order[i]] = true;
      for (std::size_t i = 0; i < target.size(); ++i) {
        (is_test[i] ? sc.target_test : pool).samples.push_back(target.samples[i]);
      }
    } else {
      pool = target;
    }
    for (int k : options.ks) {
      sc.target_subsets[k] = spis_subsample(pool, SpisConfig{k, options.seed});
    }
    out.push_back(std::move(sc));
  }
  return out;
}

std::vector<Scenario> make_scenarios(const Dataset& dataset, const std::vector<int>& ks, std::uint64_t seed) {
  ScenarioOptions options;
  options.ks = ks;
  options.seed = seed;
  return make_scenarios(dataset, options);
}

std::string manifest_summary(const std::vector<Scenario>& scenarios, const std::vector<int>& ks) {
  std::ostringstream os;
  os << "domain\tsource";
  for (int k : ks) os << '\t' << k;
  os << "\ttest\n";
  for (const auto& sc : scenarios) {
    os << sc.target_domain << '\t' << sc.source.size();
    for (int k : ks) {
      auto it = sc.target_subsets.find(k);
      os << '\t' << (it == sc.target_subsets.end() ? 0 : it->second.size());
    }
    os << '\t' << sc.target_test.size() << '\n';
  }
  return os.str();
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
}

std::string target_file(int k) { return "target_" + std::to_string(k) + "spis.tsv"; }

}  // namespace

void write_manifest(const std::vector<Scenario>& scenarios, const std::filesystem::path& dir,
                    const ScenarioOptions& options) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());

  std::vector<int> ks = options.ks;
  if (ks.empty()) {
    std::set<int> seen;
    for (const auto& sc : scenarios)
      for (const auto& [k, _] : sc.target_subsets) seen.insert(k);
    ks.assign(seen.begin(), seen.end());
  }

  nlohmann::json meta;
  meta["seed"] = options.seed;
  meta["ks"] = ks;
  meta["test_fraction"] = options.test_fraction;
  meta["scenarios"] = nlohmann::json::array();
  for (const auto& sc : scenarios) {
    const auto sub = dir / sc.target_domain;
    std::filesystem::create_directories(sub, ec);
    if (ec) throw Error(ErrorKind::Io, "cannot create '" + sub.string() + "': " + ec.message());
    write_dataset(sc.source, sub / "source.tsv");
    write_dataset(sc.target_test, sub / "target_test.tsv");
    for (const auto& [k, subset] : sc.target_subsets) write_dataset(subset, sub / target_file(k));
    meta["scenarios"].push_back(sc.target_domain);
  }
  write_text(dir / "summary.tsv", manifest_summary(scenarios, ks));
  write_text(dir / "manifest.json", meta.dump(2) + "\n");
}

void write_manifest(const std::vector<Scenario>& scenarios, const std::filesystem::path& dir) {
  ScenarioOptions options;
  options.ks.clear();
  write_manifest(scenarios, dir, options);
}

Manifest load_manifest(const std::filesystem::path& dir) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw Error(ErrorKind::Io, "no manifest.json in '" + dir.string() + "'");
  nlohmann::json meta;
  try {
    in >> meta;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::Io, "bad manifest.json: " + std::string(e.what()));
  }
  Manifest m;
  m.options.seed = meta.value("seed", std::uint64_t{0});
  m.options.ks = meta.value("ks", std::vector<int>{});
  m.options.test_fraction = meta.value("test_fraction", 0.0);
  for (const auto& name : meta.at("scenarios")) {
    Scenario sc;
    sc.target_domain = name.get<std::string>();
    const auto sub = dir / sc.target_domain;
    sc.source = load_dataset(sub / "source.tsv");
    sc.target_test = load_dataset(sub / "target_test.tsv");
    for (int k : m.options.ks) sc.target_subsets[k] = load_dataset(sub / target_file(k));
    m.scenarios.push_back(std::move(sc));
  }
  return m;
}

}  // namespace invparse
