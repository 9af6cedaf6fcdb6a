#include <algorithm>
#include <filesystem>
#include <map>
#include <set>

#include "doctest.h"
#include "invparse/benchmark.hpp"
#include "invparse/error.hpp"
#include "test_support.hpp"

using namespace invparse;
namespace fs = std::filesystem;

namespace {

Sample with_labels(const std::string& utterance, const std::vector<std::string>& slots) {
  FrameNode root = FrameNode::intent("Q");
  for (const auto& s : slots) root.children.push_back(FrameNode::slot(s, {FrameNode::token("x")}));
  return {"d", utterance, Frame{root}};
}

std::map<std::string, int> token_counts(const Dataset& d) {
  std::map<std::string, int> out;
  for (const auto& s : d.samples)
    for (const auto& t : ontology_tokens(s.frame)) ++out[t];
  return out;
}

std::multiset<std::string> keys(const Dataset& d) {
  std::multiset<std::string> out;
  for (const auto& s : d.samples) out.insert(s.utterance + "\t" + serialize_frame(s.frame));
  return out;
}

// Samples tagged by position so subset checks survive duplicate frames.
Dataset numbered(Dataset d) {
  for (std::size_t i = 0; i < d.samples.size(); ++i) d.samples[i].utterance += " #" + std::to_string(i);
  return d;
}

}  // namespace

TEST_CASE("scan on the four-sample example keeps samples one and three") {
  // Every sample also carries the intent Q, which is already covered after
  // the first sample, so only A and B decide inclusion.
  Dataset d;
  d.samples = {with_labels("s1", {"A"}), with_labels("s2", {"A"}), with_labels("s3", {"B"}),
               with_labels("s4", {"A", "B"})};
  const Dataset sub = spis_scan(d, 1);
  REQUIRE(sub.size() == 2);
  CHECK(sub.samples[0].utterance == "s1");
  CHECK(sub.samples[1].utterance == "s3");
}

TEST_CASE("limiting cases") {
  CHECK(spis_subsample(Dataset{}, {1, 0}).empty());
  Rng rng(2);
  const Dataset d = testing::random_dataset(rng, 30);
  CHECK(keys(spis_subsample(d, {1000, 4})) == keys(d));
  CHECK_THROWS_AS(spis_subsample(d, {0, 4}), Error);
}

TEST_CASE("subsampling is a seeded shuffle followed by the scan") {
  Rng rng(9);
  const Dataset d = numbered(testing::random_dataset(rng, 200));
  const Dataset a = spis_subsample(d, {2, 17});
  CHECK(a == spis_subsample(d, {2, 17}));
  std::vector<std::size_t> order(d.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng shuffler(17);
  shuffler.shuffle(order);
  Dataset shuffled;
  for (std::size_t i : order) shuffled.samples.push_back(d.samples[i]);
  CHECK(a == spis_scan(shuffled, 2));
}

TEST_CASE("coverage and monotonicity over random datasets") {
  Rng rng(123);
  for (int trial = 0; trial < 100; ++trial) {
    const Dataset d = numbered(testing::random_dataset(rng, 20 + rng.below(100)));
    const auto in_counts = token_counts(d);
    const std::uint64_t seed = rng.next_u64();
    std::set<std::string> previous;
    for (int k : {1, 2, 5, 10}) {
      const Dataset sub = spis_subsample(d, {k, seed});
      const auto out_counts = token_counts(sub);
      for (const auto& [tok, n] : in_counts) {
        auto it = out_counts.find(tok);
        const int got = it == out_counts.end() ? 0 : it->second;
        CHECK(got >= std::min(k, n));
      }
      std::set<std::string> current;
      for (const auto& s : sub.samples) current.insert(s.utterance);
      CHECK(std::includes(current.begin(), current.end(), previous.begin(), previous.end()));
      previous = std::move(current);
    }
  }
}

TEST_CASE("leave-one-out scenarios") {
  Rng rng(4);
  Dataset d;
  for (const char* name : {"alarm", "weather", "music"}) {
    const Dataset part = testing::random_dataset(rng, 50, name);
    d.samples.insert(d.samples.end(), part.samples.begin(), part.samples.end());
  }
  d = numbered(d);
  ScenarioOptions opts{{1, 2}, 3, 0.2};
  const auto scenarios = make_scenarios(d, opts);
  REQUIRE(scenarios.size() == 3);
  for (const auto& sc : scenarios) {
    CHECK(sc.source.size() == 100);
    for (const auto& s : sc.source.samples) CHECK(s.domain != sc.target_domain);
    CHECK(sc.target_test.size() == 10);
    std::set<std::string> test_ids;
    for (const auto& s : sc.target_test.samples) test_ids.insert(s.utterance);
    for (const auto& [k, subset] : sc.target_subsets) {
      CHECK_FALSE(subset.empty());
      for (const auto& s : subset.samples) {
        CHECK(s.domain == sc.target_domain);
        CHECK_FALSE(test_ids.contains(s.utterance));
      }
    }
    CHECK(sc.target_subsets.at(1).size() <= sc.target_subsets.at(2).size());
  }

  try {
    make_scenarios(testing::random_dataset(rng, 10, "solo"), {1}, 0);
    FAIL("expected SingleDomainDataset");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::SingleDomainDataset);
  }
}

TEST_CASE("manifest round trip") {
  Rng rng(8);
  Dataset d = testing::random_dataset(rng, 40, "a");
  const Dataset b = testing::random_dataset(rng, 40, "b");
  d.samples.insert(d.samples.end(), b.samples.begin(), b.samples.end());
  ScenarioOptions opts{{1, 5}, 11, 0.25};
  const auto scenarios = make_scenarios(d, opts);
  const fs::path dir = fs::temp_directory_path() / "invparse_manifest_test";
  fs::remove_all(dir);
  write_manifest(scenarios, dir, opts);
  CHECK(fs::exists(dir / "a" / "target_5spis.tsv"));
  const Manifest m = load_manifest(dir);
  CHECK(m.options.ks == opts.ks);
  CHECK(m.options.seed == opts.seed);
  CHECK(m.options.test_fraction == opts.test_fraction);
  REQUIRE(m.scenarios.size() == scenarios.size());
  for (std::size_t i = 0; i < scenarios.size(); ++i) {
    CHECK(m.scenarios[i].target_domain == scenarios[i].target_domain);
    CHECK(m.scenarios[i].source == scenarios[i].source);
    CHECK(m.scenarios[i].target_test == scenarios[i].target_test);
    CHECK(m.scenarios[i].target_subsets == scenarios[i].target_subsets);
  }
  const std::string summary = manifest_summary(scenarios, opts.ks);
  CHECK(summary.find("a\t40") != std::string::npos);
  fs::remove_all(dir);
}
