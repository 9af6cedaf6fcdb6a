#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"
#include "invparse/error.hpp"
#include "invparse/experiment.hpp"
#include "invparse/synth.hpp"

using namespace invparse;
namespace fs = std::filesystem;

namespace {

ErrorKind config_error(const std::string& text) {
  try {
    parse_experiment_config(text);
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

ExperimentConfig tiny_config() {
  ExperimentConfig c = parse_experiment_config(R"({
    "samples_per_domain": 60, "scenarios": ["alarm"], "ks": [1, 2], "seeds": [1],
    "max_test_samples": 8,
    "model": {"layers": 1, "model_dim": 16, "heads": 2, "ffn_dim": 32, "dropout": 0.0},
    "source_train": {"epochs": 1, "max_samples_per_epoch": 40, "batch_size": 8},
    "target_train": {"epochs": 2, "batch_size": 4}
  })");
  return c;
}

}  // namespace

TEST_CASE("config parsing keeps defaults and rejects unknown keys") {
  const ExperimentConfig d;
  const ExperimentConfig c = parse_experiment_config(R"({"ks": [1, 5], "model": {"model_dim": 48},
      "source_train": {"word_substitution": 0.2, "grad_clip": null}, "modes": ["copygen"]})");
  CHECK(c.ks == std::vector<int>{1, 5});
  CHECK(c.model.model_dim == 48);
  CHECK(c.model.heads == d.model.heads);
  CHECK(c.source_train.word_substitution == 0.2);
  CHECK_FALSE(c.source_train.grad_clip.has_value());
  CHECK(c.modes == std::vector<ParserMode>{ParserMode::CopyGenerate});
  CHECK(c.target_train.epochs == d.target_train.epochs);

  CHECK(config_error(R"({"kss": [1]})") == ErrorKind::InvalidConfig);
  CHECK(config_error(R"({"ks": []})") == ErrorKind::InvalidConfig);
  CHECK(config_error(R"({"ks": [0]})") == ErrorKind::InvalidConfig);
  CHECK(config_error(R"({"test_fraction": 1.0})") == ErrorKind::InvalidConfig);
  CHECK(config_error(R"({"ks": "one"})") == ErrorKind::InvalidConfig);
  CHECK(config_error("[1, 2]") == ErrorKind::InvalidConfig);
  CHECK(config_error("{") == ErrorKind::InvalidConfig);
  CHECK(config_error(R"({"model": {"model_dim": 30, "heads": 4}})") == ErrorKind::InvalidConfig);
}

TEST_CASE("config JSON round trip") {
  ExperimentConfig c = tiny_config();
  c.source_train.inventory_dropout = 0.25;
  c.model.tag_components = false;
  c.ablation_variants = {InventoryVariant::IndexOnly};
  const std::string text = experiment_config_json(c);
  const ExperimentConfig back = parse_experiment_config(text);
  CHECK(experiment_config_json(back) == text);
  CHECK_FALSE(back.model.tag_components);
  CHECK(back.source_train.inventory_dropout == 0.25);
}

TEST_CASE("a small experiment end to end") {
  const ExperimentConfig c = tiny_config();
  const Dataset corpus = load_corpus(c);
  CHECK(corpus.size() == 240);
  std::vector<std::string> progress;
  const ExperimentResult r = run_experiment(c, corpus, [&](const std::string& m) { progress.push_back(m); });
  // One scenario, two modes, one seed, two ks.
  REQUIRE(r.runs.size() == 4);
  CHECK(r.adaptations.size() == 4);
  CHECK(r.predictions.size() == 4);
  CHECK_FALSE(progress.empty());
  for (std::size_t i = 0; i < r.runs.size(); ++i) {
    CHECK(r.runs[i].domain == "alarm");
    CHECK(r.runs[i].report.n == 8);
    CHECK(r.predictions[i].size() == 8);
  }
  for (const auto& a : r.adaptations) {
    CHECK(a.shapes_changed == (a.rows_added > 0 ? 1u : 0u));
    if (a.mode == "inventory") {
      CHECK(a.rows_added == 0);
      CHECK(a.vocab_after == a.vocab_before);
    } else {
      CHECK(a.rows_added == a.unseen_labels);
      CHECK(a.vocab_after == a.vocab_before + a.rows_added);
    }
  }
  CHECK(r.profiles.size() == 1);
  CHECK(r.aggregate.cells.size() == 4);

  const fs::path dir = fs::temp_directory_path() / "invparse_experiment_test";
  fs::remove_all(dir);
  write_experiment(r, c, dir);
  for (const char* f : {"config.json", "aggregate.txt", "aggregate.jsonl", "runs.jsonl", "adaptation.jsonl",
                        "profile.tsv", "predictions/alarm_inventory_k1_s1.txt"})
    CHECK(fs::exists(dir / f));
  CHECK(load_experiment_config(dir / "config.json").ks == c.ks);
  fs::remove_all(dir);

  ExperimentConfig ab = c;
  ab.ks = {1};
  const ExperimentResult abl = run_ablation(ab, corpus);
  CHECK(abl.runs.size() == 3);
  std::set<std::string> names;
  for (const auto& run : abl.runs) names.insert(run.mode);
  CHECK(names == std::set<std::string>{"index", "index_type", "index_type_span"});
  CHECK(mode_table(abl.aggregate, "alarm").find("index_type_span") != std::string::npos);
}

TEST_CASE("unknown scenario names fail") {
  ExperimentConfig c = tiny_config();
  c.scenarios = {"music"};
  try {
    run_experiment(c, load_corpus(c));
    FAIL("expected UnknownDomain");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::UnknownDomain);
  }
}
