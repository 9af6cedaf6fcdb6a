#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "invparse/benchmark.hpp"
#include "invparse/error.hpp"
#include "invparse/evaluate.hpp"
#include "invparse/experiment.hpp"
#include "invparse/synth.hpp"

namespace fs = std::filesystem;
using namespace invparse;

namespace {

struct Common {
  std::string config;
  std::string out;
  std::optional<std::uint64_t> seed;
};

void add_common(CLI::App* cmd, Common& c) {
  cmd->add_option("--config", c.config, "experiment config (JSON)");
  cmd->add_option("--out", c.out, "output directory");
  cmd->add_option("--seed", c.seed, "seed override");
}

ExperimentConfig base_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_experiment_config(c.config);
  if (!c.out.empty()) cfg.out = c.out;
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << text;
}

void make_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());
}

void log_line(const std::string& msg) { std::cerr << msg << std::endl; }

std::string profiles_tsv(const Dataset& corpus) {
  std::ostringstream os;
  os << "domain\tsamples\tcompositionality_pct\tontology_labels\n";
  for (const auto& d : domains(corpus)) {
    const auto p = domain_profile(corpus, d);
    os << d << '\t' << filter_domain(corpus, d).size() << '\t' << std::fixed << std::setprecision(1)
       << 100.0 * p.compositionality << '\t' << p.ontology_size << '\n';
  }
  return os.str();
}

void cmd_synth(const Common& c, const std::string& spec_path, std::size_t samples) {
  ExperimentConfig cfg = base_config(c);
  const std::uint64_t seed = c.seed.value_or(cfg.corpus_seed);
  const auto specs = spec_path.empty() ? default_suite_specs() : load_domain_specs(spec_path);
  const std::size_t n = samples > 0 ? samples : cfg.samples_per_domain;
  const Dataset corpus = generate_suite(specs, seed, n);
  const fs::path dir = cfg.out;
  make_dir(dir);
  write_dataset(corpus, dir / "corpus.tsv");
  std::string spec_text = default_suite_text();
  if (!spec_path.empty()) {
    std::ifstream in(spec_path);
    spec_text.assign(std::istreambuf_iterator<char>(in), {});
  }
  write_text(dir / "domains.txt", spec_text);
  const std::string profile = profiles_tsv(corpus);
  write_text(dir / "profile.tsv", profile);
  std::cout << "wrote " << corpus.size() << " samples to " << (dir / "corpus.tsv").string() << "\n" << profile;
}

void cmd_benchmark(const Common& c, const std::string& corpus_path, const std::vector<int>& ks,
                   std::optional<double> test_fraction) {
  ExperimentConfig cfg = base_config(c);
  if (!corpus_path.empty()) cfg.corpus = corpus_path;
  if (!ks.empty()) cfg.ks = ks;
  if (c.seed) cfg.split_seed = *c.seed;
  if (test_fraction) cfg.test_fraction = *test_fraction;
  cfg.validate();
  const Dataset corpus = load_corpus(cfg);
  ScenarioOptions opts{cfg.ks, cfg.split_seed, cfg.test_fraction};
  const auto scenarios = make_scenarios(corpus, opts);
  const fs::path dir = fs::path(cfg.out) / "manifest";
  write_manifest(scenarios, dir, opts);
  std::cout << scenarios.size() << " scenarios x " << cfg.ks.size() << " subsets = "
            << scenarios.size() * cfg.ks.size() << " cells in " << dir.string() << "\n"
            << manifest_summary(scenarios, cfg.ks);
}

ExperimentConfig experiment_config(const Common& c) {
  ExperimentConfig cfg = base_config(c);
  if (c.seed) cfg.seeds = {*c.seed};
  cfg.validate();
  return cfg;
}

void cmd_run(const Common& c) {
  const ExperimentConfig cfg = experiment_config(c);
  const Dataset corpus = load_corpus(cfg);
  const auto result = run_experiment(cfg, corpus, log_line);
  const fs::path dir = fs::path(cfg.out) / "run";
  write_experiment(result, cfg, dir);
  std::size_t augmented_pointer_runs = 0;
  for (const auto& a : result.adaptations)
    if (a.mode == to_string(ParserMode::InventoryPointer) && (a.rows_added != 0 || a.shapes_changed != 0))
      ++augmented_pointer_runs;
  std::cout << result.aggregate.table() << "\n";
  std::cout << profile_table(result.profiles, result.aggregate, *std::min_element(cfg.ks.begin(), cfg.ks.end()));
  std::cout << "\npointer-mode target stages needing vocabulary or shape changes: " << augmented_pointer_runs << "\n";
  std::cout << "outputs in " << dir.string() << "\n";
}

void cmd_ablate(const Common& c, const std::string& domain, const std::vector<std::string>& variants) {
  ExperimentConfig cfg = experiment_config(c);
  if (!domain.empty()) cfg.ablation_domain = domain;
  if (!variants.empty()) {
    cfg.ablation_variants.clear();
    for (const auto& v : variants) cfg.ablation_variants.push_back(parse_variant(v));
  }
  const Dataset corpus = load_corpus(cfg);
  const auto result = run_ablation(cfg, corpus, log_line);
  const fs::path dir = fs::path(cfg.out) / "ablate";
  write_experiment(result, cfg, dir);
  const std::string table = mode_table(result.aggregate, result.profiles.front().domain);
  write_text(dir / "ablation.tsv", table);
  std::cout << "domain " << result.profiles.front().domain << "\n" << table;
}

void cmd_evaluate(const Common& c, const std::string& predictions, const std::string& gold) {
  const auto lines = read_lines(predictions);
  const Dataset gold_data = load_dataset(gold);
  std::vector<Prediction> preds;
  for (const auto& line : lines) {
    try {
      preds.emplace_back(parse_frame(line));
    } catch (const Error& e) {
      preds.emplace_back(DecodeFailure{split_whitespace(line), e.kind(), e.what()});
    }
  }
  std::vector<Frame> golds;
  for (const auto& s : gold_data.samples) golds.push_back(s.frame);
  const EvalReport report = exact_match(preds, golds);
  if (!c.out.empty()) {
    make_dir(c.out);
    std::string jsonl;
    for (const auto& r : report.per_sample) {
      nlohmann::json j{{"id", r.id},
                       {"match", r.match},
                       {"decode_failure", std::holds_alternative<DecodeFailure>(r.prediction)},
                       {"gold", serialize_frame(r.gold)}};
      jsonl += j.dump() + '\n';
    }
    write_text(fs::path(c.out) / "eval.jsonl", jsonl);
  }
  std::cout << "EM " << std::fixed << std::setprecision(2) << 100.0 * report.em << " (" << report.n << " samples)\n";
}

void cmd_diff(const Common& c, const std::string& predictions, const std::string& gold, std::size_t sample) {
  const DiffReport report = diff_predictions(read_lines(predictions), load_dataset(gold), sample, c.seed.value_or(1));
  const std::string text = report.render();
  if (!c.out.empty()) {
    make_dir(c.out);
    write_text(fs::path(c.out) / "diff.txt", text);
  }
  std::cout << text;
}

void cmd_profile(const Common& c, const std::string& corpus_path) {
  ExperimentConfig cfg = base_config(c);
  if (!corpus_path.empty()) cfg.corpus = corpus_path;
  if (c.seed) cfg.corpus_seed = *c.seed;
  const std::string text = profiles_tsv(load_corpus(cfg));
  if (!c.out.empty()) {
    make_dir(c.out);
    write_text(fs::path(c.out) / "profile.tsv", text);
  }
  std::cout << text;
}

int cmd_grad_check(const Common& c, double epsilon, std::size_t n_params) {
  ModelConfig mc;
  mc.layers = 2;
  mc.model_dim = 16;
  mc.heads = 2;
  mc.ffn_dim = 32;
  mc.dropout = 0.0;
  mc.seed = c.seed.value_or(1);
  const Dataset corpus = default_benchmark_suite(mc.seed, 50);
  const auto inventories = build_inventories(corpus);
  int failures = 0;
  for (ParserMode mode : {ParserMode::InventoryPointer, ParserMode::CopyGenerate}) {
    mc.mode = mode;
    const Sample& sample = corpus.samples.front();
    const auto r = grad_check(mc, sample, inventories.at(sample.domain), epsilon, n_params);
    const bool pass = r.valid && r.max_relative_error < 1e-4;
    failures += pass ? 0 : 1;
    std::cout << to_string(mode) << ": max relative error " << std::scientific << std::setprecision(3)
              << r.max_relative_error << " over " << r.checked << " parameters " << (pass ? "ok" : "FAILED") << "\n";
  }
  return failures == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Inventory-based semantic parsing toolkit"};
  app.require_subcommand(1);
  Common common;

  auto* synth = app.add_subcommand("synth", "generate a synthetic multi-domain corpus");
  add_common(synth, common);
  std::string spec_path;
  std::size_t samples = 0;
  synth->add_option("--spec", spec_path, "domain spec file (default: built-in suite)");
  synth->add_option("--samples", samples, "samples per domain");

  auto* bench = app.add_subcommand("benchmark", "build leave-one-out scenarios and SPIS subsets");
  add_common(bench, common);
  std::string corpus_path;
  std::vector<int> ks;
  std::optional<double> test_fraction;
  bench->add_option("--corpus", corpus_path, "dataset TSV");
  bench->add_option("--ks", ks, "SPIS values")->delimiter(',');
  bench->add_option("--test-fraction", test_fraction, "held-out fraction of each target domain");

  auto* run = app.add_subcommand("run", "source then target fine-tuning for every scenario, mode and seed");
  add_common(run, common);

  auto* ablate = app.add_subcommand("ablate", "compare inventory variants on one domain");
  add_common(ablate, common);
  std::string ablate_domain;
  std::vector<std::string> variants;
  ablate->add_option("--domain", ablate_domain, "target domain");
  ablate->add_option("--variants", variants, "index, index_type, index_type_span")->delimiter(',');

  auto* evaluate = app.add_subcommand("evaluate", "exact match of predicted frames against gold");
  add_common(evaluate, common);
  std::string predictions, gold;
  evaluate->add_option("--predictions", predictions, "one predicted frame per line")->required();
  evaluate->add_option("--gold", gold, "gold dataset TSV")->required();

  auto* diff = app.add_subcommand("diff", "edit-script diffs of mispredicted frames");
  add_common(diff, common);
  std::size_t sample = 100;
  diff->add_option("--predictions", predictions, "one predicted frame per line")->required();
  diff->add_option("--gold", gold, "gold dataset TSV")->required();
  diff->add_option("--sample", sample, "errors flagged for manual inspection");

  auto* profile = app.add_subcommand("profile", "compositionality and ontology size per domain");
  add_common(profile, common);
  profile->add_option("--corpus", corpus_path, "dataset TSV (default: built-in suite)");

  auto* gc = app.add_subcommand("grad-check", "finite-difference check of the training objective");
  add_common(gc, common);
  double epsilon = 1e-5;
  std::size_t n_params = 200;
  gc->add_option("--epsilon", epsilon, "finite-difference step");
  gc->add_option("--params", n_params, "parameters to check");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*synth) cmd_synth(common, spec_path, samples);
    if (*bench) cmd_benchmark(common, corpus_path, ks, test_fraction);
    if (*run) cmd_run(common);
    if (*ablate) cmd_ablate(common, ablate_domain, variants);
    if (*evaluate) cmd_evaluate(common, predictions, gold);
    if (*diff) cmd_diff(common, predictions, gold, sample);
    if (*profile) cmd_profile(common, corpus_path);
    if (*gc) return cmd_grad_check(common, epsilon, n_params);
  } catch (const Error& e) {
    std::cerr << "error[" << e.category() << "]: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error[internal]: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
