#include "invparse/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "invparse/error.hpp"
#include "invparse/synth.hpp"
#include "invparse/vocabulary.hpp"

namespace invparse {

using nlohmann::json;

namespace {

template <typename T>
void read_field(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

void model_from_json(const json& j, ModelConfig& c) {
  if (j.contains("mode")) c.mode = parse_mode(j.at("mode").get<std::string>());
  if (j.contains("inventory_variant")) c.inventory_variant = parse_variant(j.at("inventory_variant").get<std::string>());
  read_field(j, "layers", c.layers);
  read_field(j, "model_dim", c.model_dim);
  read_field(j, "heads", c.heads);
  read_field(j, "ffn_dim", c.ffn_dim);
  read_field(j, "max_source_len", c.max_source_len);
  read_field(j, "max_target_len", c.max_target_len);
  read_field(j, "max_index", c.max_index);
  read_field(j, "dropout", c.dropout);
  read_field(j, "tag_components", c.tag_components);
  read_field(j, "seed", c.seed);
}

json model_to_json(const ModelConfig& c) {
  return {{"mode", std::string(to_string(c.mode))},
          {"inventory_variant", std::string(to_string(c.inventory_variant))},
          {"layers", c.layers},
          {"model_dim", c.model_dim},
          {"heads", c.heads},
          {"ffn_dim", c.ffn_dim},
          {"max_source_len", c.max_source_len},
          {"max_target_len", c.max_target_len},
          {"max_index", c.max_index},
          {"dropout", c.dropout},
          {"tag_components", c.tag_components},
          {"seed", c.seed}};
}

void train_from_json(const json& j, TrainConfig& c) {
  read_field(j, "batch_size", c.batch_size);
  read_field(j, "epochs", c.epochs);
  read_field(j, "learning_rate", c.learning_rate);
  read_field(j, "beta1", c.beta1);
  read_field(j, "beta2", c.beta2);
  read_field(j, "epsilon", c.epsilon);
  if (j.contains("grad_clip")) {
    const auto& g = j.at("grad_clip");
    c.grad_clip = g.is_null() ? std::nullopt : std::optional<double>(g.get<double>());
  }
  read_field(j, "seed", c.seed);
  read_field(j, "max_samples_per_epoch", c.max_samples_per_epoch);
  read_field(j, "inventory_dropout", c.inventory_dropout);
  read_field(j, "linear_decay", c.linear_decay);
  read_field(j, "word_substitution", c.word_substitution);
}

json train_to_json(const TrainConfig& c) {
  return {{"batch_size", c.batch_size},
          {"epochs", c.epochs},
          {"learning_rate", c.learning_rate},
          {"beta1", c.beta1},
          {"beta2", c.beta2},
          {"epsilon", c.epsilon},
          {"grad_clip", c.grad_clip ? json(*c.grad_clip) : json(nullptr)},
          {"seed", c.seed},
          {"max_samples_per_epoch", c.max_samples_per_epoch},
          {"inventory_dropout", c.inventory_dropout},
          {"linear_decay", c.linear_decay},
          {"word_substitution", c.word_substitution}};
}

std::string seconds_since(std::chrono::steady_clock::time_point start) {
  const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  std::ostringstream os;
  os.precision(1);
  os << std::fixed << s << "s";
  return os.str();
}

std::vector<const Scenario*> select_scenarios(const std::vector<Scenario>& all, const std::vector<std::string>& names) {
  std::vector<const Scenario*> out;
  if (names.empty()) {
    for (const auto& s : all) out.push_back(&s);
    return out;
  }
  for (const auto& n : names) {
    auto it = std::find_if(all.begin(), all.end(), [&](const Scenario& s) { return s.target_domain == n; });
    if (it == all.end()) throw Error(ErrorKind::UnknownDomain, "no scenario targets domain '" + n + "'");
    out.push_back(&*it);
  }
  return out;
}

std::size_t unseen_labels(const Vocabulary& vocab, const Dataset& data) {
  std::set<std::string> labels;
  for (const auto& s : data.samples)
    for (const auto& t : ontology_tokens(s.frame))
      if (!vocab.find(label_token(t))) labels.insert(t);
  return labels.size();
}

std::vector<std::pair<Eigen::Index, Eigen::Index>> shapes_of(const TrainedModel& m) {
  std::vector<std::pair<Eigen::Index, Eigen::Index>> out;
  for (const auto& [_, t] : m.params.tensors()) out.emplace_back(t->rows(), t->cols());
  return out;
}

struct Pipeline {
  const ExperimentConfig& cfg;
  const InventoryMap& inventories;
  const Vocabulary& vocabulary;
  const ProgressFn& progress;
  ExperimentResult result;

  void note(const std::string& msg) const {
    if (progress) progress(msg);
  }

  // Source stage once, then one target stage per k.
  void run_cell(const Scenario& sc, ModelConfig mc, const std::string& mode_name, std::uint64_t seed) {
    const auto start = std::chrono::steady_clock::now();
    mc.seed = seed;
    TrainedModel source_model = initialize_model(mc, vocabulary);
    TrainConfig stc = cfg.source_train;
    stc.seed = seed;
    stc.split = "source";
    train(source_model, sc.source, inventories, stc);
    note(sc.target_domain + " " + mode_name + " seed " + std::to_string(seed) + ": source stage " +
         seconds_since(start));

    Dataset test = sc.target_test;
    if (cfg.max_test_samples > 0 && test.size() > cfg.max_test_samples) test.samples.resize(cfg.max_test_samples);
    const Inventory& inventory = inventories.at(sc.target_domain);
    std::vector<Frame> golds;
    for (const auto& s : test.samples) golds.push_back(s.frame);

    for (int k : cfg.ks) {
      const auto kstart = std::chrono::steady_clock::now();
      const Dataset& subset = sc.target_subsets.at(k);
      TrainedModel model = source_model;
      AdaptationRecord rec;
      rec.domain = sc.target_domain;
      rec.k = k;
      rec.mode = mode_name;
      rec.seed = seed;
      rec.vocab_before = model.vocabulary.size();
      rec.unseen_labels = unseen_labels(model.vocabulary, subset);
      const auto shapes_before = shapes_of(model);

      TrainConfig ttc = cfg.target_train;
      ttc.seed = seed * 1000 + static_cast<std::uint64_t>(k);
      ttc.split = "target";
      rec.rows_added = extend_vocabulary(model, subset, ttc.seed);
      rec.initial_target_loss = subset.empty() ? 0.0 : dataset_loss(model, subset, inventories);
      rec.rows_added += train(model, subset, inventories, ttc);
      rec.vocab_after = model.vocabulary.size();
      const auto shapes_after = shapes_of(model);
      for (std::size_t i = 0; i < shapes_after.size(); ++i)
        rec.shapes_changed += shapes_before[i] != shapes_after[i] ? 1 : 0;

      std::vector<Prediction> predictions;
      std::vector<std::string> lines;
      for (const auto& s : test.samples) {
        predictions.push_back(predict(model, s.utterance, inventory));
        const auto& p = predictions.back();
        if (const auto* f = std::get_if<Frame>(&p)) {
          lines.push_back(serialize_frame(*f));
        } else {
          std::string raw;
          for (const auto& t : std::get<DecodeFailure>(p).tokens) raw += (raw.empty() ? "" : " ") + t;
          lines.push_back(raw);
        }
      }
      RunResult run{sc.target_domain, k, mode_name, seed, exact_match(predictions, golds)};
      note("  k=" + std::to_string(k) + " EM " + std::to_string(run.report.em) + " (" +
           std::to_string(subset.size()) + " train, " + std::to_string(test.size()) + " test, vocab +" +
           std::to_string(rec.rows_added) + ") " + seconds_since(kstart));
      result.runs.push_back(std::move(run));
      result.adaptations.push_back(rec);
      result.predictions.push_back(std::move(lines));
      result.gold.push_back(test);
    }
  }
};

Vocabulary experiment_vocabulary(const Dataset& corpus, const ModelConfig& model) {
  return Vocabulary::build(corpus_words(corpus), model.max_index);
}

std::vector<Scenario> scenarios_for(const ExperimentConfig& config, const Dataset& corpus) {
  ScenarioOptions opts;
  opts.ks = config.ks;
  opts.seed = config.split_seed;
  opts.test_fraction = config.test_fraction;
  return make_scenarios(corpus, opts);
}

}  // namespace

ExperimentConfig::ExperimentConfig() {
  model.layers = 2;
  model.model_dim = 32;
  model.heads = 4;
  model.ffn_dim = 64;
  model.max_source_len = 160;
  model.max_target_len = 40;
  model.dropout = 0.0;
  source_train.epochs = 8;
  source_train.batch_size = 16;
  source_train.learning_rate = 4e-3;
  source_train.max_samples_per_epoch = 3000;
  source_train.inventory_dropout = 0.5;
  source_train.linear_decay = true;
  source_train.split = "source";
  target_train.epochs = 30;
  target_train.batch_size = 4;
  target_train.learning_rate = 1e-3;
  target_train.split = "target";
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
  if (ks.empty()) fail("ks must not be empty");
  for (int k : ks)
    if (k <= 0) fail("every k must be positive");
  if (!(test_fraction > 0.0 && test_fraction < 1.0)) fail("test_fraction must lie in (0, 1)");
  if (modes.empty()) fail("modes must not be empty");
  if (ablation_variants.empty()) fail("ablation_variants must not be empty");
  if (seeds.empty()) fail("seeds must not be empty");
  if (corpus.empty() && samples_per_domain == 0) fail("samples_per_domain must be positive");
  model.validate();
  source_train.validate();
  target_train.validate();
}

ExperimentConfig parse_experiment_config(const std::string& json_text) {
  ExperimentConfig c;
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::InvalidConfig, "config must be a JSON object");
  static const std::set<std::string> known{
      "corpus", "samples_per_domain", "corpus_seed", "scenarios", "ks", "test_fraction", "split_seed",
      "max_test_samples", "modes", "ablation_domain", "ablation_variants", "model", "source_train",
      "target_train", "seeds", "out"};
  for (const auto& [key, _] : j.items())
    if (!known.contains(key)) throw Error(ErrorKind::InvalidConfig, "unknown config key '" + key + "'");
  try {
    read_field(j, "corpus", c.corpus);
    read_field(j, "samples_per_domain", c.samples_per_domain);
    read_field(j, "corpus_seed", c.corpus_seed);
    read_field(j, "scenarios", c.scenarios);
    read_field(j, "ks", c.ks);
    read_field(j, "test_fraction", c.test_fraction);
    read_field(j, "split_seed", c.split_seed);
    read_field(j, "max_test_samples", c.max_test_samples);
    if (j.contains("modes")) {
      c.modes.clear();
      for (const auto& m : j.at("modes")) c.modes.push_back(parse_mode(m.get<std::string>()));
    }
    read_field(j, "ablation_domain", c.ablation_domain);
    if (j.contains("ablation_variants")) {
      c.ablation_variants.clear();
      for (const auto& v : j.at("ablation_variants")) c.ablation_variants.push_back(parse_variant(v.get<std::string>()));
    }
    if (j.contains("model")) model_from_json(j.at("model"), c.model);
    if (j.contains("source_train")) train_from_json(j.at("source_train"), c.source_train);
    if (j.contains("target_train")) train_from_json(j.at("target_train"), c.target_train);
    read_field(j, "seeds", c.seeds);
    read_field(j, "out", c.out);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::InvalidConfig, std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_experiment_config(buf.str());
}

std::string experiment_config_json(const ExperimentConfig& c) {
  json modes = json::array(), variants = json::array();
  for (auto m : c.modes) modes.push_back(std::string(to_string(m)));
  for (auto v : c.ablation_variants) variants.push_back(std::string(to_string(v)));
  json j{{"corpus", c.corpus},
         {"samples_per_domain", c.samples_per_domain},
         {"corpus_seed", c.corpus_seed},
         {"scenarios", c.scenarios},
         {"ks", c.ks},
         {"test_fraction", c.test_fraction},
         {"split_seed", c.split_seed},
         {"max_test_samples", c.max_test_samples},
         {"modes", modes},
         {"ablation_domain", c.ablation_domain},
         {"ablation_variants", variants},
         {"model", model_to_json(c.model)},
         {"source_train", train_to_json(c.source_train)},
         {"target_train", train_to_json(c.target_train)},
         {"seeds", c.seeds},
         {"out", c.out}};
  return j.dump(2) + '\n';
}

Dataset load_corpus(const ExperimentConfig& config) {
  if (!config.corpus.empty()) return load_dataset(config.corpus);
  return default_benchmark_suite(config.corpus_seed, config.samples_per_domain);
}

ExperimentResult run_experiment(const ExperimentConfig& config, const Dataset& corpus, const ProgressFn& progress) {
  config.validate();
  const auto scenarios = scenarios_for(config, corpus);
  const auto selected = select_scenarios(scenarios, config.scenarios);
  const InventoryMap inventories = build_inventories(corpus);
  const Vocabulary vocabulary = experiment_vocabulary(corpus, config.model);

  Pipeline p{config, inventories, vocabulary, progress, {}};
  for (const Scenario* sc : selected) {
    for (ParserMode mode : config.modes) {
      for (std::uint64_t seed : config.seeds) {
        ModelConfig mc = config.model;
        mc.mode = mode;
        p.run_cell(*sc, mc, std::string(to_string(mode)), seed);
      }
    }
    p.result.profiles.push_back(domain_profile(corpus, sc->target_domain));
  }
  p.result.aggregate = aggregate(p.result.runs);
  return std::move(p.result);
}

ExperimentResult run_ablation(const ExperimentConfig& config, const Dataset& corpus, const ProgressFn& progress) {
  config.validate();
  const auto scenarios = scenarios_for(config, corpus);
  std::string domain = config.ablation_domain;
  if (domain.empty()) domain = select_scenarios(scenarios, config.scenarios).front()->target_domain;
  const Scenario* sc = select_scenarios(scenarios, {domain}).front();
  const InventoryMap inventories = build_inventories(corpus);
  const Vocabulary vocabulary = experiment_vocabulary(corpus, config.model);

  Pipeline p{config, inventories, vocabulary, progress, {}};
  for (InventoryVariant variant : config.ablation_variants) {
    for (std::uint64_t seed : config.seeds) {
      ModelConfig mc = config.model;
      mc.mode = ParserMode::InventoryPointer;
      mc.inventory_variant = variant;
      p.run_cell(*sc, mc, std::string(to_string(variant)), seed);
    }
  }
  p.result.profiles.push_back(domain_profile(corpus, domain));
  p.result.aggregate = aggregate(p.result.runs);
  return std::move(p.result);
}

std::string mode_table(const AggregateReport& report, const std::string& domain) {
  std::vector<std::string> modes;
  std::set<int> ks;
  for (const auto& [key, _] : report.cells) {
    const auto& [d, k, mode] = key;
    if (d != domain) continue;
    if (std::find(modes.begin(), modes.end(), mode) == modes.end()) modes.push_back(mode);
    ks.insert(k);
  }
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "variant";
  for (int k : ks) os << '\t' << k << "spis";
  os << '\n';
  for (const auto& m : modes) {
    os << m;
    for (int k : ks) {
      auto it = report.cells.find({domain, k, m});
      if (it == report.cells.end()) {
        os << "\t-";
      } else {
        os << '\t' << 100.0 * it->second.mean << " ± " << 100.0 * it->second.std;
      }
    }
    os << '\n';
  }
  return os.str();
}

void write_experiment(const ExperimentResult& result, const ExperimentConfig& config,
                      const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir / "predictions", ec);
  if (ec) throw Error(ErrorKind::Io, "cannot create '" + dir.string() + "': " + ec.message());
  auto write = [](const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
    out << text;
  };
  write(dir / "config.json", experiment_config_json(config));
  write(dir / "aggregate.txt", result.aggregate.table());
  write(dir / "aggregate.jsonl", result.aggregate.jsonl());

  std::string runs, adaptations;
  for (std::size_t i = 0; i < result.runs.size(); ++i) {
    const auto& r = result.runs[i];
    const std::string stem = r.domain + "_" + r.mode + "_k" + std::to_string(r.k) + "_s" + std::to_string(r.seed);
    runs += json{{"domain", r.domain}, {"k", r.k}, {"mode", r.mode}, {"seed", r.seed}, {"em", r.report.em},
                 {"n", r.report.n}, {"predictions", "predictions/" + stem + ".txt"}}
                .dump() +
            '\n';
    std::string lines;
    for (const auto& l : result.predictions[i]) lines += l + '\n';
    write(dir / "predictions" / (stem + ".txt"), lines);
    write(dir / "predictions" / (stem + "_gold.tsv"), dataset_tsv(result.gold[i]));
  }
  for (const auto& a : result.adaptations) {
    adaptations += json{{"domain", a.domain},
                        {"k", a.k},
                        {"mode", a.mode},
                        {"seed", a.seed},
                        {"vocab_before", a.vocab_before},
                        {"vocab_after", a.vocab_after},
                        {"rows_added", a.rows_added},
                        {"unseen_labels", a.unseen_labels},
                        {"shapes_changed", a.shapes_changed},
                        {"initial_target_loss", a.initial_target_loss}}
                       .dump() +
                   '\n';
  }
  write(dir / "runs.jsonl", runs);
  write(dir / "adaptation.jsonl", adaptations);
  if (!config.ks.empty()) {
    const int smallest = *std::min_element(config.ks.begin(), config.ks.end());
    write(dir / "profile.tsv", profile_table(result.profiles, result.aggregate, smallest));
  }
}

}  // namespace invparse
