#include "invparse/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <map>
#include <set>

namespace invparse {

std::string_view to_string(ParserMode mode) {
  return mode == ParserMode::InventoryPointer ? "inventory" : "copygen";
}

ParserMode parse_mode(std::string_view name) {
  if (name == "inventory" || name == "pointer") return ParserMode::InventoryPointer;
  if (name == "copygen" || name == "copy_generate") return ParserMode::CopyGenerate;
  throw Error(ErrorKind::InvalidConfig, "unknown parser mode '" + std::string(name) + "' (expected inventory or copygen)");
}

void ModelConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
  if (layers < 1 || model_dim < 1 || heads < 1 || ffn_dim < 1) fail("model dimensions must be positive");
  if (model_dim % heads != 0) fail("model_dim must be divisible by heads");
  if (max_source_len < 1 || max_target_len < 1) fail("max lengths must be positive");
  if (max_index < 1) fail("max_index must be positive");
  if (dropout < 0.0 || dropout >= 1.0) fail("dropout must lie in [0, 1)");
}

nn::TransformerShape ModelConfig::shape() const {
  nn::TransformerShape s;
  s.layers = layers;
  s.model_dim = model_dim;
  s.heads = heads;
  s.ffn_dim = ffn_dim;
  s.max_positions = std::max(max_source_len, max_target_len) + 1;
  return s;
}

void TrainConfig::validate() const {
  auto fail = [](const std::string& msg) { throw Error(ErrorKind::InvalidConfig, msg); };
  if (batch_size < 1) fail("batch_size must be positive");
  if (epochs < 0) fail("epochs must be non-negative");
  if (!(learning_rate > 0.0)) fail("learning_rate must be positive");
  if (grad_clip && !(*grad_clip > 0.0)) fail("grad_clip must be positive");
  if (!(inventory_dropout >= 0.0 && inventory_dropout < 1.0)) fail("inventory_dropout must lie in [0, 1)");
  if (!(word_substitution >= 0.0 && word_substitution <= 1.0)) fail("word_substitution must lie in [0, 1]");
}

EncodedSource build_source(const std::string& utterance, const Inventory& inventory, const ModelConfig& config,
                           const Vocabulary& vocabulary) {
  EncodedSource out;
  if (config.mode == ParserMode::InventoryPointer) {
    if (static_cast<int>(inventory.size()) > config.max_index) {
      throw Error(ErrorKind::InvalidConfig, "inventory of '" + inventory.domain() + "' has " +
                                                std::to_string(inventory.size()) + " components, max_index is " +
                                                std::to_string(config.max_index));
    }
    for (const auto& tok : linearize_tokens(inventory, config.inventory_variant)) out.ids.push_back(vocabulary.id(tok));
    out.ids.push_back(Vocabulary::kSep);
  }
  const auto words = split_whitespace(utterance);
  if (words.empty()) out.warnings.emplace_back("empty utterance");
  for (const auto& w : words) out.ids.push_back(vocabulary.id(to_lower(w)));
  if (static_cast<int>(out.ids.size()) > config.max_source_len) {
    throw Error(ErrorKind::SourceTooLong, "source has " + std::to_string(out.ids.size()) +
                                              " tokens, max_source_len is " + std::to_string(config.max_source_len));
  }
  return out;
}

std::vector<int> build_target(const Frame& frame, const Inventory& inventory, ParserMode mode,
                              const Vocabulary& vocabulary, int max_target_len) {
  std::vector<int> ids{Vocabulary::kBos};
  if (mode == ParserMode::InventoryPointer) {
    const Frame indexed = to_index_frame(frame, inventory);
    const auto tokens = frame_tokens(indexed);
    for (std::size_t i = 0; i < tokens.size(); ++i) {
      if (i > 0 && tokens[i - 1] == "[") {
        ids.push_back(vocabulary.index_id(std::stoi(tokens[i])));
      } else {
        ids.push_back(vocabulary.id(tokens[i] == "[" || tokens[i] == "]" ? tokens[i] : to_lower(tokens[i])));
      }
    }
  } else {
    for (const auto& tok : frame_tokens(frame)) {
      if (tok.starts_with("[")) {
        auto id = vocabulary.find(tok);
        if (!id) throw Error(ErrorKind::UnknownLabel, "label token '" + tok + "' is not in the decoder vocabulary");
        ids.push_back(*id);
      } else {
        ids.push_back(vocabulary.id(tok == "]" ? tok : to_lower(tok)));
      }
    }
  }
  ids.push_back(Vocabulary::kEos);
  if (static_cast<int>(ids.size()) - 1 > max_target_len) {
    throw Error(ErrorKind::TargetTooLong, "target needs " + std::to_string(ids.size() - 1) +
                                              " decoder steps, max_target_len is " + std::to_string(max_target_len));
  }
  return ids;
}

namespace {

const Inventory& inventory_for(const InventoryMap& inventories, const std::string& domain) {
  auto it = inventories.find(domain);
  if (it == inventories.end()) throw Error(ErrorKind::UnknownDomain, "no inventory for domain '" + domain + "'");
  return it->second;
}

std::vector<EncodedExample> encode_dataset(const Dataset& dataset, const InventoryMap& inventories,
                                           const TrainedModel& model) {
  std::vector<EncodedExample> out;
  out.reserve(dataset.size());
  for (const auto& s : dataset.samples) out.push_back(encode_sample(s, inventories, model));
  return out;
}

nn::Transformer<double> make_network(const ModelConfig& config) {
  return nn::Transformer<double>(config.shape(), config.dropout);
}

// Each inventory token after a component's index carries that index
// token as a second input embedding; the `[`, the index itself, `<sep>`
// and the utterance carry none.
std::vector<int> component_tags(const std::vector<int>& source, const ModelConfig& config) {
  if (config.mode != ParserMode::InventoryPointer || !config.tag_components) return {};
  auto is_index = [&config](int id) {
    return id >= Vocabulary::kFirstIndex && id < Vocabulary::kFirstIndex + config.max_index;
  };
  std::vector<int> tags(source.size(), -1);
  int current = -1;
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (source[i] == Vocabulary::kSep) break;
    if (source[i] == Vocabulary::kOpen && i + 1 < source.size() && is_index(source[i + 1])) {
      current = source[++i];
      continue;
    }
    tags[i] = current;
  }
  return tags;
}

double example_loss(const nn::Transformer<double>& net, const TrainedModel& model, const EncodedExample& ex,
                    double scale, nn::TransformerParams<double>* grads, Rng* dropout_rng) {
  const std::vector<int> input(ex.target.begin(), ex.target.end() - 1);
  const std::vector<int> output(ex.target.begin() + 1, ex.target.end());
  return net.loss(model.params, ex.source, component_tags(ex.source, model.config), input, output, scale, grads,
                  dropout_rng);
}

void check_example(const TrainedModel& model, const EncodedExample& ex) {
  const int vocab = model.vocabulary.size();
  auto in_range = [vocab](int id) { return id >= 0 && id < vocab; };
  if (ex.source.empty() || ex.target.size() < 2 || !std::all_of(ex.source.begin(), ex.source.end(), in_range) ||
      !std::all_of(ex.target.begin(), ex.target.end(), in_range) ||
      static_cast<int>(ex.source.size()) > model.config.max_source_len ||
      static_cast<int>(ex.target.size()) - 1 > model.config.max_target_len) {
    throw Error(ErrorKind::ShapeMismatch, "example does not fit the model's vocabulary or length limits");
  }
}

Inventory thin_inventory(const Inventory& inventory, const Frame& frame, double rate, Rng& rng) {
  const auto used_list = ontology_tokens(frame);
  const std::set<std::string> used(used_list.begin(), used_list.end());
  std::vector<InventoryComponent> kept;
  for (const auto& c : inventory.components())
    if (used.contains(c.label.raw) || !rng.bernoulli(rate)) kept.push_back(c);
  for (std::size_t i = 0; i < kept.size(); ++i) kept[i].index = static_cast<int>(i) + 1;
  return Inventory(inventory.domain(), std::move(kept));
}

void substitute_words(EncodedExample& ex, const Vocabulary& vocabulary, double rate, Rng& rng) {
  const int first = Vocabulary::kFirstIndex + vocabulary.max_index();
  const int end = vocabulary.size() - static_cast<int>(vocabulary.label_token_count());
  if (end - first < 2) return;
  auto sep = std::find(ex.source.begin(), ex.source.end(), Vocabulary::kSep);
  auto utterance = sep == ex.source.end() ? ex.source.begin() : sep + 1;
  std::map<int, int> swap;
  for (auto it = utterance; it != ex.source.end(); ++it)
    if (*it >= first && *it < end && !swap.contains(*it) && rng.bernoulli(rate))
      swap[*it] = first + static_cast<int>(rng.below(static_cast<std::uint64_t>(end - first)));
  if (swap.empty()) return;
  auto apply = [&swap](std::vector<int>& ids) {
    for (int& id : ids)
      if (auto it = swap.find(id); it != swap.end()) id = it->second;
  };
  apply(ex.source);
  apply(ex.target);
}

struct Adam {
  nn::TransformerParams<double> m, v;
  long step = 0;
};

double global_norm(const nn::TransformerParams<double>& grads) {
  double sq = 0.0;
  for (const auto& [_, g] : grads.tensors()) sq += g->squaredNorm();
  return std::sqrt(sq);
}

void adam_step(nn::TransformerParams<double>& params, nn::TransformerParams<double>& grads, Adam& adam,
               const TrainConfig& tc, double lr) {
  if (tc.grad_clip) {
    const double norm = global_norm(grads);
    if (norm > *tc.grad_clip) {
      const double s = *tc.grad_clip / norm;
      for (auto& [_, g] : grads.tensors()) *g *= s;
    }
  }
  ++adam.step;
  const double c1 = 1.0 - std::pow(tc.beta1, static_cast<double>(adam.step));
  const double c2 = 1.0 - std::pow(tc.beta2, static_cast<double>(adam.step));
  auto p = params.tensors();
  auto g = grads.tensors();
  auto m = adam.m.tensors();
  auto v = adam.v.tensors();
  for (std::size_t i = 0; i < p.size(); ++i) {
    auto& mi = *m[i].second;
    auto& vi = *v[i].second;
    const auto& gi = *g[i].second;
    mi = tc.beta1 * mi + (1.0 - tc.beta1) * gi;
    vi = tc.beta2 * vi + (1.0 - tc.beta2) * gi.cwiseProduct(gi);
    p[i].second->array() -=
        lr * (mi.array() / c1) / ((vi.array() / c2).sqrt() + tc.epsilon);
  }
}

}  // namespace

EncodedExample encode_sample(const Sample& sample, const InventoryMap& inventories, const TrainedModel& model) {
  const Inventory& inv = inventory_for(inventories, sample.domain);
  EncodedExample ex;
  ex.source = build_source(sample.utterance, inv, model.config, model.vocabulary).ids;
  ex.target = build_target(sample.frame, inv, model.config.mode, model.vocabulary, model.config.max_target_len);
  return ex;
}

TrainedModel initialize_model(const ModelConfig& config, Vocabulary vocabulary) {
  config.validate();
  if (vocabulary.max_index() != config.max_index) {
    throw Error(ErrorKind::InvalidConfig, "vocabulary index reserve does not match max_index");
  }
  TrainedModel model;
  model.config = config;
  model.vocabulary = std::move(vocabulary);
  Rng rng(config.seed);
  model.params = nn::init_transformer<double>(config.shape(), model.vocabulary.size(), rng);
  return model;
}

std::size_t extend_vocabulary(TrainedModel& model, const Dataset& dataset, std::uint64_t seed) {
  if (model.config.mode != ParserMode::CopyGenerate) return 0;
  std::set<std::string> missing;
  for (const auto& s : dataset.samples) {
    for (const auto& label : ontology_tokens(s.frame)) {
      const auto tok = label_token(label);
      if (!model.vocabulary.find(tok)) missing.insert(tok);
    }
  }
  if (missing.empty()) return 0;
  const Eigen::Index d = model.params.embed.cols();
  const Eigen::Index old_rows = model.params.embed.rows();
  model.params.embed.conservativeResize(old_rows + static_cast<Eigen::Index>(missing.size()), d);
  Rng rng(seed ^ 0x9e3779b97f4a7c15ULL);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(d));
  Eigen::Index row = old_rows;
  for (const auto& tok : missing) {
    model.vocabulary.add(tok);
    for (Eigen::Index c = 0; c < d; ++c) model.params.embed(row, c) = rng.normal() * stddev;
    ++row;
  }
  return missing.size();
}

double loss(const TrainedModel& model, const std::vector<EncodedExample>& batch) {
  if (batch.empty()) throw Error(ErrorKind::ShapeMismatch, "empty batch");
  const auto net = make_network(model.config);
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& ex : batch) {
    check_example(model, ex);
    total += example_loss(net, model, ex, 1.0, nullptr, nullptr);
    tokens += ex.target.size() - 1;
  }
  return total / static_cast<double>(tokens);
}

double dataset_loss(const TrainedModel& model, const Dataset& dataset, const InventoryMap& inventories) {
  return loss(model, encode_dataset(dataset, inventories, model));
}

std::size_t train(TrainedModel& model, const Dataset& dataset, const InventoryMap& inventories,
                  const TrainConfig& tc) {
  tc.validate();
  const std::size_t added = extend_vocabulary(model, dataset, tc.seed);
  if (tc.epochs == 0 || dataset.empty()) return added;

  const auto examples = encode_dataset(dataset, inventories, model);
  const auto net = make_network(model.config);
  Rng rng(tc.seed);
  Adam adam{model.params.zeros_like(), model.params.zeros_like(), 0};
  auto grads = model.params.zeros_like();
  const bool use_dropout = model.config.dropout > 0.0;
  const bool thin = model.config.mode == ParserMode::InventoryPointer && tc.inventory_dropout > 0.0;
  const bool substitute = tc.word_substitution > 0.0;

  std::vector<std::size_t> order(examples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t per_epoch = tc.max_samples_per_epoch == 0
                                    ? examples.size()
                                    : std::min(tc.max_samples_per_epoch, examples.size());

  const auto batch = static_cast<std::size_t>(tc.batch_size);
  const double total_steps = static_cast<double>(tc.epochs) * static_cast<double>((per_epoch + batch - 1) / batch);
  for (int epoch = 1; epoch <= tc.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t epoch_tokens = 0;
    for (std::size_t start = 0; start < per_epoch; start += static_cast<std::size_t>(tc.batch_size)) {
      const std::size_t end = std::min(per_epoch, start + static_cast<std::size_t>(tc.batch_size));
      std::size_t tokens = 0;
      for (std::size_t i = start; i < end; ++i) tokens += examples[order[i]].target.size() - 1;
      const double scale = 1.0 / static_cast<double>(tokens);
      grads.set_zero();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        if (thin || substitute) {
          EncodedExample ex = examples[order[i]];
          if (thin) {
            const Sample& s = dataset.samples[order[i]];
            const Inventory inv =
                thin_inventory(inventory_for(inventories, s.domain), s.frame, tc.inventory_dropout, rng);
            ex.source = build_source(s.utterance, inv, model.config, model.vocabulary).ids;
            ex.target = build_target(s.frame, inv, model.config.mode, model.vocabulary, model.config.max_target_len);
          }
          if (substitute) substitute_words(ex, model.vocabulary, tc.word_substitution, rng);
          batch_loss += example_loss(net, model, ex, scale, &grads, use_dropout ? &rng : nullptr);
        } else {
          batch_loss += example_loss(net, model, examples[order[i]], scale, &grads, use_dropout ? &rng : nullptr);
        }
      }
      if (!std::isfinite(batch_loss)) {
        throw Error(ErrorKind::NonFiniteLoss, "non-finite loss in " + tc.split + " epoch " + std::to_string(epoch) +
                                                  " at batch starting " + std::to_string(start));
      }
      const double lr = tc.linear_decay ? tc.learning_rate * (1.0 - static_cast<double>(adam.step) / total_steps)
                                        : tc.learning_rate;
      adam_step(model.params, grads, adam, tc, lr);
      epoch_loss += batch_loss;
      epoch_tokens += tokens;
    }
    model.training_log.push_back({epoch, tc.split, epoch_loss / static_cast<double>(epoch_tokens)});
  }
  return added;
}

TrainedModel train(const Dataset& dataset, const InventoryMap& inventories, const ModelConfig& model_config,
                   const TrainConfig& train_config) {
  TrainedModel model = initialize_model(model_config, Vocabulary::build(corpus_words(dataset), model_config.max_index));
  train(model, dataset, inventories, train_config);
  return model;
}

Prediction predict(const TrainedModel& model, const std::string& utterance, const Inventory& inventory) {
  const auto net = make_network(model.config);
  const auto source = build_source(utterance, inventory, model.config, model.vocabulary);
  const nn::Matrix<double> memory = net.encode(model.params, source.ids, component_tags(source.ids, model.config));

  std::vector<int> prefix{Vocabulary::kBos};
  std::vector<std::string> tokens;
  bool finished = false;
  for (int step = 0; step < model.config.max_target_len; ++step) {
    const nn::Matrix<double> logits = net.decode_logits(model.params, memory, prefix);
    Eigen::Index next = 0;
    logits.row(logits.rows() - 1).maxCoeff(&next);
    if (next == Vocabulary::kEos) {
      finished = true;
      break;
    }
    prefix.push_back(static_cast<int>(next));
    tokens.push_back(model.vocabulary.token(static_cast<int>(next)));
  }

  std::string text;
  for (const auto& t : tokens) {
    if (!text.empty()) text += ' ';
    text += t;
  }
  try {
    if (model.config.mode == ParserMode::InventoryPointer) {
      return from_index_frame(parse_index_frame(text), inventory);
    }
    return parse_frame(text);
  } catch (const Error& e) {
    std::string message = e.what();
    if (!finished) message += " (no end token within max_target_len)";
    return DecodeFailure{tokens, e.kind(), message};
  }
}

GradCheckResult grad_check(const ModelConfig& config, const Sample& sample, const Inventory& inventory,
                           double epsilon, std::size_t n_params) {
  if (config.dropout > 0.0) {
    throw Error(ErrorKind::InvalidConfig, "grad_check needs a deterministic objective; set dropout to 0");
  }
  GradCheckResult result;
  if (n_params == 0) return result;

  Dataset single;
  single.samples.push_back(sample);
  TrainedModel model = initialize_model(config, Vocabulary::build(corpus_words(single), config.max_index));
  extend_vocabulary(model, single, config.seed);
  InventoryMap inventories;
  inventories.emplace(sample.domain, inventory);
  const EncodedExample ex = encode_sample(sample, inventories, model);
  const auto net = make_network(model.config);
  const double scale = 1.0 / static_cast<double>(ex.target.size() - 1);

  auto grads = model.params.zeros_like();
  example_loss(net, model, ex, scale, &grads, nullptr);

  auto params = model.params.tensors();
  auto grad_views = grads.tensors();
  const Eigen::Index total = model.params.parameter_count();
  Rng rng(config.seed + 17);
  for (std::size_t n = 0; n < n_params; ++n) {
    Eigen::Index flat = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(total)));
    std::size_t t = 0;
    while (flat >= params[t].second->size()) flat -= params[t++].second->size();
    double& value = params[t].second->data()[flat];
    const double analytic = grad_views[t].second->data()[flat];
    const double saved = value;
    value = saved + epsilon;
    const double plus = example_loss(net, model, ex, scale, nullptr, nullptr);
    value = saved - epsilon;
    const double minus = example_loss(net, model, ex, scale, nullptr, nullptr);
    value = saved;
    const double numeric = scale * (plus - minus) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    result.max_relative_error = std::max(result.max_relative_error, std::abs(analytic - numeric) / denom);
    ++result.checked;
  }
  result.valid = true;
  return result;
}

}  // namespace invparse
