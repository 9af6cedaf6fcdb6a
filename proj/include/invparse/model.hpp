#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "invparse/dataset.hpp"
#include "invparse/error.hpp"
#include "invparse/inventory.hpp"
#include "invparse/transformer.hpp"
#include "invparse/vocabulary.hpp"

namespace invparse {

/// InventoryPointer: the encoder reads the linearized inventory and the
/// utterance; the decoder emits component indices. CopyGenerate: the
/// encoder reads only the utterance; the decoder vocabulary is augmented
/// with one token per ontology label.
enum class ParserMode { InventoryPointer, CopyGenerate };

std::string_view to_string(ParserMode mode);
ParserMode parse_mode(std::string_view name);

struct ModelConfig {
  ParserMode mode = ParserMode::InventoryPointer;
  InventoryVariant inventory_variant = InventoryVariant::IndexTypeSpan;
  int layers = 2;
  int model_dim = 64;
  int heads = 4;
  int ffn_dim = 128;
  int max_source_len = 512;
  int max_target_len = 64;  // decoder steps, including the end token
  int max_index = 64;       // reserved index tokens 1..max_index
  double dropout = 0.1;
  /// Pointer mode: inventory tokens also receive their component's index
  /// embedding.
  bool tag_components = true;
  std::uint64_t seed = 1;

  void validate() const;
  nn::TransformerShape shape() const;
};

struct TrainConfig {
  int batch_size = 16;
  int epochs = 10;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<double> grad_clip = 1.0;
  /// Learning rate falls linearly to zero over the stage's updates.
  bool linear_decay = false;
  std::uint64_t seed = 1;
  /// Samples drawn per epoch from the shuffled data; 0 means all.
  std::size_t max_samples_per_epoch = 0;
  /// Pointer mode only. Each inventory component the gold frame does not
  /// use is left out of an example's inventory with this probability, and
  /// the remaining components are renumbered in sorted order. Forces the
  /// decoder to read indices off the inventory instead of memorizing a
  /// domain's fixed numbering.
  double inventory_dropout = 0.0;
  /// Each distinct word of an example's utterance is replaced, with this
  /// probability, by a random vocabulary word everywhere it occurs in the
  /// example (utterance, inventory spans, frame leaves).
  double word_substitution = 0.0;
  /// Tag written into the training log ("source", "target", ...).
  std::string split = "train";

  void validate() const;
};

struct LogRecord {
  int epoch = 0;
  std::string split;
  double loss = 0.0;

  bool operator==(const LogRecord&) const = default;
};

struct TrainedModel {
  ModelConfig config;
  Vocabulary vocabulary;
  nn::TransformerParams<double> params;
  std::vector<LogRecord> training_log;
};

struct EncodedSource {
  std::vector<int> ids;
  std::vector<std::string> warnings;
};

/// Token ids for one training pair. `target` is `<s> ... </s>`.
struct EncodedExample {
  std::vector<int> source;
  std::vector<int> target;
};

/// Pointer mode: linearized inventory, `<sep>`, lowercased utterance.
/// Copy-generate mode: lowercased utterance only.
EncodedSource build_source(const std::string& utterance, const Inventory& inventory, const ModelConfig& config,
                           const Vocabulary& vocabulary);

/// Pointer mode: index-frame tokens; copy-generate: label-frame tokens.
/// Both wrapped in `<s>`/`</s>`.
std::vector<int> build_target(const Frame& frame, const Inventory& inventory, ParserMode mode,
                              const Vocabulary& vocabulary, int max_target_len);

EncodedExample encode_sample(const Sample& sample, const InventoryMap& inventories, const TrainedModel& model);

/// Fresh parameters for `vocabulary` drawn from `config.seed`.
TrainedModel initialize_model(const ModelConfig& config, Vocabulary vocabulary);

/// Copy-generate only: appends a randomly initialized embedding row for
/// every label in `dataset` the vocabulary lacks. Returns the number of
/// rows added; always 0 in pointer mode.
std::size_t extend_vocabulary(TrainedModel& model, const Dataset& dataset, std::uint64_t seed);

/// Mean token negative log-likelihood over the batch (no dropout).
double loss(const TrainedModel& model, const std::vector<EncodedExample>& batch);

/// Mean token NLL of a dataset.
double dataset_loss(const TrainedModel& model, const Dataset& dataset, const InventoryMap& inventories);

/// One Adam fine-tuning stage continuing from the current parameters.
/// Returns the number of vocabulary rows added (copy-generate only).
std::size_t train(TrainedModel& model, const Dataset& dataset, const InventoryMap& inventories,
                  const TrainConfig& train_config);

/// Fresh model over the dataset's own vocabulary, then one stage.
TrainedModel train(const Dataset& dataset, const InventoryMap& inventories, const ModelConfig& model_config,
                   const TrainConfig& train_config);

struct DecodeFailure {
  std::vector<std::string> tokens;
  ErrorKind cause = ErrorKind::FrameParse;
  std::string message;
};

using Prediction = std::variant<Frame, DecodeFailure>;

/// Greedy decoding until `</s>` or `max_target_len` steps.
Prediction predict(const TrainedModel& model, const std::string& utterance, const Inventory& inventory);

struct GradCheckResult {
  double max_relative_error = 0.0;
  std::size_t checked = 0;
  bool valid = false;
};

/// Central finite differences against the analytic gradient of the mean
/// token loss of one sample, on `n_params` randomly chosen parameters.
/// Relative error is |a - n| / max(|a|, |n|, 1e-6).
GradCheckResult grad_check(const ModelConfig& config, const Sample& sample, const Inventory& inventory,
                           double epsilon, std::size_t n_params = 200);

}  // namespace invparse
