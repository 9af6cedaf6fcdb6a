#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <tuple>
#include <vector>

#include "invparse/dataset.hpp"
#include "invparse/model.hpp"

namespace invparse {

struct SampleResult {
  std::size_t id = 0;
  Prediction prediction;
  Frame gold;
  bool match = false;
};

struct EvalReport {
  std::vector<SampleResult> per_sample;
  double em = 0.0;
  std::size_t n = 0;
};

/// Lowercased, whitespace-normalized serialization used for comparison.
std::string comparison_key(const Frame& frame);

/// Throws LengthMismatch when the lists differ in length. DecodeFailure
/// never matches. An empty input has EM 0.
EvalReport exact_match(const std::vector<Prediction>& predictions, const std::vector<Frame>& golds);

struct RunResult {
  std::string domain;
  int k = 0;
  std::string mode;
  std::uint64_t seed = 0;
  EvalReport report;
};

struct CellStats {
  double mean = 0.0;
  double std = 0.0;  // population standard deviation
  std::size_t runs = 0;
};

using CellKey = std::tuple<std::string, int, std::string>;  // (domain, k, mode)

struct AggregateReport {
  std::map<CellKey, CellStats> cells;

  /// One row per domain, one column per (mode, k), cells `mean ± std` in
  /// EM percent.
  std::string table() const;
  /// One JSON object per cell.
  std::string jsonl() const;
};

AggregateReport aggregate(const std::vector<RunResult>& runs);

struct DomainProfile {
  std::string domain;
  double compositionality = 0.0;
  std::size_t ontology_size = 0;
};

/// Throws UnknownDomain if the dataset has no sample for `domain`.
DomainProfile domain_profile(const Dataset& dataset, const std::string& domain);

/// EM against domain characteristics for every profiled domain at a
/// single k, one column per mode present in the report.
std::string profile_table(const std::vector<DomainProfile>& profiles, const AggregateReport& report, int k);

enum class EditKind { Keep, Insert, Delete };

struct EditOp {
  EditKind kind;
  std::string token;

  bool operator==(const EditOp&) const = default;
};

/// Ops turn the prediction tokens into the gold tokens.
struct EditScript {
  std::vector<EditOp> ops;
  std::size_t distance = 0;

  /// Tokens on one line, `+tok` for insertions and `-tok` for deletions.
  std::string render() const;
  std::vector<std::string> apply_to_source() const;
};

/// Insert/delete edit script of minimal length between token sequences.
EditScript token_diff(const std::vector<std::string>& prediction, const std::vector<std::string>& gold);
EditScript frame_diff(const Frame& prediction, const Frame& gold);

/// Tokens a prediction contributes to a diff: the serialization of a
/// frame, or the raw decoder output of a failure.
std::vector<std::string> prediction_tokens(const Prediction& prediction);

struct DiffEntry {
  std::size_t id = 0;
  std::string utterance;
  bool decode_failure = false;
  EditScript script;
};

struct DiffReport {
  std::size_t total = 0;
  std::vector<DiffEntry> errors;  // sorted by distance, then id
  std::vector<std::size_t> flagged;  // ids drawn for manual inspection

  std::string render() const;
};

/// Parses each prediction line as a label-form frame; lines that do not
/// parse become DecodeFailure entries. Gold comes from a dataset file.
/// `sample` errors (all if fewer) are drawn with `seed` for inspection.
DiffReport diff_predictions(const std::vector<std::string>& prediction_lines, const Dataset& gold,
                            std::size_t sample, std::uint64_t seed);

std::vector<std::string> read_lines(const std::filesystem::path& path);

}  // namespace invparse
