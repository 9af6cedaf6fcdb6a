#pragma once

#include <filesystem>
#include <string>

#include "invparse/model.hpp"

namespace invparse {

/// Checkpoint layout:
///   8 bytes   magic "INVPCKPT"
///   8 bytes   header length N, little-endian uint64
///   N bytes   JSON header: format version, model config, vocabulary
///             tokens, tensor table (name, rows, cols, offset), training log
///   rest      tensor payloads, column-major little-endian IEEE-754 doubles
void save_model(const TrainedModel& model, const std::filesystem::path& path);
TrainedModel load_model(const std::filesystem::path& path);

/// Line-delimited `{"epoch":..,"split":..,"loss":..}` records.
std::string training_log_jsonl(const TrainedModel& model);

}  // namespace invparse
