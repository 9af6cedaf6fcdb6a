#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace invparse {

enum class ErrorKind {
  // frame
  UnbalancedBrackets,
  EmptyFrame,
  RootNotIntent,
  LabelMissing,
  // inventory
  MalformedLabel,
  EmptyOntology,
  DuplicateLabel,
  UnknownLabel,
  UnknownIndex,
  // dataset / io
  Io,
  BadFieldCount,
  FrameParse,
  // benchmark
  SingleDomainDataset,
  // model
  SourceTooLong,
  TargetTooLong,
  ShapeMismatch,
  NonFiniteLoss,
  InvalidConfig,
  // synth
  InvalidSpec,
  // evaluate
  LengthMismatch,
  UnknownDomain,
};

std::string_view to_string(ErrorKind kind);

/// Exception carrying a machine-readable category. The CLI prints
/// `error[<category>]: <message>` on stderr.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const { return kind_; }
  std::string_view category() const { return to_string(kind_); }

 private:
  ErrorKind kind_;
};

}  // namespace invparse
