#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hemera {

enum class ErrorCode {
  MalformedLine,
  DuplicatePosition,
  UnsortedInput,
  AlleleMismatch,
  ColumnCountMismatch,
  LabelNotBinary,
  AllMissing,
  IoFailure,
  InvalidAllele,
  UnknownToken,
  ConfigInvalid,
  Mismatch,
  TokenOutOfRange,
  ShapeMismatch,
  MissingClsToken,
  EmptyBatch,
  RatioInvalid,
  TooFewSamples,
  NonFiniteGradient,
  SingleClass,
  StepCountInvalid,
  EmptyTrainingSet,
  CheckpointMismatch,
  MissingArtifact,
};

std::string_view error_name(ErrorCode code);

// Every failure raised by the library carries one of the codes above so that
// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace hemera
