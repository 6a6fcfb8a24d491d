#include "hemera/error.hpp"

namespace hemera {

std::string_view error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DuplicatePosition: return "DuplicatePosition";
    case ErrorCode::UnsortedInput: return "UnsortedInput";
    case ErrorCode::AlleleMismatch: return "AlleleMismatch";
    case ErrorCode::ColumnCountMismatch: return "ColumnCountMismatch";
    case ErrorCode::LabelNotBinary: return "LabelNotBinary";
    case ErrorCode::AllMissing: return "AllMissing";
    case ErrorCode::IoFailure: return "IoFailure";
    case ErrorCode::InvalidAllele: return "InvalidAllele";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::ConfigInvalid: return "ConfigInvalid";
    case ErrorCode::Mismatch: return "Mismatch";
    case ErrorCode::TokenOutOfRange: return "TokenOutOfRange";
    case ErrorCode::ShapeMismatch: return "ShapeMismatch";
    case ErrorCode::MissingClsToken: return "MissingClsToken";
    case ErrorCode::EmptyBatch: return "EmptyBatch";
    case ErrorCode::RatioInvalid: return "RatioInvalid";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NonFiniteGradient: return "NonFiniteGradient";
    case ErrorCode::SingleClass: return "SingleClass";
    case ErrorCode::StepCountInvalid: return "StepCountInvalid";
    case ErrorCode::EmptyTrainingSet: return "EmptyTrainingSet";
    case ErrorCode::CheckpointMismatch: return "CheckpointMismatch";
    case ErrorCode::MissingArtifact: return "MissingArtifact";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_name(code)) + ": " + message), code_(code) {}

}  // namespace hemera
