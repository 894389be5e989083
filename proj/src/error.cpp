#include "jmd/error.hpp"

namespace jmd {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::ZeroVariance: return "ZeroVariance";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::NonPositiveScale: return "NonPositiveScale";
    case ErrorCode::DuplicateIndex: return "DuplicateIndex";
    case ErrorCode::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorCode::TooFewPoints: return "TooFewPoints";
    case ErrorCode::SizeLimitExceeded: return "SizeLimitExceeded";
    case ErrorCode::SingularSystem: return "SingularSystem";
    case ErrorCode::NoValidationPairs: return "NoValidationPairs";
    case ErrorCode::EmptyPairs: return "EmptyPairs";
    case ErrorCode::DegenerateData: return "DegenerateData";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

}  // namespace jmd
