#pragma once

#include <stdexcept>
#include <string>

namespace jmd {

enum class ErrorCode {
  ZeroVariance,
  LengthMismatch,
  NonPositiveScale,
  DuplicateIndex,
  IndexOutOfRange,
  TooFewPoints,
  SizeLimitExceeded,
  SingularSystem,
  NoValidationPairs,
  EmptyPairs,
  DegenerateData,
  InvalidArgument,
};

const char* to_string(ErrorCode code) noexcept;

/// Raised by every library routine on a violated precondition. The code is
/// stable and is what callers (and the CLI exit-code mapping) dispatch on.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace jmd
