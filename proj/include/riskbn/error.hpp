#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace riskbn {

enum class ErrorCode {
  DuplicateId,
  UnknownNode,
  CycleDetected,
  ValidationFailed,
  BadSupport,
  BadCount,
  UnsupportedCombination,
  UnnormalizedPosterior,
  ImpossibleEvidence,
  DegenerateWeights,
  InvalidEvidence,
  InvalidConfig,
  DivisionByZero,
  EmptyScenario,
  BadProbability,
  OutOfRange,
  Parse,
};

std::string_view to_string(ErrorCode code);

/// Every failure raised by the engine carries one of the codes above so
/// callers (CLI exit codes, HTTP statuses) can map it without parsing text.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace riskbn
