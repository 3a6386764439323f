#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace hallu {

enum class ErrorCode {
  // provider
  EmptyGeneration,
  ContextOverflow,
  BackendUnavailable,
  MalformedResponse,
  UnknownToken,
  InvalidRecord,
  // features
  EmptySequence,
  // classifiers
  SingleClassInput,
  NonFiniteFeature,
  DivergedLoss,
  WrongModelKind,
  // metrics
  LengthMismatch,
  EmptyInput,
  NoPositives,
  // datasets
  MalformedRecord,
  UnknownTask,
  UnknownKeyValue,
  InsufficientClassCount,
  // experiment
  MissingCacheRows,
  ConfigError,
  InvalidArgument,
  IoError,
};

std::string_view to_string(ErrorCode code);

/// Process exit code for the CLI: 1 data error, 2 backend error, 3 config error.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& detail)
      : std::runtime_error(std::string(to_string(code)) + ": " + detail),
        code_(code),
        detail_(detail) {}

  ErrorCode code() const noexcept { return code_; }
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace hallu
