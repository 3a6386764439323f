#include "hallu/error.hpp"

namespace hallu {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EmptyGeneration: return "EmptyGeneration";
    case ErrorCode::ContextOverflow: return "ContextOverflow";
    case ErrorCode::BackendUnavailable: return "BackendUnavailable";
    case ErrorCode::MalformedResponse: return "MalformedResponse";
    case ErrorCode::UnknownToken: return "UnknownToken";
    case ErrorCode::InvalidRecord: return "InvalidRecord";
    case ErrorCode::EmptySequence: return "EmptySequence";
    case ErrorCode::SingleClassInput: return "SingleClassInput";
    case ErrorCode::NonFiniteFeature: return "NonFiniteFeature";
    case ErrorCode::DivergedLoss: return "DivergedLoss";
    case ErrorCode::WrongModelKind: return "WrongModelKind";
    case ErrorCode::LengthMismatch: return "LengthMismatch";
    case ErrorCode::EmptyInput: return "EmptyInput";
    case ErrorCode::NoPositives: return "NoPositives";
    case ErrorCode::MalformedRecord: return "MalformedRecord";
    case ErrorCode::UnknownTask: return "UnknownTask";
    case ErrorCode::UnknownKeyValue: return "UnknownKeyValue";
    case ErrorCode::InsufficientClassCount: return "InsufficientClassCount";
    case ErrorCode::MissingCacheRows: return "MissingCacheRows";
    case ErrorCode::ConfigError: return "ConfigError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::BackendUnavailable:
    case ErrorCode::MalformedResponse:
      return 2;
    case ErrorCode::ConfigError:
    case ErrorCode::InvalidArgument:
    case ErrorCode::UnknownTask:
    case ErrorCode::WrongModelKind:
      return 3;
    default:
      return 1;
  }
}

}  // namespace hallu
