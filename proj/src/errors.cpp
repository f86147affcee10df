#include "provaudit/errors.hpp"

namespace provaudit {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::DuplicateIndex: return "DuplicateIndex";
    case ErrorCode::GapInIndices: return "GapInIndices";
    case ErrorCode::InvalidThreshold: return "InvalidThreshold";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::OutOfOrderEvent: return "OutOfOrderEvent";
    case ErrorCode::UnknownNode: return "UnknownNode";
    case ErrorCode::NotAMemoryWrite: return "NotAMemoryWrite";
    case ErrorCode::NotAMemoryRead: return "NotAMemoryRead";
    case ErrorCode::NotASink: return "NotASink";
    case ErrorCode::VersionMismatch: return "VersionMismatch";
    case ErrorCode::CorruptSnapshot: return "CorruptSnapshot";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::DimensionMismatch: return "DimensionMismatch";
    case ErrorCode::JudgeUnavailable: return "JudgeUnavailable";
    case ErrorCode::MalformedVerdict: return "MalformedVerdict";
    case ErrorCode::EventNotInPrefix: return "EventNotInPrefix";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(error_code_name(code)) + ": " + message), code_(code) {}

void raise(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace provaudit
