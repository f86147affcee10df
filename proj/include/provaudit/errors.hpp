#pragma once

#include <stdexcept>
#include <string>

namespace provaudit {

enum class ErrorCode {
  MalformedLine,
  DuplicateIndex,
  GapInIndices,
  InvalidThreshold,
  ParseError,
  OutOfOrderEvent,
  UnknownNode,
  NotAMemoryWrite,
  NotAMemoryRead,
  NotASink,
  VersionMismatch,
  CorruptSnapshot,
  ProviderUnavailable,
  DimensionMismatch,
  JudgeUnavailable,
  MalformedVerdict,
  EventNotInPrefix,
  IoError,
};

const char* error_code_name(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void raise(ErrorCode code, const std::string& message);

}  // namespace provaudit
