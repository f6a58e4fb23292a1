#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace submix {

enum class ErrorKind {
  MissingFile,
  IoError,
  SchemaError,
  CountMismatch,
  BadMagic,
  UnsupportedVersion,
  TruncatedPayload,
  NonFiniteValue,
  EmptyTask,
  ZeroNormVector,
  IndexOutOfRange,
  NotPositiveDefinite,
  AlreadySelected,
  GroundSetTooLarge,
  NonFiniteGain,
  CapacityExceeded,
  BudgetExceedsCorpus,
  InvalidArgument,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::MissingFile: return "MissingFile";
    case ErrorKind::IoError: return "IoError";
    case ErrorKind::SchemaError: return "SchemaError";
    case ErrorKind::CountMismatch: return "CountMismatch";
    case ErrorKind::BadMagic: return "BadMagic";
    case ErrorKind::UnsupportedVersion: return "UnsupportedVersion";
    case ErrorKind::TruncatedPayload: return "TruncatedPayload";
    case ErrorKind::NonFiniteValue: return "NonFiniteValue";
    case ErrorKind::EmptyTask: return "EmptyTask";
    case ErrorKind::ZeroNormVector: return "ZeroNormVector";
    case ErrorKind::IndexOutOfRange: return "IndexOutOfRange";
    case ErrorKind::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorKind::AlreadySelected: return "AlreadySelected";
    case ErrorKind::GroundSetTooLarge: return "GroundSetTooLarge";
    case ErrorKind::NonFiniteGain: return "NonFiniteGain";
    case ErrorKind::CapacityExceeded: return "CapacityExceeded";
    case ErrorKind::BudgetExceedsCorpus: return "BudgetExceedsCorpus";
    case ErrorKind::InvalidArgument: return "InvalidArgument";
  }
  return "Unknown";
}

/// Every failure raised by the library. The kind is stable and testable; the
/// message names the offending task, field, row or index.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  /// Same kind, message prefixed with `context` (pipeline stage, task id).
  Error with_context(std::string_view context) const {
    Error copy = *this;
    static_cast<std::runtime_error&>(copy) =
        std::runtime_error(std::string(context) + ": " + what());
    return copy;
  }

  /// I/O failures map to exit code 2, everything else to 1.
  bool is_io() const noexcept {
    return kind_ == ErrorKind::MissingFile || kind_ == ErrorKind::IoError;
  }

 private:
  ErrorKind kind_;
};

}  // namespace submix
