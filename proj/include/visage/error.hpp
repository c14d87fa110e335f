#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <string_view>

namespace visage {

enum class ErrorCode {
  UnknownSymbol,
  NonMonotonic,
  MalformedLine,
  InvalidTable,
  EmptyTimeline,
  MissingEntry,
  UnknownTargetId,
  GazeOutOfRange,
  DegenerateTarget,
  TopologyMismatch,
  MissingLandmark,
  MissingTarget,
  NonFiniteInput,
  BadDimensions,
  InsufficientPoints,
  DegenerateConfiguration,
  DegenerateCell,
  ProjectiveDivideByZero,
  UninvertibleWVP,
  Io,
};

constexpr std::string_view to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::UnknownSymbol: return "UnknownSymbol";
    case ErrorCode::NonMonotonic: return "NonMonotonic";
    case ErrorCode::MalformedLine: return "MalformedLine";
    case ErrorCode::InvalidTable: return "InvalidTable";
    case ErrorCode::EmptyTimeline: return "EmptyTimeline";
    case ErrorCode::MissingEntry: return "MissingEntry";
    case ErrorCode::UnknownTargetId: return "UnknownTargetId";
    case ErrorCode::GazeOutOfRange: return "GazeOutOfRange";
    case ErrorCode::DegenerateTarget: return "DegenerateTarget";
    case ErrorCode::TopologyMismatch: return "TopologyMismatch";
    case ErrorCode::MissingLandmark: return "MissingLandmark";
    case ErrorCode::MissingTarget: return "MissingTarget";
    case ErrorCode::NonFiniteInput: return "NonFiniteInput";
    case ErrorCode::BadDimensions: return "BadDimensions";
    case ErrorCode::InsufficientPoints: return "InsufficientPoints";
    case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
    case ErrorCode::DegenerateCell: return "DegenerateCell";
    case ErrorCode::ProjectiveDivideByZero: return "ProjectiveDivideByZero";
    case ErrorCode::UninvertibleWVP: return "UninvertibleWVP";
    case ErrorCode::Io: return "Io";
  }
  return "Unknown";
}

/// Every failure raised by the library. `line()` is 1-based when the error
/// comes from a text parser, 0 otherwise.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message, std::size_t line = 0)
      : std::runtime_error(format(code, message, line)), code_(code), line_(line) {}

  ErrorCode code() const noexcept { return code_; }
  std::size_t line() const noexcept { return line_; }

 private:
  static std::string format(ErrorCode code, const std::string& message, std::size_t line) {
    std::string out(to_string(code));
    if (line > 0) out += " at line " + std::to_string(line);
    out += ": ";
    out += message;
    return out;
  }

  ErrorCode code_;
  std::size_t line_;
};

}  // namespace visage
