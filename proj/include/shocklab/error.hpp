#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace shocklab {

enum class ErrorCode {
  EqualStates,
  OutOfRange,
  NotAdmissible,
  StepTooLarge,
  WrongFlux,
  TailTooShort,
  BadExponent,
  DegenerateShock,
  RangeExceeded,
  Blowup,
  BoundaryLeak,
  NonzeroModePresent,
  TooFewSamples,
  NonPositiveValue,
  HypothesisViolated,
  BadKind,
  MissingChannel,
  ZeroDenominator,
  ParseError,
  ValidationError,
  InvalidArgument,
  IoError,
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::EqualStates: return "EqualStates";
    case ErrorCode::OutOfRange: return "OutOfRange";
    case ErrorCode::NotAdmissible: return "NotAdmissible";
    case ErrorCode::StepTooLarge: return "StepTooLarge";
    case ErrorCode::WrongFlux: return "WrongFlux";
    case ErrorCode::TailTooShort: return "TailTooShort";
    case ErrorCode::BadExponent: return "BadExponent";
    case ErrorCode::DegenerateShock: return "DegenerateShock";
    case ErrorCode::RangeExceeded: return "RangeExceeded";
    case ErrorCode::Blowup: return "Blowup";
    case ErrorCode::BoundaryLeak: return "BoundaryLeak";
    case ErrorCode::NonzeroModePresent: return "NonzeroModePresent";
    case ErrorCode::TooFewSamples: return "TooFewSamples";
    case ErrorCode::NonPositiveValue: return "NonPositiveValue";
    case ErrorCode::HypothesisViolated: return "HypothesisViolated";
    case ErrorCode::BadKind: return "BadKind";
    case ErrorCode::MissingChannel: return "MissingChannel";
    case ErrorCode::ZeroDenominator: return "ZeroDenominator";
    case ErrorCode::ParseError: return "ParseError";
    case ErrorCode::ValidationError: return "ValidationError";
    case ErrorCode::InvalidArgument: return "InvalidArgument";
    case ErrorCode::IoError: return "IoError";
  }
  return "Unknown";
}

/// Every failure raised by the library carries one of the codes above so
/// callers (and the CLI exit-status mapping) can dispatch on it.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace shocklab
