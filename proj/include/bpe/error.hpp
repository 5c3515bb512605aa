#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bpe {

enum class ErrorCode {
  NonNormalizable,
  InvalidParam,
  NotSupercritical,
  NotDeterministic,
  StateSpaceTooLarge,
  ZeroFactor,
  OutOfRange,
  SearchExhausted,
  TruncationTooTight,
  DepthTooShallow,
  OutOfScope,
  Unsupported,
};

std::string_view to_string(ErrorCode code);

// All library failures surface as this exception; the code maps onto CLI exit statuses.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::NonNormalizable: return "NON_NORMALIZABLE";
    case ErrorCode::InvalidParam: return "INVALID_PARAM";
    case ErrorCode::NotSupercritical: return "NOT_SUPERCRITICAL";
    case ErrorCode::NotDeterministic: return "NOT_DETERMINISTIC";
    case ErrorCode::StateSpaceTooLarge: return "STATE_SPACE_TOO_LARGE";
    case ErrorCode::ZeroFactor: return "ZERO_FACTOR";
    case ErrorCode::OutOfRange: return "OUT_OF_RANGE";
    case ErrorCode::SearchExhausted: return "SEARCH_EXHAUSTED";
    case ErrorCode::TruncationTooTight: return "TRUNCATION_TOO_TIGHT";
    case ErrorCode::DepthTooShallow: return "DEPTH_TOO_SHALLOW";
    case ErrorCode::OutOfScope: return "OUT_OF_SCOPE";
    case ErrorCode::Unsupported: return "UNSUPPORTED";
  }
  return "UNKNOWN";
}

}  // namespace bpe
