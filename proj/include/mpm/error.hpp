#pragma once

#include <stdexcept>
#include <string>

namespace mpm {

enum class ErrorCode {
  kFormat,
  kUnsupportedChannels,
  kUnsupportedEncoding,
  kIo,
  kInvalidArgument,
  kEmptyTrack,
  kDegenerateTrack,
  kInvalidCodebook,
  kInvalidToken,
  kAlignment,
  kLength,
  kUndefinedLoss,
  kNonFiniteGradient,
  kDivergence,
  kLayerOutOfRange,
  kInvalidSpan,
  kDegenerateLabels,
  kParse,
  kUndefinedCorrelation,
  kEmptyInput,
  kTooFewItems,
  kConfig,
  kMissingArtifact,
  kSchema,
};

const char* to_string(ErrorCode code);

/// Every failure raised by the library carries one of the codes above so
/// callers (and tests) can branch on the kind without parsing messages.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

inline const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kFormat: return "format error";
    case ErrorCode::kUnsupportedChannels: return "unsupported channels";
    case ErrorCode::kUnsupportedEncoding: return "unsupported encoding";
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kEmptyTrack: return "empty track";
    case ErrorCode::kDegenerateTrack: return "degenerate track";
    case ErrorCode::kInvalidCodebook: return "invalid codebook";
    case ErrorCode::kInvalidToken: return "invalid token";
    case ErrorCode::kAlignment: return "alignment error";
    case ErrorCode::kLength: return "length error";
    case ErrorCode::kUndefinedLoss: return "undefined loss";
    case ErrorCode::kNonFiniteGradient: return "non-finite gradient";
    case ErrorCode::kDivergence: return "divergence";
    case ErrorCode::kLayerOutOfRange: return "layer out of range";
    case ErrorCode::kInvalidSpan: return "invalid span";
    case ErrorCode::kDegenerateLabels: return "degenerate labels";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kUndefinedCorrelation: return "undefined correlation";
    case ErrorCode::kEmptyInput: return "empty input";
    case ErrorCode::kTooFewItems: return "too few items";
    case ErrorCode::kConfig: return "config error";
    case ErrorCode::kMissingArtifact: return "missing artifact";
    case ErrorCode::kSchema: return "schema error";
  }
  return "error";
}

}  // namespace mpm
