#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace clinctx {

// Every failure the platform reports maps to one of these codes. The names
// double as the wire-level error strings used by the HTTP API and CLI.
enum class ErrorCode {
  kMalformedDocument,
  kMissingPatientId,
  kUndecodableDocument,
  kPatientMismatch,
  kDuplicateEntry,
  kInvalidParams,
  kEmptyQuery,
  kWindowTooSmall,
  kEmptyRegistry,
  kBackendError,
  kProfileMismatch,
  kUnknownAutomation,
  kEmptyPatientSet,
  kEmptyDataset,
  kNoHistory,
  kMissingSnapshot,
  kAdjudicationFailed,
  kClassificationFailed,
  kNormalizationFailed,
  kEmptyInput,
  kUnmatchedIds,
  kMalformedLog,
  kInvalidBinWidth,
  kNegativeInput,
  kInvalidCounts,
  kUnknownFormula,
  kUnknownPatient,
  kInvalidSelection,
  kUnknownSession,
  kUnknownTurn,
  kDuplicateFeedback,
  kIncompleteScores,
  kConfigError,
  kIoError,
};

std::string_view to_string(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code), detail_(message) {}

  ErrorCode code() const noexcept { return code_; }
  // The message without the code prefix.
  const std::string& detail() const noexcept { return detail_; }

 private:
  ErrorCode code_;
  std::string detail_;
};

}  // namespace clinctx
