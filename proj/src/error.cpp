#include "clinctx/error.hpp"

namespace clinctx {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMalformedDocument: return "MalformedDocument";
    case ErrorCode::kMissingPatientId: return "MissingPatientId";
    case ErrorCode::kUndecodableDocument: return "UndecodableDocument";
    case ErrorCode::kPatientMismatch: return "PatientMismatch";
    case ErrorCode::kDuplicateEntry: return "DuplicateEntry";
    case ErrorCode::kInvalidParams: return "InvalidParams";
    case ErrorCode::kEmptyQuery: return "EmptyQuery";
    case ErrorCode::kWindowTooSmall: return "WindowTooSmall";
    case ErrorCode::kEmptyRegistry: return "EmptyRegistry";
    case ErrorCode::kBackendError: return "BackendError";
    case ErrorCode::kProfileMismatch: return "ProfileMismatch";
    case ErrorCode::kUnknownAutomation: return "UnknownAutomation";
    case ErrorCode::kEmptyPatientSet: return "EmptyPatientSet";
    case ErrorCode::kEmptyDataset: return "EmptyDataset";
    case ErrorCode::kNoHistory: return "NoHistory";
    case ErrorCode::kMissingSnapshot: return "MissingSnapshot";
    case ErrorCode::kAdjudicationFailed: return "AdjudicationFailed";
    case ErrorCode::kClassificationFailed: return "ClassificationFailed";
    case ErrorCode::kNormalizationFailed: return "NormalizationFailed";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kUnmatchedIds: return "UnmatchedIds";
    case ErrorCode::kMalformedLog: return "MalformedLog";
    case ErrorCode::kInvalidBinWidth: return "InvalidBinWidth";
    case ErrorCode::kNegativeInput: return "NegativeInput";
    case ErrorCode::kInvalidCounts: return "InvalidCounts";
    case ErrorCode::kUnknownFormula: return "UnknownFormula";
    case ErrorCode::kUnknownPatient: return "UnknownPatient";
    case ErrorCode::kInvalidSelection: return "InvalidSelection";
    case ErrorCode::kUnknownSession: return "UnknownSession";
    case ErrorCode::kUnknownTurn: return "UnknownTurn";
    case ErrorCode::kDuplicateFeedback: return "DuplicateFeedback";
    case ErrorCode::kIncompleteScores: return "IncompleteScores";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kIoError: return "IoError";
  }
  return "Unknown";
}

}  // namespace clinctx
