#include "flowpilot/error.hpp"

#include <utility>

namespace flowpilot {

std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::PreconditionViolation: return "PreconditionViolation";
    case ErrorCode::NotFound: return "NotFound";
    case ErrorCode::Conflict: return "Conflict";
    case ErrorCode::InvalidConfig: return "InvalidConfig";
    case ErrorCode::MissingReports: return "MissingReports";
    case ErrorCode::MalformedReport: return "MalformedReport";
    case ErrorCode::DivisionByZeroBaseline: return "DivisionByZeroBaseline";
    case ErrorCode::DivisionByZeroReference: return "DivisionByZeroReference";
    case ErrorCode::DuplicateChunkId: return "DuplicateChunkId";
    case ErrorCode::EmptyCorpus: return "EmptyCorpus";
    case ErrorCode::EmptyIndex: return "EmptyIndex";
    case ErrorCode::MalformedChunk: return "MalformedChunk";
    case ErrorCode::BudgetTooSmallForMandatorySections: return "BudgetTooSmallForMandatorySections";
    case ErrorCode::ProviderUnavailable: return "ProviderUnavailable";
    case ErrorCode::TransientProviderFailure: return "TransientProviderFailure";
    case ErrorCode::ResponseTooLarge: return "ResponseTooLarge";
    case ErrorCode::AuthFailure: return "AuthFailure";
    case ErrorCode::PlanningIncomplete: return "PlanningIncomplete";
    case ErrorCode::AnswerSourceClosed: return "AnswerSourceClosed";
    case ErrorCode::GenerationEmpty: return "GenerationEmpty";
    case ErrorCode::VerificationExhausted: return "VerificationExhausted";
    case ErrorCode::LintBackendUnavailable: return "LintBackendUnavailable";
    case ErrorCode::UnparseableProposal: return "UnparseableProposal";
    case ErrorCode::UnknownParameter: return "UnknownParameter";
    case ErrorCode::NoViableCandidates: return "NoViableCandidates";
    case ErrorCode::BackendNotFound: return "BackendNotFound";
    case ErrorCode::RunDirectoryConflict: return "RunDirectoryConflict";
    case ErrorCode::Timeout: return "Timeout";
    case ErrorCode::ParameterOutOfRange: return "ParameterOutOfRange";
    case ErrorCode::Aborted: return "Aborted";
  }
  return "Unknown";
}

std::optional<ErrorCode> error_code_from_string(std::string_view text) {
  for (int i = 0; i <= static_cast<int>(ErrorCode::Aborted); ++i) {
    const auto code = static_cast<ErrorCode>(i);
    if (to_string(code) == text) return code;
  }
  return std::nullopt;
}

ErrorFamily family_of(ErrorCode code) {
  switch (code) {
    case ErrorCode::PreconditionViolation:
    case ErrorCode::InvalidConfig:
      return ErrorFamily::Usage;
    case ErrorCode::NotFound:
      return ErrorFamily::NotFound;
    case ErrorCode::MissingReports:
    case ErrorCode::MalformedReport:
    case ErrorCode::DivisionByZeroBaseline:
    case ErrorCode::DivisionByZeroReference:
    case ErrorCode::DuplicateChunkId:
    case ErrorCode::EmptyCorpus:
    case ErrorCode::EmptyIndex:
    case ErrorCode::MalformedChunk:
    case ErrorCode::BudgetTooSmallForMandatorySections:
      return ErrorFamily::Input;
    case ErrorCode::ProviderUnavailable:
    case ErrorCode::TransientProviderFailure:
    case ErrorCode::ResponseTooLarge:
    case ErrorCode::AuthFailure:
    case ErrorCode::PlanningIncomplete:
    case ErrorCode::AnswerSourceClosed:
    case ErrorCode::GenerationEmpty:
    case ErrorCode::VerificationExhausted:
    case ErrorCode::LintBackendUnavailable:
    case ErrorCode::UnparseableProposal:
    case ErrorCode::UnknownParameter:
    case ErrorCode::NoViableCandidates:
      return ErrorFamily::Agent;
    case ErrorCode::BackendNotFound:
    case ErrorCode::RunDirectoryConflict:
    case ErrorCode::Timeout:
    case ErrorCode::ParameterOutOfRange:
      return ErrorFamily::Flow;
    case ErrorCode::Conflict:
    case ErrorCode::Aborted:
      return ErrorFamily::Pipeline;
  }
  return ErrorFamily::Internal;
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

MalformedReport::MalformedReport(std::filesystem::path file, std::uint64_t byte_offset,
                                 const std::string& detail)
    : Error(ErrorCode::MalformedReport,
            file.string() + " at byte " + std::to_string(byte_offset) + ": " + detail),
      file_(std::move(file)),
      byte_offset_(byte_offset) {}

VerificationExhausted::VerificationExhausted(int revision, std::string lint_output)
    : Error(ErrorCode::VerificationExhausted,
            "lint still failing after revision " + std::to_string(revision)),
      revision_(revision),
      lint_output_(std::move(lint_output)) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace flowpilot
