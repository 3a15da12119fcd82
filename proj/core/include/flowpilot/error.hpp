#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace flowpilot {

enum class ErrorCode {
  // generic
  PreconditionViolation,
  NotFound,
  Conflict,
  InvalidConfig,
  // metrics
  MissingReports,
  MalformedReport,
  DivisionByZeroBaseline,
  DivisionByZeroReference,
  // ragstore
  DuplicateChunkId,
  EmptyCorpus,
  EmptyIndex,
  MalformedChunk,
  BudgetTooSmallForMandatorySections,
  // llm gateway
  ProviderUnavailable,
  TransientProviderFailure,
  ResponseTooLarge,
  AuthFailure,
  // agents
  PlanningIncomplete,
  AnswerSourceClosed,
  GenerationEmpty,
  VerificationExhausted,
  LintBackendUnavailable,
  UnparseableProposal,
  UnknownParameter,
  NoViableCandidates,
  // flow
  BackendNotFound,
  RunDirectoryConflict,
  Timeout,
  ParameterOutOfRange,
  // orchestrator
  Aborted,
};

/// Coarse grouping used by the CLI to pick an exit code.
enum class ErrorFamily { Usage, NotFound, Input, Agent, Flow, Pipeline, Internal };

std::string_view to_string(ErrorCode code);
std::optional<ErrorCode> error_code_from_string(std::string_view text);
ErrorFamily family_of(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message);

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// A report file matched a known name but could not be parsed.
class MalformedReport : public Error {
 public:
  MalformedReport(std::filesystem::path file, std::uint64_t byte_offset, const std::string& detail);

  const std::filesystem::path& file() const noexcept { return file_; }
  std::uint64_t byte_offset() const noexcept { return byte_offset_; }

 private:
  std::filesystem::path file_;
  std::uint64_t byte_offset_;
};

/// The HDL repair loop ran out of attempts; carries the last lint output.
class VerificationExhausted : public Error {
 public:
  VerificationExhausted(int revision, std::string lint_output);

  int revision() const noexcept { return revision_; }
  const std::string& lint_output() const noexcept { return lint_output_; }

 private:
  int revision_;
  std::string lint_output_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, const std::string& message) {
  if (!condition) fail(ErrorCode::PreconditionViolation, message);
}

}  // namespace flowpilot
