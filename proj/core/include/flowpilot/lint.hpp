#pragma once

#include <mutex>
#include <span>
#include <string>
#include <vector>

namespace flowpilot {

struct SourceFile {
  std::string path;
  std::string text;

  bool operator==(const SourceFile&) const = default;
};

struct LintFinding {
  std::string severity;  // "error" or "warning"
  std::string file;
  int line = 0;
  std::string message;

  bool operator==(const LintFinding&) const = default;
};

/// "file:line: severity: message", one per line.
std::string render_findings(std::span<const LintFinding> findings);

class LintBackend {
 public:
  virtual ~LintBackend() = default;
  /// Throws Error{LintBackendUnavailable} when the tool cannot run.
  virtual std::vector<LintFinding> lint(std::span<const SourceFile> files) = 0;
};

/// Replays scripted findings, one list per call; the last list repeats.
class StubLint : public LintBackend {
 public:
  StubLint() : StubLint(std::vector<std::vector<LintFinding>>(1)) {}
  explicit StubLint(std::vector<std::vector<LintFinding>> script);
  StubLint(StubLint&& other) noexcept : script_(std::move(other.script_)), log_(std::move(other.log_)) {}

  static StubLint always_clean() { return StubLint(); }
  static StubLint always_failing(std::string message = "scripted lint failure");

  std::vector<LintFinding> lint(std::span<const SourceFile> files) override;

  /// Number of findings returned by each call so far.
  std::vector<std::size_t> call_log() const;

 private:
  std::vector<std::vector<LintFinding>> script_;
  mutable std::mutex mutex_;
  std::vector<std::size_t> log_;
};

/// Shells out to `verilator --lint-only -Wall` in a scratch directory.
class VerilatorLint : public LintBackend {
 public:
  explicit VerilatorLint(std::string executable = "verilator", std::string top_module = {});

  std::vector<LintFinding> lint(std::span<const SourceFile> files) override;

 private:
  std::string executable_;
  std::string top_module_;
};

/// Parses Verilator diagnostics ("%Warning-WIDTH: a.v:3:5: ...", "%Error: a.v:7:1: ...").
std::vector<LintFinding> parse_verilator_output(std::string_view output);

}  // namespace flowpilot
