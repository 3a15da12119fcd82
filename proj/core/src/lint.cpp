#include "flowpilot/lint.hpp"

#include <fstream>
#include <random>
#include <regex>
#include <sstream>

#include "flowpilot/error.hpp"
#include "flowpilot/subprocess.hpp"

namespace fs = std::filesystem;

namespace flowpilot {

std::string render_findings(std::span<const LintFinding> findings) {
  std::ostringstream out;
  for (const auto& f : findings) out << f.file << ':' << f.line << ": " << f.severity << ": " << f.message << '\n';
  return out.str();
}

StubLint::StubLint(std::vector<std::vector<LintFinding>> script) : script_(std::move(script)) {
  if (script_.empty()) script_.emplace_back();
}

StubLint StubLint::always_failing(std::string message) {
  return StubLint(std::vector<std::vector<LintFinding>>{{LintFinding{"error", "design.v", 1, std::move(message)}}});
}

std::vector<LintFinding> StubLint::lint(std::span<const SourceFile>) {
  std::lock_guard lock(mutex_);
  const auto i = std::min(log_.size(), script_.size() - 1);
  log_.push_back(script_[i].size());
  return script_[i];
}

std::vector<std::size_t> StubLint::call_log() const {
  std::lock_guard lock(mutex_);
  return log_;
}

VerilatorLint::VerilatorLint(std::string executable, std::string top_module)
    : executable_(std::move(executable)), top_module_(std::move(top_module)) {}

std::vector<LintFinding> parse_verilator_output(std::string_view output) {
  static const std::regex line_re(R"(^%(Warning|Error)(?:-[A-Z0-9_]+)?:\s*([^:\s]+):(\d+):(?:\d+:)?\s*(.*)$)");
  static const std::regex bare_re(R"(^%(Warning|Error)(?:-[A-Z0-9_]+)?:\s*(.*)$)");
  std::vector<LintFinding> out;
  std::istringstream in{std::string(output)};
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::smatch m;
    if (std::regex_match(line, m, line_re)) {
      out.push_back({m[1] == "Error" ? "error" : "warning", m[2], std::stoi(m[3]), m[4]});
    } else if (std::regex_match(line, m, bare_re)) {
      // "%Error: Exiting due to N error(s)" is a summary, not a finding.
      if (m[2].str().rfind("Exiting due to", 0) == 0) continue;
      out.push_back({m[1] == "Error" ? "error" : "warning", "", 0, m[2]});
    }
  }
  return out;
}

std::vector<LintFinding> VerilatorLint::lint(std::span<const SourceFile> files) {
  if (!find_executable(executable_))
    fail(ErrorCode::LintBackendUnavailable, "lint executable '" + executable_ + "' not found");
  std::random_device rd;
  const fs::path dir = fs::temp_directory_path() / ("flowpilot-lint-" + std::to_string(rd()));
  fs::create_directories(dir);
  std::vector<std::string> argv = {executable_, "--lint-only", "-Wall"};
  if (!top_module_.empty()) argv.push_back("--top-module=" + top_module_);
  for (const auto& f : files) {
    const fs::path p = dir / fs::path(f.path).filename();
    std::ofstream(p, std::ios::binary) << f.text;
    argv.push_back(p.filename().string());
  }
  ProcessOptions opts;
  opts.working_directory = dir;
  opts.timeout = std::chrono::minutes(5);
  ProcessResult r;
  try {
    r = run_process(argv, opts);
  } catch (const Error& e) {
    fs::remove_all(dir);
    fail(ErrorCode::LintBackendUnavailable, e.what());
  }
  fs::remove_all(dir);
  auto findings = parse_verilator_output(r.output);
  if (r.exit_code != 0 && findings.empty()) {
    fail(ErrorCode::LintBackendUnavailable,
         "lint exited with status " + std::to_string(r.exit_code) + " without diagnostics: " + r.output);
  }
  return findings;
}

}  // namespace flowpilot
