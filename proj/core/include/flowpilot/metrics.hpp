#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

namespace flowpilot {

/// Physical-design flow stages, in flow order.
enum class Stage { synthesis, floorplan, placement, cts, routing, signoff };

std::string_view to_string(Stage stage);
std::optional<Stage> stage_from_string(std::string_view text);

/// Which notion of area `RunMetrics::area_um2` holds.
enum class AreaSource { absent, cell, die };

std::string_view to_string(AreaSource source);

/// PPA and signoff numbers parsed from one flow run. Fields that no report
/// supplied stay std::nullopt; they are never filled with zeros.
struct RunMetrics {
  std::string design_name;
  std::optional<double> area_um2;
  AreaSource area_source = AreaSource::absent;
  std::optional<double> die_width_um;
  std::optional<double> die_height_um;
  std::optional<double> critical_path_delay_ps;
  std::optional<double> clock_period_ps;
  std::optional<double> worst_setup_slack_ps;
  std::optional<double> worst_hold_slack_ps;
  std::optional<double> power_uw;
  std::optional<double> placement_utilization_pct;
  std::optional<std::int64_t> drc_violation_count;
  std::optional<std::int64_t> lvs_error_count;
  std::optional<double> run_wall_seconds;

  std::optional<double> die_area_um2() const;

  bool operator==(const RunMetrics&) const = default;
};

struct FlowErrorRecord {
  Stage stage = Stage::synthesis;
  std::string code;
  std::string message;
  std::string log_path;

  bool operator==(const FlowErrorRecord&) const = default;
};

struct PpaDelta {
  RunMetrics baseline;
  RunMetrics optimized;
  std::optional<double> area_delta_pct;
  std::optional<double> delay_delta_pct;
  std::optional<double> power_delta_pct;
};

struct PpaRatio {
  std::string numerator_source;
  std::string denominator_source;
  std::optional<double> area_ratio;
  std::optional<double> delay_ratio;
  std::optional<double> power_ratio;
};

struct RunArtifacts {
  RunMetrics metrics;
  std::vector<FlowErrorRecord> errors;
};

/// Scans `run_directory` recursively for recognized report files:
///   metrics.json   canonical document (see write_metrics_json)
///   metrics.csv    OpenLane-style header row + one value row
///   *.rpt          with "sta"/"timing" in the name: OpenSTA path reports
///   *.rpt          with "drc" in the name: one `violation ...` line each
///   *.rpt          with "lvs" in the name: `Total errors = N`
///   *.log          `[ERROR]` lines become FlowErrorRecords
/// Later sources only fill fields still absent, in the order above.
/// Throws Error{MissingReports} or MalformedReport.
RunArtifacts parse_run_artifacts(const std::filesystem::path& run_directory);

/// (optimized - baseline) / baseline * 100 per metric; negative is better.
PpaDelta compute_delta(const RunMetrics& baseline, const RunMetrics& optimized);

/// candidate / reference per metric; below 1 means the candidate wins.
PpaRatio compute_ratio(const RunMetrics& candidate, const RunMetrics& reference,
                       std::string candidate_label = "candidate",
                       std::string reference_label = "reference");

nlohmann::json to_json(const RunMetrics& metrics);
RunMetrics metrics_from_json(const nlohmann::json& doc);
nlohmann::json to_json(const FlowErrorRecord& record);
FlowErrorRecord flow_error_from_json(const nlohmann::json& doc);

void write_metrics_json(const std::filesystem::path& file, const RunMetrics& metrics);
RunMetrics read_metrics_json(const std::filesystem::path& file);

}  // namespace flowpilot
