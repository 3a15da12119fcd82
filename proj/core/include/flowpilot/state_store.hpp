#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "flowpilot/pipeline_state.hpp"

namespace flowpilot {

/// On-disk layout per design:
///   <root>/<design_id>/events.jsonl          append-only event log
///   <root>/<design_id>/snapshot-NNNN.json    one state document per checkpoint
///   <root>/<design_id>/hdl/                  generated sources
///   <root>/<design_id>/runs/<design>/<job>/  flow run directories
class StateStore {
 public:
  explicit StateStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path design_dir(const std::string& design_id) const;
  std::filesystem::path runs_root(const std::string& design_id) const;
  bool exists(const std::string& design_id) const;
  std::vector<std::string> list() const;

  /// Appends one line and returns the event with its sequence number (1-based).
  PipelineEvent append_event(const std::string& design_id, const std::string& type, nlohmann::json data);
  /// Events with seq > after.
  std::vector<PipelineEvent> events(const std::string& design_id, std::uint64_t after = 0) const;

  /// Writes snapshot-<state.snapshot_seq>.json via a temporary file and rename.
  void write_snapshot(const PipelineState& state);
  std::vector<std::filesystem::path> snapshots(const std::string& design_id) const;
  /// Latest snapshot; throws Error{NotFound} when the design has none.
  PipelineState load(const std::string& design_id) const;

 private:
  std::filesystem::path root_;
  mutable std::mutex mutex_;
  std::map<std::string, std::uint64_t> event_counts_;
};

}  // namespace flowpilot
