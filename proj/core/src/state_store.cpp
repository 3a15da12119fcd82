#include "flowpilot/state_store.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>

#include "flowpilot/error.hpp"

namespace fs = std::filesystem;

namespace flowpilot {

StateStore::StateStore(fs::path root) : root_(std::move(root)) { fs::create_directories(root_); }

fs::path StateStore::design_dir(const std::string& design_id) const {
  require(is_identifier(design_id) || (!design_id.empty() && design_id.find_first_of("/\\.") == std::string::npos),
          "invalid design id '" + design_id + "'");
  return root_ / design_id;
}

fs::path StateStore::runs_root(const std::string& design_id) const { return design_dir(design_id) / "runs"; }

bool StateStore::exists(const std::string& design_id) const {
  std::error_code ec;
  return fs::exists(design_dir(design_id) / "events.jsonl", ec) || !snapshots(design_id).empty();
}

std::vector<std::string> StateStore::list() const {
  std::vector<std::string> out;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(root_, ec)) {
    if (e.is_directory() && !snapshots(e.path().filename().string()).empty()) out.push_back(e.path().filename().string());
  }
  std::sort(out.begin(), out.end());
  return out;
}

PipelineEvent StateStore::append_event(const std::string& design_id, const std::string& type, nlohmann::json data) {
  std::lock_guard lock(mutex_);
  const auto dir = design_dir(design_id);
  fs::create_directories(dir);
  const auto file = dir / "events.jsonl";
  auto cached = event_counts_.find(design_id);
  if (cached == event_counts_.end()) {
    std::uint64_t count = 0;
    std::ifstream in(file);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty()) ++count;
    }
    cached = event_counts_.emplace(design_id, count).first;
  }
  PipelineEvent e;
  e.seq = ++cached->second;
  e.design_id = design_id;
  e.type = type;
  e.data = std::move(data);
  e.time_ms = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch()).count();
  std::ofstream out(file, std::ios::app);
  out << to_json(e).dump() << "\n";
  out.flush();
  return e;
}

std::vector<PipelineEvent> StateStore::events(const std::string& design_id, std::uint64_t after) const {
  std::lock_guard lock(mutex_);
  std::vector<PipelineEvent> out;
  std::ifstream in(design_dir(design_id) / "events.jsonl");
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      auto e = pipeline_event_from_json(nlohmann::json::parse(line));
      if (e.seq > after) out.push_back(std::move(e));
    } catch (const nlohmann::json::exception&) {
      // A torn final line from a crash mid-write is skipped.
    }
  }
  return out;
}

void StateStore::write_snapshot(const PipelineState& state) {
  std::lock_guard lock(mutex_);
  const auto dir = design_dir(state.design_id);
  fs::create_directories(dir);
  char name[32];
  std::snprintf(name, sizeof name, "snapshot-%04d.json", state.snapshot_seq);
  const auto tmp = dir / (std::string(name) + ".tmp");
  {
    std::ofstream out(tmp);
    out << to_json(state).dump(1) << "\n";
    if (!out) fail(ErrorCode::PreconditionViolation, "cannot write snapshot " + tmp.string());
  }
  fs::rename(tmp, dir / name);
}

std::vector<fs::path> StateStore::snapshots(const std::string& design_id) const {
  std::vector<fs::path> out;
  std::error_code ec;
  for (const auto& e : fs::directory_iterator(root_ / design_id, ec)) {
    const auto n = e.path().filename().string();
    if (n.rfind("snapshot-", 0) == 0 && e.path().extension() == ".json") out.push_back(e.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

PipelineState StateStore::load(const std::string& design_id) const {
  const auto snaps = snapshots(design_id);
  if (snaps.empty()) fail(ErrorCode::NotFound, "no design '" + design_id + "' in " + root_.string());
  std::ifstream in(snaps.back());
  try {
    return pipeline_state_from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::InvalidConfig, snaps.back().string() + ": " + e.what());
  }
}

}  // namespace flowpilot
