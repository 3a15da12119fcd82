#include "flowpilot/rag.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include <yaml-cpp/yaml.h>

#include "flowpilot/error.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace flowpilot {

std::string_view to_string(ChunkKind kind) {
  switch (kind) {
    case ChunkKind::parameter_doc: return "parameter_doc";
    case ChunkKind::flow_doc: return "flow_doc";
    case ChunkKind::prior_config: return "prior_config";
    case ChunkKind::error_solution: return "error_solution";
  }
  return "flow_doc";
}

std::optional<ChunkKind> chunk_kind_from_string(std::string_view text) {
  for (auto k : {ChunkKind::parameter_doc, ChunkKind::flow_doc, ChunkKind::prior_config,
                 ChunkKind::error_solution}) {
    if (to_string(k) == text) return k;
  }
  return std::nullopt;
}

// --- chunk files -----------------------------------------------------------

DocChunk parse_chunk(std::string_view content, const std::string& origin) {
  auto bad = [&](const std::string& why) -> DocChunk {
    fail(ErrorCode::MalformedChunk, origin + ": " + why);
  };
  std::string text(content);
  if (text.rfind("---", 0) != 0) return bad("missing front matter");
  const auto first_nl = text.find('\n');
  if (first_nl == std::string::npos) return bad("missing front matter");
  const auto close = text.find("\n---", first_nl);
  if (close == std::string::npos) return bad("unterminated front matter");
  const std::string header = text.substr(first_nl + 1, close - first_nl - 1);
  auto body_start = text.find('\n', close + 4);
  std::string body = body_start == std::string::npos ? std::string() : text.substr(body_start + 1);

  DocChunk chunk;
  try {
    const YAML::Node node = YAML::Load(header);
    if (!node.IsMap()) return bad("front matter is not a mapping");
    if (!node["id"]) return bad("missing id");
    chunk.id = node["id"].as<std::string>();
    if (!node["kind"]) return bad("missing kind");
    const auto kind = chunk_kind_from_string(node["kind"].as<std::string>());
    if (!kind) return bad("unknown kind " + node["kind"].as<std::string>());
    chunk.kind = *kind;
    chunk.title = node["title"] ? node["title"].as<std::string>() : chunk.id;
    if (node["parameter_names"]) chunk.parameter_names = node["parameter_names"].as<std::vector<std::string>>();
    chunk.reference_count = node["reference_count"] ? node["reference_count"].as<int>() : 0;
  } catch (const YAML::Exception& e) {
    return bad(e.what());
  }
  if (chunk.id.empty()) return bad("empty id");
  if (chunk.reference_count < 0) return bad("negative reference_count");
  chunk.body = text::trim_copy(body);
  if (chunk.body.empty()) return bad("empty body");
  return chunk;
}

std::string serialize_chunk(const DocChunk& chunk) {
  YAML::Emitter out;
  out << YAML::BeginMap;
  out << YAML::Key << "id" << YAML::Value << chunk.id;
  out << YAML::Key << "kind" << YAML::Value << std::string(to_string(chunk.kind));
  out << YAML::Key << "title" << YAML::Value << chunk.title;
  out << YAML::Key << "parameter_names" << YAML::Value << YAML::Flow << chunk.parameter_names;
  out << YAML::Key << "reference_count" << YAML::Value << chunk.reference_count;
  out << YAML::EndMap;
  return "---\n" + std::string(out.c_str()) + "\n---\n" + chunk.body + "\n";
}

// --- index -------------------------------------------------------------------

namespace {

const std::set<std::string, std::less<>>& stopwords() {
  static const std::set<std::string, std::less<>> words = {
      "a", "an", "the", "of", "to", "in", "on", "for", "and", "or", "via", "with",
      "by", "is", "at", "from", "as", "be", "it", "this", "that", "are"};
  return words;
}

void add_term(std::vector<std::string>& out, std::string word) {
  if (word.empty() || stopwords().count(word)) return;
  out.push_back(std::move(word));
}

std::vector<std::string> unique_sorted(std::vector<std::string> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

bool contains(const std::vector<std::string>& sorted, const std::string& term) {
  return std::binary_search(sorted.begin(), sorted.end(), term);
}

double reference_weight(int reference_count) {
  return 1.0 + std::log1p(static_cast<double>(reference_count));
}

bool ranks_before(const ScoredChunk& a, const ScoredChunk& b) {
  if (a.score != b.score) return a.score > b.score;
  if (a.chunk.reference_count != b.chunk.reference_count)
    return a.chunk.reference_count > b.chunk.reference_count;
  return a.chunk.id < b.chunk.id;
}

}  // namespace

std::vector<std::string> query_terms(std::string_view text) {
  std::vector<std::string> out;
  std::string word;
  auto flush = [&] {
    if (word.empty()) return;
    if (word.find('_') != std::string::npos) {
      for (const auto& part : text::split(word, '_')) add_term(out, part);
      std::string trimmed = word;
      while (!trimmed.empty() && trimmed.front() == '_') trimmed.erase(trimmed.begin());
      while (!trimmed.empty() && trimmed.back() == '_') trimmed.pop_back();
      add_term(out, trimmed);
    } else {
      add_term(out, word);
    }
    word.clear();
  };
  for (unsigned char c : text) {
    if (std::isalnum(c) || c == '_') word.push_back(static_cast<char>(std::tolower(c)));
    else flush();
  }
  flush();
  return unique_sorted(std::move(out));
}

Index::Index(std::vector<DocChunk> chunks) : chunks_(std::move(chunks)) {
  std::sort(chunks_.begin(), chunks_.end(), [](const auto& a, const auto& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < chunks_.size(); ++i) {
    if (chunks_[i].id == chunks_[i - 1].id)
      fail(ErrorCode::DuplicateChunkId, "chunk id '" + chunks_[i].id + "' appears more than once");
  }
  terms_.reserve(chunks_.size());
  for (const auto& c : chunks_) {
    Terms t;
    t.heading = query_terms(c.title);
    for (const auto& p : c.parameter_names) {
      auto more = query_terms(p);
      t.heading.insert(t.heading.end(), more.begin(), more.end());
    }
    t.heading = unique_sorted(std::move(t.heading));
    t.body = query_terms(c.body);
    terms_.push_back(std::move(t));
  }
}

const DocChunk* Index::find(std::string_view id) const {
  auto it = std::lower_bound(chunks_.begin(), chunks_.end(), id,
                             [](const DocChunk& c, std::string_view key) { return c.id < key; });
  return it != chunks_.end() && it->id == id ? &*it : nullptr;
}

double Index::score(std::size_t chunk, std::string_view query) const {
  const auto& t = terms_.at(chunk);
  double overlap = 0;
  for (const auto& term : query_terms(query)) {
    if (contains(t.heading, term)) overlap += 3;
    if (contains(t.body, term)) overlap += 1;
  }
  return overlap * reference_weight(chunks_[chunk].reference_count);
}

IndexHandle build_index(std::vector<DocChunk> chunks) {
  if (chunks.empty()) fail(ErrorCode::EmptyCorpus, "no chunks to index");
  return std::make_shared<const Index>(std::move(chunks));
}

IndexHandle build_index(const fs::path& corpus_dir) {
  std::error_code ec;
  if (!fs::is_directory(corpus_dir, ec)) fail(ErrorCode::EmptyCorpus, corpus_dir.string() + " is not a directory");
  std::vector<fs::path> files;
  for (fs::recursive_directory_iterator it(corpus_dir, ec), end; !ec && it != end; it.increment(ec)) {
    if (it->is_regular_file() && it->path().extension() == ".md") files.push_back(it->path());
  }
  std::sort(files.begin(), files.end());
  std::vector<DocChunk> chunks;
  for (const auto& f : files) {
    std::ifstream in(f, std::ios::binary);
    std::ostringstream buf;
    buf << in.rdbuf();
    chunks.push_back(parse_chunk(buf.str(), f.string()));
  }
  if (chunks.empty()) fail(ErrorCode::EmptyCorpus, "no chunk files under " + corpus_dir.string());
  return build_index(std::move(chunks));
}

// --- queries -----------------------------------------------------------------

namespace {

struct QueryTemplate {
  std::string keyword;
  std::vector<std::string> dominant;
  std::string violation;
};

std::string stage_parameter(Stage stage) {
  switch (stage) {
    case Stage::synthesis: return "SYNTH_STRATEGY";
    case Stage::floorplan: return "FP_CORE_UTIL";
    case Stage::placement: return "PL_TARGET_DENSITY";
    case Stage::cts: return "CTS_TARGET_SKEW";
    case Stage::routing: return "GRT_ADJUSTMENT";
    case Stage::signoff: return "MAGIC_DRC_USE_GDS";
  }
  return "SYNTH_STRATEGY";
}

QueryTemplate template_for(const Issue& issue) {
  switch (issue.category) {
    case IssueCategory::timing:
      if (issue.location == "sta:hold")
        return {"hold timing", {"PL_RESIZER_HOLD_SLACK_MARGIN", "GLB_RESIZER_HOLD_SLACK_MARGIN"}, "violation"};
      return {"timing optimization", {"CLOCK_PERIOD", "SYNTH_STRATEGY"}, "violation"};
    case IssueCategory::area_congestion:
      return {"placement congestion", {"FP_CORE_UTIL", "PL_TARGET_DENSITY"}, "overflow"};
    case IssueCategory::routing:
      return {"routing congestion", {"GRT_ADJUSTMENT", "PL_TARGET_DENSITY"}, "overflow"};
    case IssueCategory::drc:
      return {"DRC", {"PL_TARGET_DENSITY", "FP_CORE_UTIL", "GRT_ADJUSTMENT"}, "violation"};
    case IssueCategory::lvs:
      return {"LVS", {}, "mismatch"};
    case IssueCategory::flow_failure: {
      const auto stage = stage_from_string(issue.location).value_or(Stage::synthesis);
      auto space = issue.suggested_topic.find(' ');
      std::string code = space == std::string::npos ? "error" : issue.suggested_topic.substr(space + 1);
      return {issue.location + " flow error", {stage_parameter(stage)}, code};
    }
  }
  return {"flow", {}, "issue"};
}

std::string join_nonempty(std::initializer_list<std::string> parts) {
  std::string out;
  for (const auto& p : parts) {
    if (p.empty()) continue;
    if (!out.empty()) out.push_back(' ');
    out += p;
  }
  return out;
}

}  // namespace

std::vector<Query> formulate_queries(const IssueSet& issues, const FlowConfig& config,
                                     const OptimizationGoal* goal, const QueryOptions& options) {
  std::vector<Query> out;
  std::set<std::string> seen;
  auto add = [&](Query q) {
    if (seen.insert(q.text).second) out.push_back(std::move(q));
  };
  for (const auto& issue : issues.issues) {
    const auto t = template_for(issue);
    std::string dominant;
    for (const auto& p : t.dominant) {
      if (config.parameters.count(p)) {
        dominant = p;
        break;
      }
    }
    if (dominant.empty() && !t.dominant.empty()) dominant = t.dominant.front();
    add({join_nonempty({options.flow_name, t.keyword, dominant, t.violation}), issue, std::nullopt});
  }
  if (goal) {
    struct Dim {
      const char* tag;
      double weight;
      const char* text;
    };
    std::vector<Dim> dims = {{"area", goal->weights.area, "Area reduction via FP_CORE_UTIL"},
                             {"delay", goal->weights.delay, "Delay reduction via CLOCK_PERIOD"},
                             {"power", goal->weights.power, "Power reduction via SYNTH_STRATEGY"}};
    std::stable_sort(dims.begin(), dims.end(), [](const Dim& a, const Dim& b) { return a.weight > b.weight; });
    for (const auto& d : dims) {
      if (d.weight > 0) add({d.text, std::nullopt, std::string(d.tag)});
    }
  }
  return out;
}

// --- retrieval ---------------------------------------------------------------

std::vector<std::string> RetrievedContext::ids() const {
  std::vector<std::string> out;
  for (const auto& e : entries) out.push_back(e.chunk.id);
  return out;
}

namespace {

void union_into(std::map<std::string, ScoredChunk>& acc, const ScoredChunk& s) {
  auto [it, inserted] = acc.emplace(s.chunk.id, s);
  if (!inserted && s.score > it->second.score) it->second.score = s.score;
}

std::vector<ScoredChunk> ordered(std::map<std::string, ScoredChunk>& acc) {
  std::vector<ScoredChunk> out;
  out.reserve(acc.size());
  for (auto& [id, s] : acc) out.push_back(std::move(s));
  std::sort(out.begin(), out.end(), ranks_before);
  return out;
}

}  // namespace

RetrievedContext retrieve(const IndexHandle& index, std::span<const Query> queries, int n) {
  if (!index || index->size() == 0) fail(ErrorCode::EmptyIndex, "index is empty");
  require(n >= 1, "retrieval depth must be >= 1");
  std::map<std::string, ScoredChunk> acc;
  const auto& chunks = index->chunks();
  for (const auto& q : queries) {
    require(!q.text.empty(), "query text must be non-empty");
    std::vector<ScoredChunk> scored;
    scored.reserve(chunks.size());
    for (std::size_t i = 0; i < chunks.size(); ++i) scored.push_back({chunks[i], index->score(i, q.text)});
    const auto depth = std::min<std::size_t>(static_cast<std::size_t>(n), scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(depth), scored.end(), ranks_before);
    for (std::size_t i = 0; i < depth; ++i) union_into(acc, scored[i]);
  }
  return RetrievedContext{ordered(acc), n};
}

RetrievedContext merge(const RetrievedContext& a, const RetrievedContext& b) {
  std::map<std::string, ScoredChunk> acc;
  for (const auto& e : a.entries) union_into(acc, e);
  for (const auto& e : b.entries) union_into(acc, e);
  return RetrievedContext{ordered(acc), std::max(a.per_query_depth, b.per_query_depth)};
}

// --- prompt assembly -----------------------------------------------------------

std::string PromptPayload::text() const {
  return metrics_section + errors_section + history_section + config_section + retrieved_section +
         goal_section;
}

namespace {

template <typename T>
std::string opt(const std::optional<T>& v) {
  if (!v) return "absent";
  if constexpr (std::is_floating_point_v<T>) return text::format_number(*v);
  else return std::to_string(*v);
}

std::string render_metrics(const RunMetrics& m) {
  std::ostringstream out;
  out << "## Run metrics\n"
      << "design_name: " << m.design_name << '\n'
      << "area_um2: " << opt(m.area_um2);
  if (m.area_um2) out << " (" << to_string(m.area_source) << ")";
  out << '\n'
      << "die_um: " << opt(m.die_width_um) << " x " << opt(m.die_height_um) << '\n'
      << "critical_path_delay_ps: " << opt(m.critical_path_delay_ps) << '\n'
      << "clock_period_ps: " << opt(m.clock_period_ps) << '\n'
      << "worst_setup_slack_ps: " << opt(m.worst_setup_slack_ps) << '\n'
      << "worst_hold_slack_ps: " << opt(m.worst_hold_slack_ps) << '\n'
      << "power_uw: " << opt(m.power_uw) << '\n'
      << "placement_utilization_pct: " << opt(m.placement_utilization_pct) << '\n'
      << "drc_violation_count: " << opt(m.drc_violation_count) << '\n'
      << "lvs_error_count: " << opt(m.lvs_error_count) << "\n\n";
  return out.str();
}

std::string render_errors(std::span<const FlowErrorRecord> errors) {
  if (errors.empty()) return {};
  std::ostringstream out;
  out << "## Flow errors\n";
  for (const auto& e : errors) {
    out << "- [" << to_string(e.stage) << "] " << e.code << ": " << e.message;
    if (!e.log_path.empty()) out << " (" << e.log_path << ")";
    out << '\n';
  }
  out << '\n';
  return out.str();
}

std::vector<std::string> render_history_lines(const OptimizationHistory& history) {
  std::vector<std::string> lines;
  const FlowConfig* reference = nullptr;
  if (auto b = history.baseline_index()) reference = &history.entries()[*b].job.config;
  for (std::size_t i = 0; i < history.size(); ++i) {
    const auto& e = history.entries()[i];
    std::ostringstream line;
    line << "- #" << i << ' ' << e.job.job_id << ' ' << to_string(e.origin.kind) << ' '
         << to_string(e.job.status);
    if (e.job.metrics) {
      line << " area=" << opt(e.job.metrics->area_um2) << " delay=" << opt(e.job.metrics->critical_path_delay_ps)
           << " power=" << opt(e.job.metrics->power_uw) << " slack=" << opt(e.job.metrics->worst_setup_slack_ps);
    }
    if (e.scalar_cost) line << " cost=" << text::format_number(*e.scalar_cost);
    if (!e.job.errors.empty()) line << " first_error=" << e.job.errors.front().code;
    if (reference) {
      const auto changed = changed_parameters(*reference, e.job.config);
      line << " changed:";
      if (changed.empty()) line << " none";
      for (const auto& name : changed) {
        auto it = e.job.config.parameters.find(name);
        line << ' ' << name << '=' << (it == e.job.config.parameters.end() ? "unset" : render(it->second));
      }
    }
    line << '\n';
    lines.push_back(line.str());
  }
  return lines;
}

std::string render_config(const FlowConfig& c) {
  std::ostringstream out;
  out << "## Current configuration\n"
      << "design: " << c.design_name << '\n'
      << "pdk: " << c.pdk_id << '\n';
  for (const auto& [name, value] : c.parameters) out << name << " = " << render(value) << '\n';
  out << '\n';
  return out.str();
}

std::string render_chunk(const ScoredChunk& s) {
  std::ostringstream out;
  out << "### [" << s.chunk.id << "] " << s.chunk.title << " (" << to_string(s.chunk.kind)
      << ", score " << text::format_number(s.score) << ")\n";
  if (!s.chunk.parameter_names.empty()) {
    out << "parameters:";
    for (const auto& p : s.chunk.parameter_names) out << ' ' << p;
    out << '\n';
  }
  out << s.chunk.body << "\n\n";
  return out.str();
}

std::string render_goal(const OptimizationGoal* goal) {
  if (!goal) return {};
  std::ostringstream out;
  out << "## Optimization goal\n"
      << "priority: " << to_string(goal->priority) << '\n'
      << "weights: area=" << text::format_number(goal->weights.area)
      << " delay=" << text::format_number(goal->weights.delay)
      << " power=" << text::format_number(goal->weights.power) << '\n';
  return out.str();
}

const std::string kHistoryHeader = "## Optimization history\n";
const std::string kRetrievedHeader = "## Retrieved context\n";

std::string section(const std::string& header, const auto& blocks, const std::string& trailer) {
  if (blocks.empty()) return {};
  std::string out = header;
  for (const auto& b : blocks) out += b;
  return out + trailer;
}

}  // namespace

PromptPayload assemble_prompt(const RunMetrics& metrics, std::span<const FlowErrorRecord> errors,
                              const OptimizationHistory& history, const FlowConfig& config,
                              const RetrievedContext& retrieved, const OptimizationGoal* goal,
                              std::size_t budget_chars) {
  require(budget_chars >= 1000, "prompt budget must be at least 1000 characters");
  PromptPayload p;
  p.metrics_section = render_metrics(metrics);
  p.errors_section = render_errors(errors);
  p.config_section = render_config(config);
  p.goal_section = render_goal(goal);

  std::deque<std::string> history_lines;
  for (auto& l : render_history_lines(history)) history_lines.push_back(std::move(l));
  std::vector<std::string> chunk_blocks;
  std::vector<std::string> chunk_ids;
  for (const auto& e : retrieved.entries) {
    chunk_blocks.push_back(render_chunk(e));
    chunk_ids.push_back(e.chunk.id);
  }

  const std::size_t mandatory = p.metrics_section.size() + p.errors_section.size() +
                                p.config_section.size() + p.goal_section.size();
  auto size_of = [&] {
    std::size_t total = mandatory;
    if (!history_lines.empty()) {
      total += kHistoryHeader.size() + 1;
      for (const auto& l : history_lines) total += l.size();
    }
    if (!chunk_blocks.empty()) {
      total += kRetrievedHeader.size();
      for (const auto& b : chunk_blocks) total += b.size();
    }
    return total;
  };
  while (size_of() > budget_chars && !chunk_blocks.empty()) {
    chunk_blocks.pop_back();
    chunk_ids.pop_back();
  }
  while (size_of() > budget_chars && !history_lines.empty()) history_lines.pop_front();
  if (size_of() > budget_chars) {
    fail(ErrorCode::BudgetTooSmallForMandatorySections,
         "mandatory sections need " + std::to_string(mandatory) + " characters, budget is " +
             std::to_string(budget_chars));
  }
  p.history_section = section(kHistoryHeader, history_lines, "\n");
  p.retrieved_section = section(kRetrievedHeader, chunk_blocks, "");
  p.retrieved_ids = std::move(chunk_ids);
  p.total_size_chars = p.text().size();
  return p;
}

}  // namespace flowpilot
