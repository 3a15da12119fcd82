#include "flowpilot/metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <regex>
#include <sstream>

#include "flowpilot/error.hpp"
#include "text_util.hpp"

namespace fs = std::filesystem;

namespace flowpilot {

std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::synthesis: return "synthesis";
    case Stage::floorplan: return "floorplan";
    case Stage::placement: return "placement";
    case Stage::cts: return "cts";
    case Stage::routing: return "routing";
    case Stage::signoff: return "signoff";
  }
  return "synthesis";
}

std::optional<Stage> stage_from_string(std::string_view text) {
  for (auto s : {Stage::synthesis, Stage::floorplan, Stage::placement, Stage::cts, Stage::routing,
                 Stage::signoff}) {
    if (text == to_string(s)) return s;
  }
  return std::nullopt;
}

std::string_view to_string(AreaSource source) {
  switch (source) {
    case AreaSource::absent: return "absent";
    case AreaSource::cell: return "cell";
    case AreaSource::die: return "die";
  }
  return "absent";
}

std::optional<double> RunMetrics::die_area_um2() const {
  if (!die_width_um || !die_height_um) return std::nullopt;
  return *die_width_um * *die_height_um;
}

namespace {

// ---------------------------------------------------------------------------
// JSON <-> RunMetrics

template <typename T>
void put(nlohmann::json& doc, const char* key, const std::optional<T>& value) {
  doc[key] = value ? nlohmann::json(*value) : nlohmann::json(nullptr);
}

struct FieldCheck {
  const fs::path* file = nullptr;
  std::uint64_t offset = 0;

  [[noreturn]] void bad(const std::string& what) const {
    throw MalformedReport(file ? *file : fs::path{}, offset, what);
  }
};

void validate(const RunMetrics& m, const FieldCheck& where) {
  auto positive = [&](const std::optional<double>& v, const char* name) {
    if (v && !(std::isfinite(*v) && *v > 0)) where.bad(std::string(name) + " must be positive");
  };
  auto finite = [&](const std::optional<double>& v, const char* name) {
    if (v && !std::isfinite(*v)) where.bad(std::string(name) + " must be finite");
  };
  positive(m.area_um2, "area_um2");
  positive(m.die_width_um, "die_width_um");
  positive(m.die_height_um, "die_height_um");
  positive(m.critical_path_delay_ps, "critical_path_delay_ps");
  positive(m.clock_period_ps, "clock_period_ps");
  finite(m.worst_setup_slack_ps, "worst_setup_slack_ps");
  finite(m.worst_hold_slack_ps, "worst_hold_slack_ps");
  if (m.power_uw && !(std::isfinite(*m.power_uw) && *m.power_uw >= 0))
    where.bad("power_uw must be non-negative");
  if (m.placement_utilization_pct &&
      !(*m.placement_utilization_pct >= 0 && *m.placement_utilization_pct <= 100))
    where.bad("placement_utilization_pct must be within [0,100]");
  if (m.drc_violation_count && *m.drc_violation_count < 0) where.bad("drc_violation_count < 0");
  if (m.lvs_error_count && *m.lvs_error_count < 0) where.bad("lvs_error_count < 0");
  if (m.run_wall_seconds && !(std::isfinite(*m.run_wall_seconds) && *m.run_wall_seconds >= 0))
    where.bad("run_wall_seconds must be non-negative");
}

std::optional<double> json_real(const nlohmann::json& doc, const char* key, const FieldCheck& where) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return std::nullopt;
  if (!it->is_number()) where.bad(std::string(key) + " is not a number");
  return it->get<double>();
}

std::optional<std::int64_t> json_count(const nlohmann::json& doc, const char* key,
                                       const FieldCheck& where) {
  auto it = doc.find(key);
  if (it == doc.end() || it->is_null()) return std::nullopt;
  if (!it->is_number_integer()) where.bad(std::string(key) + " is not an integer");
  return it->get<std::int64_t>();
}

RunMetrics metrics_from_json_checked(const nlohmann::json& doc, const FieldCheck& where) {
  if (!doc.is_object()) where.bad("metrics document is not an object");
  RunMetrics m;
  if (auto it = doc.find("design_name"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) where.bad("design_name is not a string");
    m.design_name = it->get<std::string>();
  }
  m.area_um2 = json_real(doc, "area_um2", where);
  if (auto it = doc.find("area_source"); it != doc.end() && !it->is_null()) {
    if (!it->is_string()) where.bad("area_source is not a string");
    const auto s = it->get<std::string>();
    if (s == "cell") m.area_source = AreaSource::cell;
    else if (s == "die") m.area_source = AreaSource::die;
    else if (s == "absent") m.area_source = AreaSource::absent;
    else where.bad("unknown area_source '" + s + "'");
  }
  if (m.area_um2 && m.area_source == AreaSource::absent) m.area_source = AreaSource::cell;
  if (!m.area_um2) m.area_source = AreaSource::absent;
  m.die_width_um = json_real(doc, "die_width_um", where);
  m.die_height_um = json_real(doc, "die_height_um", where);
  m.critical_path_delay_ps = json_real(doc, "critical_path_delay_ps", where);
  m.clock_period_ps = json_real(doc, "clock_period_ps", where);
  m.worst_setup_slack_ps = json_real(doc, "worst_setup_slack_ps", where);
  m.worst_hold_slack_ps = json_real(doc, "worst_hold_slack_ps", where);
  m.power_uw = json_real(doc, "power_uw", where);
  m.placement_utilization_pct = json_real(doc, "placement_utilization_pct", where);
  m.drc_violation_count = json_count(doc, "drc_violation_count", where);
  m.lvs_error_count = json_count(doc, "lvs_error_count", where);
  m.run_wall_seconds = json_real(doc, "run_wall_seconds", where);
  validate(m, where);
  return m;
}

// ---------------------------------------------------------------------------
// Report scanning

std::string read_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) fail(ErrorCode::MissingReports, "cannot read " + file.string());
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

struct Line {
  std::string_view text;
  std::uint64_t offset;
};

std::vector<Line> split_lines(std::string_view text) {
  std::vector<Line> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    lines.push_back({line, start});
    start = end + 1;
  }
  return lines;
}

void fill(std::optional<double>& dst, const std::optional<double>& src) {
  if (!dst && src) dst = src;
}
void fill(std::optional<std::int64_t>& dst, const std::optional<std::int64_t>& src) {
  if (!dst && src) dst = src;
}

void merge_into(RunMetrics& dst, const RunMetrics& src) {
  if (dst.design_name.empty()) dst.design_name = src.design_name;
  if (!dst.area_um2 && src.area_um2) {
    dst.area_um2 = src.area_um2;
    dst.area_source = src.area_source;
  }
  fill(dst.die_width_um, src.die_width_um);
  fill(dst.die_height_um, src.die_height_um);
  fill(dst.critical_path_delay_ps, src.critical_path_delay_ps);
  fill(dst.clock_period_ps, src.clock_period_ps);
  fill(dst.worst_setup_slack_ps, src.worst_setup_slack_ps);
  fill(dst.worst_hold_slack_ps, src.worst_hold_slack_ps);
  fill(dst.power_uw, src.power_uw);
  fill(dst.placement_utilization_pct, src.placement_utilization_pct);
  fill(dst.drc_violation_count, src.drc_violation_count);
  fill(dst.lvs_error_count, src.lvs_error_count);
  fill(dst.run_wall_seconds, src.run_wall_seconds);
}

// --- metrics.csv -----------------------------------------------------------

struct CsvCell {
  std::string text;
  std::uint64_t offset;
};

std::vector<CsvCell> split_csv_row(const Line& line, const fs::path& file) {
  std::vector<CsvCell> cells;
  std::string current;
  std::uint64_t cell_start = line.offset;
  bool quoted = false;
  for (std::size_t i = 0; i < line.text.size(); ++i) {
    const char c = line.text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.text.size() && line.text[i + 1] == '"') {
          current.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(c);
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      cells.push_back({text::trim_copy(current), cell_start});
      current.clear();
      cell_start = line.offset + i + 1;
    } else {
      current.push_back(c);
    }
  }
  if (quoted) throw MalformedReport(file, cell_start, "unterminated quote");
  cells.push_back({text::trim_copy(current), cell_start});
  return cells;
}

bool is_absent_marker(std::string_view value) {
  return value.empty() || value == "N/A" || value == "n/a" || value == "NA" || value == "-";
}

struct CsvColumn {
  const char* name;
  std::function<void(RunMetrics&, const CsvCell&, const fs::path&)> apply;
};

double csv_real(const CsvCell& cell, const fs::path& file) {
  auto v = text::parse_double(cell.text);
  if (!v) throw MalformedReport(file, cell.offset, "not a number: '" + cell.text + "'");
  return *v;
}

std::int64_t csv_count(const CsvCell& cell, const fs::path& file) {
  auto v = text::parse_int(cell.text);
  if (!v) {
    // Some flows write integer counts as "3.0".
    auto d = text::parse_double(cell.text);
    if (d && std::floor(*d) == *d && std::abs(*d) < 9e15) return static_cast<std::int64_t>(*d);
    throw MalformedReport(file, cell.offset, "not an integer: '" + cell.text + "'");
  }
  return *v;
}

template <typename Member>
CsvColumn real_column(const char* name, Member member, double scale) {
  return {name, [member, scale](RunMetrics& m, const CsvCell& c, const fs::path& f) {
            if (!(m.*member)) m.*member = csv_real(c, f) * scale;
          }};
}

template <typename Member>
CsvColumn count_column(const char* name, Member member) {
  return {name, [member](RunMetrics& m, const CsvCell& c, const fs::path& f) {
            if (!(m.*member)) m.*member = csv_count(c, f);
          }};
}

CsvColumn area_column(const char* name, AreaSource source, double scale) {
  return {name, [source, scale](RunMetrics& m, const CsvCell& c, const fs::path& f) {
            const double v = csv_real(c, f) * scale;
            // Cell area wins over die area regardless of column order.
            if (!m.area_um2 || (m.area_source == AreaSource::die && source == AreaSource::cell)) {
              m.area_um2 = v;
              m.area_source = source;
            }
          }};
}

const std::vector<CsvColumn>& csv_columns() {
  static const std::vector<CsvColumn> columns = [] {
    std::vector<CsvColumn> cols;
    cols.push_back({"design_name", [](RunMetrics& m, const CsvCell& c, const fs::path&) {
                      if (m.design_name.empty()) m.design_name = c.text;
                    }});
    cols.push_back({"design", [](RunMetrics& m, const CsvCell& c, const fs::path&) {
                      if (m.design_name.empty()) m.design_name = fs::path(c.text).filename().string();
                    }});
    cols.push_back(area_column("area_um2", AreaSource::cell, 1.0));
    cols.push_back(area_column("cell_area_um2", AreaSource::cell, 1.0));
    cols.push_back(area_column("design__instance__area", AreaSource::cell, 1.0));
    cols.push_back(area_column("design__die__area", AreaSource::die, 1.0));
    cols.push_back(area_column("DIEAREA_mm^2", AreaSource::die, 1e6));
    cols.push_back({"design__die__bbox", [](RunMetrics& m, const CsvCell& c, const fs::path& f) {
                      std::istringstream in(c.text);
                      std::vector<double> v;
                      std::string tok;
                      while (in >> tok) {
                        auto d = text::parse_double(tok);
                        if (!d) throw MalformedReport(f, c.offset, "bad bbox '" + c.text + "'");
                        v.push_back(*d);
                      }
                      if (v.size() != 4) throw MalformedReport(f, c.offset, "bbox needs 4 numbers");
                      if (!m.die_width_um) m.die_width_um = v[2] - v[0];
                      if (!m.die_height_um) m.die_height_um = v[3] - v[1];
                    }});
    cols.push_back(real_column("die_width_um", &RunMetrics::die_width_um, 1.0));
    cols.push_back(real_column("die_height_um", &RunMetrics::die_height_um, 1.0));
    cols.push_back(real_column("critical_path_delay_ps", &RunMetrics::critical_path_delay_ps, 1.0));
    cols.push_back(real_column("critical_path_ps", &RunMetrics::critical_path_delay_ps, 1.0));
    cols.push_back(real_column("critical_path_ns", &RunMetrics::critical_path_delay_ps, 1e3));
    cols.push_back(real_column("clock_period_ps", &RunMetrics::clock_period_ps, 1.0));
    cols.push_back(real_column("CLOCK_PERIOD", &RunMetrics::clock_period_ps, 1e3));
    cols.push_back(real_column("worst_setup_slack_ps", &RunMetrics::worst_setup_slack_ps, 1.0));
    cols.push_back(real_column("timing__setup__ws", &RunMetrics::worst_setup_slack_ps, 1e3));
    cols.push_back(real_column("wns", &RunMetrics::worst_setup_slack_ps, 1e3));
    cols.push_back(real_column("worst_hold_slack_ps", &RunMetrics::worst_hold_slack_ps, 1.0));
    cols.push_back(real_column("timing__hold__ws", &RunMetrics::worst_hold_slack_ps, 1e3));
    cols.push_back(real_column("power_uw", &RunMetrics::power_uw, 1.0));
    cols.push_back(real_column("power__total", &RunMetrics::power_uw, 1e6));
    cols.push_back(real_column("placement_utilization_pct", &RunMetrics::placement_utilization_pct, 1.0));
    cols.push_back(real_column("OpenDP_Util", &RunMetrics::placement_utilization_pct, 1.0));
    cols.push_back(real_column("design__instance__utilization",
                               &RunMetrics::placement_utilization_pct, 100.0));
    cols.push_back(count_column("drc_violation_count", &RunMetrics::drc_violation_count));
    cols.push_back(count_column("route__drc_errors", &RunMetrics::drc_violation_count));
    cols.push_back(count_column("Magic_violations", &RunMetrics::drc_violation_count));
    cols.push_back(count_column("lvs_error_count", &RunMetrics::lvs_error_count));
    cols.push_back(count_column("design__lvs_error__count", &RunMetrics::lvs_error_count));
    cols.push_back(count_column("lvs_total_errors", &RunMetrics::lvs_error_count));
    cols.push_back(real_column("run_wall_seconds", &RunMetrics::run_wall_seconds, 1.0));
    cols.push_back(real_column("total_runtime_s", &RunMetrics::run_wall_seconds, 1.0));
    return cols;
  }();
  return columns;
}

const char* const kPowerParts[] = {"power_typical_internal_uW", "power_typical_switching_uW",
                                   "power_typical_leakage_uW"};

RunMetrics parse_metrics_csv(const fs::path& file) {
  const auto content = read_file(file);
  std::vector<Line> rows;
  for (const auto& line : split_lines(content)) {
    if (!text::trim_copy(line.text).empty()) rows.push_back(line);
  }
  if (rows.size() < 2) throw MalformedReport(file, content.size(), "expected header and value rows");
  if (rows.size() > 2) throw MalformedReport(file, rows[2].offset, "more than one value row");
  const auto header = split_csv_row(rows[0], file);
  const auto values = split_csv_row(rows[1], file);
  if (header.size() != values.size()) {
    throw MalformedReport(file, rows[1].offset,
                          "value row has " + std::to_string(values.size()) + " cells, header has " +
                              std::to_string(header.size()));
  }
  std::map<std::string, const CsvCell*> by_name;
  for (std::size_t i = 0; i < header.size(); ++i) by_name[header[i].text] = &values[i];

  RunMetrics m;
  for (const auto& column : csv_columns()) {
    auto it = by_name.find(column.name);
    if (it == by_name.end() || is_absent_marker(it->second->text)) continue;
    column.apply(m, *it->second, file);
  }
  if (!m.power_uw) {
    std::optional<double> total;
    for (const char* part : kPowerParts) {
      auto it = by_name.find(part);
      if (it == by_name.end() || is_absent_marker(it->second->text)) continue;
      total = total.value_or(0.0) + csv_real(*it->second, file);
    }
    m.power_uw = total;
  }
  validate(m, FieldCheck{&file, rows[1].offset});
  return m;
}

// --- STA text report -------------------------------------------------------

struct StaSummary {
  std::optional<double> setup_slack_ps;
  std::optional<double> hold_slack_ps;
  std::optional<double> arrival_ps;
};

StaSummary parse_sta_report(const fs::path& file) {
  static const std::regex slack_re(R"(^\s*([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s+slack\s+\((VIOLATED|MET)\)\s*$)");
  static const std::regex arrival_re(R"(^\s*(?:[-+]?[0-9]*\.?[0-9]+\s+)?([-+]?[0-9]*\.?[0-9]+(?:[eE][-+]?[0-9]+)?)\s+data arrival time\s*$)");
  static const std::regex path_type_re(R"(Path Type:\s*(max|min))");
  const auto content = read_file(file);
  StaSummary out;
  bool max_path = true;
  for (const auto& line : split_lines(content)) {
    const std::string s(line.text);
    std::smatch match;
    if (std::regex_search(s, match, path_type_re)) {
      max_path = match[1] == "max";
      continue;
    }
    if (s.find("slack (") != std::string::npos) {
      if (!std::regex_match(s, match, slack_re))
        throw MalformedReport(file, line.offset, "unparseable slack line");
      auto v = text::parse_double(match[1].str());
      if (!v) throw MalformedReport(file, line.offset, "bad slack value");
      const double ps = *v * 1e3;
      const bool violated = match[2] == "VIOLATED";
      if (violated != (ps < 0)) throw MalformedReport(file, line.offset, "slack sign contradicts status");
      auto& slot = max_path ? out.setup_slack_ps : out.hold_slack_ps;
      slot = slot ? std::min(*slot, ps) : ps;
    } else if (max_path && std::regex_match(s, match, arrival_re)) {
      auto v = text::parse_double(match[1].str());
      if (v && *v > 0) {
        const double ps = *v * 1e3;
        out.arrival_ps = out.arrival_ps ? std::max(*out.arrival_ps, ps) : ps;
      }
    }
  }
  return out;
}

// --- DRC / LVS -------------------------------------------------------------

std::int64_t parse_drc_report(const fs::path& file) {
  static const std::regex violation_re(R"(^\s*violation\b.*)", std::regex::icase);
  static const std::regex total_re(R"(^\s*total\s+violations\s*[:=]\s*(\S+)\s*$)", std::regex::icase);
  const auto content = read_file(file);
  std::int64_t lines = 0;
  std::optional<std::int64_t> declared;
  std::uint64_t declared_at = 0;
  for (const auto& line : split_lines(content)) {
    const std::string s(line.text);
    std::smatch match;
    if (std::regex_match(s, match, total_re)) {
      auto v = text::parse_int(match[1].str());
      if (!v || *v < 0) throw MalformedReport(file, line.offset, "bad violation total");
      declared = *v;
      declared_at = line.offset;
    } else if (std::regex_match(s, violation_re)) {
      ++lines;
    }
  }
  if (declared && lines > 0 && *declared != lines) {
    throw MalformedReport(file, declared_at,
                          "declared " + std::to_string(*declared) + " violations, listed " +
                              std::to_string(lines));
  }
  return declared.value_or(lines);
}

std::int64_t parse_lvs_report(const fs::path& file) {
  static const std::regex total_re(R"(total\s+errors\s*[:=]\s*(\S+))", std::regex::icase);
  const auto content = read_file(file);
  for (const auto& line : split_lines(content)) {
    const std::string s(line.text);
    std::smatch match;
    if (std::regex_search(s, match, total_re)) {
      auto v = text::parse_int(match[1].str());
      if (!v || *v < 0) throw MalformedReport(file, line.offset, "bad LVS error total");
      return *v;
    }
  }
  throw MalformedReport(file, content.size(), "no 'Total errors' line");
}

// --- logs ------------------------------------------------------------------

std::optional<Stage> stage_from_tokens(std::string_view text) {
  static const std::vector<std::pair<std::string_view, Stage>> keywords = {
      {"synthesis", Stage::synthesis}, {"synth", Stage::synthesis},   {"yosys", Stage::synthesis},
      {"floorplan", Stage::floorplan}, {"floorplanning", Stage::floorplan},
      {"placement", Stage::placement}, {"place", Stage::placement},   {"cts", Stage::cts},
      {"routing", Stage::routing},     {"route", Stage::routing},     {"grt", Stage::routing},
      {"drt", Stage::routing},         {"signoff", Stage::signoff},   {"lvs", Stage::signoff},
      {"drc", Stage::signoff},         {"magic", Stage::signoff},     {"klayout", Stage::signoff},
      {"sta", Stage::signoff},
  };
  for (const auto& token : text::tokenize(text)) {
    for (const auto& [key, stage] : keywords) {
      if (token == key) return stage;
    }
  }
  return std::nullopt;
}

Stage infer_stage(const fs::path& relative, std::string_view message) {
  std::vector<std::string> parts;
  for (const auto& p : relative) parts.push_back(p.string());
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) {
    if (auto s = stage_from_tokens(*it)) return *s;
  }
  if (auto s = stage_from_tokens(message)) return *s;
  return Stage::synthesis;
}

void parse_log(const fs::path& file, const fs::path& root, std::vector<FlowErrorRecord>& out) {
  static const std::regex code_re(R"(^([A-Z][A-Z0-9_]*-[0-9]+)\s*:?\s*(.*)$)");
  const auto content = read_file(file);
  const auto relative = fs::relative(file, root);
  for (const auto& line : split_lines(content)) {
    if (line.text.rfind("[ERROR]", 0) != 0) continue;
    std::string rest = text::trim_copy(line.text.substr(7));
    if (!rest.empty() && rest.front() == ':') rest = text::trim_copy(std::string_view(rest).substr(1));
    FlowErrorRecord rec;
    std::smatch match;
    if (std::regex_match(rest, match, code_re)) {
      rec.code = match[1];
      rec.message = match[2];
    } else {
      rec.code = "GENERIC";
      rec.message = rest;
    }
    rec.stage = infer_stage(relative, rec.message);
    rec.log_path = relative.generic_string();
    out.push_back(std::move(rec));
  }
}

enum class ReportKind { none, canonical, csv, sta, drc, lvs, log };

ReportKind classify(const fs::path& file) {
  const auto name = text::to_lower(file.filename().string());
  const auto ext = text::to_lower(file.extension().string());
  if (name == "metrics.json") return ReportKind::canonical;
  if (name == "metrics.csv") return ReportKind::csv;
  if (ext == ".log") return ReportKind::log;
  if (ext == ".rpt") {
    if (name.find("drc") != std::string::npos) return ReportKind::drc;
    if (name.find("lvs") != std::string::npos) return ReportKind::lvs;
    if (name.find("sta") != std::string::npos || name.find("timing") != std::string::npos)
      return ReportKind::sta;
  }
  return ReportKind::none;
}

}  // namespace

nlohmann::json to_json(const RunMetrics& m) {
  nlohmann::json doc = nlohmann::json::object();
  doc["design_name"] = m.design_name;
  put(doc, "area_um2", m.area_um2);
  doc["area_source"] = m.area_um2 ? nlohmann::json(std::string(to_string(m.area_source)))
                                  : nlohmann::json(nullptr);
  put(doc, "die_width_um", m.die_width_um);
  put(doc, "die_height_um", m.die_height_um);
  put(doc, "critical_path_delay_ps", m.critical_path_delay_ps);
  put(doc, "clock_period_ps", m.clock_period_ps);
  put(doc, "worst_setup_slack_ps", m.worst_setup_slack_ps);
  put(doc, "worst_hold_slack_ps", m.worst_hold_slack_ps);
  put(doc, "power_uw", m.power_uw);
  put(doc, "placement_utilization_pct", m.placement_utilization_pct);
  put(doc, "drc_violation_count", m.drc_violation_count);
  put(doc, "lvs_error_count", m.lvs_error_count);
  put(doc, "run_wall_seconds", m.run_wall_seconds);
  return doc;
}

RunMetrics metrics_from_json(const nlohmann::json& doc) {
  return metrics_from_json_checked(doc, FieldCheck{});
}

nlohmann::json to_json(const FlowErrorRecord& r) {
  return {{"stage", std::string(to_string(r.stage))},
          {"code", r.code},
          {"message", r.message},
          {"log_path", r.log_path}};
}

FlowErrorRecord flow_error_from_json(const nlohmann::json& doc) {
  FlowErrorRecord r;
  auto stage = stage_from_string(doc.at("stage").get<std::string>());
  if (!stage) fail(ErrorCode::PreconditionViolation, "unknown stage " + doc.at("stage").dump());
  r.stage = *stage;
  r.code = doc.at("code").get<std::string>();
  r.message = doc.at("message").get<std::string>();
  r.log_path = doc.value("log_path", "");
  return r;
}

void write_metrics_json(const fs::path& file, const RunMetrics& metrics) {
  std::ofstream out(file, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::PreconditionViolation, "cannot write " + file.string());
  out << to_json(metrics).dump(2) << '\n';
}

RunMetrics read_metrics_json(const fs::path& file) {
  const auto content = read_file(file);
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(content);
  } catch (const nlohmann::json::parse_error& e) {
    throw MalformedReport(file, e.byte > 0 ? e.byte - 1 : 0, e.what());
  }
  return metrics_from_json_checked(doc, FieldCheck{&file, 0});
}

RunArtifacts parse_run_artifacts(const fs::path& run_directory) {
  std::error_code ec;
  if (!fs::is_directory(run_directory, ec))
    fail(ErrorCode::MissingReports, run_directory.string() + " is not a directory");

  std::map<ReportKind, std::vector<fs::path>> found;
  for (fs::recursive_directory_iterator it(run_directory, ec), end; !ec && it != end;
       it.increment(ec)) {
    if (!it->is_regular_file(ec)) continue;
    const auto kind = classify(it->path());
    if (kind != ReportKind::none) found[kind].push_back(it->path());
  }
  if (found.empty()) fail(ErrorCode::MissingReports, "no recognized reports in " + run_directory.string());
  for (auto& [kind, files] : found) std::sort(files.begin(), files.end());

  RunArtifacts out;
  for (const auto& f : found[ReportKind::canonical]) merge_into(out.metrics, read_metrics_json(f));
  for (const auto& f : found[ReportKind::csv]) merge_into(out.metrics, parse_metrics_csv(f));

  if (!found[ReportKind::sta].empty()) {
    RunMetrics sta;
    for (const auto& f : found[ReportKind::sta]) {
      const auto s = parse_sta_report(f);
      auto take_min = [](std::optional<double>& dst, const std::optional<double>& v) {
        if (v) dst = dst ? std::min(*dst, *v) : *v;
      };
      take_min(sta.worst_setup_slack_ps, s.setup_slack_ps);
      take_min(sta.worst_hold_slack_ps, s.hold_slack_ps);
      if (s.arrival_ps)
        sta.critical_path_delay_ps =
            sta.critical_path_delay_ps ? std::max(*sta.critical_path_delay_ps, *s.arrival_ps) : *s.arrival_ps;
    }
    merge_into(out.metrics, sta);
  }
  if (!found[ReportKind::drc].empty()) {
    RunMetrics drc;
    drc.drc_violation_count = 0;
    for (const auto& f : found[ReportKind::drc]) *drc.drc_violation_count += parse_drc_report(f);
    merge_into(out.metrics, drc);
  }
  if (!found[ReportKind::lvs].empty()) {
    RunMetrics lvs;
    lvs.lvs_error_count = 0;
    for (const auto& f : found[ReportKind::lvs]) *lvs.lvs_error_count += parse_lvs_report(f);
    merge_into(out.metrics, lvs);
  }
  for (const auto& f : found[ReportKind::log]) parse_log(f, run_directory, out.errors);

  auto& m = out.metrics;
  if (!m.area_um2) {
    if (auto die = m.die_area_um2()) {
      m.area_um2 = *die;
      m.area_source = AreaSource::die;
    }
  }
  if (!m.critical_path_delay_ps && m.clock_period_ps && m.worst_setup_slack_ps) {
    const double derived = *m.clock_period_ps - *m.worst_setup_slack_ps;
    if (derived > 0) m.critical_path_delay_ps = derived;
  }
  if (m.design_name.empty()) m.design_name = fs::absolute(run_directory).lexically_normal().filename().string();
  if (m.design_name.empty()) m.design_name = fs::absolute(run_directory).parent_path().filename().string();
  return out;
}

namespace {

std::optional<double> delta_pct(const std::optional<double>& base, const std::optional<double>& opt,
                                const char* name) {
  if (!base || !opt) return std::nullopt;
  if (*base == 0) fail(ErrorCode::DivisionByZeroBaseline, std::string("baseline ") + name + " is 0");
  return (*opt - *base) / *base * 100.0;
}

std::optional<double> ratio(const std::optional<double>& cand, const std::optional<double>& ref,
                            const char* name) {
  if (!cand || !ref) return std::nullopt;
  if (*ref == 0) fail(ErrorCode::DivisionByZeroReference, std::string("reference ") + name + " is 0");
  return *cand / *ref;
}

}  // namespace

PpaDelta compute_delta(const RunMetrics& baseline, const RunMetrics& optimized) {
  PpaDelta d{baseline, optimized, {}, {}, {}};
  d.area_delta_pct = delta_pct(baseline.area_um2, optimized.area_um2, "area");
  d.delay_delta_pct = delta_pct(baseline.critical_path_delay_ps, optimized.critical_path_delay_ps, "delay");
  d.power_delta_pct = delta_pct(baseline.power_uw, optimized.power_uw, "power");
  if (!d.area_delta_pct && !d.delay_delta_pct && !d.power_delta_pct)
    fail(ErrorCode::PreconditionViolation, "no metric present on both sides");
  return d;
}

PpaRatio compute_ratio(const RunMetrics& candidate, const RunMetrics& reference,
                       std::string candidate_label, std::string reference_label) {
  PpaRatio r{std::move(candidate_label), std::move(reference_label), {}, {}, {}};
  r.area_ratio = ratio(candidate.area_um2, reference.area_um2, "area");
  r.delay_ratio = ratio(candidate.critical_path_delay_ps, reference.critical_path_delay_ps, "delay");
  r.power_ratio = ratio(candidate.power_uw, reference.power_uw, "power");
  if (!r.area_ratio && !r.delay_ratio && !r.power_ratio)
    fail(ErrorCode::PreconditionViolation, "no metric present on both sides");
  return r;
}

}  // namespace flowpilot
