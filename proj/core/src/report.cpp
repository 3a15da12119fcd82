#include "flowpilot/report.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "flowpilot/error.hpp"

namespace flowpilot {

namespace {

std::string cell(const std::optional<double>& v, const char* format = "%.2f") {
  if (!v) return "-";
  char buf[64];
  std::snprintf(buf, sizeof buf, format, *v);
  return buf;
}

std::string render_table(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::vector<std::size_t> width(header.size());
  for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows)
    for (std::size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) {
      // First column left-aligned, numbers right-aligned.
      const std::string pad(width[c] - r[c].size(), ' ');
      if (c == 0) out << r[c] << pad;
      else out << "  " << pad << r[c];
    }
    out << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out.str();
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) out += ch == '"' ? std::string("\"\"") : std::string(1, ch);
  return out + "\"";
}

std::string render_csv(const std::vector<std::string>& header, const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  auto line = [&](const std::vector<std::string>& r) {
    for (std::size_t c = 0; c < r.size(); ++c) out << (c ? "," : "") << csv_field(r[c] == "-" ? "" : r[c]);
    out << "\n";
  };
  line(header);
  for (const auto& r : rows) line(r);
  return out.str();
}

const std::vector<std::string> kDeltaHeader = {"design",      "area_base",  "area_opt",   "area_delta_pct",
                                               "delay_base",  "delay_opt",  "delay_delta_pct",
                                               "power_base",  "power_opt",  "power_delta_pct"};

std::vector<std::vector<std::string>> delta_cells(const std::vector<DeltaRow>& rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows) {
    const auto& d = r.delta;
    out.push_back({r.label, cell(d.baseline.area_um2), cell(d.optimized.area_um2), cell(d.area_delta_pct),
                   cell(d.baseline.critical_path_delay_ps), cell(d.optimized.critical_path_delay_ps),
                   cell(d.delay_delta_pct), cell(d.baseline.power_uw), cell(d.optimized.power_uw),
                   cell(d.power_delta_pct)});
  }
  return out;
}

const std::vector<std::string> kRatioHeader = {"label", "candidate", "reference", "area_ratio", "delay_ratio",
                                               "power_ratio"};

std::vector<std::vector<std::string>> ratio_cells(const std::vector<RatioRow>& rows) {
  std::vector<std::vector<std::string>> out;
  for (const auto& r : rows) {
    out.push_back({r.label, r.ratio.numerator_source, r.ratio.denominator_source, cell(r.ratio.area_ratio, "%.4f"),
                   cell(r.ratio.delay_ratio, "%.4f"), cell(r.ratio.power_ratio, "%.4f")});
  }
  return out;
}

nlohmann::json opt(const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); }

}  // namespace

DeltaRow history_delta(const std::string& label, const OptimizationHistory& history) {
  const auto b = history.baseline_index();
  const auto best = history.best_index();
  require(b && best, "report needs a history with a successful run");
  return {label, compute_delta(*history.entries()[*b].job.metrics, *history.entries()[*best].job.metrics)};
}

std::string render_delta_table(const std::vector<DeltaRow>& rows) { return render_table(kDeltaHeader, delta_cells(rows)); }
std::string render_delta_csv(const std::vector<DeltaRow>& rows) { return render_csv(kDeltaHeader, delta_cells(rows)); }
std::string render_ratio_table(const std::vector<RatioRow>& rows) { return render_table(kRatioHeader, ratio_cells(rows)); }
std::string render_ratio_csv(const std::vector<RatioRow>& rows) { return render_csv(kRatioHeader, ratio_cells(rows)); }

nlohmann::json to_json(const PpaDelta& d) {
  return {{"baseline", to_json(d.baseline)},
          {"optimized", to_json(d.optimized)},
          {"area_delta_pct", opt(d.area_delta_pct)},
          {"delay_delta_pct", opt(d.delay_delta_pct)},
          {"power_delta_pct", opt(d.power_delta_pct)}};
}

nlohmann::json to_json(const PpaRatio& r) {
  return {{"numerator_source", r.numerator_source},
          {"denominator_source", r.denominator_source},
          {"area_ratio", opt(r.area_ratio)},
          {"delay_ratio", opt(r.delay_ratio)},
          {"power_ratio", opt(r.power_ratio)}};
}

}  // namespace flowpilot
