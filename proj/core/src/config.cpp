#include "flowpilot/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "flowpilot/data_dir.hpp"
#include "flowpilot/error.hpp"
#include "flowpilot/flow.hpp"
#include "flowpilot/lint.hpp"
#include "text_util.hpp"

namespace flowpilot {

namespace {

[[noreturn]] void bad_key(const std::string& key, const std::string& value, const std::string& accepted) {
  fail(ErrorCode::InvalidConfig, "config key '" + key + "' = '" + value + "': accepted " + accepted);
}

std::string unquote(std::string v) {
  v = text::trim_copy(v);
  if (v.size() >= 2 && (v.front() == '"' || v.front() == '\'') && v.back() == v.front()) v = v.substr(1, v.size() - 2);
  return v;
}

std::string fmt(double v) { return text::format_number(v); }

long long parse_int(const std::string& key, const std::string& v, long long lo, long long hi) {
  long long out = 0;
  const auto* end = v.data() + v.size();
  auto [p, ec] = std::from_chars(v.data(), end, out);
  const std::string range = "integer in [" + std::to_string(lo) + ", " + std::to_string(hi) + "]";
  if (ec != std::errc{} || p != end || out < lo || out > hi) bad_key(key, v, range);
  return out;
}

double parse_real(const std::string& key, const std::string& v, double lo, double hi, bool lo_open = false) {
  const std::string range = std::string(lo_open ? "(" : "[") + fmt(lo) + ", " + fmt(hi) + "]";
  char* end = nullptr;
  const double out = std::strtod(v.c_str(), &end);
  if (v.empty() || end != v.c_str() + v.size() || !std::isfinite(out)) bad_key(key, v, "real in " + range);
  if (out > hi || out < lo || (lo_open && out == lo)) bad_key(key, v, "real in " + range);
  return out;
}

std::string parse_choice(const std::string& key, const std::string& v, std::initializer_list<const char*> choices) {
  std::string accepted = "one of {";
  bool first = true;
  for (const char* c : choices) {
    if (v == c) return v;
    accepted += (first ? "" : ", ") + std::string(c);
    first = false;
  }
  bad_key(key, v, accepted + "}");
}

}  // namespace

CliConfig CliConfig::load(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) fail(ErrorCode::NotFound, "cannot read config file " + file.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  auto cfg = parse(buf.str(), file.string());
  // Relative paths in the file are relative to the file.
  const auto base = file.parent_path();
  auto rebase = [&](std::filesystem::path& p) {
    if (!p.empty() && p.is_relative()) p = base / p;
  };
  rebase(cfg.mock_script);
  rebase(cfg.state_dir);
  rebase(cfg.corpus_dir);
  return cfg;
}

CliConfig CliConfig::parse(const std::string& text, const std::string& source) {
  boost::property_tree::ptree tree;
  std::istringstream in(text);
  try {
    boost::property_tree::ini_parser::read_ini(in, tree);
  } catch (const boost::property_tree::ini_parser_error& e) {
    fail(ErrorCode::InvalidConfig, source + ": " + e.message() + " at line " + std::to_string(e.line()));
  }

  static const std::map<std::string, std::set<std::string>> known = {
      {"backends",
       {"provider", "mock_script", "endpoint", "model", "api_key_env", "input_usd_per_mtok", "output_usd_per_mtok",
        "flow", "flow_command", "pdk_root", "sim_duration_ms", "lint", "verilator"}},
      {"thresholds", {"utilization_warning_pct", "utilization_critical_pct", "slack_critical_fraction"}},
      {"retrieval", {"depth", "budget"}},
      {"goal", {"priority", "weight_area", "weight_delay", "weight_power", "stop_after_runs", "stop_after_stale_rounds"}},
      {"run", {"parallelism", "max_fix_attempts", "flow_timeout_s", "state_dir", "corpus_dir"}},
  };

  CliConfig c;
  std::optional<double> w_area, w_delay, w_power;
  for (const auto& [section, body] : tree) {
    auto sec = known.find(section);
    if (sec == known.end()) {
      fail(ErrorCode::InvalidConfig,
           source + ": unknown section [" + section + "]; accepted: backends, thresholds, retrieval, goal, run");
    }
    if (!body.data().empty()) fail(ErrorCode::InvalidConfig, source + ": key '" + section + "' outside a section");
    for (const auto& [name, node] : body) {
      const std::string key = section + "." + name;
      if (!sec->second.count(name)) {
        std::string accepted;
        for (const auto& k : sec->second) accepted += (accepted.empty() ? "" : ", ") + k;
        fail(ErrorCode::InvalidConfig, source + ": unknown key '" + key + "'; accepted keys in [" + section +
                                           "]: " + accepted);
      }
      const std::string v = unquote(node.data());
      if (section == "backends") {
        if (name == "provider") c.provider = parse_choice(key, v, {"mock", "http"});
        else if (name == "mock_script") c.mock_script = v;
        else if (name == "endpoint") c.http.base_url = v;
        else if (name == "model") c.http.model = v;
        else if (name == "api_key_env") c.http.api_key_env = v;
        else if (name == "input_usd_per_mtok") c.http.rates.input_usd_per_mtok = c.mock_rates.input_usd_per_mtok = parse_real(key, v, 0, 1e4);
        else if (name == "output_usd_per_mtok") c.http.rates.output_usd_per_mtok = c.mock_rates.output_usd_per_mtok = parse_real(key, v, 0, 1e4);
        else if (name == "flow") c.flow = parse_choice(key, v, {"simulated", "process"});
        else if (name == "flow_command") c.flow_command = v;
        else if (name == "pdk_root") c.pdk_root = v;
        else if (name == "sim_duration_ms") c.sim_duration_ms = static_cast<int>(parse_int(key, v, 0, 3600000));
        else if (name == "lint") c.lint = parse_choice(key, v, {"stub", "verilator"});
        else if (name == "verilator") c.verilator = v;
      } else if (section == "thresholds") {
        if (name == "utilization_warning_pct") c.thresholds.utilization_warning_pct = parse_real(key, v, 0, 100, true);
        else if (name == "utilization_critical_pct") c.thresholds.utilization_critical_pct = parse_real(key, v, 0, 100, true);
        else if (name == "slack_critical_fraction") c.thresholds.slack_critical_fraction = parse_real(key, v, 0, 1, true);
      } else if (section == "retrieval") {
        if (name == "depth") c.retrieval_depth = static_cast<int>(parse_int(key, v, 1, 100));
        else if (name == "budget") c.prompt_budget = static_cast<std::size_t>(parse_int(key, v, 1000, 10000000));
      } else if (section == "goal") {
        if (name == "priority") {
          const auto p = goal_priority_from_string(parse_choice(key, v, {"area", "delay", "power", "balanced"}));
          c.goal.priority = p;
          c.goal.weights = preset_weights(p);
        } else if (name == "weight_area") w_area = parse_real(key, v, 0, 1);
        else if (name == "weight_delay") w_delay = parse_real(key, v, 0, 1);
        else if (name == "weight_power") w_power = parse_real(key, v, 0, 1);
        else if (name == "stop_after_runs") c.goal.stop_after_runs = static_cast<int>(parse_int(key, v, 1, 100000));
        else if (name == "stop_after_stale_rounds") c.goal.stop_after_stale_rounds = static_cast<int>(parse_int(key, v, 1, 1000));
      } else if (section == "run") {
        if (name == "parallelism") c.parallelism = static_cast<int>(parse_int(key, v, 1, 256));
        else if (name == "max_fix_attempts") c.max_fix_attempts = static_cast<int>(parse_int(key, v, 0, 100));
        else if (name == "flow_timeout_s") c.flow_timeout_s = static_cast<int>(parse_int(key, v, 1, 86400 * 7));
        else if (name == "state_dir") c.state_dir = v;
        else if (name == "corpus_dir") c.corpus_dir = v;
      }
    }
  }
  if (w_area || w_delay || w_power) {
    if (!(w_area && w_delay && w_power)) {
      fail(ErrorCode::InvalidConfig, "config keys 'goal.weight_area', 'goal.weight_delay', 'goal.weight_power' "
                                     "must be given together");
    }
    c.goal.weights = {*w_area, *w_delay, *w_power};
  }
  c.validate();
  return c;
}

void CliConfig::validate() const {
  if (thresholds.utilization_warning_pct >= thresholds.utilization_critical_pct) {
    fail(ErrorCode::InvalidConfig, "config key 'thresholds.utilization_warning_pct' = " +
                                       fmt(thresholds.utilization_warning_pct) + ": accepted values below " +
                                       "thresholds.utilization_critical_pct (" +
                                       fmt(thresholds.utilization_critical_pct) + ")");
  }
  const double sum = goal.weights.area + goal.weights.delay + goal.weights.power;
  if (std::abs(sum - 1.0) > 1e-9) {
    fail(ErrorCode::InvalidConfig, "config keys 'goal.weight_*' sum to " + fmt(sum) + ": accepted sum 1 (+-1e-9)");
  }
  if (flow == "process" && text::trim_copy(flow_command).empty()) {
    fail(ErrorCode::InvalidConfig, "config key 'backends.flow_command' is empty: required when backends.flow = process");
  }
  if (parallelism < 1 || parallelism > 256) bad_key("run.parallelism", std::to_string(parallelism), "integer in [1, 256]");
  if (retrieval_depth < 1 || retrieval_depth > 100)
    bad_key("retrieval.depth", std::to_string(retrieval_depth), "integer in [1, 100]");
  if (prompt_budget < 1000) bad_key("retrieval.budget", std::to_string(prompt_budget), "integer in [1000, 10000000]");
  try {
    flowpilot::validate(goal);
  } catch (const Error& e) {
    fail(ErrorCode::InvalidConfig, std::string("config section [goal]: ") + e.what());
  }
}

std::filesystem::path CliConfig::effective_corpus_dir() const {
  return corpus_dir.empty() ? data_dir() / "corpus" : corpus_dir;
}

BackendSet make_backends(const CliConfig& config, std::shared_ptr<AnswerSource> answers) {
  config.validate();
  BackendSet b;
  if (config.provider == "mock") {
    if (config.mock_script.empty())
      fail(ErrorCode::InvalidConfig, "config key 'backends.mock_script' is empty: required when backends.provider = mock");
    b.provider = MockProvider::from_directory(config.mock_script, config.mock_rates);
  } else {
    b.provider = std::make_shared<HttpProvider>(config.http);
  }
  if (config.flow == "simulated") {
    b.flow = std::make_shared<SimulatedBackend>(PpaModel::shipped(), *b.registry,
                                                std::chrono::milliseconds(config.sim_duration_ms));
  } else {
    std::istringstream words(config.flow_command);
    std::vector<std::string> argv;
    for (std::string w; words >> w;) argv.push_back(w);
    b.flow = std::make_shared<ProcessBackend>(argv, *b.registry, config.pdk_root);
  }
  if (config.lint == "stub") b.lint = std::make_shared<StubLint>();
  else b.lint = std::make_shared<VerilatorLint>(config.verilator);
  b.answers = std::move(answers);
  b.corpus = build_index(config.effective_corpus_dir());
  return b;
}

PipelineOptions make_pipeline_options(const CliConfig& config) {
  PipelineOptions o;
  o.parallelism = config.parallelism;
  o.max_fix_attempts = config.max_fix_attempts;
  o.retrieval_depth = config.retrieval_depth;
  o.prompt_budget = config.prompt_budget;
  o.thresholds = config.thresholds;
  if (config.flow_timeout_s) o.flow_timeout = std::chrono::seconds(*config.flow_timeout_s);
  return o;
}

}  // namespace flowpilot
