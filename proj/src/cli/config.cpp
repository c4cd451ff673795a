#include "taskalloc/cli/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "taskalloc/coordination/scripted.hpp"
#include "taskalloc/kitchen/kitchen.hpp"

namespace taskalloc::cli {

using coordination::ControllerMode;
using nlohmann::json;

ConfigError::ConfigError(const std::string& source, int line, const std::string& message)
    : StructuralError(source + (line > 0 ? ":" + std::to_string(line) : std::string()) + ": " + message),
      line_(line) {}

// LineIndex ------------------------------------------------------------------

namespace {

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~') {
      out += "~0";
    } else if (c == '/') {
      out += "~1";
    } else {
      out += c;
    }
  }
  return out;
}

}  // namespace

LineIndex::LineIndex(const std::string& text) {
  struct Frame {
    bool object;
    std::string path;
    std::string key;
    int index = 0;
    bool expect_key = true;
    bool element_seen = false;
  };
  std::vector<Frame> stack;
  int line = 1;
  const auto value_start = [&]() {
    if (stack.empty() || stack.back().object) return;
    auto& f = stack.back();
    if (!f.element_seen) {
      lines_.emplace(f.path + "/" + std::to_string(f.index), line);
      f.element_seen = true;
    }
  };
  const auto child_path = [&]() -> std::string {
    if (stack.empty()) return "";
    const auto& f = stack.back();
    return f.path + "/" + (f.object ? escape_token(f.key) : std::to_string(f.index));
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    switch (c) {
      case '\n': ++line; break;
      case '{':
      case '[': {
        value_start();
        const auto path = child_path();
        stack.push_back({c == '{', path, {}, 0, true, false});
        break;
      }
      case '}':
      case ']':
        if (!stack.empty()) stack.pop_back();
        break;
      case ',':
        if (!stack.empty()) {
          auto& f = stack.back();
          if (f.object) {
            f.expect_key = true;
          } else {
            ++f.index;
            f.element_seen = false;
          }
        }
        break;
      case ':':
        if (!stack.empty()) stack.back().expect_key = false;
        break;
      case '"': {
        std::string s;
        std::size_t j = i + 1;
        for (; j < text.size() && text[j] != '"'; ++j) {
          if (text[j] == '\\' && j + 1 < text.size()) ++j;
          if (text[j] == '\n') ++line;
          s += text[j];
        }
        if (!stack.empty() && stack.back().object && stack.back().expect_key) {
          stack.back().key = s;
          lines_.emplace(stack.back().path + "/" + escape_token(s), line);
        } else {
          value_start();
        }
        i = j;
        break;
      }
      default:
        if (c != ' ' && c != '\t' && c != '\r') value_start();
    }
  }
}

int LineIndex::line_of(const std::string& pointer) const {
  std::string p = pointer;
  while (true) {
    const auto it = lines_.find(p);
    if (it != lines_.end()) return it->second;
    const auto slash = p.rfind('/');
    if (slash == std::string::npos || p.empty()) return 1;
    p = p.substr(0, slash);
  }
}

json parse_json_document(const std::string& text, const std::string& source, LineIndex* index) {
  try {
    auto j = json::parse(text);
    if (index) *index = LineIndex(text);
    return j;
  } catch (const json::parse_error& e) {
    const auto upto = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, text.size());
    const int line = 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<long>(upto), '\n'));
    std::string what = e.what();
    const auto colon = what.find("syntax error");
    throw ConfigError(source, line, colon == std::string::npos ? what : what.substr(colon));
  }
}

std::string to_string(Experiment e) {
  switch (e) {
    case Experiment::AssignEval: return "assign-eval";
    case Experiment::KitchenRun: return "kitchen-run";
    case Experiment::CapabilitySweep: return "capability-sweep";
  }
  return "kitchen-run";
}

std::string RoleSpec::reported_model() const {
  if (binding) return binding->model_id;
  return model_id.empty() ? coordination::kScriptedModelId : model_id;
}

json RoleSpec::to_json() const {
  json j = json::object();
  if (binding) {
    j = binding->to_json();
    j["transport"] = transport;
    if (!session_file.empty()) j["session_file"] = session_file;
  } else {
    j["scripted"] = true;
    j["model_id"] = reported_model();
    if (tokens_in || tokens_out) {
      j["tokens_in"] = tokens_in;
      j["tokens_out"] = tokens_out;
    }
  }
  if (failure_rate > 0.0) j["failure_rate"] = failure_rate;
  return j;
}

const RoleSpec& ExperimentConfig::worker_for(int k) const {
  if (k >= 0 && static_cast<std::size_t>(k) < workers.size()) return workers[static_cast<std::size_t>(k)];
  return worker;
}

json ExperimentConfig::to_json() const {
  json modes_j = json::array();
  for (auto m : modes) modes_j.push_back(coordination::to_string(m));
  json workers_j = json::array();
  for (const auto& w : workers) workers_j.push_back(w.to_json());
  json rosters_j = json::array();
  for (const auto& r : rosters) {
    json rj = json::array();
    for (const auto& w : r) rj.push_back(w.to_json());
    rosters_j.push_back(rj);
  }
  json j{{"experiment", to_string(experiment)},
         {"seed", seed ? json(*seed) : json(nullptr)},
         {"modes", modes_j},
         {"level", level_file ? level_file->string() : level_id},
         {"agents", agent_counts},
         {"step_budget", step_budget},
         {"episodes", episodes},
         {"bindings",
          {{"worker", worker.to_json()},
           {"workers", workers_j},
           {"orchestrator", orchestrator.to_json()},
           {"planner", planner.to_json()}}},
         {"capability_mode", coordination::to_string(capability_mode)},
         {"output_dir", output_dir.string()},
         {"jobs", jobs}};
  if (experiment == Experiment::CapabilitySweep) {
    j["rosters"] = rosters_j;
    j["pairs"] = pairs;
    j["calibration_episodes"] = calibration_episodes;
  }
  if (experiment == Experiment::AssignEval) {
    j["instances"] = instances;
    j["n_range"] = {n_min, n_max};
    j["cost_range"] = {cost_min, cost_max};
    j["allocator"] = allocator;
    j["optimality"] = optimality == assign::OptimalityMode::StrictMapping ? "strict" : "cost";
  }
  return j;
}

// Parsing --------------------------------------------------------------------

namespace {

class Reader {
 public:
  Reader(const json& doc, const LineIndex& idx, std::string source)
      : doc_(doc), idx_(idx), source_(std::move(source)) {}

  [[noreturn]] void fail(const std::string& ptr, const std::string& msg) const {
    throw ConfigError(source_, idx_.line_of(ptr), msg);
  }

  const json* at(const std::string& ptr) const {
    const json::json_pointer p(ptr);
    return doc_.contains(p) ? &doc_.at(p) : nullptr;
  }

  static std::string name(const std::string& ptr) { return "'" + ptr.substr(1) + "'"; }

  void only_keys(const std::string& ptr, const std::set<std::string>& allowed) const {
    const json* o = at(ptr);
    if (!o->is_object()) fail(ptr, (ptr.empty() ? std::string("config") : name(ptr)) + " must be an object");
    for (const auto& [k, v] : o->items()) {
      if (!allowed.count(k)) fail(ptr + "/" + escape_token(k), "unknown key '" + k + "'");
    }
  }

  std::int64_t integer(const std::string& ptr, std::int64_t lo, std::int64_t hi) const {
    const json* v = at(ptr);
    if (!v->is_number_integer()) fail(ptr, name(ptr) + " must be an integer");
    const auto x = v->get<std::int64_t>();
    if (x < lo || x > hi) {
      fail(ptr, name(ptr) + " must be in [" + std::to_string(lo) + ", " + std::to_string(hi) + "], got " +
                    std::to_string(x));
    }
    return x;
  }

  std::uint64_t unsigned_integer(const std::string& ptr) const {
    const json* v = at(ptr);
    if (!v->is_number_unsigned() && !(v->is_number_integer() && v->get<std::int64_t>() >= 0)) {
      fail(ptr, name(ptr) + " must be a non-negative integer");
    }
    return v->get<std::uint64_t>();
  }

  double number(const std::string& ptr, double lo, double hi) const {
    const json* v = at(ptr);
    if (!v->is_number()) fail(ptr, name(ptr) + " must be a number");
    const auto x = v->get<double>();
    if (x < lo || x > hi) fail(ptr, name(ptr) + " out of range");
    return x;
  }

  std::string string(const std::string& ptr) const {
    const json* v = at(ptr);
    if (!v->is_string()) fail(ptr, name(ptr) + " must be a string");
    return v->get<std::string>();
  }

  bool boolean(const std::string& ptr) const {
    const json* v = at(ptr);
    if (!v->is_boolean()) fail(ptr, name(ptr) + " must be true or false");
    return v->get<bool>();
  }

  const json& array(const std::string& ptr) const {
    const json* v = at(ptr);
    if (!v->is_array()) fail(ptr, name(ptr) + " must be an array");
    return *v;
  }

  RoleSpec role(const std::string& ptr, bool worker) const {
    RoleSpec r;
    const json* v = at(ptr);
    if (v->is_string()) {
      if (v->get<std::string>() != "scripted") fail(ptr, name(ptr) + " must be \"scripted\" or a binding object");
      return r;
    }
    std::set<std::string> keys{"model_id", "endpoint_url", "auth_env_var", "max_retries", "timeout_ms",
                               "transport", "session_file", "scripted", "tokens_in", "tokens_out"};
    if (worker) keys.insert("failure_rate");
    only_keys(ptr, keys);
    const auto has = [&](const char* k) { return v->contains(k); };
    const bool scripted = has("scripted") ? boolean(ptr + "/scripted") : !has("endpoint_url");
    if (has("failure_rate")) r.failure_rate = number(ptr + "/failure_rate", 0.0, 1.0);
    if (scripted) {
      for (const char* k : {"endpoint_url", "auth_env_var", "max_retries", "timeout_ms", "transport", "session_file"}) {
        if (has(k)) fail(ptr + "/" + k, std::string("'") + k + "' is only valid for model-backed roles");
      }
      if (has("model_id")) r.model_id = string(ptr + "/model_id");
      if (has("tokens_in")) r.tokens_in = integer(ptr + "/tokens_in", 0, 1'000'000'000);
      if (has("tokens_out")) r.tokens_out = integer(ptr + "/tokens_out", 0, 1'000'000'000);
      return r;
    }
    for (const char* k : {"tokens_in", "tokens_out"}) {
      if (has(k)) fail(ptr + "/" + k, std::string("'") + k + "' is only valid for scripted roles");
    }
    if (!has("model_id")) fail(ptr, name(ptr) + " needs 'model_id'");
    gateway::ModelBinding b;
    b.model_id = string(ptr + "/model_id");
    if (has("endpoint_url")) b.endpoint_url = string(ptr + "/endpoint_url");
    if (has("auth_env_var")) b.auth_env_var = string(ptr + "/auth_env_var");
    if (has("max_retries")) b.max_retries = static_cast<int>(integer(ptr + "/max_retries", 0, 10));
    if (has("timeout_ms")) b.timeout = std::chrono::milliseconds(integer(ptr + "/timeout_ms", 1, 3'600'000));
    if (has("transport")) r.transport = string(ptr + "/transport");
    if (r.transport != "http" && r.transport != "record" && r.transport != "replay") {
      fail(ptr + "/transport", "'transport' must be http, record or replay");
    }
    if (has("session_file")) r.session_file = string(ptr + "/session_file");
    if (r.transport != "http" && r.session_file.empty()) {
      fail(ptr, name(ptr) + " needs 'session_file' for the " + r.transport + " transport");
    }
    if (r.transport != "replay" && b.endpoint_url.empty()) fail(ptr, name(ptr) + " needs 'endpoint_url'");
    r.binding = b;
    return r;
  }

 private:
  const json& doc_;
  const LineIndex& idx_;
  std::string source_;
};

ControllerMode mode_at(const Reader& r, const std::string& ptr) {
  try {
    return coordination::mode_from_string(r.string(ptr));
  } catch (const ConfigError&) {
    throw;
  } catch (const StructuralError& e) {
    r.fail(ptr, e.what());
  }
}

void set_level(ExperimentConfig& c, const std::string& value) {
  const auto ids = kitchen::builtin_level_ids();
  if (std::find(ids.begin(), ids.end(), value) != ids.end()) {
    c.level_id = value;
    c.level_file.reset();
  } else {
    c.level_file = value;
    c.level_id = std::filesystem::path(value).stem().string();
  }
}

}  // namespace

ExperimentConfig parse_config(const std::string& text, const std::string& source, Experiment experiment) {
  LineIndex idx;
  const json doc = parse_json_document(text, source, &idx);
  const Reader r(doc, idx, source);
  r.only_keys("", {"experiment", "seed", "mode", "modes", "level", "agents", "step_budget", "episodes",
                   "legal_action_hint", "bindings", "capability_mode", "rosters", "pairs", "calibration_episodes",
                   "instances", "n_range", "cost_range", "allocator", "optimality", "mock_replies",
                   "candidates_file", "prices_file", "output_dir", "jobs"});
  ExperimentConfig c;
  c.experiment = experiment;
  const auto has = [&](const char* k) { return doc.contains(k); };

  if (has("experiment")) {
    const auto e = r.string("/experiment");
    if (e != to_string(experiment)) {
      r.fail("/experiment", "config is for '" + e + "' but the subcommand is '" + to_string(experiment) + "'");
    }
  }
  if (has("seed")) c.seed = r.unsigned_integer("/seed");
  if (has("mode") && has("modes")) r.fail("/modes", "give either 'mode' or 'modes', not both");
  if (has("mode")) c.modes = {mode_at(r, "/mode")};
  if (has("modes")) {
    const auto& a = r.array("/modes");
    if (a.empty()) r.fail("/modes", "'modes' must not be empty");
    c.modes.clear();
    for (std::size_t k = 0; k < a.size(); ++k) c.modes.push_back(mode_at(r, "/modes/" + std::to_string(k)));
  }
  if (has("level")) set_level(c, r.string("/level"));
  if (has("agents")) {
    if (doc["agents"].is_array()) {
      const auto& a = r.array("/agents");
      if (a.empty()) r.fail("/agents", "'agents' must not be empty");
      c.agent_counts.clear();
      for (std::size_t k = 0; k < a.size(); ++k) {
        c.agent_counts.push_back(static_cast<int>(r.integer("/agents/" + std::to_string(k), 1, 6)));
      }
    } else {
      c.agent_counts = {static_cast<int>(r.integer("/agents", 1, 6))};
    }
  }
  if (has("step_budget")) c.step_budget = static_cast<int>(r.integer("/step_budget", 0, 100'000));
  if (has("episodes")) c.episodes = static_cast<int>(r.integer("/episodes", 1, 100'000));
  if (has("legal_action_hint")) c.legal_action_hint = r.boolean("/legal_action_hint");

  if (has("bindings")) {
    r.only_keys("/bindings", {"worker", "workers", "orchestrator", "planner", "allocator"});
    const auto& b = doc["bindings"];
    if (b.contains("worker")) c.worker = r.role("/bindings/worker", true);
    if (b.contains("workers")) {
      const auto& a = r.array("/bindings/workers");
      for (std::size_t k = 0; k < a.size(); ++k) c.workers.push_back(r.role("/bindings/workers/" + std::to_string(k), true));
    }
    if (b.contains("orchestrator")) c.orchestrator = r.role("/bindings/orchestrator", false);
    if (b.contains("planner")) c.planner = r.role("/bindings/planner", false);
    if (b.contains("allocator")) c.allocator_role = r.role("/bindings/allocator", false);
  }
  if (!c.workers.empty()) {
    for (int n : c.agent_counts) {
      if (static_cast<std::size_t>(n) > c.workers.size()) {
        r.fail("/bindings/workers", "'workers' lists " + std::to_string(c.workers.size()) + " bindings but " +
                                        std::to_string(n) + " agents are requested");
      }
    }
  }

  if (has("capability_mode")) {
    try {
      c.capability_mode = coordination::capability_mode_from_string(r.string("/capability_mode"));
    } catch (const ConfigError&) {
      throw;
    } catch (const StructuralError& e) {
      r.fail("/capability_mode", e.what());
    }
  }
  if (has("rosters")) {
    const auto& a = r.array("/rosters");
    for (std::size_t k = 0; k < a.size(); ++k) {
      const auto p = "/rosters/" + std::to_string(k);
      const auto& ra = r.array(p);
      if (ra.empty() || ra.size() > 6) r.fail(p, "each roster needs 1 to 6 workers");
      std::vector<RoleSpec> roster;
      for (std::size_t i = 0; i < ra.size(); ++i) roster.push_back(r.role(p + "/" + std::to_string(i), true));
      c.rosters.push_back(std::move(roster));
    }
  }
  if (has("pairs")) c.pairs = static_cast<int>(r.integer("/pairs", 1, 100'000));
  if (has("calibration_episodes")) c.calibration_episodes = static_cast<int>(r.integer("/calibration_episodes", 0, 1000));

  if (has("instances")) c.instances = static_cast<int>(r.integer("/instances", 1, 10'000'000));
  if (has("n_range")) {
    const auto& a = r.array("/n_range");
    if (a.size() != 2) r.fail("/n_range", "'n_range' must be [min, max]");
    c.n_min = static_cast<int>(r.integer("/n_range/0", 1, 64));
    c.n_max = static_cast<int>(r.integer("/n_range/1", c.n_min, 64));
  }
  if (has("cost_range")) {
    const auto& a = r.array("/cost_range");
    if (a.size() != 2) r.fail("/cost_range", "'cost_range' must be [lo, hi]");
    c.cost_min = r.integer("/cost_range/0", 0, 1'000'000'000);
    c.cost_max = r.integer("/cost_range/1", c.cost_min, 1'000'000'000);
  }
  if (has("allocator")) {
    c.allocator = r.string("/allocator");
    static const std::set<std::string> known{"hungarian", "greedy", "file", "mock", "llm"};
    if (!known.count(c.allocator)) r.fail("/allocator", "'allocator' must be hungarian, greedy, file, mock or llm");
  }
  if (has("optimality")) {
    const auto o = r.string("/optimality");
    if (o == "cost") {
      c.optimality = assign::OptimalityMode::CostEquality;
    } else if (o == "strict") {
      c.optimality = assign::OptimalityMode::StrictMapping;
    } else {
      r.fail("/optimality", "'optimality' must be cost or strict");
    }
  }
  if (has("mock_replies")) {
    const auto& a = r.array("/mock_replies");
    for (std::size_t k = 0; k < a.size(); ++k) c.mock_replies.push_back(r.string("/mock_replies/" + std::to_string(k)));
  }
  if (has("candidates_file")) c.candidates_file = r.string("/candidates_file");
  if (c.experiment == Experiment::AssignEval) {
    if (c.allocator == "file" && !c.candidates_file) r.fail("/allocator", "allocator 'file' needs 'candidates_file'");
    if (c.allocator == "mock" && static_cast<int>(c.mock_replies.size()) != c.instances) {
      r.fail(has("mock_replies") ? "/mock_replies" : "/allocator",
             "allocator 'mock' needs exactly one entry in 'mock_replies' per instance (" +
                 std::to_string(c.instances) + ")");
    }
    if (c.allocator == "llm" && c.allocator_role.scripted()) {
      r.fail("/allocator", "allocator 'llm' needs a model-backed 'bindings.allocator'");
    }
  }
  if (c.experiment == Experiment::CapabilitySweep && c.rosters.empty()) {
    r.fail(has("rosters") ? "/rosters" : "", "capability-sweep needs at least one roster in 'rosters'");
  }

  if (has("prices_file")) c.prices_file = r.string("/prices_file");
  if (has("output_dir")) c.output_dir = r.string("/output_dir");
  if (has("jobs")) c.jobs = static_cast<int>(r.integer("/jobs", 1, 256));
  return c;
}

ExperimentConfig load_config(const std::filesystem::path& path, Experiment experiment) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError(path.string(), 1, "cannot open config file");
  std::ostringstream s;
  s << in.rdbuf();
  return parse_config(s.str(), path.string(), experiment);
}

void apply_overrides(ExperimentConfig& c, const Overrides& o) {
  if (o.seed) c.seed = *o.seed;
  if (o.agents) {
    if (*o.agents < 1 || *o.agents > 6) throw ConfigError("flags", 0, "--agents must be in [1, 6]");
    if (!c.workers.empty() && static_cast<std::size_t>(*o.agents) > c.workers.size()) {
      throw ConfigError("flags", 0, "--agents exceeds the per-agent worker bindings in the config");
    }
    c.agent_counts = {*o.agents};
  }
  if (o.mode) {
    try {
      c.modes = {coordination::mode_from_string(*o.mode)};
    } catch (const StructuralError& e) {
      throw ConfigError("flags", 0, std::string("--mode: ") + e.what());
    }
  }
  if (o.level) set_level(c, *o.level);
  if (o.jobs) {
    if (*o.jobs < 1) throw ConfigError("flags", 0, "--jobs must be at least 1");
    c.jobs = *o.jobs;
  }
  if (o.output) c.output_dir = *o.output;
  if (!c.seed) throw ConfigError("flags", 0, "a seed is required: set 'seed' in the config or pass --seed");
}

}  // namespace taskalloc::cli
