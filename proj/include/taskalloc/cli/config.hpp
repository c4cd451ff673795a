#pragma once

// Experiment configuration: one JSON document plus command-line overrides.
// Every validation error names the line of the offending key.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskalloc/assign/assignment.hpp"
#include "taskalloc/common/error.hpp"
#include "taskalloc/coordination/policy.hpp"
#include "taskalloc/gateway/gateway.hpp"

namespace taskalloc::cli {

/// "source:line: message"; line 0 (flags) drops the line part.
class ConfigError : public StructuralError {
 public:
  ConfigError(const std::string& source, int line, const std::string& message);
  int line() const { return line_; }

 private:
  int line_;
};

/// Maps JSON pointers ("/bindings/workers/1/model_id") to the 1-based line
/// where that key or array element starts.
class LineIndex {
 public:
  LineIndex() = default;
  explicit LineIndex(const std::string& text);
  /// Line of `pointer`, else of its nearest located ancestor, else 1.
  int line_of(const std::string& pointer) const;

 private:
  std::map<std::string, int> lines_;
};

/// Parses `text`; syntax errors become ConfigError with the failing line.
nlohmann::json parse_json_document(const std::string& text, const std::string& source, LineIndex* index = nullptr);

enum class Experiment { AssignEval, KitchenRun, CapabilitySweep };
std::string to_string(Experiment e);

/// One policy role. Scripted unless `binding` is set.
struct RoleSpec {
  std::optional<gateway::ModelBinding> binding;
  std::string transport = "http";  // http | record | replay (model-backed only)
  std::string session_file;        // record/replay transports
  std::string model_id;            // scripted: reported model id (default scripted-oracle)
  std::int64_t tokens_in = 0;      // scripted: simulated usage per call
  std::int64_t tokens_out = 0;
  double failure_rate = 0.0;       // workers only

  bool scripted() const { return !binding.has_value(); }
  std::string reported_model() const;
  nlohmann::json to_json() const;
};

struct ExperimentConfig {
  Experiment experiment = Experiment::KitchenRun;
  std::optional<std::uint64_t> seed;  // mandatory after overrides
  std::vector<coordination::ControllerMode> modes{coordination::ControllerMode::Individual};
  std::string level_id = "level_1";
  std::optional<std::filesystem::path> level_file;
  std::vector<int> agent_counts{1};
  int step_budget = 0;
  int episodes = 1;
  bool legal_action_hint = false;

  RoleSpec worker;
  std::vector<RoleSpec> workers;  // per agent; overrides `worker`
  RoleSpec orchestrator;
  RoleSpec planner;

  coordination::CapabilityMode capability_mode = coordination::CapabilityMode::OnTheFly;
  std::vector<std::vector<RoleSpec>> rosters;  // capability-sweep
  int pairs = 1;
  int calibration_episodes = 0;

  // assign-eval
  int instances = 100;
  int n_min = 2;
  int n_max = 8;
  assign::Cost cost_min = 0;
  assign::Cost cost_max = 99;
  std::string allocator = "hungarian";  // hungarian | greedy | file | mock | llm
  assign::OptimalityMode optimality = assign::OptimalityMode::CostEquality;
  std::vector<std::string> mock_replies;
  std::optional<std::filesystem::path> candidates_file;
  RoleSpec allocator_role;

  std::optional<std::filesystem::path> prices_file;
  std::filesystem::path output_dir = "out";
  int jobs = 1;

  /// Worker role for agent k of an episode.
  const RoleSpec& worker_for(int k) const;
  nlohmann::json to_json() const;
};

/// Reads and validates a config document. `experiment` fixes the experiment
/// kind when the document has none (the subcommand decides).
ExperimentConfig parse_config(const std::string& text, const std::string& source, Experiment experiment);
ExperimentConfig load_config(const std::filesystem::path& path, Experiment experiment);

struct Overrides {
  std::optional<std::uint64_t> seed;
  std::optional<int> agents;
  std::optional<std::string> mode;
  std::optional<std::string> level;
  std::optional<int> jobs;
  std::optional<std::filesystem::path> output;
};

/// Flags win over the file. Throws ConfigError (source "flags") on bad values
/// and when no seed is given anywhere.
void apply_overrides(ExperimentConfig& config, const Overrides& o);

}  // namespace taskalloc::cli
