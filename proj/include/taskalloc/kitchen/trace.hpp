#pragma once

// JSON-lines episode traces. Line 1 is a header naming the level, roster size,
// seed and controller mode; every following line is one step record
// {step, actions, results, events, observation_hash}.

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskalloc/kitchen/kitchen.hpp"

namespace taskalloc::kitchen {

nlohmann::json action_to_json(const KitchenAction& a);  // {"type":"get","agent":...,"location":...,"item":...}
KitchenAction action_from_json(const nlohmann::json& j);
ActionResult result_from_string(const std::string& s);   // inverse of to_string(ActionResult)

struct TraceHeader {
  LevelConfig level;
  int agents = 1;
  std::uint64_t seed = 0;
  std::string mode;
};

struct TraceRecord {
  int step = 0;
  JointAction actions;
  std::map<AgentId, ActionResult> results;
  std::vector<KitchenEvent> events;
  std::string observation_hash;  // of the state after the step
};

nlohmann::json to_json(const TraceHeader& h);
nlohmann::json to_json(const TraceRecord& r);
TraceRecord record_from_json(const nlohmann::json& j);

struct Trace {
  TraceHeader header;
  std::vector<TraceRecord> records;
};

void write_trace(std::ostream& out, const Trace& trace);
/// Throws StructuralError with the offending line number on malformed input.
Trace read_trace(std::istream& in);

struct ReplayReport {
  bool ok = true;
  int steps_checked = 0;
  std::optional<int> first_mismatch_step;
  std::string detail;
};

/// Re-executes the recorded actions from a fresh load_level and compares
/// results, events and observation hashes step by step.
ReplayReport replay(const Trace& trace);

}  // namespace taskalloc::kitchen
