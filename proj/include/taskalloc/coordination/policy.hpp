#pragma once

// Control topologies and the policy interfaces they drive.
//   Individual:   one WorkerPolicy per agent, queried independently each step.
//   Orchestrator: one CentralPolicy returning the joint action each step.
//   Planner:      a PlannerPolicy invoked at step 0 and after every step with
//                 events, plus one WorkerPolicy per agent following the plan.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskalloc/accounting/accounting.hpp"
#include "taskalloc/kitchen/kitchen.hpp"

namespace taskalloc::coordination {

using kitchen::AgentId;
using kitchen::KitchenAction;
using kitchen::KitchenEvent;
using kitchen::KitchenState;

enum class ControllerMode { Individual, Orchestrator, Planner };
std::string to_string(ControllerMode m);
ControllerMode mode_from_string(const std::string& s);  // case-insensitive

enum class CapabilityMode { OnTheFly, Informed };
std::string to_string(CapabilityMode m);
CapabilityMode capability_mode_from_string(const std::string& s);

/// Structured part of a directive. `phase` is "prep" (bring the step's inputs
/// to its tool) or "cook" (run the tool, and serve when it is the last step).
struct WorkUnit {
  int order_id = 0;
  kitchen::ItemId dish;
  int recipe_step = 0;
  std::string phase;
  friend auto operator<=>(const WorkUnit&, const WorkUnit&) = default;
};

struct TaskDirective {
  std::string text;
  std::optional<WorkUnit> unit;
};

struct Plan {
  int created_at = 0;
  std::vector<KitchenEvent> trigger_events;
  std::map<AgentId, std::vector<TaskDirective>> directives;  // every agent has an entry
  std::string summary;

  /// The agent's own directives plus the plan summary; "idle" when empty.
  std::string excerpt_for(const AgentId& agent) const;
  /// "agentK: directive; directive" lines for every agent, in roster order.
  std::string to_text() const;
  nlohmann::json to_json() const;
};

/// Free-text model output and what could be read from it.
struct RawDecision {
  std::string raw_text;
  std::optional<KitchenAction> parsed;
  bool parse_ok = false;  // parse_ok <=> parsed

  static RawDecision of(KitchenAction a, std::string raw = {});
  static RawDecision failure(std::string raw);
};

/// Provider-reported (or simulated) token usage of one policy call.
struct Usage {
  std::string model_id;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
};

struct PolicyQuery {
  std::string observation;  // render_observation(*state)
  std::optional<std::string> plan_excerpt;
  std::shared_ptr<const Plan> plan;
  AgentId agent;  // empty for central queries
  std::optional<std::vector<std::string>> legal_action_hint;
  std::shared_ptr<const KitchenState> state;
  std::map<AgentId, kitchen::ActionResult> last_results;  // previous step, after fallbacks
  int step = 0;
};

struct WorkerDecision {
  RawDecision decision;
  std::optional<Usage> usage;
  std::string failure;  // transport failure text; empty on success
};

struct CentralDecision {
  std::string raw_text;
  std::map<AgentId, RawDecision> per_agent;  // missing agents fall back to Noop
  std::optional<Usage> usage;
  std::string failure;
};

struct ReplanInput {
  std::string prompt;  // built by the episode loop; recorded verbatim
  std::string observation;
  std::vector<KitchenEvent> events;
  std::shared_ptr<const Plan> prior;
  std::vector<accounting::RosterEntry> roster;
  /// Success rates per agent when capability information is provided.
  std::optional<std::map<AgentId, std::optional<Rational>>> capability;
  std::shared_ptr<const KitchenState> state;
  std::map<AgentId, kitchen::ActionResult> last_results;
  int step = 0;
};

struct PlannerDecision {
  std::optional<Plan> plan;  // absent on failure: the prior plan stays
  std::string raw_text;
  std::optional<Usage> usage;
  std::string failure;
};

class WorkerPolicy {
 public:
  virtual ~WorkerPolicy() = default;
  virtual WorkerDecision decide(const PolicyQuery& q) = 0;
  virtual std::string model_id() const = 0;
};

class CentralPolicy {
 public:
  virtual ~CentralPolicy() = default;
  virtual CentralDecision decide(const PolicyQuery& q) = 0;
  virtual std::string model_id() const = 0;
};

class PlannerPolicy {
 public:
  virtual ~PlannerPolicy() = default;
  virtual PlannerDecision replan(const ReplanInput& in) = 0;
  virtual std::string model_id() const = 0;
};

/// Bindings required by the mode: Individual needs `workers` for every agent;
/// Orchestrator needs `central`; Planner needs `planner` and `workers`.
struct PolicyBindings {
  std::map<AgentId, std::shared_ptr<WorkerPolicy>> workers;
  std::shared_ptr<CentralPolicy> central;
  std::shared_ptr<PlannerPolicy> planner;
};

}  // namespace taskalloc::coordination
