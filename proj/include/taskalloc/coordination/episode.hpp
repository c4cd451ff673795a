#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskalloc/accounting/accounting.hpp"
#include "taskalloc/coordination/policy.hpp"
#include "taskalloc/kitchen/trace.hpp"

namespace taskalloc::coordination {

struct EpisodeOptions {
  int step_budget = 0;  // 0: the level's max_steps
  CapabilityMode capability_mode = CapabilityMode::OnTheFly;
  /// Informed mode reads rates from here when set, otherwise from the live profile.
  std::optional<accounting::CapabilityProfile> capability_prior;
  int jobs = 1;  // concurrent worker queries in Individual mode
  bool legal_action_hint = false;
  accounting::PriceTable prices = accounting::PriceTable::defaults();
  std::uint64_t seed = 0;  // recorded in the trace header only
};

struct ActionLogEntry {
  int step = 0;
  AgentId agent;
  KitchenAction action;         // what the environment executed
  kitchen::ActionResult result;  // Failed(PolicyFailure) for fallbacks
  bool fallback = false;
  std::string raw_text;
};

/// kind: "Fallback", "ReplanFailed" or "CallFailed".
struct EpisodeNote {
  int step = 0;
  std::string kind;
  AgentId agent;
  std::string detail;
};

struct PlannerCall {
  int step = 0;
  std::string prompt;
  /// Per (agent, model) counts the capability block was built from, when present.
  std::optional<std::map<AgentId, accounting::CapabilityCounts>> capability_snapshot;
  bool ok = true;
};

struct EpisodeReport {
  ControllerMode mode = ControllerMode::Individual;
  int steps_run = 0;
  int completed_orders = 0;
  kitchen::OrderCounters counters;
  std::vector<KitchenEvent> event_log;  // load-time events first
  std::vector<ActionLogEntry> action_log;
  std::vector<EpisodeNote> notes;
  int fallback_count = 0;
  int policy_calls = 0;  // worker, central and planner calls
  int planner_invocations = 0;
  std::vector<PlannerCall> planner_calls;
  std::vector<Plan> plans;  // every plan in force, in order
  std::vector<accounting::RosterEntry> roster;
  accounting::CostLedger ledger;
  accounting::ActionHistogram histogram;
  accounting::CapabilityProfile profile;
  kitchen::Trace trace;

  accounting::EfficiencyReport efficiency() const;
  /// completed counts, histogram, ledger rows, event log, notes, plans.
  nlohmann::json to_json() const;
};

/// Runs until the budget or the level's max_steps. Bindings must match the
/// mode (StructuralError otherwise). Policy failures never abort: the agent
/// executes Noop and the failure is noted.
EpisodeReport run_episode(ControllerMode mode, KitchenState env, const PolicyBindings& bindings,
                          const EpisodeOptions& options = {});

nlohmann::json to_json(const ActionLogEntry& e);
nlohmann::json to_json(const EpisodeNote& n);

}  // namespace taskalloc::coordination
