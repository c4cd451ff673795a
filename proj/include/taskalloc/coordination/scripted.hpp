#pragma once

// Scripted oracle: a deterministic earliest-deadline-first recipe follower
// that stands in for model-backed policies when no network is available.
//
// Work is split into units per live order and recipe step: "prep" brings the
// step's inputs to a bound tool, "cook" activates it (and serves the dish
// after the last step). One ScriptedTeam is shared by all bindings of an
// episode; it computes the joint decision once per step, agent by agent, on a
// scratch copy of the state, and replaces any action that would fail with Noop.

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "taskalloc/common/rng.hpp"
#include "taskalloc/coordination/policy.hpp"

namespace taskalloc::coordination {

inline constexpr const char* kScriptedModelId = "scripted-oracle";

class ScriptedTeam {
 public:
  ScriptedTeam() = default;

  /// Joint action for q.state. Uses the plan's structured units when q.plan
  /// has them, otherwise assigns units greedily each step.
  kitchen::JointAction decide_joint(const PolicyQuery& q);

  /// Partition of the pending units: units in progress stay with their agent,
  /// the rest go round-robin over the eligible agents in deadline order.
  /// With capability rates, agents are ordered by rate (highest first) and
  /// those below half the best rate are left idle.
  Plan make_plan(const ReplanInput& in);

 private:
  struct Job {
    int order_id = 0;
    kitchen::ItemId dish;
    int stage = 0;  // recipe step in progress; == steps.size() once the dish is cooked
    std::map<int, kitchen::LocationId> tools;
    std::set<int> cooking;
  };
  enum class CarryKind { Deliver, Serve, Dispose };
  struct Carry {
    CarryKind kind = CarryKind::Dispose;
    int order_id = 0;
    int step = 0;
    kitchen::LocationId target;
    kitchen::ItemId item;
  };
  struct UnitAction {
    std::optional<KitchenAction> action;
    std::optional<Carry> carry;                     // set when the action picks something up
    std::optional<kitchen::LocationId> preposition;  // where to wait when blocked
  };

  void update(const KitchenState& s, const std::map<AgentId, kitchen::ActionResult>& last_results);
  void advance(Job& job, const KitchenState& s);
  bool bind(Job& job, int step, const KitchenState& s);
  bool bound_elsewhere(const kitchen::LocationId& loc, int order_id) const;
  std::vector<const Job*> jobs_by_deadline(const KitchenState& s) const;
  std::vector<WorkUnit> pending_units(const KitchenState& s) const;
  const kitchen::Recipe& recipe(const Job& j) const;
  const Job* job(int order_id) const;

  kitchen::Items missing(const Job& j, int step, const KitchenState& s, const AgentId& except = {}) const;
  std::optional<kitchen::LocationId> find_source(const kitchen::ItemId& item, const Job& j, int step,
                                                 const KitchenState& s) const;
  UnitAction unit_action(const AgentId& a, const WorkUnit& u, const KitchenState& s) const;
  KitchenAction carry_action(const AgentId& a, const KitchenState& s);
  bool carry_valid(const Carry& c, const kitchen::ItemId& held, const KitchenState& s) const;
  std::string describe(const WorkUnit& u) const;

  std::mutex mu_;
  std::shared_ptr<const kitchen::LevelConfig> level_;
  std::map<int, Job> jobs_;
  std::map<AgentId, Carry> carry_;
  std::map<AgentId, KitchenAction> issued_;
  std::map<AgentId, WorkUnit> last_unit_;
  int updated_step_ = -1;
  int cached_step_ = -1;
  const Plan* cached_plan_ = nullptr;
  kitchen::JointAction cached_;
};

/// Worker bound to a shared team. `simulated_usage`, when set, is reported on
/// every call so scripted runs can carry ledger costs.
std::shared_ptr<WorkerPolicy> scripted_worker(std::shared_ptr<ScriptedTeam> team, AgentId agent,
                                              std::optional<Usage> simulated_usage = std::nullopt);
std::shared_ptr<CentralPolicy> scripted_central(std::shared_ptr<ScriptedTeam> team,
                                                std::optional<Usage> simulated_usage = std::nullopt);
std::shared_ptr<PlannerPolicy> scripted_planner(std::shared_ptr<ScriptedTeam> team,
                                                std::optional<Usage> simulated_usage = std::nullopt);

/// Fresh team plus every binding `mode` needs for the agents of `state`.
PolicyBindings scripted_bindings(ControllerMode mode, const KitchenState& state);

/// Replaces the inner decision with an unparseable reply with probability
/// `failure_rate`, drawn from a seeded stream. Models an unreliable worker.
class FlakyWorker : public WorkerPolicy {
 public:
  FlakyWorker(std::shared_ptr<WorkerPolicy> inner, double failure_rate, std::uint64_t seed,
              std::string model_id = {});
  WorkerDecision decide(const PolicyQuery& q) override;
  std::string model_id() const override;
  int injected() const;

 private:
  std::shared_ptr<WorkerPolicy> inner_;
  double failure_rate_;
  std::string model_id_;
  mutable std::mutex mu_;
  Engine eng_;
  int injected_ = 0;
};

}  // namespace taskalloc::coordination
