#pragma once

// Deterministic kitchen environment. Agents move between locations (storage
// shelves, serving tables, cooking tools), carry one item at a time, load
// tools, run recipe steps and serve dishes against timed orders.
//
// One call to step() applies one action per agent in ascending agent order,
// then advances tool timers, then ages orders, then spawns new orders.

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskalloc/common/rng.hpp"

namespace taskalloc::kitchen {

using ItemId = std::string;
using LocationId = std::string;
using AgentId = std::string;
using Items = std::multiset<ItemId>;

inline constexpr int kMinAgents = 1;
inline constexpr int kMaxAgents = 6;
inline constexpr int kDefaultSpawnInterval = 12;
inline constexpr int kDefaultLifetime = 10;
inline constexpr int kDefaultCookSteps = 3;
inline constexpr int kDefaultMaxSteps = 60;

enum class LocationKind { Storage, ServingTable, Tool };

struct RecipeStep {
  std::string tool_kind;
  Items inputs;
  ItemId output;
  int cook_steps = kDefaultCookSteps;
};

struct Recipe {
  ItemId dish;
  std::vector<RecipeStep> steps;
};

struct LocationConfig {
  LocationId id;
  LocationKind kind = LocationKind::Storage;
  std::string tool_kind;  // Tool locations only
  Items contents;
};

struct OrderSchedule {
  int spawn_interval = kDefaultSpawnInterval;
  int lifetime = kDefaultLifetime;
  std::vector<ItemId> dish_pool;
};

struct LevelConfig {
  std::string level_id;
  std::vector<LocationConfig> locations;
  std::vector<Recipe> recipes;
  OrderSchedule orders;
  int max_steps = kDefaultMaxSteps;

  /// Throws StructuralError describing the first problem found.
  void validate() const;
  const Recipe* recipe_for(const ItemId& dish) const;
  /// The step a tool of `tool_kind` runs for exactly `contents`, if any.
  const RecipeStep* step_for(const std::string& tool_kind, const Items& contents) const;
  bool is_dish(const ItemId& item) const { return recipe_for(item) != nullptr; }

  static LevelConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Shipped levels: level_1 (one blender step), level_2 (chopping then a pot
/// mixture), level_3 (mixer then oven, two dishes).
std::vector<std::string> builtin_level_ids();
LevelConfig builtin_level(const std::string& level_id);

struct Processing {
  int remaining_steps = 0;
  ItemId output_item;
  friend bool operator==(const Processing&, const Processing&) = default;
};

struct LocationState {
  LocationId id;
  LocationKind kind = LocationKind::Storage;
  std::string tool_kind;
  Items contents;
  std::optional<AgentId> occupied_by;  // the agent that started the running cook
  std::optional<Processing> processing;
  friend bool operator==(const LocationState&, const LocationState&) = default;
};

struct AgentState {
  AgentId id;
  LocationId at;
  std::optional<ItemId> holding;
  friend bool operator==(const AgentState&, const AgentState&) = default;
};

struct DishOrder {
  int order_id = 0;
  ItemId dish;
  int lifetime = 0;
  int issued_at = 0;
  friend bool operator==(const DishOrder&, const DishOrder&) = default;
};

// Actions ------------------------------------------------------------------

struct Goto {
  AgentId agent;
  LocationId location;
  friend bool operator==(const Goto&, const Goto&) = default;
};
struct Get {
  AgentId agent;
  LocationId location;
  ItemId item;
  friend bool operator==(const Get&, const Get&) = default;
};
struct Put {
  AgentId agent;
  LocationId location;
  friend bool operator==(const Put&, const Put&) = default;
};
struct Activate {
  AgentId agent;
  LocationId location;
  friend bool operator==(const Activate&, const Activate&) = default;
};
struct Noop {
  AgentId agent;
  friend bool operator==(const Noop&, const Noop&) = default;
};
using KitchenAction = std::variant<Goto, Get, Put, Activate, Noop>;

enum class ActionKind { Goto, Get, Put, Activate, Noop };
inline constexpr ActionKind kAllActionKinds[] = {ActionKind::Goto, ActionKind::Get, ActionKind::Put,
                                                  ActionKind::Activate, ActionKind::Noop};

ActionKind kind_of(const KitchenAction& a);
const AgentId& agent_of(const KitchenAction& a);
std::string to_string(ActionKind k);  // "goto", "get", ...
/// Canonical text form, e.g. "get(agent0, storage0, salmon)".
std::string to_text(const KitchenAction& a);

enum class FailReason {
  ItemAbsent,
  Contention,      // the target was available at the start of the step
  HandsFull,
  NothingHeld,
  NotAtLocation,
  ToolBusy,
  NotATool,
  RecipeMismatch,
  PolicyFailure,   // assigned by the coordination layer for fallback Noops
};
std::string to_string(FailReason r);

struct ActionResult {
  bool succeeded = true;
  std::optional<FailReason> reason;
  static ActionResult ok() { return {}; }
  static ActionResult fail(FailReason r) { return {false, r}; }
  friend bool operator==(const ActionResult&, const ActionResult&) = default;
};
std::string to_string(const ActionResult& r);  // "Succeeded" or "Failed(ItemAbsent)"

// Events -------------------------------------------------------------------

enum class EventKind { OrderIntroduced, OrderCompleted, OrderExpired };
std::string to_string(EventKind k);

struct KitchenEvent {
  EventKind kind;
  ItemId dish;
  int order_id = 0;
  int step = 0;
  friend bool operator==(const KitchenEvent&, const KitchenEvent&) = default;
};
nlohmann::json to_json(const KitchenEvent& e);
KitchenEvent event_from_json(const nlohmann::json& j);

// State --------------------------------------------------------------------

struct OrderCounters {
  int introduced = 0;
  int completed = 0;
  int expired = 0;
  friend bool operator==(const OrderCounters&, const OrderCounters&) = default;
};

/// Items created and destroyed by cooking and serving since the level loaded.
struct ItemFlow {
  long initial = 0;
  long consumed = 0;  // cook inputs
  long produced = 0;  // cook outputs
  long served = 0;    // dishes removed by a completed order
  friend bool operator==(const ItemFlow&, const ItemFlow&) = default;
};

struct KitchenState {
  std::shared_ptr<const LevelConfig> level;
  std::vector<LocationState> locations;
  std::vector<AgentState> agents;  // agent0, agent1, ... in id order
  std::vector<DishOrder> orders;   // live orders by order_id
  std::vector<ItemId> accomplished;
  int step = 0;
  int next_order_id = 0;
  OrderCounters counters;
  ItemFlow flow;
  std::vector<KitchenEvent> initial_events;  // fired by load_level
  Engine order_rng;

  bool finished() const { return step >= level->max_steps; }
  const LocationState& location(const LocationId& id) const;
  LocationState& location(const LocationId& id);
  const AgentState& agent(const AgentId& id) const;
  AgentState& agent(const AgentId& id);
  bool has_location(const LocationId& id) const;
  bool has_agent(const AgentId& id) const;
  std::vector<AgentId> agent_ids() const;
  std::vector<LocationId> location_ids() const;

  /// Items on locations and in hands.
  long item_census() const;
};

/// Agents agent0..agent{n-1} start at the first serving table, empty-handed.
/// The first order is drawn from the seed and is live at step 0.
KitchenState load_level(const LevelConfig& config, int agent_count, std::uint64_t seed);

using JointAction = std::map<AgentId, KitchenAction>;

struct StepOutcome {
  KitchenState next_state;
  std::vector<KitchenEvent> events;
  std::map<AgentId, ActionResult> per_agent_result;
};

/// Thrown when step() is asked to advance a finished episode.
class EpisodeFinished : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// Structural problems (missing or unknown agents, unknown locations) throw
/// StructuralError; everything that can go wrong inside the world is a
/// Failed result.
StepOutcome step(const KitchenState& state, const JointAction& joint);

/// Result `action` would have if executed now, with no other agent acting.
ActionResult check_action(const KitchenState& state, const KitchenAction& action);

/// Applies one agent's action in place without advancing time. Events from a
/// completed order are appended to `events`. Used by step() and by policies
/// that look ahead.
ActionResult apply_action(KitchenState& state, const KitchenAction& action, std::vector<KitchenEvent>& events,
                          const KitchenState* step_start = nullptr);

/// Every action that would succeed for `agent` right now, plus Noop.
std::vector<KitchenAction> legal_actions(const KitchenState& state, const AgentId& agent);

/// Text observation: Game Configuration / Agent State / Kitchen State /
/// Accomplished Tasks with at(...), hold(...), inside(...) predicates.
std::string render_observation(const KitchenState& state);

/// 16 hex digits of FNV-1a over render_observation.
std::string observation_hash(const KitchenState& state);

}  // namespace taskalloc::kitchen
