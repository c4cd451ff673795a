#include "taskalloc/kitchen/kitchen.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "taskalloc/common/error.hpp"

namespace taskalloc::kitchen {
namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};

void require_agent(const KitchenState& s, const AgentId& a) {
  if (!s.has_agent(a)) throw StructuralError("unknown agent '" + a + "'");
}

void require_location(const KitchenState& s, const LocationId& l) {
  if (!s.has_location(l)) throw StructuralError("unknown location '" + l + "'");
}

const LocationId* action_location(const KitchenAction& a) {
  return std::visit(overloaded{[](const Noop&) -> const LocationId* { return nullptr; },
                               [](const auto& x) -> const LocationId* { return &x.location; }},
                    a);
}

void spawn_order(KitchenState& s, std::vector<KitchenEvent>& events, int event_step) {
  const auto& pool = s.level->orders.dish_pool;
  const auto pick = uniform_int(s.order_rng, 0, static_cast<std::int64_t>(pool.size()) - 1);
  DishOrder o;
  o.order_id = s.next_order_id++;
  o.dish = pool[static_cast<std::size_t>(pick)];
  o.lifetime = s.level->orders.lifetime;
  o.issued_at = s.step;
  s.orders.push_back(o);
  ++s.counters.introduced;
  events.push_back({EventKind::OrderIntroduced, o.dish, o.order_id, event_step});
}

// Live order a served dish satisfies: shortest remaining lifetime, then lowest id.
std::vector<DishOrder>::iterator matching_order(KitchenState& s, const ItemId& dish) {
  auto best = s.orders.end();
  for (auto it = s.orders.begin(); it != s.orders.end(); ++it) {
    if (it->dish != dish) continue;
    if (best == s.orders.end() || it->lifetime < best->lifetime ||
        (it->lifetime == best->lifetime && it->order_id < best->order_id)) {
      best = it;
    }
  }
  return best;
}

bool busy(const LocationState& l) { return l.processing.has_value(); }

}  // namespace

// Actions ------------------------------------------------------------------

ActionKind kind_of(const KitchenAction& a) { return static_cast<ActionKind>(a.index()); }

const AgentId& agent_of(const KitchenAction& a) {
  return std::visit([](const auto& x) -> const AgentId& { return x.agent; }, a);
}

std::string to_string(ActionKind k) {
  switch (k) {
    case ActionKind::Goto: return "goto";
    case ActionKind::Get: return "get";
    case ActionKind::Put: return "put";
    case ActionKind::Activate: return "activate";
    case ActionKind::Noop: return "noop";
  }
  return "noop";
}

std::string to_text(const KitchenAction& a) {
  return std::visit(overloaded{
                        [](const Goto& x) { return "goto(" + x.agent + ", " + x.location + ")"; },
                        [](const Get& x) { return "get(" + x.agent + ", " + x.location + ", " + x.item + ")"; },
                        [](const Put& x) { return "put(" + x.agent + ", " + x.location + ")"; },
                        [](const Activate& x) { return "activate(" + x.agent + ", " + x.location + ")"; },
                        [](const Noop& x) { return "noop(" + x.agent + ")"; },
                    },
                    a);
}

std::string to_string(FailReason r) {
  switch (r) {
    case FailReason::ItemAbsent: return "ItemAbsent";
    case FailReason::Contention: return "Contention";
    case FailReason::HandsFull: return "HandsFull";
    case FailReason::NothingHeld: return "NothingHeld";
    case FailReason::NotAtLocation: return "NotAtLocation";
    case FailReason::ToolBusy: return "ToolBusy";
    case FailReason::NotATool: return "NotATool";
    case FailReason::RecipeMismatch: return "RecipeMismatch";
    case FailReason::PolicyFailure: return "PolicyFailure";
  }
  return "Unknown";
}

std::string to_string(const ActionResult& r) {
  if (r.succeeded) return "Succeeded";
  return "Failed(" + (r.reason ? to_string(*r.reason) : std::string("Unknown")) + ")";
}

std::string to_string(EventKind k) {
  switch (k) {
    case EventKind::OrderIntroduced: return "OrderIntroduced";
    case EventKind::OrderCompleted: return "OrderCompleted";
    case EventKind::OrderExpired: return "OrderExpired";
  }
  return "OrderIntroduced";
}

nlohmann::json to_json(const KitchenEvent& e) {
  return {{"kind", to_string(e.kind)}, {"dish", e.dish}, {"order_id", e.order_id}, {"step", e.step}};
}

KitchenEvent event_from_json(const nlohmann::json& j) {
  KitchenEvent e;
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "OrderIntroduced") {
    e.kind = EventKind::OrderIntroduced;
  } else if (kind == "OrderCompleted") {
    e.kind = EventKind::OrderCompleted;
  } else if (kind == "OrderExpired") {
    e.kind = EventKind::OrderExpired;
  } else {
    throw StructuralError("unknown event kind '" + kind + "'");
  }
  e.dish = j.at("dish").get<std::string>();
  e.order_id = j.at("order_id").get<int>();
  e.step = j.at("step").get<int>();
  return e;
}

// State --------------------------------------------------------------------

const LocationState& KitchenState::location(const LocationId& id) const {
  for (const auto& l : locations) {
    if (l.id == id) return l;
  }
  throw StructuralError("unknown location '" + id + "'");
}

LocationState& KitchenState::location(const LocationId& id) {
  return const_cast<LocationState&>(std::as_const(*this).location(id));
}

const AgentState& KitchenState::agent(const AgentId& id) const {
  for (const auto& a : agents) {
    if (a.id == id) return a;
  }
  throw StructuralError("unknown agent '" + id + "'");
}

AgentState& KitchenState::agent(const AgentId& id) {
  return const_cast<AgentState&>(std::as_const(*this).agent(id));
}

bool KitchenState::has_location(const LocationId& id) const {
  return std::any_of(locations.begin(), locations.end(), [&](const auto& l) { return l.id == id; });
}

bool KitchenState::has_agent(const AgentId& id) const {
  return std::any_of(agents.begin(), agents.end(), [&](const auto& a) { return a.id == id; });
}

std::vector<AgentId> KitchenState::agent_ids() const {
  std::vector<AgentId> ids;
  for (const auto& a : agents) ids.push_back(a.id);
  return ids;
}

std::vector<LocationId> KitchenState::location_ids() const {
  std::vector<LocationId> ids;
  for (const auto& l : locations) ids.push_back(l.id);
  return ids;
}

long KitchenState::item_census() const {
  long n = 0;
  for (const auto& l : locations) n += static_cast<long>(l.contents.size());
  for (const auto& a : agents) n += a.holding ? 1 : 0;
  return n;
}

KitchenState load_level(const LevelConfig& config, int agent_count, std::uint64_t seed) {
  config.validate();
  if (agent_count < kMinAgents || agent_count > kMaxAgents) {
    throw StructuralError("agent_count must be in [" + std::to_string(kMinAgents) + ", " +
                          std::to_string(kMaxAgents) + "], got " + std::to_string(agent_count));
  }
  KitchenState s;
  s.level = std::make_shared<const LevelConfig>(config);
  LocationId start;
  for (const auto& lc : config.locations) {
    LocationState l;
    l.id = lc.id;
    l.kind = lc.kind;
    l.tool_kind = lc.tool_kind;
    l.contents = lc.contents;
    s.locations.push_back(std::move(l));
    if (start.empty() && lc.kind == LocationKind::ServingTable) start = lc.id;
  }
  for (int k = 0; k < agent_count; ++k) {
    s.agents.push_back({"agent" + std::to_string(k), start, std::nullopt});
  }
  s.order_rng.seed(derive_seed(seed, "orders"));
  s.flow.initial = s.item_census();
  spawn_order(s, s.initial_events, 0);
  return s;
}

ActionResult apply_action(KitchenState& s, const KitchenAction& action, std::vector<KitchenEvent>& events,
                          const KitchenState* step_start) {
  const auto& agent_id = agent_of(action);
  require_agent(s, agent_id);
  if (const auto* loc = action_location(action)) require_location(s, *loc);
  AgentState& agent = s.agent(agent_id);

  return std::visit(
      overloaded{
          [&](const Goto& a) {
            agent.at = a.location;
            return ActionResult::ok();
          },
          [&](const Noop&) { return ActionResult::ok(); },
          [&](const Get& a) {
            if (agent.at != a.location) return ActionResult::fail(FailReason::NotAtLocation);
            if (agent.holding) return ActionResult::fail(FailReason::HandsFull);
            LocationState& loc = s.location(a.location);
            if (busy(loc)) return ActionResult::fail(FailReason::ToolBusy);
            const auto it = loc.contents.find(a.item);
            if (it == loc.contents.end()) {
              if (step_start && step_start->location(a.location).contents.count(a.item)) {
                return ActionResult::fail(FailReason::Contention);
              }
              return ActionResult::fail(FailReason::ItemAbsent);
            }
            loc.contents.erase(it);
            agent.holding = a.item;
            return ActionResult::ok();
          },
          [&](const Put& a) {
            if (agent.at != a.location) return ActionResult::fail(FailReason::NotAtLocation);
            if (!agent.holding) return ActionResult::fail(FailReason::NothingHeld);
            LocationState& loc = s.location(a.location);
            if (busy(loc)) {
              if (step_start && !busy(step_start->location(a.location))) {
                return ActionResult::fail(FailReason::Contention);
              }
              return ActionResult::fail(FailReason::ToolBusy);
            }
            const ItemId item = *agent.holding;
            agent.holding.reset();
            if (loc.kind == LocationKind::ServingTable) {
              const auto order = matching_order(s, item);
              if (order != s.orders.end()) {
                events.push_back({EventKind::OrderCompleted, item, order->order_id, s.step});
                s.orders.erase(order);
                s.accomplished.push_back(item);
                ++s.counters.completed;
                ++s.flow.served;
                return ActionResult::ok();
              }
            }
            loc.contents.insert(item);
            return ActionResult::ok();
          },
          [&](const Activate& a) {
            if (agent.at != a.location) return ActionResult::fail(FailReason::NotAtLocation);
            LocationState& loc = s.location(a.location);
            if (loc.kind != LocationKind::Tool) return ActionResult::fail(FailReason::NotATool);
            if (busy(loc)) {
              if (step_start && !busy(step_start->location(a.location))) {
                return ActionResult::fail(FailReason::Contention);
              }
              return ActionResult::fail(FailReason::ToolBusy);
            }
            const RecipeStep* rs = s.level->step_for(loc.tool_kind, loc.contents);
            if (!rs) return ActionResult::fail(FailReason::RecipeMismatch);
            loc.processing = Processing{rs->cook_steps, rs->output};
            loc.occupied_by = agent.id;
            return ActionResult::ok();
          },
      },
      action);
}

ActionResult check_action(const KitchenState& state, const KitchenAction& action) {
  KitchenState scratch = state;
  std::vector<KitchenEvent> ignored;
  return apply_action(scratch, action, ignored);
}

StepOutcome step(const KitchenState& state, const JointAction& joint) {
  if (state.finished()) {
    throw EpisodeFinished("episode finished at step " + std::to_string(state.step));
  }
  for (const auto& [id, action] : joint) {
    require_agent(state, id);
    if (agent_of(action) != id) {
      throw StructuralError("action for '" + agent_of(action) + "' filed under '" + id + "'");
    }
  }
  for (const auto& a : state.agents) {
    if (!joint.count(a.id)) throw StructuralError("no action for agent '" + a.id + "'");
  }

  StepOutcome out{state, {}, {}};
  KitchenState& s = out.next_state;
  const int t = state.step;

  // Phase 1: actions in ascending agent order (agents are stored in id order).
  for (const auto& a : state.agents) {
    out.per_agent_result[a.id] = apply_action(s, joint.at(a.id), out.events, &state);
  }

  // Phase 2: tools. The activation step counts towards cook time.
  for (auto& loc : s.locations) {
    if (!loc.processing) continue;
    if (--loc.processing->remaining_steps > 0) continue;
    s.flow.consumed += static_cast<long>(loc.contents.size());
    s.flow.produced += 1;
    loc.contents.clear();
    loc.contents.insert(loc.processing->output_item);
    loc.processing.reset();
    loc.occupied_by.reset();
  }

  // Phase 3: order lifetimes.
  for (auto it = s.orders.begin(); it != s.orders.end();) {
    if (--it->lifetime > 0) {
      ++it;
      continue;
    }
    out.events.push_back({EventKind::OrderExpired, it->dish, it->order_id, t});
    ++s.counters.expired;
    it = s.orders.erase(it);
  }

  // Phase 4: advance the clock and spawn.
  s.step = t + 1;
  if (s.step % s.level->orders.spawn_interval == 0 && s.step < s.level->max_steps) {
    spawn_order(s, out.events, t);
  }
  return out;
}

std::vector<KitchenAction> legal_actions(const KitchenState& state, const AgentId& agent_id) {
  require_agent(state, agent_id);
  const AgentState& agent = state.agent(agent_id);
  std::vector<KitchenAction> out;
  for (const auto& l : state.locations) out.emplace_back(Goto{agent_id, l.id});
  const LocationState& here = state.location(agent.at);
  if (!busy(here)) {
    if (!agent.holding) {
      std::set<ItemId> distinct(here.contents.begin(), here.contents.end());
      for (const auto& item : distinct) out.emplace_back(Get{agent_id, here.id, item});
    } else {
      out.emplace_back(Put{agent_id, here.id});
    }
    if (here.kind == LocationKind::Tool && state.level->step_for(here.tool_kind, here.contents)) {
      out.emplace_back(Activate{agent_id, here.id});
    }
  }
  out.emplace_back(Noop{agent_id});
  return out;
}

std::string render_observation(const KitchenState& s) {
  std::ostringstream o;
  o << "Game Configuration\n";
  o << "Current Game Level: " << s.level->level_id << "\n";
  if (s.orders.empty()) {
    o << "Current Dishes: None\n";
  } else {
    o << "Current Dishes:\n";
    for (const auto& d : s.orders) {
      o << "  Name: " << d.dish << "\n";
      o << "  Lifetime: " << d.lifetime << "\n";
    }
  }
  o << "Current Game Step: " << s.step << "\n";
  o << "Maximum Game Steps: " << s.level->max_steps << "\n";
  o << "\nAgent State\n";
  for (const auto& a : s.agents) {
    o << "at(" << a.id << ", " << a.at << ")\n";
    o << "hold(" << a.id << ", " << (a.holding ? *a.holding : std::string("None")) << ")\n";
  }
  o << "\nKitchen State\n";
  for (const auto& l : s.locations) {
    o << "inside(" << l.id << ", ";
    if (l.contents.empty()) {
      o << "None";
    } else {
      bool first = true;
      for (const auto& item : l.contents) {
        o << (first ? "" : ", ") << item;
        first = false;
      }
    }
    o << ")\n";
  }
  o << "\nAccomplished Tasks\n";
  if (s.accomplished.empty()) {
    o << "None\n";
  } else {
    for (const auto& d : s.accomplished) o << d << "\n";
  }
  return o.str();
}

std::string observation_hash(const KitchenState& state) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx",
                static_cast<unsigned long long>(fnv1a64(render_observation(state))));
  return buf;
}

}  // namespace taskalloc::kitchen
