#include <algorithm>
#include <set>

#include "taskalloc/common/error.hpp"
#include "taskalloc/kitchen/kitchen.hpp"

namespace taskalloc::kitchen {
namespace {

LocationKind kind_from_string(const std::string& s) {
  if (s == "storage") return LocationKind::Storage;
  if (s == "servingtable") return LocationKind::ServingTable;
  if (s == "tool") return LocationKind::Tool;
  throw StructuralError("unknown location kind '" + s + "'");
}

std::string kind_to_string(LocationKind k) {
  switch (k) {
    case LocationKind::Storage: return "storage";
    case LocationKind::ServingTable: return "servingtable";
    case LocationKind::Tool: return "tool";
  }
  return "storage";
}

Items items_from_json(const nlohmann::json& j) {
  Items items;
  if (j.is_array()) {
    for (const auto& e : j) items.insert(e.get<std::string>());
  } else if (j.is_object()) {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const int count = it.value().get<int>();
      if (count < 0) throw StructuralError("negative stock for '" + it.key() + "'");
      for (int k = 0; k < count; ++k) items.insert(it.key());
    }
  } else if (!j.is_null()) {
    throw StructuralError("item list must be an array or a {item: count} object");
  }
  return items;
}

nlohmann::json items_to_counts(const Items& items) {
  nlohmann::json j = nlohmann::json::object();
  for (const auto& item : items) j[item] = j.value(item, 0) + 1;
  return j;
}

// level_1 mirrors the layout of the reference game-state listing: one storage
// shelf, one serving table, two blenders, salmonMeatcake orders.
constexpr const char* kLevel1 = R"({
  "level_id": "level_1",
  "max_steps": 60,
  "locations": [
    {"id": "storage0", "kind": "storage", "contents": {"salmon": 10}},
    {"id": "servingtable0", "kind": "servingtable"},
    {"id": "blender0", "kind": "tool", "tool": "blender"},
    {"id": "blender1", "kind": "tool", "tool": "blender"}
  ],
  "recipes": [
    {"dish": "salmonMeatcake", "steps": [
      {"tool": "blender", "inputs": ["salmon"], "output": "salmonMeatcake", "cook_steps": 3}
    ]}
  ],
  "orders": {"spawn_interval": 12, "lifetime": 10, "dish_pool": ["salmonMeatcake"]}
})";

constexpr const char* kLevel2 = R"({
  "level_id": "level_2",
  "max_steps": 60,
  "locations": [
    {"id": "storage0", "kind": "storage", "contents": {"tuna": 6, "salmon": 6, "rice": 6}},
    {"id": "servingtable0", "kind": "servingtable"},
    {"id": "chopboard0", "kind": "tool", "tool": "chopboard"},
    {"id": "chopboard1", "kind": "tool", "tool": "chopboard"},
    {"id": "pot0", "kind": "tool", "tool": "pot"}
  ],
  "recipes": [
    {"dish": "tunaSashimi", "steps": [
      {"tool": "chopboard", "inputs": ["tuna"], "output": "tunaSashimi", "cook_steps": 3}
    ]},
    {"dish": "salmonSushi", "steps": [
      {"tool": "chopboard", "inputs": ["salmon"], "output": "slicedSalmon", "cook_steps": 3},
      {"tool": "pot", "inputs": ["rice", "slicedSalmon"], "output": "salmonSushi", "cook_steps": 3}
    ]}
  ],
  "orders": {"spawn_interval": 15, "lifetime": 25, "dish_pool": ["tunaSashimi", "salmonSushi"]}
})";

constexpr const char* kLevel3 = R"({
  "level_id": "level_3",
  "max_steps": 60,
  "locations": [
    {"id": "storage0", "kind": "storage", "contents": {"flour": 8, "egg": 8, "berry": 5}},
    {"id": "servingtable0", "kind": "servingtable"},
    {"id": "mixer0", "kind": "tool", "tool": "mixer"},
    {"id": "oven0", "kind": "tool", "tool": "oven"},
    {"id": "oven1", "kind": "tool", "tool": "oven"}
  ],
  "recipes": [
    {"dish": "berryCake", "steps": [
      {"tool": "mixer", "inputs": ["egg", "flour"], "output": "batter", "cook_steps": 3},
      {"tool": "oven", "inputs": ["batter", "berry"], "output": "berryCake", "cook_steps": 3}
    ]},
    {"dish": "plainCake", "steps": [
      {"tool": "mixer", "inputs": ["egg", "flour"], "output": "batter", "cook_steps": 3},
      {"tool": "oven", "inputs": ["batter"], "output": "plainCake", "cook_steps": 3}
    ]}
  ],
  "orders": {"spawn_interval": 20, "lifetime": 30, "dish_pool": ["berryCake", "plainCake"]}
})";

}  // namespace

const Recipe* LevelConfig::recipe_for(const ItemId& dish) const {
  for (const auto& r : recipes) {
    if (r.dish == dish) return &r;
  }
  return nullptr;
}

const RecipeStep* LevelConfig::step_for(const std::string& tool_kind, const Items& contents) const {
  for (const auto& r : recipes) {
    for (const auto& s : r.steps) {
      if (s.tool_kind == tool_kind && s.inputs == contents) return &s;
    }
  }
  return nullptr;
}

void LevelConfig::validate() const {
  if (level_id.empty()) throw StructuralError("level_id is empty");
  if (max_steps < 1) throw StructuralError("max_steps must be >= 1");
  if (orders.spawn_interval < 1) throw StructuralError("spawn_interval must be >= 1");
  if (orders.lifetime < 1) throw StructuralError("order lifetime must be >= 1");
  if (orders.dish_pool.empty()) throw StructuralError("dish_pool is empty");

  std::set<LocationId> ids;
  std::set<std::string> tool_kinds;
  std::set<ItemId> stocked;
  bool has_serving = false;
  for (const auto& loc : locations) {
    if (loc.id.empty()) throw StructuralError("location with empty id");
    if (!ids.insert(loc.id).second) throw StructuralError("duplicate location id '" + loc.id + "'");
    if (loc.kind == LocationKind::Tool) {
      if (loc.tool_kind.empty()) throw StructuralError("tool location '" + loc.id + "' has no tool kind");
      tool_kinds.insert(loc.tool_kind);
    }
    if (loc.kind == LocationKind::ServingTable) has_serving = true;
    if (loc.kind == LocationKind::Storage) stocked.insert(loc.contents.begin(), loc.contents.end());
  }
  if (!has_serving) throw StructuralError("level needs a serving table");

  std::set<ItemId> dishes;
  for (const auto& r : recipes) {
    if (r.steps.empty()) throw StructuralError("recipe '" + r.dish + "' has no steps");
    if (!dishes.insert(r.dish).second) throw StructuralError("duplicate recipe for '" + r.dish + "'");
    if (r.steps.back().output != r.dish) {
      throw StructuralError("recipe '" + r.dish + "' must end by producing the dish");
    }
    std::set<ItemId> available = stocked;
    for (const auto& s : r.steps) {
      if (s.cook_steps < 1) throw StructuralError("cook_steps must be positive in '" + r.dish + "'");
      if (s.inputs.empty()) throw StructuralError("recipe step without inputs in '" + r.dish + "'");
      if (!tool_kinds.count(s.tool_kind)) {
        throw StructuralError("recipe '" + r.dish + "' needs a missing tool '" + s.tool_kind + "'");
      }
      for (const auto& in : s.inputs) {
        if (!available.count(in)) {
          throw StructuralError("recipe '" + r.dish + "' uses '" + in +
                                "', which is neither stocked nor produced by an earlier step");
        }
      }
      available.insert(s.output);
    }
  }
  // Identical tool and inputs must always cook the same thing.
  for (const auto& a : recipes) {
    for (const auto& sa : a.steps) {
      const auto* sb = step_for(sa.tool_kind, sa.inputs);
      if (sb->output != sa.output || sb->cook_steps != sa.cook_steps) {
        throw StructuralError("ambiguous recipe step on '" + sa.tool_kind + "'");
      }
    }
  }
  for (const auto& d : orders.dish_pool) {
    if (!dishes.count(d)) throw StructuralError("dish_pool entry '" + d + "' has no recipe");
  }
}

LevelConfig LevelConfig::from_json(const nlohmann::json& j) {
  try {
    LevelConfig c;
    c.level_id = j.at("level_id").get<std::string>();
    c.max_steps = j.value("max_steps", kDefaultMaxSteps);
    for (const auto& l : j.at("locations")) {
      LocationConfig loc;
      loc.id = l.at("id").get<std::string>();
      loc.kind = kind_from_string(l.at("kind").get<std::string>());
      loc.tool_kind = l.value("tool", "");
      if (l.contains("contents")) loc.contents = items_from_json(l.at("contents"));
      c.locations.push_back(std::move(loc));
    }
    for (const auto& r : j.at("recipes")) {
      Recipe recipe;
      recipe.dish = r.at("dish").get<std::string>();
      for (const auto& s : r.at("steps")) {
        RecipeStep step;
        step.tool_kind = s.at("tool").get<std::string>();
        step.inputs = items_from_json(s.at("inputs"));
        step.output = s.at("output").get<std::string>();
        step.cook_steps = s.value("cook_steps", kDefaultCookSteps);
        recipe.steps.push_back(std::move(step));
      }
      c.recipes.push_back(std::move(recipe));
    }
    const auto& o = j.at("orders");
    c.orders.spawn_interval = o.value("spawn_interval", kDefaultSpawnInterval);
    c.orders.lifetime = o.value("lifetime", kDefaultLifetime);
    c.orders.dish_pool = o.at("dish_pool").get<std::vector<std::string>>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw StructuralError(std::string("malformed level config: ") + e.what());
  }
}

nlohmann::json LevelConfig::to_json() const {
  nlohmann::json j;
  j["level_id"] = level_id;
  j["max_steps"] = max_steps;
  j["locations"] = nlohmann::json::array();
  for (const auto& l : locations) {
    nlohmann::json lj{{"id", l.id}, {"kind", kind_to_string(l.kind)}};
    if (l.kind == LocationKind::Tool) lj["tool"] = l.tool_kind;
    if (!l.contents.empty()) lj["contents"] = items_to_counts(l.contents);
    j["locations"].push_back(std::move(lj));
  }
  j["recipes"] = nlohmann::json::array();
  for (const auto& r : recipes) {
    nlohmann::json rj{{"dish", r.dish}, {"steps", nlohmann::json::array()}};
    for (const auto& s : r.steps) {
      rj["steps"].push_back({{"tool", s.tool_kind},
                             {"inputs", std::vector<std::string>(s.inputs.begin(), s.inputs.end())},
                             {"output", s.output},
                             {"cook_steps", s.cook_steps}});
    }
    j["recipes"].push_back(std::move(rj));
  }
  j["orders"] = {{"spawn_interval", orders.spawn_interval},
                 {"lifetime", orders.lifetime},
                 {"dish_pool", orders.dish_pool}};
  return j;
}

std::vector<std::string> builtin_level_ids() { return {"level_1", "level_2", "level_3"}; }

LevelConfig builtin_level(const std::string& level_id) {
  if (level_id == "level_1") return LevelConfig::from_json(nlohmann::json::parse(kLevel1));
  if (level_id == "level_2") return LevelConfig::from_json(nlohmann::json::parse(kLevel2));
  if (level_id == "level_3") return LevelConfig::from_json(nlohmann::json::parse(kLevel3));
  throw StructuralError("unknown level '" + level_id + "'");
}

}  // namespace taskalloc::kitchen
