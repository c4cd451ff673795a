#pragma once

#include <string>
#include <vector>

#include "taskalloc/coordination/policy.hpp"

namespace taskalloc::coordination {

/// Reads the last `verb(args)` occurrence in free text. Verbs and ids match
/// case-insensitively and are canonicalised against the roster, the location
/// list and, when non-empty, the item list. Wrong arity, unknown ids or no
/// match give parse_ok = false. Never throws.
RawDecision parse_action(const std::string& raw, const std::vector<AgentId>& roster,
                         const std::vector<kitchen::LocationId>& locations,
                         const std::vector<kitchen::ItemId>& items = {});

/// Every item id a level mentions (stock, recipe inputs and outputs), sorted.
std::vector<kitchen::ItemId> level_items(const kitchen::LevelConfig& level);

}  // namespace taskalloc::coordination
