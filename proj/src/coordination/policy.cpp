#include "taskalloc/coordination/policy.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

#include "taskalloc/common/error.hpp"

namespace taskalloc::coordination {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

}  // namespace

std::string to_string(ControllerMode m) {
  switch (m) {
    case ControllerMode::Individual: return "individual";
    case ControllerMode::Orchestrator: return "orchestrator";
    case ControllerMode::Planner: return "planner";
  }
  return "individual";
}

ControllerMode mode_from_string(const std::string& s) {
  const auto l = lower(s);
  if (l == "individual") return ControllerMode::Individual;
  if (l == "orchestrator") return ControllerMode::Orchestrator;
  if (l == "planner") return ControllerMode::Planner;
  throw StructuralError("unknown controller mode '" + s + "' (individual, orchestrator, planner)");
}

std::string to_string(CapabilityMode m) { return m == CapabilityMode::Informed ? "informed" : "on-the-fly"; }

CapabilityMode capability_mode_from_string(const std::string& s) {
  const auto l = lower(s);
  if (l == "informed") return CapabilityMode::Informed;
  if (l == "on-the-fly" || l == "onthefly" || l == "on_the_fly") return CapabilityMode::OnTheFly;
  throw StructuralError("unknown capability mode '" + s + "' (on-the-fly, informed)");
}

std::string Plan::excerpt_for(const AgentId& agent) const {
  std::ostringstream o;
  o << "Your tasks:\n";
  const auto it = directives.find(agent);
  if (it == directives.end() || it->second.empty()) {
    o << "- idle\n";
  } else {
    for (const auto& d : it->second) o << "- " << d.text << "\n";
  }
  if (!summary.empty()) o << "Plan summary: " << summary << "\n";
  return o.str();
}

std::string Plan::to_text() const {
  std::ostringstream o;
  for (const auto& [agent, ds] : directives) {
    o << agent << ": ";
    if (ds.empty()) {
      o << "idle";
    } else {
      for (std::size_t k = 0; k < ds.size(); ++k) o << (k ? "; " : "") << ds[k].text;
    }
    o << "\n";
  }
  return o.str();
}

nlohmann::json Plan::to_json() const {
  nlohmann::json d = nlohmann::json::object();
  for (const auto& [agent, ds] : directives) {
    d[agent] = nlohmann::json::array();
    for (const auto& x : ds) {
      nlohmann::json e{{"text", x.text}};
      if (x.unit) {
        e["unit"] = {{"order_id", x.unit->order_id},
                     {"dish", x.unit->dish},
                     {"recipe_step", x.unit->recipe_step},
                     {"phase", x.unit->phase}};
      }
      d[agent].push_back(std::move(e));
    }
  }
  nlohmann::json ev = nlohmann::json::array();
  for (const auto& e : trigger_events) ev.push_back(kitchen::to_json(e));
  return {{"created_at", created_at}, {"trigger_events", ev}, {"directives", d}, {"summary", summary}};
}

RawDecision RawDecision::of(KitchenAction a, std::string raw) {
  if (raw.empty()) raw = kitchen::to_text(a);
  return {std::move(raw), std::move(a), true};
}

RawDecision RawDecision::failure(std::string raw) { return {std::move(raw), std::nullopt, false}; }

}  // namespace taskalloc::coordination
