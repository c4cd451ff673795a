#include "taskalloc/kitchen/trace.hpp"

#include <istream>
#include <ostream>

#include "taskalloc/common/error.hpp"

namespace taskalloc::kitchen {

nlohmann::json action_to_json(const KitchenAction& a) {
  nlohmann::json j{{"type", to_string(kind_of(a))}, {"agent", agent_of(a)}};
  std::visit(
      [&](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (!std::is_same_v<T, Noop>) j["location"] = x.location;
        if constexpr (std::is_same_v<T, Get>) j["item"] = x.item;
      },
      a);
  return j;
}

KitchenAction action_from_json(const nlohmann::json& j) {
  const auto type = j.at("type").get<std::string>();
  const auto agent = j.at("agent").get<std::string>();
  if (type == "noop") return Noop{agent};
  const auto loc = j.at("location").get<std::string>();
  if (type == "goto") return Goto{agent, loc};
  if (type == "get") return Get{agent, loc, j.at("item").get<std::string>()};
  if (type == "put") return Put{agent, loc};
  if (type == "activate") return Activate{agent, loc};
  throw StructuralError("unknown action type '" + type + "'");
}

ActionResult result_from_string(const std::string& s) {
  if (s == "Succeeded") return ActionResult::ok();
  for (auto r : {FailReason::ItemAbsent, FailReason::Contention, FailReason::HandsFull, FailReason::NothingHeld,
                 FailReason::NotAtLocation, FailReason::ToolBusy, FailReason::NotATool, FailReason::RecipeMismatch,
                 FailReason::PolicyFailure}) {
    if (s == "Failed(" + to_string(r) + ")") return ActionResult::fail(r);
  }
  throw StructuralError("unknown action result '" + s + "'");
}

nlohmann::json to_json(const TraceHeader& h) {
  return {{"header", true}, {"level", h.level.to_json()}, {"agents", h.agents}, {"seed", h.seed}, {"mode", h.mode}};
}

nlohmann::json to_json(const TraceRecord& r) {
  nlohmann::json actions = nlohmann::json::object();
  for (const auto& [id, a] : r.actions) actions[id] = action_to_json(a);
  nlohmann::json results = nlohmann::json::object();
  for (const auto& [id, res] : r.results) results[id] = to_string(res);
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : r.events) events.push_back(to_json(e));
  return {{"step", r.step},
          {"actions", std::move(actions)},
          {"results", std::move(results)},
          {"events", std::move(events)},
          {"observation_hash", r.observation_hash}};
}

TraceRecord record_from_json(const nlohmann::json& j) {
  TraceRecord r;
  r.step = j.at("step").get<int>();
  for (auto it = j.at("actions").begin(); it != j.at("actions").end(); ++it) {
    r.actions.emplace(it.key(), action_from_json(it.value()));
  }
  for (auto it = j.at("results").begin(); it != j.at("results").end(); ++it) {
    r.results.emplace(it.key(), result_from_string(it.value().get<std::string>()));
  }
  for (const auto& e : j.at("events")) r.events.push_back(event_from_json(e));
  r.observation_hash = j.at("observation_hash").get<std::string>();
  return r;
}

void write_trace(std::ostream& out, const Trace& trace) {
  out << to_json(trace.header).dump() << '\n';
  for (const auto& r : trace.records) out << to_json(r).dump() << '\n';
}

Trace read_trace(std::istream& in) {
  Trace t;
  std::string line;
  int lineno = 0;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      if (!have_header) {
        if (!j.value("header", false)) throw StructuralError("first record must be the trace header");
        t.header.level = LevelConfig::from_json(j.at("level"));
        t.header.agents = j.at("agents").get<int>();
        t.header.seed = j.at("seed").get<std::uint64_t>();
        t.header.mode = j.value("mode", "");
        have_header = true;
      } else {
        t.records.push_back(record_from_json(j));
      }
    } catch (const std::exception& e) {
      throw StructuralError("trace line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw StructuralError("trace is empty");
  return t;
}

ReplayReport replay(const Trace& trace) {
  ReplayReport rep;
  KitchenState s = load_level(trace.header.level, trace.header.agents, trace.header.seed);
  auto mismatch = [&](int step, std::string what) {
    rep.ok = false;
    rep.first_mismatch_step = step;
    rep.detail = std::move(what);
    return rep;
  };
  for (const auto& r : trace.records) {
    if (r.step != s.step) return mismatch(r.step, "step index out of sequence");
    StepOutcome out;
    try {
      out = step(s, r.actions);
    } catch (const std::exception& e) {
      return mismatch(r.step, e.what());
    }
    if (out.per_agent_result != r.results) return mismatch(r.step, "action results differ");
    if (out.events != r.events) return mismatch(r.step, "events differ");
    const auto h = observation_hash(out.next_state);
    if (h != r.observation_hash) return mismatch(r.step, "observation hash " + h + " != " + r.observation_hash);
    s = std::move(out.next_state);
    ++rep.steps_checked;
  }
  return rep;
}

}  // namespace taskalloc::kitchen
