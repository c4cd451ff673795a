#include "taskalloc/coordination/llm_policy.hpp"

#include <cctype>
#include <sstream>

#include "taskalloc/common/error.hpp"
#include "taskalloc/coordination/action_parse.hpp"

namespace taskalloc::coordination {
namespace {

constexpr const char* kWorkerRole =
    "You control one agent in a cooperative kitchen. Each step you choose exactly one action for your agent.";
constexpr const char* kOrchestratorRole =
    "You control every agent in a cooperative kitchen. Each step you choose exactly one action per agent.";
constexpr const char* kPlannerRole =
    "You plan the work of a kitchen team. Workers follow your plan until the next event.";

std::string items_text(const kitchen::Items& items) {
  std::string out;
  for (const auto& i : items) out += (out.empty() ? "" : ", ") + i;
  return out;
}

void require_state(const PolicyQuery& q) {
  if (!q.state) throw StructuralError("model-backed policies need the state snapshot in the query");
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n-*");
  if (b == std::string::npos) return {};
  return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
}

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::optional<AgentId> find_agent(const std::string& name, const std::vector<AgentId>& roster) {
  for (const auto& a : roster) {
    if (lower(a) == lower(name)) return a;
  }
  return std::nullopt;
}

}  // namespace

std::string action_reference(const kitchen::LevelConfig& level) {
  std::ostringstream o;
  o << "Actions:\n"
    << "  goto(agent, location): move to a location\n"
    << "  get(agent, location, item): pick up an item; hands must be empty\n"
    << "  put(agent, location): put the held item at the location\n"
    << "  activate(agent, tool): start cooking the tool's contents\n"
    << "  noop(agent): do nothing this step\n"
    << "Recipes:\n";
  for (const auto& r : level.recipes) {
    o << "  " << r.dish << ":";
    for (std::size_t k = 0; k < r.steps.size(); ++k) {
      const auto& s = r.steps[k];
      o << (k ? " then" : "") << " " << s.tool_kind << "[" << items_text(s.inputs) << "] -> " << s.output << " ("
        << s.cook_steps << " steps)";
    }
    o << "\n";
  }
  o << "Serving a finished dish at a serving table completes a matching order.\n";
  return o.str();
}

std::vector<gateway::ChatMessage> worker_messages(const PolicyQuery& q) {
  require_state(q);
  std::ostringstream u;
  u << q.observation << "\n";
  if (q.plan_excerpt) u << "\n" << *q.plan_excerpt;
  const auto r = q.last_results.find(q.agent);
  if (r != q.last_results.end()) u << "\nYour last action: " << kitchen::to_string(r->second) << "\n";
  if (q.legal_action_hint) {
    u << "\nLegal actions:\n";
    for (const auto& a : *q.legal_action_hint) u << "  " << a << "\n";
  }
  u << "\nReply with one action for " << q.agent << ".";
  return {{"system", std::string(kWorkerRole) + "\n" + action_reference(*q.state->level)}, {"user", u.str()}};
}

std::vector<gateway::ChatMessage> orchestrator_messages(const PolicyQuery& q) {
  require_state(q);
  std::ostringstream u;
  u << q.observation << "\n";
  if (!q.last_results.empty()) {
    u << "\nLast results:\n";
    for (const auto& [a, r] : q.last_results) u << "  " << a << ": " << kitchen::to_string(r) << "\n";
  }
  u << "\nReply with one action per line for:";
  for (const auto& a : q.state->agent_ids()) u << " " << a;
  u << ".";
  return {{"system", std::string(kOrchestratorRole) + "\n" + action_reference(*q.state->level)}, {"user", u.str()}};
}

std::string planner_prompt(const KitchenState& state, const std::vector<KitchenEvent>& events, const Plan* prior,
                           const std::vector<accounting::RosterEntry>& roster,
                           const std::optional<std::string>& capability_block) {
  std::ostringstream o;
  o << kPlannerRole << "\n" << action_reference(*state.level) << "\n" << kitchen::render_observation(state) << "\n";
  o << "\nEvents:\n";
  if (events.empty()) o << "None\n";
  for (const auto& e : events) {
    o << "- " << kitchen::to_string(e.kind) << " " << e.dish << " (order " << e.order_id << ", step " << e.step << ")\n";
  }
  o << "\nPrior plan:\n" << (prior ? prior->to_text() : "None\n");
  o << "\nWorkers:\n";
  for (const auto& r : roster) {
    o << "- " << r.agent;
    if (capability_block) o << " (" << r.model_id << ")";
    o << "\n";
  }
  if (capability_block) o << "\n" << *capability_block;
  o << "\nReply with one line per worker in the form \"agentK: task; task\".";
  return o.str();
}

std::optional<Plan> parse_plan(const std::string& text, const std::vector<AgentId>& roster) {
  Plan plan;
  for (const auto& a : roster) plan.directives[a];
  bool any = false;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto colon = line.find(':');
    if (colon == std::string::npos) continue;
    const auto head = trim(line.substr(0, colon));
    const auto agent = find_agent(head, roster);
    if (!agent) {
      if (lower(head) == "summary") plan.summary = trim(line.substr(colon + 1));
      continue;
    }
    auto& ds = plan.directives[*agent];
    ds.clear();
    std::istringstream parts(line.substr(colon + 1));
    std::string part;
    while (std::getline(parts, part, ';')) {
      const auto t = trim(part);
      if (!t.empty() && t != "idle") ds.push_back({t, std::nullopt});
    }
    any = true;
  }
  if (!any) return std::nullopt;
  return plan;
}

LlmWorker::LlmWorker(std::shared_ptr<gateway::GatewayClient> client, gateway::ModelBinding binding,
                     gateway::Decoding decoding)
    : client_(std::move(client)), binding_(std::move(binding)), decoding_(decoding) {}

WorkerDecision LlmWorker::decide(const PolicyQuery& q) {
  const auto messages = worker_messages(q);
  WorkerDecision d;
  try {
    const auto r = client_->complete(binding_, messages, decoding_);
    d.usage = Usage{binding_.model_id, r.tokens_in, r.tokens_out};
    d.decision = parse_action(r.text, q.state->agent_ids(), q.state->location_ids(), level_items(*q.state->level));
    if (d.decision.parse_ok && kitchen::agent_of(*d.decision.parsed) != q.agent) {
      d.decision = RawDecision::failure(r.text);
    }
  } catch (const gateway::GatewayError& e) {
    d.decision = RawDecision::failure("");
    d.failure = e.what();
  }
  return d;
}

LlmOrchestrator::LlmOrchestrator(std::shared_ptr<gateway::GatewayClient> client, gateway::ModelBinding binding,
                                 gateway::Decoding decoding)
    : client_(std::move(client)), binding_(std::move(binding)), decoding_(decoding) {}

CentralDecision LlmOrchestrator::decide(const PolicyQuery& q) {
  const auto messages = orchestrator_messages(q);
  CentralDecision d;
  try {
    const auto r = client_->complete(binding_, messages, decoding_);
    d.usage = Usage{binding_.model_id, r.tokens_in, r.tokens_out};
    d.raw_text = r.text;
    const auto roster = q.state->agent_ids();
    const auto locations = q.state->location_ids();
    const auto items = level_items(*q.state->level);
    std::istringstream in(r.text);
    std::string line;
    while (std::getline(in, line)) {
      auto parsed = parse_action(line, roster, locations, items);
      if (parsed.parse_ok) d.per_agent[kitchen::agent_of(*parsed.parsed)] = std::move(parsed);
    }
  } catch (const gateway::GatewayError& e) {
    d.failure = e.what();
  }
  return d;
}

LlmPlanner::LlmPlanner(std::shared_ptr<gateway::GatewayClient> client, gateway::ModelBinding binding,
                       gateway::Decoding decoding)
    : client_(std::move(client)), binding_(std::move(binding)), decoding_(decoding) {}

PlannerDecision LlmPlanner::replan(const ReplanInput& in) {
  PlannerDecision d;
  try {
    const auto r = client_->complete(binding_, {{"user", in.prompt}}, decoding_);
    d.usage = Usage{binding_.model_id, r.tokens_in, r.tokens_out};
    d.raw_text = r.text;
    std::vector<AgentId> roster;
    for (const auto& e : in.roster) roster.push_back(e.agent);
    d.plan = parse_plan(r.text, roster);
    if (d.plan) {
      d.plan->created_at = in.step;
      d.plan->trigger_events = in.events;
    } else {
      d.failure = "no directive lines in planner reply";
    }
  } catch (const gateway::GatewayError& e) {
    d.failure = e.what();
  }
  return d;
}

}  // namespace taskalloc::coordination
