#include "taskalloc/coordination/episode.hpp"

#include <algorithm>
#include <future>

#include "taskalloc/common/error.hpp"
#include "taskalloc/coordination/llm_policy.hpp"

namespace taskalloc::coordination {

using accounting::Role;
using kitchen::ActionResult;
using kitchen::FailReason;

namespace {

void check_bindings(ControllerMode mode, const KitchenState& env, const PolicyBindings& b) {
  if (mode == ControllerMode::Orchestrator) {
    if (!b.central) throw StructuralError("orchestrator mode needs a central policy");
    return;
  }
  for (const auto& a : env.agent_ids()) {
    const auto it = b.workers.find(a);
    if (it == b.workers.end() || !it->second) throw StructuralError("no worker policy bound for " + a);
  }
  if (mode == ControllerMode::Planner && !b.planner) throw StructuralError("planner mode needs a planner policy");
}

void record_usage(accounting::CostLedger& ledger, const std::optional<Usage>& u, Role role, int step) {
  if (u) ledger.record_call(u->model_id, std::move(role), u->tokens_in, u->tokens_out, step);
}

struct Choice {
  RawDecision decision;
  std::string failure;
};

}  // namespace

accounting::EfficiencyReport EpisodeReport::efficiency() const {
  return accounting::efficiency(completed_orders, ledger, histogram);
}

nlohmann::json to_json(const ActionLogEntry& e) {
  return {{"step", e.step},
          {"agent", e.agent},
          {"action", kitchen::action_to_json(e.action)},
          {"result", kitchen::to_string(e.result)},
          {"fallback", e.fallback},
          {"raw_text", e.raw_text}};
}

nlohmann::json to_json(const EpisodeNote& n) {
  return {{"step", n.step}, {"kind", n.kind}, {"agent", n.agent}, {"detail", n.detail}};
}

nlohmann::json EpisodeReport::to_json() const {
  nlohmann::json rows = nlohmann::json::array();
  for (const auto& r : ledger.rows()) {
    rows.push_back({{"step", r.step},
                    {"role", accounting::to_string(r.role)},
                    {"model_id", r.model_id},
                    {"tokens_in", r.tokens_in},
                    {"tokens_out", r.tokens_out},
                    {"usd", accounting::to_decimal_string(r.usd)},
                    {"unpriced", r.unpriced}});
  }
  nlohmann::json events = nlohmann::json::array();
  for (const auto& e : event_log) events.push_back(kitchen::to_json(e));
  nlohmann::json notes_j = nlohmann::json::array();
  for (const auto& n : notes) notes_j.push_back(coordination::to_json(n));
  nlohmann::json plans_j = nlohmann::json::array();
  for (const auto& p : plans) plans_j.push_back(p.to_json());
  nlohmann::json calls = nlohmann::json::array();
  for (const auto& c : planner_calls) calls.push_back({{"step", c.step}, {"ok", c.ok}, {"prompt", c.prompt}});
  nlohmann::json roster_j = nlohmann::json::array();
  for (const auto& r : roster) roster_j.push_back({{"agent", r.agent}, {"model_id", r.model_id}});
  return {{"mode", to_string(mode)},
          {"steps_run", steps_run},
          {"completed_orders", completed_orders},
          {"counters",
           {{"introduced", counters.introduced}, {"completed", counters.completed}, {"expired", counters.expired}}},
          {"efficiency", efficiency().to_json()},
          {"histogram", histogram.to_json()},
          {"ledger", {{"summary", ledger.summary()}, {"rows", rows}}},
          {"capability", profile.to_json()},
          {"roster", roster_j},
          {"event_log", events},
          {"notes", notes_j},
          {"fallback_count", fallback_count},
          {"policy_calls", policy_calls},
          {"planner_invocations", planner_invocations},
          {"planner_calls", calls},
          {"plans", plans_j}};
}

EpisodeReport run_episode(ControllerMode mode, KitchenState env, const PolicyBindings& bindings,
                          const EpisodeOptions& options) {
  check_bindings(mode, env, bindings);
  if (options.jobs < 1) throw StructuralError("jobs must be at least 1");

  EpisodeReport report;
  report.mode = mode;
  report.ledger = accounting::CostLedger(options.prices);
  const auto agents = env.agent_ids();
  for (const auto& a : agents) {
    const auto model = mode == ControllerMode::Orchestrator ? bindings.central->model_id()
                                                            : bindings.workers.at(a)->model_id();
    report.roster.push_back({a, model});
  }
  const auto model_of = [&](const AgentId& a) {
    return std::find_if(report.roster.begin(), report.roster.end(), [&](auto& r) { return r.agent == a; })->model_id;
  };

  report.trace.header = {*env.level, static_cast<int>(agents.size()), options.seed, to_string(mode)};
  if (env.step == 0) report.event_log = env.initial_events;

  int remaining = env.level->max_steps - env.step;
  if (options.step_budget > 0) remaining = std::min(remaining, options.step_budget);

  auto state = std::make_shared<const KitchenState>(std::move(env));
  std::shared_ptr<const Plan> plan;
  std::map<AgentId, ActionResult> last_results;

  const auto replan = [&](const std::vector<KitchenEvent>& events) {
    PlannerCall call;
    call.step = state->step;
    std::optional<std::string> block;
    ReplanInput in;
    if (options.capability_mode == CapabilityMode::Informed) {
      const auto& source = options.capability_prior ? *options.capability_prior : report.profile;
      std::map<AgentId, accounting::CapabilityCounts> snapshot;
      std::map<AgentId, std::optional<Rational>> rates;
      for (const auto& r : report.roster) {
        snapshot[r.agent] = source.counts(r.agent, r.model_id);
        rates[r.agent] = snapshot[r.agent].success_rate();
      }
      block = accounting::capability_hint(source, report.roster);
      call.capability_snapshot = snapshot;
      in.capability = rates;
    }
    call.prompt = planner_prompt(*state, events, plan.get(), report.roster, block);
    in.prompt = call.prompt;
    in.observation = kitchen::render_observation(*state);
    in.events = events;
    in.prior = plan;
    in.roster = report.roster;
    in.state = state;
    in.last_results = last_results;
    in.step = state->step;

    ++report.planner_invocations;
    ++report.policy_calls;
    auto d = bindings.planner->replan(in);
    record_usage(report.ledger, d.usage, Role::planner(), state->step);
    if (d.plan) {
      for (const auto& a : agents) d.plan->directives[a];
      plan = std::make_shared<const Plan>(std::move(*d.plan));
      report.plans.push_back(*plan);
    } else {
      call.ok = false;
      report.notes.push_back({state->step, "ReplanFailed", {}, d.failure.empty() ? d.raw_text : d.failure});
    }
    report.planner_calls.push_back(std::move(call));
  };

  if (mode == ControllerMode::Planner) replan(state->step == 0 ? state->initial_events : std::vector<KitchenEvent>{});

  for (int t = 0; t < remaining && !state->finished(); ++t) {
    const int step = state->step;
    const auto observation = kitchen::render_observation(*state);
    std::map<AgentId, Choice> choices;

    const auto query_for = [&](const AgentId& a) {
      PolicyQuery q;
      q.observation = observation;
      q.agent = a;
      q.state = state;
      q.last_results = last_results;
      q.step = step;
      if (plan) {
        q.plan = plan;
        q.plan_excerpt = plan->excerpt_for(a);
      }
      if (options.legal_action_hint && !a.empty()) {
        std::vector<std::string> hint;
        for (const auto& act : kitchen::legal_actions(*state, a)) hint.push_back(kitchen::to_text(act));
        q.legal_action_hint = hint;
      }
      return q;
    };

    if (mode == ControllerMode::Orchestrator) {
      auto d = bindings.central->decide(query_for({}));
      ++report.policy_calls;
      record_usage(report.ledger, d.usage, Role::orchestrator(), step);
      for (const auto& a : agents) {
        const auto it = d.per_agent.find(a);
        if (it != d.per_agent.end()) {
          choices[a] = {it->second, d.failure};
        } else {
          choices[a] = {RawDecision::failure(d.raw_text), d.failure.empty() ? "no action for " + a : d.failure};
        }
      }
    } else {
      std::map<AgentId, WorkerDecision> decided;
      const auto jobs = static_cast<std::size_t>(mode == ControllerMode::Individual ? options.jobs : 1);
      for (std::size_t start = 0; start < agents.size(); start += jobs) {
        const auto end = std::min(agents.size(), start + jobs);
        if (jobs == 1) {
          decided[agents[start]] = bindings.workers.at(agents[start])->decide(query_for(agents[start]));
          continue;
        }
        std::vector<std::future<WorkerDecision>> futures;
        for (auto k = start; k < end; ++k) {
          futures.push_back(std::async(std::launch::async, [&, a = agents[k]] {
            return bindings.workers.at(a)->decide(query_for(a));
          }));
        }
        for (auto k = start; k < end; ++k) decided[agents[k]] = futures[k - start].get();
      }
      for (const auto& a : agents) {
        auto& d = decided.at(a);
        ++report.policy_calls;
        record_usage(report.ledger, d.usage, Role::worker(a), step);
        choices[a] = {std::move(d.decision), std::move(d.failure)};
      }
    }

    kitchen::JointAction joint;
    std::map<AgentId, bool> fell_back;
    for (const auto& a : agents) {
      const auto& c = choices.at(a);
      const bool usable = c.decision.parse_ok && c.decision.parsed && kitchen::agent_of(*c.decision.parsed) == a;
      joint.emplace(a, usable ? *c.decision.parsed : KitchenAction{kitchen::Noop{a}});
      fell_back[a] = !usable;
    }

    auto outcome = kitchen::step(*state, joint);
    std::map<AgentId, ActionResult> policy_results;
    for (const auto& a : agents) {
      const bool fb = fell_back.at(a);
      const auto result = fb ? ActionResult::fail(FailReason::PolicyFailure) : outcome.per_agent_result.at(a);
      policy_results[a] = result;
      report.action_log.push_back({step, a, joint.at(a), result, fb, choices.at(a).decision.raw_text});
      report.histogram.add(kitchen::kind_of(joint.at(a)));
      report.profile.update(a, model_of(a), result.succeeded);
      if (fb) {
        ++report.fallback_count;
        const auto& c = choices.at(a);
        report.notes.push_back(
            {step, "Fallback", a, c.failure.empty() ? "unparseable reply: " + c.decision.raw_text : c.failure});
      }
    }

    kitchen::TraceRecord rec;
    rec.step = step;
    rec.actions = joint;
    rec.results = outcome.per_agent_result;
    rec.events = outcome.events;
    rec.observation_hash = kitchen::observation_hash(outcome.next_state);
    report.trace.records.push_back(std::move(rec));
    report.event_log.insert(report.event_log.end(), outcome.events.begin(), outcome.events.end());

    state = std::make_shared<const KitchenState>(std::move(outcome.next_state));
    last_results = std::move(policy_results);
    ++report.steps_run;
    if (mode == ControllerMode::Planner && !outcome.events.empty()) replan(outcome.events);
  }

  report.counters = state->counters;
  report.completed_orders = state->counters.completed;
  return report;
}

}  // namespace taskalloc::coordination
