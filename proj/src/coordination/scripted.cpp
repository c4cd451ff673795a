#include "taskalloc/coordination/scripted.hpp"

#include <algorithm>
#include <sstream>

#include "taskalloc/common/error.hpp"

namespace taskalloc::coordination {

using kitchen::ActionKind;
using kitchen::Items;
using kitchen::ItemId;
using kitchen::LocationId;
using kitchen::LocationKind;
using kitchen::LocationState;

namespace {

// a - b as multisets.
Items minus(const Items& a, const Items& b) {
  Items out = a;
  for (const auto& x : b) {
    const auto it = out.find(x);
    if (it != out.end()) out.erase(it);
  }
  return out;
}

std::optional<LocationId> first_of_kind(const KitchenState& s, LocationKind kind) {
  for (const auto& l : s.locations) {
    if (l.kind == kind) return l.id;
  }
  return std::nullopt;
}

KitchenAction go_or(const AgentId& a, const KitchenState& s, const LocationId& where, KitchenAction there) {
  if (s.agent(a).at == where) return there;
  return kitchen::Goto{a, where};
}

}  // namespace

const kitchen::Recipe& ScriptedTeam::recipe(const Job& j) const { return *level_->recipe_for(j.dish); }

const ScriptedTeam::Job* ScriptedTeam::job(int order_id) const {
  const auto it = jobs_.find(order_id);
  return it == jobs_.end() ? nullptr : &it->second;
}

bool ScriptedTeam::bound_elsewhere(const LocationId& loc, int order_id) const {
  for (const auto& [id, j] : jobs_) {
    if (id == order_id) continue;
    for (const auto& [step, t] : j.tools) {
      if (t == loc) return true;
    }
  }
  return false;
}

std::vector<const ScriptedTeam::Job*> ScriptedTeam::jobs_by_deadline(const KitchenState& s) const {
  std::vector<const Job*> out;
  for (const auto& o : s.orders) {
    if (const Job* j = job(o.order_id)) out.push_back(j);
  }
  std::stable_sort(out.begin(), out.end(), [&](const Job* a, const Job* b) {
    const auto la = std::find_if(s.orders.begin(), s.orders.end(), [&](auto& o) { return o.order_id == a->order_id; });
    const auto lb = std::find_if(s.orders.begin(), s.orders.end(), [&](auto& o) { return o.order_id == b->order_id; });
    return std::tie(la->lifetime, a->order_id) < std::tie(lb->lifetime, b->order_id);
  });
  return out;
}

bool ScriptedTeam::bind(Job& job, int step, const KitchenState& s) {
  const auto& rs = recipe(job).steps[static_cast<std::size_t>(step)];
  const LocationState* best = nullptr;
  std::size_t best_junk = 0, best_overlap = 0;
  for (const auto& l : s.locations) {
    if (l.kind != LocationKind::Tool || l.tool_kind != rs.tool_kind || l.processing) continue;
    if (bound_elsewhere(l.id, job.order_id)) continue;
    bool own_other_step = false;
    for (const auto& [k, t] : job.tools) {
      if (t == l.id && k != step - 1) own_other_step = true;
    }
    if (own_other_step) continue;
    const auto junk = minus(l.contents, rs.inputs).size();
    const auto overlap = l.contents.size() - junk;
    if (!best || std::tie(junk, best_overlap) < std::tie(best_junk, overlap)) {
      best = &l;
      best_junk = junk;
      best_overlap = overlap;
    }
  }
  if (!best) return false;
  job.tools[step] = best->id;
  return true;
}

void ScriptedTeam::advance(Job& job, const KitchenState& s) {
  const int n = static_cast<int>(recipe(job).steps.size());
  while (job.stage < n) {
    const int k = job.stage;
    const auto t = job.tools.find(k);
    if (t == job.tools.end()) {
      bind(job, k, s);
      break;
    }
    if (s.location(t->second).processing) job.cooking.insert(k);
    if (job.cooking.count(k) && !s.location(t->second).processing) {
      ++job.stage;
      continue;
    }
    break;
  }
  // Bind the next step's tool while this one cooks so its other inputs can be fetched.
  const int k = job.stage;
  if (k + 1 < n && job.cooking.count(k) && !job.tools.count(k + 1)) bind(job, k + 1, s);
  // Release tools whose step is finished and whose output has been taken out.
  for (auto it = job.tools.begin(); it != job.tools.end();) {
    const int j = it->first;
    const auto& out = recipe(job).steps[static_cast<std::size_t>(j)].output;
    if (j < job.stage && !s.location(it->second).contents.count(out)) {
      it = job.tools.erase(it);
    } else {
      ++it;
    }
  }
}

void ScriptedTeam::update(const KitchenState& s, const std::map<AgentId, kitchen::ActionResult>& last_results) {
  if (!level_) level_ = s.level;
  if (updated_step_ == s.step) return;
  updated_step_ = s.step;

  for (const auto& [agent, act] : issued_) {
    const auto r = last_results.find(agent);
    if (r == last_results.end() || !r->second.succeeded) continue;
    if (const auto* a = std::get_if<kitchen::Activate>(&act)) {
      for (auto& [id, j] : jobs_) {
        const auto t = j.tools.find(j.stage);
        if (t != j.tools.end() && t->second == a->location) j.cooking.insert(j.stage);
      }
    }
  }
  issued_.clear();

  for (auto it = carry_.begin(); it != carry_.end();) {
    const auto& held = s.agent(it->first).holding;
    if (!held || *held != it->second.item) {
      it = carry_.erase(it);
    } else {
      ++it;
    }
  }

  for (auto it = jobs_.begin(); it != jobs_.end();) {
    const bool live = std::any_of(s.orders.begin(), s.orders.end(), [&](auto& o) { return o.order_id == it->first; });
    it = live ? std::next(it) : jobs_.erase(it);
  }
  for (const auto& o : s.orders) {
    if (!jobs_.count(o.order_id)) jobs_[o.order_id] = Job{o.order_id, o.dish, 0, {}, {}};
  }
  for (const Job* jp : jobs_by_deadline(s)) advance(jobs_.at(jp->order_id), s);
}

std::vector<WorkUnit> ScriptedTeam::pending_units(const KitchenState& s) const {
  std::vector<WorkUnit> out;
  for (const Job* j : jobs_by_deadline(s)) {
    const int n = static_cast<int>(recipe(*j).steps.size());
    for (int k = 0; k < n; ++k) {
      if (j->stage <= k && !j->cooking.count(k)) out.push_back({j->order_id, j->dish, k, "prep"});
      if (j->stage <= k || (k == n - 1)) out.push_back({j->order_id, j->dish, k, "cook"});
    }
  }
  return out;
}

Items ScriptedTeam::missing(const Job& j, int step, const KitchenState& s, const AgentId& except) const {
  const auto t = j.tools.find(step);
  if (t == j.tools.end()) return {};
  const auto& inputs = recipe(j).steps[static_cast<std::size_t>(step)].inputs;
  Items need = minus(inputs, s.location(t->second).contents);
  for (const auto& [agent, c] : carry_) {
    if (agent == except) continue;
    if (c.kind == CarryKind::Deliver && c.order_id == j.order_id && c.step == step && c.target == t->second) {
      const auto it = need.find(c.item);
      if (it != need.end()) need.erase(it);
    }
  }
  return need;
}

std::optional<LocationId> ScriptedTeam::find_source(const ItemId& item, const Job& j, int step,
                                                    const KitchenState& s) const {
  if (step > 0) {
    const auto prev = j.tools.find(step - 1);
    if (prev != j.tools.end() && recipe(j).steps[static_cast<std::size_t>(step - 1)].output == item) {
      const auto& l = s.location(prev->second);
      if (!l.processing && l.contents.count(item)) return l.id;
    }
  }
  for (const auto& l : s.locations) {
    if (l.kind == LocationKind::Storage && l.contents.count(item)) return l.id;
  }
  const auto own = j.tools.find(step);
  for (const auto& l : s.locations) {
    if (l.kind == LocationKind::Storage || l.processing || !l.contents.count(item)) continue;
    if (own != j.tools.end() && own->second == l.id) continue;
    if (bound_elsewhere(l.id, j.order_id)) continue;
    bool own_tool = false;
    for (const auto& [k, t] : j.tools) own_tool = own_tool || t == l.id;
    if (own_tool) continue;
    return l.id;
  }
  return std::nullopt;
}

ScriptedTeam::UnitAction ScriptedTeam::unit_action(const AgentId& a, const WorkUnit& u, const KitchenState& s) const {
  UnitAction r;
  const Job* j = job(u.order_id);
  if (!j) return r;
  const auto& steps = recipe(*j).steps;
  const int n = static_cast<int>(steps.size());
  const auto& rs = steps[static_cast<std::size_t>(u.recipe_step)];
  const auto tool = j->tools.find(u.recipe_step);
  if (tool != j->tools.end()) r.preposition = tool->second;

  if (u.phase == "prep") {
    if (j->stage > u.recipe_step || j->cooking.count(u.recipe_step) || tool == j->tools.end()) return r;
    const LocationState& t = s.location(tool->second);
    if (t.processing) return r;
    const Items junk = minus(t.contents, rs.inputs);
    if (!junk.empty()) {
      r.action = go_or(a, s, t.id, kitchen::Get{a, t.id, *junk.begin()});
      if (kitchen::kind_of(*r.action) == ActionKind::Get) r.carry = Carry{CarryKind::Dispose, 0, 0, {}, *junk.begin()};
      return r;
    }
    const Items need = missing(*j, u.recipe_step, s);
    for (const auto& item : std::set<ItemId>(need.begin(), need.end())) {
      const auto src = find_source(item, *j, u.recipe_step, s);
      if (!src) continue;
      r.action = go_or(a, s, *src, kitchen::Get{a, *src, item});
      if (kitchen::kind_of(*r.action) == ActionKind::Get) {
        r.carry = Carry{CarryKind::Deliver, j->order_id, u.recipe_step, t.id, item};
      }
      return r;
    }
    // Waiting on an earlier step's output: stand by where it will appear.
    if (u.recipe_step > 0) {
      const auto prev = j->tools.find(u.recipe_step - 1);
      if (prev != j->tools.end()) r.preposition = prev->second;
    }
    return r;
  }

  // cook
  if (u.recipe_step == n - 1 && j->stage == n) {
    std::optional<LocationId> src;
    if (tool != j->tools.end() && s.location(tool->second).contents.count(j->dish)) {
      src = tool->second;
    } else {
      for (const auto& l : s.locations) {
        if (l.kind == LocationKind::ServingTable || l.processing || !l.contents.count(j->dish)) continue;
        if (bound_elsewhere(l.id, j->order_id)) continue;
        src = l.id;
        break;
      }
    }
    if (!src) return r;
    r.action = go_or(a, s, *src, kitchen::Get{a, *src, j->dish});
    if (kitchen::kind_of(*r.action) == ActionKind::Get) r.carry = Carry{CarryKind::Serve, j->order_id, n, {}, j->dish};
    return r;
  }
  if (j->stage != u.recipe_step || tool == j->tools.end()) return r;
  const LocationState& t = s.location(tool->second);
  if (t.processing || t.contents != rs.inputs) return r;
  r.action = go_or(a, s, t.id, kitchen::Activate{a, t.id});
  return r;
}

bool ScriptedTeam::carry_valid(const Carry& c, const ItemId& held, const KitchenState& s) const {
  if (c.item != held) return false;
  switch (c.kind) {
    case CarryKind::Dispose: return true;
    case CarryKind::Serve:
      return std::any_of(s.orders.begin(), s.orders.end(), [&](auto& o) { return o.dish == held; });
    case CarryKind::Deliver: {
      const Job* j = job(c.order_id);
      if (!j || j->stage > c.step || j->cooking.count(c.step)) return false;
      const auto t = j->tools.find(c.step);
      if (t == j->tools.end() || t->second != c.target || s.location(c.target).processing) return false;
      const auto& inputs = recipe(*j).steps[static_cast<std::size_t>(c.step)].inputs;
      return minus(inputs, s.location(c.target).contents).count(held) > 0;
    }
  }
  return false;
}

KitchenAction ScriptedTeam::carry_action(const AgentId& a, const KitchenState& s) {
  const ItemId held = *s.agent(a).holding;
  auto it = carry_.find(a);
  if (it == carry_.end() || !carry_valid(it->second, held, s)) {
    std::optional<Carry> next;
    if (std::any_of(s.orders.begin(), s.orders.end(), [&](auto& o) { return o.dish == held; })) {
      next = Carry{CarryKind::Serve, 0, 0, {}, held};
    }
    for (const Job* j : jobs_by_deadline(s)) {
      if (next) break;
      const int n = static_cast<int>(recipe(*j).steps.size());
      for (int k = j->stage; k < n && !next; ++k) {
        if (j->cooking.count(k) || !j->tools.count(k) || s.location(j->tools.at(k)).processing) continue;
        if (missing(*j, k, s, a).count(held)) next = Carry{CarryKind::Deliver, j->order_id, k, j->tools.at(k), held};
      }
    }
    if (!next) next = Carry{CarryKind::Dispose, 0, 0, {}, held};
    carry_[a] = *next;
    it = carry_.find(a);
  }
  Carry& c = it->second;
  LocationId target = c.target;
  if (c.kind == CarryKind::Serve) {
    target = first_of_kind(s, LocationKind::ServingTable).value_or(s.agent(a).at);
  } else if (c.kind == CarryKind::Dispose) {
    target = first_of_kind(s, LocationKind::Storage)
                 .value_or(first_of_kind(s, LocationKind::ServingTable).value_or(s.agent(a).at));
  }
  return go_or(a, s, target, kitchen::Put{a, target});
}

kitchen::JointAction ScriptedTeam::decide_joint(const PolicyQuery& q) {
  if (!q.state) throw StructuralError("scripted policies need the state snapshot in the query");
  std::lock_guard lock(mu_);
  const KitchenState& state = *q.state;
  if (cached_step_ == state.step && cached_plan_ == q.plan.get() && !cached_.empty()) return cached_;
  update(state, q.last_results);

  // Plan-following when the plan carries structured units.
  std::map<AgentId, std::vector<WorkUnit>> owned;
  bool planned = false;
  if (q.plan) {
    for (const auto& [agent, ds] : q.plan->directives) {
      for (const auto& d : ds) {
        if (d.unit) {
          owned[agent].push_back(*d.unit);
          planned = true;
        }
      }
    }
  }

  KitchenState scratch = state;
  std::vector<KitchenEvent> ignored;
  const auto pending = pending_units(state);
  std::set<WorkUnit> taken;
  kitchen::JointAction joint;
  for (const auto& agent : state.agent_ids()) {
    KitchenAction act = kitchen::Noop{agent};
    std::optional<Carry> new_carry;
    std::optional<WorkUnit> from_unit;
    if (scratch.agent(agent).holding) {
      act = carry_action(agent, scratch);
    } else {
      std::vector<WorkUnit> candidates;
      if (planned) {
        const auto it = owned.find(agent);
        if (it != owned.end()) {
          for (const auto& u : it->second) {
            if (std::find(pending.begin(), pending.end(), u) != pending.end()) candidates.push_back(u);
          }
        }
      } else {
        for (const auto& u : pending) {
          if (!taken.count(u)) candidates.push_back(u);
        }
      }
      std::optional<std::pair<WorkUnit, LocationId>> wait;
      bool chosen = false;
      for (const auto& u : candidates) {
        const auto ua = unit_action(agent, u, scratch);
        if (ua.action) {
          act = *ua.action;
          new_carry = ua.carry;
          from_unit = u;
          chosen = true;
          break;
        }
        if (!wait && ua.preposition) wait = {u, *ua.preposition};
      }
      if (!chosen && wait) {
        from_unit = wait->first;
        if (scratch.agent(agent).at != wait->second) act = kitchen::Goto{agent, wait->second};
      }
    }
    if (!kitchen::check_action(scratch, act).succeeded) {
      act = kitchen::Noop{agent};
      new_carry.reset();
    }
    kitchen::apply_action(scratch, act, ignored);
    if (new_carry) carry_[agent] = *new_carry;
    if (from_unit) {
      taken.insert(*from_unit);
      last_unit_[agent] = *from_unit;
    }
    issued_[agent] = act;
    joint.emplace(agent, act);
  }
  cached_step_ = state.step;
  cached_plan_ = q.plan.get();
  cached_ = joint;
  return joint;
}

std::string ScriptedTeam::describe(const WorkUnit& u) const {
  const Job* j = job(u.order_id);
  const auto& steps = level_->recipe_for(u.dish)->steps;
  const auto& rs = steps[static_cast<std::size_t>(u.recipe_step)];
  std::string tool = "a free " + rs.tool_kind;
  if (j) {
    const auto t = j->tools.find(u.recipe_step);
    if (t != j->tools.end()) tool = t->second;
  }
  std::ostringstream o;
  o << u.phase << " " << u.dish << " (order " << u.order_id << ", step " << u.recipe_step + 1 << "/" << steps.size()
    << "): ";
  if (u.phase == "prep") {
    o << "bring";
    bool first = true;
    for (const auto& i : rs.inputs) {
      o << (first ? " " : ", ") << i;
      first = false;
    }
    o << " to " << tool;
  } else {
    o << "activate " << tool;
    if (u.recipe_step + 1 == static_cast<int>(steps.size())) o << ", then serve " << u.dish;
  }
  return o.str();
}

Plan ScriptedTeam::make_plan(const ReplanInput& in) {
  if (!in.state) throw StructuralError("scripted planner needs the state snapshot");
  std::lock_guard lock(mu_);
  const KitchenState& s = *in.state;
  update(s, in.last_results);

  Plan plan;
  plan.created_at = s.step;
  plan.trigger_events = in.events;
  std::vector<AgentId> agents = s.agent_ids();
  for (const auto& a : agents) plan.directives[a];

  std::vector<AgentId> eligible = agents;
  if (in.capability) {
    auto rate = [&](const AgentId& a) -> double {
      const auto it = in.capability->find(a);
      if (it == in.capability->end() || !it->second) return 1.0;
      return to_double(*it->second);
    };
    double best = 0.0;
    for (const auto& a : agents) best = std::max(best, rate(a));
    eligible.clear();
    for (const auto& a : agents) {
      if (rate(a) >= 0.5 * best) eligible.push_back(a);
    }
    std::stable_sort(eligible.begin(), eligible.end(), [&](auto& x, auto& y) { return rate(x) > rate(y); });
  }

  std::size_t next = 0;
  for (const auto& u : pending_units(s)) {
    AgentId owner;
    for (const auto& [a, lu] : last_unit_) {
      if (lu == u && std::find(eligible.begin(), eligible.end(), a) != eligible.end()) owner = a;
    }
    if (owner.empty()) {
      if (eligible.empty()) break;
      owner = eligible[next % eligible.size()];
      ++next;
    }
    plan.directives[owner].push_back({describe(u), u});
  }
  std::ostringstream sum;
  sum << "orders by deadline:";
  bool any = false;
  for (const Job* j : jobs_by_deadline(s)) {
    const auto o = std::find_if(s.orders.begin(), s.orders.end(), [&](auto& x) { return x.order_id == j->order_id; });
    sum << (any ? ", " : " ") << j->dish << "#" << j->order_id << " (lifetime " << o->lifetime << ")";
    any = true;
  }
  if (!any) sum << " none";
  plan.summary = sum.str();
  return plan;
}

// Bindings -------------------------------------------------------------------

namespace {

class ScriptedWorker : public WorkerPolicy {
 public:
  ScriptedWorker(std::shared_ptr<ScriptedTeam> team, AgentId agent, std::optional<Usage> usage)
      : team_(std::move(team)), agent_(std::move(agent)), usage_(std::move(usage)) {}
  WorkerDecision decide(const PolicyQuery& q) override {
    const auto joint = team_->decide_joint(q);
    return {RawDecision::of(joint.at(agent_)), usage_, {}};
  }
  std::string model_id() const override { return usage_ ? usage_->model_id : kScriptedModelId; }

 private:
  std::shared_ptr<ScriptedTeam> team_;
  AgentId agent_;
  std::optional<Usage> usage_;
};

class ScriptedCentral : public CentralPolicy {
 public:
  ScriptedCentral(std::shared_ptr<ScriptedTeam> team, std::optional<Usage> usage)
      : team_(std::move(team)), usage_(std::move(usage)) {}
  CentralDecision decide(const PolicyQuery& q) override {
    CentralDecision d;
    for (const auto& [agent, act] : team_->decide_joint(q)) {
      d.per_agent.emplace(agent, RawDecision::of(act));
      d.raw_text += kitchen::to_text(act) + "\n";
    }
    d.usage = usage_;
    return d;
  }
  std::string model_id() const override { return usage_ ? usage_->model_id : kScriptedModelId; }

 private:
  std::shared_ptr<ScriptedTeam> team_;
  std::optional<Usage> usage_;
};

class ScriptedPlanner : public PlannerPolicy {
 public:
  ScriptedPlanner(std::shared_ptr<ScriptedTeam> team, std::optional<Usage> usage)
      : team_(std::move(team)), usage_(std::move(usage)) {}
  PlannerDecision replan(const ReplanInput& in) override {
    PlannerDecision d;
    d.plan = team_->make_plan(in);
    d.raw_text = d.plan->to_text();
    d.usage = usage_;
    return d;
  }
  std::string model_id() const override { return usage_ ? usage_->model_id : kScriptedModelId; }

 private:
  std::shared_ptr<ScriptedTeam> team_;
  std::optional<Usage> usage_;
};

}  // namespace

std::shared_ptr<WorkerPolicy> scripted_worker(std::shared_ptr<ScriptedTeam> team, AgentId agent,
                                              std::optional<Usage> simulated_usage) {
  return std::make_shared<ScriptedWorker>(std::move(team), std::move(agent), std::move(simulated_usage));
}

std::shared_ptr<CentralPolicy> scripted_central(std::shared_ptr<ScriptedTeam> team,
                                                std::optional<Usage> simulated_usage) {
  return std::make_shared<ScriptedCentral>(std::move(team), std::move(simulated_usage));
}

std::shared_ptr<PlannerPolicy> scripted_planner(std::shared_ptr<ScriptedTeam> team,
                                                std::optional<Usage> simulated_usage) {
  return std::make_shared<ScriptedPlanner>(std::move(team), std::move(simulated_usage));
}

PolicyBindings scripted_bindings(ControllerMode mode, const KitchenState& state) {
  auto team = std::make_shared<ScriptedTeam>();
  PolicyBindings b;
  if (mode == ControllerMode::Orchestrator) {
    b.central = scripted_central(team);
    return b;
  }
  for (const auto& a : state.agent_ids()) b.workers[a] = scripted_worker(team, a);
  if (mode == ControllerMode::Planner) b.planner = scripted_planner(team);
  return b;
}

FlakyWorker::FlakyWorker(std::shared_ptr<WorkerPolicy> inner, double failure_rate, std::uint64_t seed,
                         std::string model_id)
    : inner_(std::move(inner)), failure_rate_(failure_rate), model_id_(std::move(model_id)), eng_(seed) {
  if (failure_rate < 0.0 || failure_rate > 1.0) throw StructuralError("failure rate must be in [0, 1]");
}

WorkerDecision FlakyWorker::decide(const PolicyQuery& q) {
  auto d = inner_->decide(q);
  std::lock_guard lock(mu_);
  if (uniform_unit(eng_) < failure_rate_) {
    ++injected_;
    d.decision = RawDecision::failure("I am not sure what to do next.");
  }
  return d;
}

std::string FlakyWorker::model_id() const { return model_id_.empty() ? inner_->model_id() : model_id_; }

int FlakyWorker::injected() const {
  std::lock_guard lock(mu_);
  return injected_;
}

}  // namespace taskalloc::coordination
