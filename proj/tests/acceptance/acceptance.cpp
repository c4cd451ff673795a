// Acceptance gate. One PASS/FAIL line per criterion; exit status 1 if any fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "taskalloc/accounting/accounting.hpp"
#include "taskalloc/assign/assignment.hpp"
#include "taskalloc/common/rng.hpp"
#include "taskalloc/coordination/episode.hpp"
#include "taskalloc/coordination/llm_policy.hpp"
#include "taskalloc/coordination/scripted.hpp"
#include "taskalloc/kitchen/trace.hpp"

using namespace taskalloc;
using namespace taskalloc::assign;
using coordination::ControllerMode;
using coordination::EpisodeOptions;
using coordination::EpisodeReport;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Records the first failed expectation.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (!ok && pass_) {
      pass_ = false;
      detail_ = what;
    }
  }
  Outcome done(const std::string& summary) const { return {pass_, pass_ ? summary : detail_}; }

 private:
  bool pass_ = true;
  std::string detail_;
};

kitchen::KitchenState level(const std::string& id, int agents, std::uint64_t seed) {
  return kitchen::load_level(kitchen::builtin_level(id), agents, seed);
}

EpisodeReport scripted_run(ControllerMode mode, const std::string& id, int agents, std::uint64_t seed,
                           EpisodeOptions opts = {}) {
  auto env = level(id, agents, seed);
  opts.seed = seed;
  return coordination::run_episode(mode, env, coordination::scripted_bindings(mode, env), opts);
}

std::string trace_text(const kitchen::Trace& t) {
  std::ostringstream o;
  kitchen::write_trace(o, t);
  return o.str();
}

std::string events_text(const std::vector<kitchen::KitchenEvent>& events) {
  std::string s;
  for (const auto& e : events) s += kitchen::to_json(e).dump() + "\n";
  return s;
}

struct RandomConfig {
  std::string level;
  int agents;
  ControllerMode mode;
  std::uint64_t seed;
};

std::vector<RandomConfig> random_configs(int count, std::uint64_t seed) {
  const auto ids = kitchen::builtin_level_ids();
  const ControllerMode modes[] = {ControllerMode::Individual, ControllerMode::Orchestrator, ControllerMode::Planner};
  Engine eng(seed);
  std::vector<RandomConfig> out;
  for (int k = 0; k < count; ++k) {
    RandomConfig c;
    c.level = ids[static_cast<std::size_t>(uniform_int(eng, 0, static_cast<std::int64_t>(ids.size()) - 1))];
    c.agents = static_cast<int>(uniform_int(eng, 1, 6));
    c.mode = modes[uniform_int(eng, 0, 2)];
    c.seed = eng();
    out.push_back(c);
  }
  return out;
}

std::string describe_config(const RandomConfig& c) {
  return c.level + "/" + std::to_string(c.agents) + " agents/" + coordination::to_string(c.mode) + "/seed " +
         std::to_string(c.seed);
}

Candidate candidate_of(const std::vector<int>& mapping, std::optional<Cost> claim = std::nullopt) {
  Candidate c;
  for (int a : mapping) c.mapping.emplace_back(a);
  c.claimed_cost = claim;
  return c;
}

Cost cost_of(const CostMatrix& m, const std::vector<int>& mapping) {
  Cost total = 0;
  for (int i = 0; i < m.n(); ++i) total += m.at(i, mapping[static_cast<std::size_t>(i)]);
  return total;
}

std::vector<int> random_permutation(int n, Engine& eng) {
  std::vector<int> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), 0);
  for (int i = n - 1; i > 0; --i) std::swap(p[static_cast<std::size_t>(i)], p[uniform_int(eng, 0, i)]);
  return p;
}

// 1 ---------------------------------------------------------------------------

Outcome hungarian_oracle() {
  Check c;
  const auto start = std::chrono::steady_clock::now();
  Engine sizes(derive_seed(0, "acceptance/sizes"));
  for (std::uint64_t seed = 0; seed < 1000; ++seed) {
    const int n = static_cast<int>(uniform_int(sizes, 2, 8));
    const auto m = generate_instance(n, seed, 0, 99);
    const auto h = hungarian_solve(m);
    const auto b = brute_force_solve(m);
    c.expect(h.total_cost == b.total_cost, "cost differs at seed " + std::to_string(seed));
    c.expect(h.mapping == b.mapping, "mapping differs at seed " + std::to_string(seed));
    c.expect(cost_of(m, h.mapping) == h.total_cost, "reported cost is not the mapping's cost at seed " +
                                                         std::to_string(seed));
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 5.0, "took " + std::to_string(secs) + " s");
  std::ostringstream s;
  s.precision(2);
  s << std::fixed << "1000 instances agree in cost and mapping, " << secs << " s";
  return c.done(s.str());
}

// 2 ---------------------------------------------------------------------------

Outcome validity_taxonomy() {
  Check c;
  Engine eng(derive_seed(0, "acceptance/taxonomy"));
  int flagged = 0;
  int clean = 0;
  for (int k = 0; k < 400; ++k) {
    const int n = static_cast<int>(uniform_int(eng, 2, 8));
    const auto m = generate_instance(n, eng(), 0, 99);
    const auto perm = random_permutation(n, eng);
    const Cost actual = cost_of(m, perm);
    const std::string at = " (case " + std::to_string(k) + ")";

    const auto valid = validate(m, candidate_of(perm, actual));
    c.expect(valid.is_valid(), "false positive on a valid permutation" + at);
    c.expect(validate(m, candidate_of(perm)).is_valid(), "false positive without a claimed cost" + at);
    clean += valid.is_valid() ? 1 : 0;

    const int i = static_cast<int>(uniform_int(eng, 0, n - 2));
    const int j = static_cast<int>(uniform_int(eng, i + 1, n - 1));

    auto dup = perm;
    dup[static_cast<std::size_t>(j)] = perm[static_cast<std::size_t>(i)];
    const auto d = validate(m, candidate_of(dup));
    const bool dup_ok = d.violations.size() == 2 && d.count<DuplicateAgent>() == 1 && d.count<UnassignedTask>() == 1 &&
                        std::get<DuplicateAgent>(d.violations[0]).agent == perm[static_cast<std::size_t>(i)] &&
                        std::get<DuplicateAgent>(d.violations[0]).tasks == std::vector<int>{i, j} &&
                        std::get<UnassignedTask>(d.violations[1]).task == j;
    c.expect(dup_ok, "duplicate agent not flagged as expected" + at);

    auto missing = candidate_of(perm);
    missing.mapping[static_cast<std::size_t>(j)].reset();
    const auto u = validate(m, missing);
    const bool missing_ok =
        u.violations.size() == 1 && u.count<UnassignedTask>() == 1 && std::get<UnassignedTask>(u.violations[0]).task == j;
    c.expect(missing_ok, "missing task not flagged as expected" + at);

    auto out_of_range = perm;
    out_of_range[static_cast<std::size_t>(j)] = n + static_cast<int>(uniform_int(eng, 0, 3));
    const auto o = validate(m, candidate_of(out_of_range));
    const bool range_ok =
        o.violations.size() == 1 && o.count<UnassignedTask>() == 1 && std::get<UnassignedTask>(o.violations[0]).task == j;
    c.expect(range_ok, "out-of-range agent not flagged as expected" + at);

    const Cost lower = actual - 1 - uniform_int(eng, 0, 5);
    const auto f = validate(m, candidate_of(perm, lower));
    const bool fab_ok = f.violations.size() == 1 && f.count<FabricatedCost>() == 1 &&
                        std::get<FabricatedCost>(f.violations[0]).claimed == lower &&
                        std::get<FabricatedCost>(f.violations[0]).actual == actual;
    c.expect(fab_ok, "fabricated lower cost not flagged as expected" + at);

    flagged += (dup_ok ? 1 : 0) + (missing_ok ? 1 : 0) + (range_ok ? 1 : 0) + (fab_ok ? 1 : 0);
  }
  return c.done("detected " + std::to_string(flagged) + "/1600 violations, " + std::to_string(400 - clean) +
                "/400 false positives");
}

// 3 ---------------------------------------------------------------------------

Outcome batch_score_arithmetic() {
  Check c;
  std::vector<CostMatrix> instances;
  std::vector<Candidate> candidates;
  for (std::uint64_t seed = 0; instances.size() < 10; ++seed) {
    const auto m = generate_instance(4, seed, 0, 99);
    const auto opt = hungarian_solve(m);
    std::vector<int> worst = opt.mapping;
    std::vector<int> p{0, 1, 2, 3};
    do {
      if (cost_of(m, p) > cost_of(m, worst)) worst = p;
    } while (std::next_permutation(p.begin(), p.end()));
    if (cost_of(m, worst) == opt.total_cost) continue;
    const auto k = instances.size();
    instances.push_back(m);
    if (k < 4) {
      candidates.push_back(candidate_of(opt.mapping, opt.total_cost));
    } else if (k < 7) {
      candidates.push_back(candidate_of(worst, cost_of(m, worst)));
    } else {
      auto dup = opt.mapping;
      dup[1] = dup[0];
      candidates.push_back(candidate_of(dup));
    }
  }
  const auto s = score_batch(instances, candidates);
  c.expect(s.valid_count == 7, "valid_count " + std::to_string(s.valid_count));
  c.expect(s.optimal_count == 4, "optimal_count " + std::to_string(s.optimal_count));
  c.expect(s.validity_rate == 0.7, "validity_rate " + std::to_string(s.validity_rate));
  c.expect(s.accuracy == 0.4, "accuracy " + std::to_string(s.accuracy));
  return c.done("validity_rate 0.7, accuracy 0.4");
}

// 4 ---------------------------------------------------------------------------

Outcome simulator_determinism() {
  Check c;
  const auto configs = random_configs(24, derive_seed(0, "acceptance/determinism"));
  for (const auto& cfg : configs) {
    const auto a = scripted_run(cfg.mode, cfg.level, cfg.agents, cfg.seed);
    const auto b = scripted_run(cfg.mode, cfg.level, cfg.agents, cfg.seed);
    c.expect(events_text(a.event_log) == events_text(b.event_log), "event logs differ: " + describe_config(cfg));
    c.expect(trace_text(a.trace) == trace_text(b.trace), "traces differ: " + describe_config(cfg));
    c.expect(kitchen::replay(a.trace).ok, "replay mismatch: " + describe_config(cfg));
  }
  return c.done(std::to_string(configs.size()) + " configurations byte-identical");
}

// 5 ---------------------------------------------------------------------------

Outcome order_accounting() {
  Check c;
  const auto configs = random_configs(100, derive_seed(0, "acceptance/accounting"));
  long checked = 0;
  for (const auto& cfg : configs) {
    const auto r = scripted_run(cfg.mode, cfg.level, cfg.agents, cfg.seed);
    auto s = level(cfg.level, cfg.agents, cfg.seed);
    const auto holds = [&](const kitchen::KitchenState& st) {
      ++checked;
      const auto& k = st.counters;
      return k.introduced == k.completed + k.expired + static_cast<int>(st.orders.size());
    };
    c.expect(holds(s), "violated at load: " + describe_config(cfg));
    for (const auto& rec : r.trace.records) {
      s = kitchen::step(s, rec.actions).next_state;
      c.expect(holds(s), "violated after step " + std::to_string(rec.step) + ": " + describe_config(cfg));
    }
    c.expect(s.counters == r.counters, "re-executed counters differ: " + describe_config(cfg));
  }
  return c.done("held at " + std::to_string(checked) + " states of 100 episodes");
}

// 6 ---------------------------------------------------------------------------

Outcome scripted_completion() {
  Check c;
  const auto lvl = kitchen::builtin_level("level_1");
  c.expect(lvl.max_steps == 60, "level_1 max_steps " + std::to_string(lvl.max_steps));
  const auto one = scripted_run(ControllerMode::Individual, "level_1", 1, 0);
  const auto two = scripted_run(ControllerMode::Individual, "level_1", 2, 0);
  c.expect(one.steps_run == 60 && two.steps_run == 60, "episodes did not run 60 steps");
  c.expect(one.completed_orders >= 1, "1-agent run completed nothing");
  c.expect(two.completed_orders >= one.completed_orders, "2-agent run completed fewer orders");
  return c.done("1 agent " + std::to_string(one.completed_orders) + ", 2 agents " +
                std::to_string(two.completed_orders) + " orders in 60 steps");
}

// 7 ---------------------------------------------------------------------------

Outcome planner_trigger() {
  Check c;
  Engine eng(derive_seed(0, "acceptance/planner"));
  const auto ids = kitchen::builtin_level_ids();
  for (int k = 0; k < 30; ++k) {
    RandomConfig cfg{ids[static_cast<std::size_t>(k) % ids.size()], static_cast<int>(uniform_int(eng, 1, 6)),
                     ControllerMode::Planner, eng()};
    const auto r = scripted_run(cfg.mode, cfg.level, cfg.agents, cfg.seed);
    const auto event_steps = std::count_if(r.trace.records.begin(), r.trace.records.end(),
                                           [](const kitchen::TraceRecord& t) { return !t.events.empty(); });
    c.expect(r.planner_invocations == 1 + event_steps,
             std::to_string(r.planner_invocations) + " invocations, " + std::to_string(event_steps) +
                 " event steps: " + describe_config(cfg));
    c.expect(r.planner_calls.size() == static_cast<std::size_t>(r.planner_invocations),
             "recorded calls differ from invocations: " + describe_config(cfg));
  }
  return c.done("30 episodes, invocations = 1 + event steps");
}

// 8 ---------------------------------------------------------------------------

Outcome cost_fixtures() {
  Check c;
  const auto prices = accounting::PriceTable::defaults();
  const auto mini = prices.lookup("gpt-4o-mini");
  const auto claude = prices.lookup("claude-3.7");
  c.expect(mini.has_value() && claude.has_value(), "price table lacks a fixture model");
  if (!mini || !claude) return c.done("");
  const auto a = accounting::call_cost(*mini, 1'000'000, 1'000'000);
  const auto b = accounting::call_cost(*claude, 200'000, 40'000);
  c.expect(a == Rational(3, 4), "gpt-4o-mini cost " + to_string(a));
  c.expect(b == Rational(6, 5), "claude-3.7 cost " + to_string(b));
  accounting::CostLedger ledger;
  ledger.record_call("gpt-4o-mini", accounting::Role::worker("agent0"), 1'000'000, 1'000'000, 0);
  ledger.record_call("claude-3.7", accounting::Role::planner(), 200'000, 40'000, 0);
  c.expect(ledger.total() == Rational(39, 20), "ledger total " + to_string(ledger.total()));
  return c.done("$" + accounting::to_decimal_string(a) + " and $" + accounting::to_decimal_string(b) + " exact");
}

// 9 ---------------------------------------------------------------------------

Outcome efficiency_fixtures() {
  Check c;
  const auto a = accounting::efficiency(20, parse_rational("11.6"));
  const auto b = accounting::efficiency(44, parse_rational("7.2"));
  c.expect(a.efficiency && b.efficiency, "efficiency missing");
  if (!a.efficiency || !b.efficiency) return c.done("");
  const double ea = to_double(*a.efficiency);
  const double eb = to_double(*b.efficiency);
  c.expect(std::abs(ea - 1.724) <= 0.001, "20 / $11.6 gave " + std::to_string(ea));
  c.expect(std::abs(eb - 6.111) <= 0.001, "44 / $7.2 gave " + std::to_string(eb));
  c.expect(!accounting::efficiency(3, Rational(0)).efficiency.has_value(), "zero cost yields an efficiency");
  return c.done(accounting::format_fixed(*a.efficiency, 3) + " and " + accounting::format_fixed(*b.efficiency, 3));
}

// 10 --------------------------------------------------------------------------

class SequenceWorker : public coordination::WorkerPolicy {
 public:
  explicit SequenceWorker(std::vector<std::function<kitchen::KitchenAction(const kitchen::AgentId&)>> script)
      : script_(std::move(script)) {}
  coordination::WorkerDecision decide(const coordination::PolicyQuery& q) override {
    const auto& make = script_.at(static_cast<std::size_t>(q.step) % script_.size());
    return {coordination::RawDecision::of(make(q.agent)), {}, {}};
  }
  std::string model_id() const override { return "sequence"; }

 private:
  std::vector<std::function<kitchen::KitchenAction(const kitchen::AgentId&)>> script_;
};

Outcome action_histogram() {
  Check c;
  using kitchen::KitchenAction;
  // agent0, 10 steps: goto goto get goto put activate noop get put goto
  //   goto 4, get 2, put 2, activate 1, noop 1
  // agent1, 10 steps: noop x6, goto, get, goto, put
  //   goto 2, get 1, put 1, activate 0, noop 6
  // combined over 20 actions: goto 6, get 3, put 3, activate 1, noop 7
  const auto go = [](const char* loc) { return [loc](const kitchen::AgentId& a) -> KitchenAction { return kitchen::Goto{a, loc}; }; };
  const auto get = [](const kitchen::AgentId& a) -> KitchenAction { return kitchen::Get{a, "storage0", "apple"}; };
  const auto put = [](const kitchen::AgentId& a) -> KitchenAction { return kitchen::Put{a, "blender0"}; };
  const auto act = [](const kitchen::AgentId& a) -> KitchenAction { return kitchen::Activate{a, "blender0"}; };
  const auto noop = [](const kitchen::AgentId& a) -> KitchenAction { return kitchen::Noop{a}; };
  coordination::PolicyBindings b;
  b.workers["agent0"] = std::make_shared<SequenceWorker>(std::vector<std::function<KitchenAction(const kitchen::AgentId&)>>{
      go("storage0"), go("blender0"), get, go("storage0"), put, act, noop, get, put, go("servingtable0")});
  b.workers["agent1"] = std::make_shared<SequenceWorker>(std::vector<std::function<KitchenAction(const kitchen::AgentId&)>>{
      noop, noop, noop, noop, noop, noop, go("storage0"), get, go("blender0"), put});
  EpisodeOptions opts;
  opts.step_budget = 10;
  const auto r = coordination::run_episode(ControllerMode::Individual, level("level_1", 2, 0), b, opts);
  const std::map<std::string, double> expected{
      {"goto", 6.0 / 20}, {"get", 3.0 / 20}, {"put", 3.0 / 20}, {"activate", 1.0 / 20}, {"noop", 7.0 / 20}};
  c.expect(r.histogram.total() == 20, "histogram total " + std::to_string(r.histogram.total()));
  c.expect(r.histogram.fractions() == expected, "fixture fractions differ from the hand count");

  int episodes = 0;
  for (const auto& cfg : random_configs(40, derive_seed(0, "acceptance/histogram"))) {
    const auto h = scripted_run(cfg.mode, cfg.level, cfg.agents, cfg.seed).histogram;
    double sum = 0.0;
    for (const auto& [kind, f] : h.fractions()) sum += f;
    c.expect(h.fractions().size() == 5, "histogram keys: " + describe_config(cfg));
    c.expect(std::abs(sum - 1.0) <= 1e-9, "fractions sum to " + std::to_string(sum) + ": " + describe_config(cfg));
    ++episodes;
  }
  return c.done("fixture exact, fractions sum to 1 on " + std::to_string(episodes) + " episodes");
}

// 11 --------------------------------------------------------------------------

Outcome gateway_resilience() {
  Check c;
  int total_injected = 0;
  for (std::uint64_t trial = 0; trial < 10; ++trial) {
    Engine eng(derive_seed(trial, "acceptance/malformed"));
    std::vector<int> steps(60);
    std::iota(steps.begin(), steps.end(), 0);
    std::vector<int> bad;
    std::sample(steps.begin(), steps.end(), std::back_inserter(bad), 6, eng);
    std::vector<gateway::MockEntry> script;
    for (int t = 0; t < 60; ++t) {
      const bool inject = std::find(bad.begin(), bad.end(), t) != bad.end();
      script.push_back(inject ? gateway::MockEntry::malformed() : gateway::MockEntry::reply("noop(agent0)", 100, 5));
    }
    auto mock = std::make_shared<gateway::MockTransport>(script);
    auto client = std::make_shared<gateway::GatewayClient>(mock, [](std::chrono::milliseconds) {});
    coordination::PolicyBindings b;
    b.workers["agent0"] = std::make_shared<coordination::LlmWorker>(
        client, gateway::ModelBinding{"gpt-4o-mini", "mock://", "", 0, std::chrono::seconds(1)});
    const auto r = coordination::run_episode(ControllerMode::Individual, level("level_1", 1, trial), b);
    const auto at = " (trial " + std::to_string(trial) + ")";
    c.expect(r.steps_run == 60, "episode stopped early" + at);
    c.expect(r.fallback_count == 6, "fallbacks " + std::to_string(r.fallback_count) + at);
    for (int t : bad) {
      const auto& e = r.action_log.at(static_cast<std::size_t>(t));
      const bool noted = std::any_of(r.notes.begin(), r.notes.end(),
                                     [&](auto& n) { return n.kind == "Fallback" && n.step == t && n.agent == "agent0"; });
      c.expect(e.step == t && e.fallback && kitchen::kind_of(e.action) == kitchen::ActionKind::Noop && noted,
               "malformed reply at step " + std::to_string(t) + " has no logged Noop fallback" + at);
    }
    const auto counts = r.profile.counts("agent0", "gpt-4o-mini");
    c.expect(counts.attempted == 60 && counts.succeeded == 54,
             "profile " + std::to_string(counts.succeeded) + "/" + std::to_string(counts.attempted) + at);
    total_injected += static_cast<int>(bad.size());
  }
  return c.done(std::to_string(total_injected) + " injected malformed replies over 10 episodes, all reconciled");
}

// 12 --------------------------------------------------------------------------

Outcome informed_hint() {
  Check c;
  int lines = 0;
  int prompts = 0;
  for (std::uint64_t seed = 0; seed < 6; ++seed) {
    const int agents = 2 + static_cast<int>(seed % 3);
    const auto run = [&](coordination::CapabilityMode mode) {
      auto env = level(seed % 2 == 0 ? "level_2" : "level_3", agents, seed);
      auto team = std::make_shared<coordination::ScriptedTeam>();
      coordination::PolicyBindings b;
      const auto ids = env.agent_ids();
      for (std::size_t k = 0; k < ids.size(); ++k) {
        auto w = coordination::scripted_worker(team, ids[k]);
        const double rate = 0.15 * static_cast<double>(k);
        b.workers[ids[k]] = rate > 0 ? std::make_shared<coordination::FlakyWorker>(w, rate, derive_seed(seed, ids[k]),
                                                                                  "model-" + std::to_string(k))
                                     : w;
      }
      b.planner = coordination::scripted_planner(team);
      EpisodeOptions opts;
      opts.capability_mode = mode;
      return coordination::run_episode(ControllerMode::Planner, env, b, opts);
    };
    const auto informed = run(coordination::CapabilityMode::Informed);
    for (const auto& call : informed.planner_calls) {
      ++prompts;
      c.expect(call.prompt.find(accounting::kCapabilityHeader) != std::string::npos, "informed prompt lacks the block");
      for (const auto& entry : informed.roster) {
        long attempted = 0;
        long succeeded = 0;
        for (const auto& e : informed.action_log) {
          if (e.agent != entry.agent || e.step >= call.step) continue;
          ++attempted;
          succeeded += e.result.succeeded ? 1 : 0;
        }
        const auto key = "- " + entry.agent + " (" + entry.model_id + "): success rate ";
        const auto pos = call.prompt.find(key);
        c.expect(pos != std::string::npos, "no line for " + entry.agent + " at step " + std::to_string(call.step));
        if (pos == std::string::npos) continue;
        const auto value = call.prompt.substr(pos + key.size(), call.prompt.find('\n', pos) - pos - key.size());
        if (attempted == 0) {
          c.expect(value == "unknown", "expected unknown rate, got " + value);
        } else {
          const double printed = std::stod(value);
          const double recomputed = static_cast<double>(succeeded) / static_cast<double>(attempted);
          c.expect(std::abs(printed - recomputed) <= 0.01,
                   entry.agent + " at step " + std::to_string(call.step) + ": prompt " + value + ", recomputed " +
                       std::to_string(recomputed));
          ++lines;
        }
      }
    }
    const auto blind = run(coordination::CapabilityMode::OnTheFly);
    for (const auto& call : blind.planner_calls) {
      ++prompts;
      c.expect(call.prompt.find(accounting::kCapabilityHeader) == std::string::npos &&
                   call.prompt.find("success rate") == std::string::npos,
               "on-the-fly prompt carries capability information");
    }
  }
  return c.done(std::to_string(lines) + " rate lines within 0.01 over " + std::to_string(prompts) + " prompts");
}

}  // namespace

int main() {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria{
      {"hungarian oracle equivalence", hungarian_oracle},
      {"validity taxonomy", validity_taxonomy},
      {"batch score arithmetic", batch_score_arithmetic},
      {"simulator determinism", simulator_determinism},
      {"order accounting invariant", order_accounting},
      {"scripted oracle completion", scripted_completion},
      {"planner trigger contract", planner_trigger},
      {"cost arithmetic fixtures", cost_fixtures},
      {"efficiency fixtures", efficiency_fixtures},
      {"action histogram", action_histogram},
      {"gateway resilience", gateway_resilience},
      {"informed-mode hint", informed_hint},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << "  " << (k + 1 < 10 ? " " : "") << k + 1 << ". " << criteria[k].first
              << ": " << o.detail << std::endl;
  }
  std::cout << criteria.size() - static_cast<std::size_t>(failed) << "/" << criteria.size() << " criteria passed"
            << std::endl;
  return failed == 0 ? 0 : 1;
}
