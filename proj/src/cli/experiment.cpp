#include "taskalloc/cli/experiment.hpp"

#include <atomic>
#include <fstream>
#include <ostream>
#include <sstream>
#include <thread>

#include "taskalloc/common/rng.hpp"
#include "taskalloc/coordination/llm_policy.hpp"
#include "taskalloc/coordination/scripted.hpp"

namespace taskalloc::cli {

using coordination::ControllerMode;
using coordination::PolicyBindings;
using nlohmann::json;

namespace {

/// Runs fn(0..count-1) on up to `jobs` threads.
template <typename Fn>
void parallel_for(std::size_t count, int jobs, Fn fn) {
  const auto threads = std::min<std::size_t>(count, static_cast<std::size_t>(std::max(1, jobs)));
  if (threads <= 1) {
    for (std::size_t k = 0; k < count; ++k) fn(k);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mu;
  std::vector<std::thread> pool;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      for (std::size_t k = next++; k < count; k = next++) {
        try {
          fn(k);
        } catch (...) {
          std::lock_guard lock(error_mu);
          if (!error) error = std::current_exception();
        }
      }
    });
  }
  for (auto& th : pool) th.join();
  if (error) std::rethrow_exception(error);
}

std::optional<coordination::Usage> simulated_usage(const RoleSpec& r) {
  if (r.model_id.empty() && r.tokens_in == 0 && r.tokens_out == 0) return std::nullopt;
  return coordination::Usage{r.reported_model(), r.tokens_in, r.tokens_out};
}

std::string efficiency_text(const std::optional<Rational>& e) {
  return e ? accounting::format_fixed(*e, 3) : "";
}

json efficiency_json(const std::optional<Rational>& e) { return e ? json(to_double(*e)) : json(nullptr); }

coordination::EpisodeOptions episode_options(const ExperimentConfig& c, std::uint64_t seed, int jobs) {
  coordination::EpisodeOptions o;
  o.step_budget = c.step_budget;
  o.capability_mode = c.capability_mode;
  o.jobs = jobs;
  o.legal_action_hint = c.legal_action_hint;
  o.prices = resolve_prices(c);
  o.seed = seed;
  return o;
}

RunRecord run_one(const ExperimentConfig& c, const kitchen::LevelConfig& level, ControllerMode mode,
                  const std::vector<RoleSpec>& workers, int episode, std::uint64_t seed,
                  const coordination::EpisodeOptions& options, GatewayPool& pool, std::string name) {
  auto env = kitchen::load_level(level, static_cast<int>(workers.size()), seed);
  auto bindings = build_bindings(c, mode, env, workers, seed, pool);
  RunRecord r{std::move(name), mode, static_cast<int>(workers.size()), episode, seed, {}};
  r.report = coordination::run_episode(mode, std::move(env), bindings, options);
  return r;
}

}  // namespace

// Shared plumbing ------------------------------------------------------------

std::shared_ptr<gateway::GatewayClient> GatewayPool::client(const RoleSpec& role) {
  std::lock_guard lock(mu_);
  const auto key = role.transport + "|" + role.session_file;
  auto& slot = clients_[key];
  if (!slot) {
    std::shared_ptr<gateway::Transport> t;
    if (role.transport == "replay") {
      t = std::make_shared<gateway::ReplayTransport>(role.session_file);
    } else if (role.transport == "record") {
      t = std::make_shared<gateway::RecordingTransport>(std::make_shared<gateway::HttpTransport>(), role.session_file);
    } else {
      t = std::make_shared<gateway::HttpTransport>();
    }
    slot = std::make_shared<gateway::GatewayClient>(std::move(t));
  }
  return slot;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw StructuralError("cannot write " + path.string());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StructuralError("cannot open " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

kitchen::LevelConfig resolve_level(const ExperimentConfig& c) {
  if (!c.level_file) return kitchen::builtin_level(c.level_id);
  const auto source = c.level_file->string();
  auto level = kitchen::LevelConfig::from_json(parse_json_document(read_file(*c.level_file), source));
  level.validate();
  return level;
}

accounting::PriceTable resolve_prices(const ExperimentConfig& c) {
  if (!c.prices_file) return accounting::PriceTable::defaults();
  return accounting::PriceTable::from_json(parse_json_document(read_file(*c.prices_file), c.prices_file->string()));
}

PolicyBindings build_bindings(const ExperimentConfig& c, ControllerMode mode, const kitchen::KitchenState& env,
                              const std::vector<RoleSpec>& workers, std::uint64_t episode_seed, GatewayPool& pool) {
  auto team = std::make_shared<coordination::ScriptedTeam>();
  PolicyBindings b;
  if (mode == ControllerMode::Orchestrator) {
    const auto& o = c.orchestrator;
    if (o.scripted()) {
      b.central = coordination::scripted_central(team, simulated_usage(o));
    } else {
      b.central = std::make_shared<coordination::LlmOrchestrator>(pool.client(o), *o.binding);
    }
    return b;
  }
  const auto agents = env.agent_ids();
  if (workers.size() < agents.size()) throw StructuralError("fewer worker bindings than agents");
  for (std::size_t k = 0; k < agents.size(); ++k) {
    const auto& w = workers[k];
    std::shared_ptr<coordination::WorkerPolicy> p;
    if (w.scripted()) {
      p = coordination::scripted_worker(team, agents[k], simulated_usage(w));
    } else {
      p = std::make_shared<coordination::LlmWorker>(pool.client(w), *w.binding);
    }
    if (w.failure_rate > 0.0) {
      p = std::make_shared<coordination::FlakyWorker>(p, w.failure_rate, derive_seed(episode_seed, "flaky/" + agents[k]),
                                                      w.reported_model());
    }
    b.workers[agents[k]] = std::move(p);
  }
  if (mode == ControllerMode::Planner) {
    const auto& pl = c.planner;
    if (pl.scripted()) {
      b.planner = coordination::scripted_planner(team, simulated_usage(pl));
    } else {
      b.planner = std::make_shared<coordination::LlmPlanner>(pool.client(pl), *pl.binding);
    }
  }
  return b;
}

// assign-eval ----------------------------------------------------------------

std::vector<assign::CostMatrix> generate_batch(const ExperimentConfig& c) {
  const auto root = c.seed.value_or(0);
  Engine sizes(derive_seed(root, "assign/sizes"));
  std::vector<assign::CostMatrix> out;
  out.reserve(static_cast<std::size_t>(c.instances));
  for (int k = 0; k < c.instances; ++k) {
    const int n = static_cast<int>(uniform_int(sizes, c.n_min, c.n_max));
    out.push_back(assign::generate_instance(n, derive_seed(root, static_cast<std::uint64_t>(k)), c.cost_min, c.cost_max));
  }
  return out;
}

std::string assignment_prompt(const assign::CostMatrix& m) {
  std::ostringstream o;
  o << "Assign each of the " << m.n() << " tasks to exactly one of the " << m.n()
    << " agents so that every agent gets exactly one task and the total cost is minimal.\n"
    << "Row i lists the cost of each agent (columns 0.." << m.n() - 1 << ") on task i.\n";
  for (int i = 0; i < m.n(); ++i) {
    o << "task " << i << ":";
    for (int j = 0; j < m.n(); ++j) o << " " << m.at(i, j);
    o << "\n";
  }
  o << "Answer with one line per task in the form \"Task i -> Agent j\", then \"Total cost: N\".";
  return o.str();
}

AssignEvalResult run_assign_eval(const ExperimentConfig& c, GatewayPool& pool) {
  AssignEvalResult r;
  r.instances = generate_batch(c);
  const auto n = r.instances.size();
  if (c.allocator == "hungarian" || c.allocator == "greedy") {
    r.candidates.resize(n);
    parallel_for(n, c.jobs, [&](std::size_t k) {
      const auto a = c.allocator == "hungarian" ? assign::hungarian_solve(r.instances[k])
                                                : assign::greedy_row_solve(r.instances[k]);
      r.candidates[k] = assign::Candidate::from_assignment(a);
    });
  } else if (c.allocator == "file") {
    std::istringstream in(read_file(*c.candidates_file));
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty()) continue;
      try {
        r.candidates.push_back(assign::Candidate::from_json(json::parse(line)));
      } catch (const std::exception& e) {
        throw ConfigError(c.candidates_file->string(), lineno, e.what());
      }
    }
    if (r.candidates.size() != n) {
      throw ConfigError(c.candidates_file->string(), lineno,
                        std::to_string(r.candidates.size()) + " candidates for " + std::to_string(n) + " instances");
    }
  } else {
    std::shared_ptr<gateway::GatewayClient> client;
    gateway::ModelBinding binding;
    if (c.allocator == "mock") {
      std::vector<gateway::MockEntry> script;
      for (const auto& t : c.mock_replies) script.push_back(gateway::MockEntry::reply(t, 0, 0));
      client = std::make_shared<gateway::GatewayClient>(std::make_shared<gateway::MockTransport>(script));
      binding = {c.allocator_role.reported_model(), "mock://", "", 0, std::chrono::milliseconds(1000)};
    } else {
      client = pool.client(c.allocator_role);
      binding = *c.allocator_role.binding;
    }
    for (const auto& m : r.instances) {
      try {
        const auto reply = client->complete(binding, {{"user", assignment_prompt(m)}});
        r.tokens_in += reply.tokens_in;
        r.tokens_out += reply.tokens_out;
        r.candidates.push_back(assign::parse_candidate_text(reply.text, m.n()));
      } catch (const gateway::GatewayError&) {
        r.candidates.push_back(assign::parse_candidate_text("", m.n()));
      }
    }
  }
  r.score = assign::score_batch(r.instances, r.candidates, c.optimality, c.jobs);
  return r;
}

int cmd_assign_eval(const ExperimentConfig& c, std::ostream& log) {
  GatewayPool pool;
  const auto r = run_assign_eval(c, pool);
  const auto& dir = c.output_dir;
  std::string instances, candidates;
  for (const auto& m : r.instances) instances += m.to_json().dump() + "\n";
  for (const auto& cand : r.candidates) candidates += cand.to_json().dump() + "\n";
  write_file(dir / "config.json", c.to_json().dump(2) + "\n");
  write_file(dir / "instances.jsonl", instances);
  write_file(dir / "candidates.jsonl", candidates);
  auto score = r.score.to_json();
  score["allocator"] = c.allocator;
  score["tokens_in"] = r.tokens_in;
  score["tokens_out"] = r.tokens_out;
  write_file(dir / "score.json", score.dump(2) + "\n");
  write_file(dir / "score.csv", r.score.to_csv());
  log << "assign-eval: " << r.instances.size() << " instances, allocator " << c.allocator << ", validity_rate "
      << r.score.validity_rate << ", accuracy " << r.score.accuracy << "\n";
  return kExitOk;
}

// kitchen-run ----------------------------------------------------------------

std::vector<RunRecord> run_kitchen(const ExperimentConfig& c, GatewayPool& pool) {
  const auto level = resolve_level(c);
  const auto root = c.seed.value_or(0);
  struct Job {
    ControllerMode mode;
    int agents;
    int episode;
  };
  std::vector<Job> jobs;
  for (auto m : c.modes) {
    for (int n : c.agent_counts) {
      for (int e = 0; e < c.episodes; ++e) jobs.push_back({m, n, e});
    }
  }
  std::vector<RunRecord> out(jobs.size());
  const int inner_jobs = jobs.size() == 1 ? c.jobs : 1;
  parallel_for(jobs.size(), c.jobs, [&](std::size_t k) {
    const auto& j = jobs[k];
    const auto seed = derive_seed(root, static_cast<std::uint64_t>(j.episode));
    std::vector<RoleSpec> workers;
    for (int a = 0; a < j.agents; ++a) workers.push_back(c.worker_for(a));
    const auto name =
        coordination::to_string(j.mode) + "_a" + std::to_string(j.agents) + "_e" + std::to_string(j.episode);
    out[k] = run_one(c, level, j.mode, workers, j.episode, seed, episode_options(c, seed, inner_jobs), pool, name);
  });
  return out;
}

json summary_row(const RunRecord& r) {
  const auto eff = r.report.efficiency();
  return {{"name", r.name},
          {"mode", coordination::to_string(r.mode)},
          {"agents", r.agents},
          {"episode", r.episode},
          {"seed", r.seed},
          {"steps", r.report.steps_run},
          {"completed", r.report.completed_orders},
          {"introduced", r.report.counters.introduced},
          {"expired", r.report.counters.expired},
          {"policy_calls", r.report.policy_calls},
          {"planner_invocations", r.report.planner_invocations},
          {"fallbacks", r.report.fallback_count},
          {"total_usd", accounting::to_decimal_string(eff.total_usd)},
          {"efficiency", efficiency_json(eff.efficiency)}};
}

void write_run(const std::filesystem::path& dir, const RunRecord& r) {
  std::ostringstream trace;
  kitchen::write_trace(trace, r.report.trace);
  write_file(dir / "trace.jsonl", trace.str());
  write_file(dir / "report.json", r.report.to_json().dump(2) + "\n");
  write_file(dir / "efficiency.json", r.report.efficiency().to_json().dump(2) + "\n");
  write_file(dir / "histogram.csv", r.report.histogram.to_csv());
  write_file(dir / "ledger.csv", r.report.ledger.to_csv());
}

namespace {

void write_summary(const std::filesystem::path& dir, const std::vector<const RunRecord*>& runs) {
  json rows = json::array();
  std::ostringstream csv;
  csv << "name,mode,agents,episode,seed,steps,completed,introduced,expired,policy_calls,planner_invocations,"
         "fallbacks,total_usd,efficiency\n";
  for (const auto* r : runs) {
    rows.push_back(summary_row(*r));
    const auto eff = r->report.efficiency();
    csv << r->name << ',' << coordination::to_string(r->mode) << ',' << r->agents << ',' << r->episode << ','
        << r->seed << ',' << r->report.steps_run << ',' << r->report.completed_orders << ','
        << r->report.counters.introduced << ',' << r->report.counters.expired << ',' << r->report.policy_calls << ','
        << r->report.planner_invocations << ',' << r->report.fallback_count << ','
        << accounting::to_decimal_string(eff.total_usd) << ',' << efficiency_text(eff.efficiency) << '\n';
  }
  write_file(dir / "summary.json", json{{"runs", rows}}.dump(2) + "\n");
  write_file(dir / "summary.csv", csv.str());
}

}  // namespace

int cmd_kitchen_run(const ExperimentConfig& c, std::ostream& log) {
  GatewayPool pool;
  const auto runs = run_kitchen(c, pool);
  write_file(c.output_dir / "config.json", c.to_json().dump(2) + "\n");
  std::vector<const RunRecord*> ptrs;
  for (const auto& r : runs) {
    write_run(c.output_dir / r.name, r);
    ptrs.push_back(&r);
    log << r.name << ": completed " << r.report.completed_orders << "/" << r.report.counters.introduced
        << ", planner invocations " << r.report.planner_invocations << ", fallbacks " << r.report.fallback_count
        << "\n";
  }
  write_summary(c.output_dir, ptrs);
  return kExitOk;
}

// capability-sweep -----------------------------------------------------------

std::vector<SweepPair> run_capability_sweep(const ExperimentConfig& c, GatewayPool& pool) {
  const auto level = resolve_level(c);
  const auto root = c.seed.value_or(0);

  std::vector<std::optional<accounting::CapabilityProfile>> priors(c.rosters.size());
  for (std::size_t r = 0; r < c.rosters.size() && c.calibration_episodes > 0; ++r) {
    accounting::CapabilityProfile prior;
    for (int k = 0; k < c.calibration_episodes; ++k) {
      const auto seed = derive_seed(root, "calibration/" + std::to_string(k));
      const auto run = run_one(c, level, ControllerMode::Individual, c.rosters[r], k, seed,
                               episode_options(c, seed, 1), pool, "calibration");
      for (const auto& e : run.report.action_log) {
        const auto& roster = run.report.roster;
        const auto it = std::find_if(roster.begin(), roster.end(), [&](auto& x) { return x.agent == e.agent; });
        prior.update(e.agent, it->model_id, e.result.succeeded);
      }
    }
    priors[r] = prior;
  }

  std::vector<SweepPair> out;
  for (std::size_t r = 0; r < c.rosters.size(); ++r) {
    for (int p = 0; p < c.pairs; ++p) {
      out.push_back({static_cast<int>(r), p, derive_seed(root, static_cast<std::uint64_t>(p)), {}, {}});
    }
  }
  parallel_for(out.size() * 2, c.jobs, [&](std::size_t k) {
    auto& pr = out[k / 2];
    const bool informed = k % 2 == 1;
    auto opts = episode_options(c, pr.seed, 1);
    opts.capability_mode = informed ? coordination::CapabilityMode::Informed : coordination::CapabilityMode::OnTheFly;
    if (informed) opts.capability_prior = priors[static_cast<std::size_t>(pr.roster)];
    const auto name = "roster" + std::to_string(pr.roster) + "_pair" + std::to_string(pr.pair) + "_" +
                      coordination::to_string(opts.capability_mode);
    auto run = run_one(c, level, ControllerMode::Planner, c.rosters[static_cast<std::size_t>(pr.roster)], pr.pair,
                       pr.seed, opts, pool, name);
    (informed ? pr.informed : pr.on_the_fly) = std::move(run);
  });
  return out;
}

int cmd_capability_sweep(const ExperimentConfig& c, std::ostream& log) {
  GatewayPool pool;
  const auto pairs = run_capability_sweep(c, pool);
  write_file(c.output_dir / "config.json", c.to_json().dump(2) + "\n");
  json rows = json::array();
  std::ostringstream csv;
  csv << "roster,pair,seed,models,completed_on_the_fly,completed_informed,usd_on_the_fly,usd_informed,"
         "efficiency_on_the_fly,efficiency_informed,delta_efficiency\n";
  std::vector<const RunRecord*> runs;
  for (const auto& p : pairs) {
    write_run(c.output_dir / p.on_the_fly.name, p.on_the_fly);
    write_run(c.output_dir / p.informed.name, p.informed);
    runs.push_back(&p.on_the_fly);
    runs.push_back(&p.informed);
    const auto a = p.on_the_fly.report.efficiency();
    const auto b = p.informed.report.efficiency();
    std::optional<Rational> delta;
    if (a.efficiency && b.efficiency) delta = *b.efficiency - *a.efficiency;
    std::string models;
    for (const auto& w : c.rosters[static_cast<std::size_t>(p.roster)]) {
      models += (models.empty() ? "" : "+") + w.reported_model();
    }
    rows.push_back({{"roster", p.roster},
                    {"pair", p.pair},
                    {"seed", p.seed},
                    {"models", models},
                    {"on_the_fly", summary_row(p.on_the_fly)},
                    {"informed", summary_row(p.informed)},
                    {"delta_efficiency", efficiency_json(delta)},
                    {"delta_completed", p.informed.report.completed_orders - p.on_the_fly.report.completed_orders}});
    csv << p.roster << ',' << p.pair << ',' << p.seed << ',' << models << ',' << a.completed_orders << ','
        << b.completed_orders << ',' << accounting::to_decimal_string(a.total_usd) << ','
        << accounting::to_decimal_string(b.total_usd) << ',' << efficiency_text(a.efficiency) << ','
        << efficiency_text(b.efficiency) << ',' << efficiency_text(delta) << '\n';
    log << "roster " << p.roster << " pair " << p.pair << ": completed " << a.completed_orders << " on-the-fly, "
        << b.completed_orders << " informed\n";
  }
  write_file(c.output_dir / "comparison.json", json{{"pairs", rows}}.dump(2) + "\n");
  write_file(c.output_dir / "comparison.csv", csv.str());
  write_summary(c.output_dir, runs);
  return kExitOk;
}

// replay ---------------------------------------------------------------------

int cmd_replay(const std::filesystem::path& trace_path, std::ostream& log) {
  std::istringstream in(read_file(trace_path));
  const auto trace = kitchen::read_trace(in);
  const auto rep = kitchen::replay(trace);
  if (rep.ok) {
    log << "replay ok: " << rep.steps_checked << " steps, hashes match\n";
    return kExitOk;
  }
  log << "replay mismatch at step " << rep.first_mismatch_step.value_or(-1) << ": " << rep.detail << "\n";
  return kExitReplayMismatch;
}

}  // namespace taskalloc::cli
