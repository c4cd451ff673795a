#include <doctest.h>

#include <algorithm>
#include <filesystem>
#include <random>
#include <sstream>

#include "taskalloc/cli/config.hpp"
#include "taskalloc/cli/experiment.hpp"
#include "taskalloc/common/rng.hpp"
#include "taskalloc/coordination/llm_policy.hpp"
#include "taskalloc/coordination/scripted.hpp"

using namespace taskalloc;
using namespace taskalloc::cli;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    std::random_device rd;
    path = fs::temp_directory_path() / ("taskalloc_cli_" + std::to_string(rd()) + std::to_string(rd()));
    fs::create_directories(path);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

int error_line(const std::string& text, Experiment e = Experiment::KitchenRun) {
  try {
    parse_config(text, "cfg.json", e);
  } catch (const ConfigError& err) {
    return err.line();
  }
  return -1;
}

ExperimentConfig config(const std::string& text, Experiment e = Experiment::KitchenRun) {
  auto c = parse_config(text, "cfg.json", e);
  apply_overrides(c, {});
  return c;
}

std::string trace_text(const kitchen::Trace& t) {
  std::ostringstream o;
  kitchen::write_trace(o, t);
  return o.str();
}

}  // namespace

TEST_CASE("line index locates keys and array elements") {
  const std::string text = "{\n  \"a\": 1,\n  \"b\": {\n    \"c\": [\n      10,\n      {\"d\": \"x,y\"}\n    ]\n  }\n}\n";
  const LineIndex idx(text);
  CHECK(idx.line_of("/a") == 2);
  CHECK(idx.line_of("/b") == 3);
  CHECK(idx.line_of("/b/c") == 4);
  CHECK(idx.line_of("/b/c/0") == 5);
  CHECK(idx.line_of("/b/c/1") == 6);
  CHECK(idx.line_of("/b/c/1/d") == 6);
  CHECK(idx.line_of("/b/missing") == 3);
  CHECK(idx.line_of("") == 1);
}

TEST_CASE("config errors name the offending line") {
  CHECK(error_line("{\n  \"seed\": 1,\n  \"agents\": 0\n}") == 3);
  CHECK(error_line("{\n  \"seed\": -4\n}") == 2);
  CHECK(error_line("{\n  \"seed\": 1,\n\n  \"mode\": \"swarm\"\n}") == 4);
  CHECK(error_line("{\n  \"seed\": 1,\n  \"levle\": \"level_1\"\n}") == 3);
  CHECK(error_line("{\n  \"seed\": 1,\n  \"bindings\": {\n    \"workers\": [\n      \"scripted\",\n      {\"model_id\": "
                   "\"m\", \"failure_rate\": 2}\n    ]\n  }\n}") == 6);
  CHECK(error_line("{\n  \"seed\": 1\n  \"agents\": 2\n}") == 3);
  CHECK(error_line("{\n  \"allocator\": \"mock\",\n  \"instances\": 2,\n  \"mock_replies\": [\"x\"]\n}",
                   Experiment::AssignEval) == 4);
  CHECK(error_line("{\n  \"experiment\": \"assign-eval\"\n}") == 2);
  CHECK(error_line("{\n  \"seed\": 2\n}", Experiment::CapabilitySweep) == 1);
  CHECK(error_line("{\n  \"bindings\": {\n    \"planner\": {\"endpoint_url\": \"http://x\"}\n  }\n}") == 3);
  try {
    parse_config("{\n  \"seed\": 1,\n  \"agents\": 7\n}", "cfg.json", Experiment::KitchenRun);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).rfind("cfg.json:3: ", 0) == 0);
  }
}

TEST_CASE("flags override the file and a seed is mandatory") {
  auto c = parse_config(R"({"seed": 5, "agents": 2, "mode": "individual", "output_dir": "a"})", "cfg.json",
                        Experiment::KitchenRun);
  Overrides o;
  o.seed = 9;
  o.agents = 3;
  o.mode = "planner";
  o.level = "level_3";
  o.jobs = 4;
  o.output = "b";
  apply_overrides(c, o);
  CHECK(*c.seed == 9);
  CHECK(c.agent_counts == std::vector<int>{3});
  CHECK(c.modes == std::vector{coordination::ControllerMode::Planner});
  CHECK(c.level_id == "level_3");
  CHECK(c.jobs == 4);
  CHECK(c.output_dir == fs::path("b"));

  auto no_seed = parse_config("{}", "cfg.json", Experiment::KitchenRun);
  CHECK_THROWS_AS(apply_overrides(no_seed, {}), ConfigError);
  Overrides bad;
  bad.seed = 1;
  bad.agents = 8;
  CHECK_THROWS_AS(apply_overrides(no_seed, bad), ConfigError);
}

TEST_CASE("role specs") {
  const auto c = config(R"({"seed": 1, "bindings": {
      "worker": {"model_id": "gpt-4o-mini", "tokens_in": 10, "tokens_out": 2},
      "planner": {"model_id": "gpt-4o", "endpoint_url": "https://example.invalid/v1", "auth_env_var": "KEY"}}})");
  CHECK(c.worker.scripted());
  CHECK(c.worker.reported_model() == "gpt-4o-mini");
  CHECK_FALSE(c.planner.scripted());
  CHECK(c.planner.binding->auth_env_var == "KEY");
  CHECK(c.orchestrator.reported_model() == "scripted-oracle");
  CHECK(error_line("{\n \"bindings\": {\"worker\": {\"model_id\": \"m\",\n \"endpoint_url\": \"u\", \"tokens_in\": 3}}\n}") == 3);
}

TEST_CASE("assign-eval allocators") {
  SUBCASE("hungarian is its own oracle") {
    GatewayPool pool;
    const auto r = run_assign_eval(config(R"({"seed": 4, "instances": 50})", Experiment::AssignEval), pool);
    CHECK(r.score.accuracy == 1.0);
    CHECK(r.score.validity_rate == 1.0);
  }
  SUBCASE("greedy accuracy equals the brute-force-checked fraction") {
    GatewayPool pool;
    const auto c = config(R"({"seed": 12, "instances": 100, "n_range": [2, 8], "allocator": "greedy"})",
                          Experiment::AssignEval);
    const auto r = run_assign_eval(c, pool);
    int optimal = 0;
    for (const auto& m : r.instances) {
      CHECK(m.n() >= 2);
      CHECK(m.n() <= 8);
      optimal += assign::greedy_row_solve(m).total_cost == assign::brute_force_solve(m).total_cost ? 1 : 0;
    }
    CHECK(r.score.accuracy == doctest::Approx(optimal / 100.0));
    CHECK(r.score.validity_rate == 1.0);
    CHECK(r.score.accuracy < 1.0);
  }
  SUBCASE("mock replies with invalid outputs") {
    const auto base = config(R"({"seed": 2, "instances": 3, "n_range": [2, 2]})", Experiment::AssignEval);
    const auto ms = generate_batch(base);
    const auto opt = assign::hungarian_solve(ms[0]);
    std::ostringstream good;
    good << "Task 0 -> Agent " << opt.mapping[0] << "\nTask 1 -> Agent " << opt.mapping[1] << "\nTotal cost: "
         << opt.total_cost;
    json j{{"seed", 2},
           {"instances", 3},
           {"n_range", {2, 2}},
           {"allocator", "mock"},
           {"mock_replies", {good.str(), "Task 0 -> Agent 0\nTask 1 -> Agent 0", "no idea"}}};
    GatewayPool pool;
    const auto r = run_assign_eval(config(j.dump(), Experiment::AssignEval), pool);
    CHECK(r.score.validity_rate == doctest::Approx(1.0 / 3.0));
    CHECK(r.score.per_instance[0].valid);
    const auto& bad = r.score.per_instance[1].violations;
    CHECK(std::any_of(bad.begin(), bad.end(), [](auto& v) { return v.find("agent 0") != std::string::npos; }));
    CHECK(r.candidates[2].raw_text == "no idea");
  }
  SUBCASE("batches are reproducible from the seed") {
    const auto c = config(R"({"seed": 77, "instances": 20})", Experiment::AssignEval);
    CHECK(generate_batch(c) == generate_batch(c));
  }
}

TEST_CASE("assign-eval artifacts") {
  TempDir tmp;
  auto c = config(R"({"seed": 3, "instances": 10, "allocator": "greedy"})", Experiment::AssignEval);
  c.output_dir = tmp.path;
  std::ostringstream log;
  CHECK(cmd_assign_eval(c, log) == kExitOk);
  for (const char* f : {"instances.jsonl", "candidates.jsonl", "score.json", "score.csv", "config.json"}) {
    CHECK(fs::exists(tmp.path / f));
  }
  const auto score = read_file(tmp.path / "score.json");
  CHECK(json::parse(score).dump(2) + "\n" == score);

  const json file_cfg{{"seed", 3},
                      {"instances", 10},
                      {"allocator", "file"},
                      {"candidates_file", (tmp.path / "candidates.jsonl").string()}};
  const auto again = config(file_cfg.dump(), Experiment::AssignEval);
  GatewayPool pool;
  const auto r = run_assign_eval(again, pool);
  CHECK(r.score.to_csv() == read_file(tmp.path / "score.csv"));
}

TEST_CASE("kitchen-run uses the derived episode seed") {
  GatewayPool pool;
  const auto runs = run_kitchen(config(R"({"seed": 0, "agents": 1})"), pool);
  REQUIRE(runs.size() == 1);
  CHECK(runs[0].seed == derive_seed(0, std::uint64_t{0}));
  auto env = kitchen::load_level(kitchen::builtin_level("level_1"), 1, runs[0].seed);
  const auto direct = coordination::run_episode(coordination::ControllerMode::Individual, env,
                                                coordination::scripted_bindings(coordination::ControllerMode::Individual, env),
                                                {.seed = runs[0].seed});
  CHECK(trace_text(direct.trace) == trace_text(runs[0].report.trace));
  CHECK(fnv1a64(trace_text(runs[0].report.trace)) == 0x5f6e8981fa6080b0ULL);
}

TEST_CASE("kitchen-run mode sweep writes round-tripping artifacts") {
  TempDir tmp;
  auto c = config(R"({"seed": 5, "modes": ["individual", "orchestrator", "planner"], "agents": [2], "level": "level_2",
                      "bindings": {"worker": {"model_id": "gpt-4o-mini", "tokens_in": 400, "tokens_out": 10}},
                      "jobs": 3})");
  c.output_dir = tmp.path;
  std::ostringstream log;
  REQUIRE(cmd_kitchen_run(c, log) == kExitOk);
  const auto summary = json::parse(read_file(tmp.path / "summary.json"));
  REQUIRE(summary["runs"].size() == 3);
  CHECK(summary["runs"][2]["planner_invocations"].get<int>() > 1);
  CHECK(summary["runs"][0]["planner_invocations"].get<int>() == 0);
  for (const auto& row : summary["runs"]) {
    const auto dir = tmp.path / row["name"].get<std::string>();
    const auto trace = read_file(dir / "trace.jsonl");
    std::istringstream in(trace);
    CHECK(trace_text(kitchen::read_trace(in)) == trace);
    for (const char* f : {"report.json", "efficiency.json"}) {
      const auto text = read_file(dir / f);
      CHECK(json::parse(text).dump(2) + "\n" == text);
    }
    const auto ledger = read_file(dir / "ledger.csv");
    CHECK(accounting::CostLedger::from_csv(ledger).to_csv() == ledger);
    std::ostringstream rlog;
    CHECK(cmd_replay(dir / "trace.jsonl", rlog) == kExitOk);
  }
  const auto individual = json::parse(read_file(tmp.path / "individual_a2_e0" / "report.json"));
  CHECK_FALSE(individual["efficiency"]["efficiency"].is_null());
  CHECK(individual["ledger"]["rows"].size() == 120);
}

TEST_CASE("replay detects a tampered trace") {
  TempDir tmp;
  auto c = config(R"({"seed": 8, "agents": 2})");
  c.output_dir = tmp.path;
  std::ostringstream log;
  REQUIRE(cmd_kitchen_run(c, log) == kExitOk);
  auto text = read_file(tmp.path / "individual_a2_e0" / "trace.jsonl");
  const auto line_end = text.find("\"step\":10}");
  const auto pos = text.rfind("\"observation_hash\":\"", line_end);
  REQUIRE(pos != std::string::npos);
  auto& digit = text[pos + 20];
  digit = digit == '0' ? '1' : '0';
  write_file(tmp.path / "bad.jsonl", text);
  std::ostringstream rlog;
  CHECK(cmd_replay(tmp.path / "bad.jsonl", rlog) == kExitReplayMismatch);
  CHECK(rlog.str().find("step 10") != std::string::npos);
}

TEST_CASE("capability sweep pairs share order schedules") {
  auto c = config(R"({"seed": 11, "level": "level_2", "pairs": 2,
                      "bindings": {"planner": {"model_id": "gpt-4o", "tokens_in": 1000, "tokens_out": 100}},
                      "rosters": [[{"model_id": "gpt-4o-mini", "tokens_in": 500, "tokens_out": 8},
                                   {"model_id": "Qwen2.5-32B", "tokens_in": 500, "tokens_out": 8, "failure_rate": 0.3}]],
                      "jobs": 2})",
                  Experiment::CapabilitySweep);
  GatewayPool pool;
  const auto pairs = run_capability_sweep(c, pool);
  REQUIRE(pairs.size() == 2);
  const auto intros = [](const RunRecord& r) {
    std::vector<std::pair<int, std::string>> out;
    for (const auto& e : r.report.event_log) {
      if (e.kind == kitchen::EventKind::OrderIntroduced) out.emplace_back(e.step, e.dish);
    }
    return out;
  };
  for (const auto& p : pairs) {
    CHECK(p.on_the_fly.seed == p.informed.seed);
    CHECK(intros(p.on_the_fly) == intros(p.informed));
    for (const auto& call : p.informed.report.planner_calls) {
      CHECK(call.prompt.find(accounting::kCapabilityHeader) != std::string::npos);
    }
    for (const auto& call : p.on_the_fly.report.planner_calls) {
      CHECK(call.prompt.find(accounting::kCapabilityHeader) == std::string::npos);
    }
  }
  CHECK(pairs[0].seed != pairs[1].seed);
}

TEST_CASE("model-backed workers replay a recorded session") {
  TempDir tmp;
  const auto session = tmp.path / "session.jsonl";
  const std::uint64_t seed = derive_seed(21, std::uint64_t{0});
  {
    std::vector<gateway::MockEntry> script;
    for (int t = 0; t < 60; ++t) script.push_back(gateway::MockEntry::reply("noop(agent0)", 120, 8));
    auto rec = std::make_shared<gateway::RecordingTransport>(std::make_shared<gateway::MockTransport>(script), session);
    auto client = std::make_shared<gateway::GatewayClient>(rec, [](std::chrono::milliseconds) {});
    coordination::PolicyBindings b;
    b.workers["agent0"] = std::make_shared<coordination::LlmWorker>(
        client, gateway::ModelBinding{"gpt-4o-mini", "https://example.invalid/v1", "", 0, std::chrono::seconds(1)});
    auto env = kitchen::load_level(kitchen::builtin_level("level_1"), 1, seed);
    coordination::run_episode(coordination::ControllerMode::Individual, env, b);
  }
  json j{{"seed", 21},
         {"bindings",
          {{"worker", {{"model_id", "gpt-4o-mini"}, {"endpoint_url", "https://example.invalid/v1"}, {"transport", "replay"}, {"session_file", session.string()}}}}}};
  GatewayPool pool;
  const auto runs = run_kitchen(config(j.dump()), pool);
  REQUIRE(runs.size() == 1);
  const auto& r = runs[0].report;
  CHECK(r.fallback_count == 0);
  CHECK(r.ledger.rows().size() == 60);
  CHECK(r.ledger.total_tokens_in() == 60 * 120);
  CHECK(r.ledger.total() == accounting::call_cost({Rational(15, 100), Rational(60, 100)}, 7200, 480));
}
