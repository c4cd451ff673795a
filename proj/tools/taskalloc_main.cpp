#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "taskalloc/cli/config.hpp"
#include "taskalloc/cli/experiment.hpp"

using namespace taskalloc;
using namespace taskalloc::cli;

namespace {

struct RunFlags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<int> agents;
  std::optional<std::string> mode;
  std::optional<std::string> level;
  std::optional<int> jobs;
  std::optional<std::string> output;
};

void add_run_flags(CLI::App* sub, RunFlags& f) {
  sub->add_option("--config", f.config, "Experiment config (JSON)");
  sub->add_option("--seed", f.seed, "Root seed; overrides the config");
  sub->add_option("--agents", f.agents, "Agent count (1-6)");
  sub->add_option("--mode", f.mode, "individual, orchestrator or planner");
  sub->add_option("--level", f.level, "Builtin level id or level JSON file");
  sub->add_option("--jobs", f.jobs, "Parallel episodes or instances");
  sub->add_option("--output", f.output, "Output directory");
}

ExperimentConfig resolve(const RunFlags& f, Experiment e) {
  auto c = f.config.empty() ? parse_config("{}", "<defaults>", e) : load_config(f.config, e);
  Overrides o;
  o.seed = f.seed;
  o.agents = f.agents;
  o.mode = f.mode;
  o.level = f.level;
  o.jobs = f.jobs;
  if (f.output) o.output = *f.output;
  apply_overrides(c, o);
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-agent task allocation experiments"};
  app.require_subcommand(1);

  RunFlags assign_flags, kitchen_flags, sweep_flags;
  auto* assign = app.add_subcommand("assign-eval", "Score an allocator on random assignment instances");
  add_run_flags(assign, assign_flags);
  auto* kitchen = app.add_subcommand("kitchen-run", "Run kitchen episodes");
  add_run_flags(kitchen, kitchen_flags);
  std::string kitchen_replay;
  kitchen->add_option("--replay", kitchen_replay, "Re-execute a trace file and verify its hashes instead of running");
  auto* sweep = app.add_subcommand("capability-sweep", "Paired on-the-fly and informed planner runs");
  add_run_flags(sweep, sweep_flags);
  auto* replay = app.add_subcommand("replay", "Re-execute a trace file and verify its hashes");
  std::string trace_path;
  replay->add_option("trace", trace_path, "Trace file (JSON lines)")->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*replay) return cmd_replay(trace_path, std::cout);
    if (*kitchen && !kitchen_replay.empty()) return cmd_replay(kitchen_replay, std::cout);
    if (*assign) return cmd_assign_eval(resolve(assign_flags, Experiment::AssignEval), std::cout);
    if (*kitchen) return cmd_kitchen_run(resolve(kitchen_flags, Experiment::KitchenRun), std::cout);
    if (*sweep) return cmd_capability_sweep(resolve(sweep_flags, Experiment::CapabilitySweep), std::cout);
  } catch (const StructuralError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitOk;
}
