#pragma once

// Subcommand implementations. The run_* functions compute results without
// touching the filesystem beyond their inputs; the cmd_* functions also write
// artifacts under config.output_dir and return the process exit code.
//
// Seed split: root seed -> episode seed derive_seed(root, k) for the k-th
// episode (or pair) -> subsystem seeds derive_seed(episode, label).

#include <filesystem>
#include <iosfwd>
#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include "taskalloc/assign/assignment.hpp"
#include "taskalloc/cli/config.hpp"
#include "taskalloc/coordination/episode.hpp"
#include "taskalloc/gateway/gateway.hpp"

namespace taskalloc::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitReplayMismatch = 2;
inline constexpr int kExitRuntime = 3;

/// Gateway clients shared across the runs of one command, one per transport.
class GatewayPool {
 public:
  std::shared_ptr<gateway::GatewayClient> client(const RoleSpec& role);

 private:
  std::mutex mu_;
  std::map<std::string, std::shared_ptr<gateway::GatewayClient>> clients_;
};

kitchen::LevelConfig resolve_level(const ExperimentConfig& c);
accounting::PriceTable resolve_prices(const ExperimentConfig& c);

/// Bindings for one episode. Scripted roles share one ScriptedTeam; workers
/// with a failure rate are wrapped in FlakyWorker seeded from `episode_seed`.
coordination::PolicyBindings build_bindings(const ExperimentConfig& c, coordination::ControllerMode mode,
                                            const kitchen::KitchenState& env, const std::vector<RoleSpec>& workers,
                                            std::uint64_t episode_seed, GatewayPool& pool);

// assign-eval ----------------------------------------------------------------

struct AssignEvalResult {
  std::vector<assign::CostMatrix> instances;
  std::vector<assign::Candidate> candidates;
  assign::BatchScore score;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
};

/// Instance k has size drawn from derive_seed(root, "assign/sizes") and
/// entries from derive_seed(root, k).
std::vector<assign::CostMatrix> generate_batch(const ExperimentConfig& c);
std::string assignment_prompt(const assign::CostMatrix& m);
AssignEvalResult run_assign_eval(const ExperimentConfig& c, GatewayPool& pool);

// kitchen-run ----------------------------------------------------------------

struct RunRecord {
  std::string name;  // "<mode>_a<agents>_e<episode>"
  coordination::ControllerMode mode = coordination::ControllerMode::Individual;
  int agents = 1;
  int episode = 0;
  std::uint64_t seed = 0;  // episode seed
  coordination::EpisodeReport report;
};

/// Every (mode, agent count, episode) combination, up to config.jobs at once.
std::vector<RunRecord> run_kitchen(const ExperimentConfig& c, GatewayPool& pool);

// capability-sweep -----------------------------------------------------------

struct SweepPair {
  int roster = 0;
  int pair = 0;
  std::uint64_t seed = 0;
  RunRecord on_the_fly;
  RunRecord informed;
};

/// Planner-mode runs of every roster, once without and once with capability
/// information, sharing the episode seed. With calibration episodes the
/// informed run starts from the profile measured in Individual mode.
std::vector<SweepPair> run_capability_sweep(const ExperimentConfig& c, GatewayPool& pool);

// Artifacts ------------------------------------------------------------------

/// trace.jsonl, report.json, efficiency.json, histogram.csv, ledger.csv.
void write_run(const std::filesystem::path& dir, const RunRecord& r);
nlohmann::json summary_row(const RunRecord& r);

int cmd_assign_eval(const ExperimentConfig& c, std::ostream& log);
int cmd_kitchen_run(const ExperimentConfig& c, std::ostream& log);
int cmd_capability_sweep(const ExperimentConfig& c, std::ostream& log);
int cmd_replay(const std::filesystem::path& trace, std::ostream& log);

/// Truncates and writes. Throws StructuralError on I/O failure.
void write_file(const std::filesystem::path& path, const std::string& text);
std::string read_file(const std::filesystem::path& path);

}  // namespace taskalloc::cli
