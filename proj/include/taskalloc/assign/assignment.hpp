#pragma once

// Square assignment problem: n tasks, n agents, A[i][j] = cost of agent j on
// task i. Solvers, candidate validation and batch scoring.

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

namespace taskalloc::assign {

using Cost = std::int64_t;

class CostMatrix {
 public:
  CostMatrix() = default;
  /// Throws StructuralError unless `values` is a non-empty square grid of
  /// non-negative entries.
  explicit CostMatrix(std::vector<std::vector<Cost>> values);
  CostMatrix(std::initializer_list<std::initializer_list<Cost>> rows)
      : CostMatrix(std::vector<std::vector<Cost>>(rows.begin(), rows.end())) {}

  int n() const { return static_cast<int>(values_.size()); }
  Cost at(int task, int agent) const {
    return values_[static_cast<std::size_t>(task)][static_cast<std::size_t>(agent)];
  }
  const std::vector<std::vector<Cost>>& values() const { return values_; }

  /// Adds k to every entry of row `task`; the result must stay non-negative.
  CostMatrix with_row_offset(int task, Cost k) const;

  nlohmann::json to_json() const;  // {"n":..., "values":[[...]]}
  static CostMatrix from_json(const nlohmann::json& j);

  friend bool operator==(const CostMatrix&, const CostMatrix&) = default;

 private:
  std::vector<std::vector<Cost>> values_;
};

struct Assignment {
  std::vector<int> mapping;  // mapping[task] = agent
  Cost total_cost = 0;
  friend bool operator==(const Assignment&, const Assignment&) = default;
};

/// Uniform integers in [lo, hi]; deterministic in (n, seed, lo, hi).
CostMatrix generate_instance(int n, std::uint64_t seed, Cost lo, Cost hi);

/// O(n^3) shortest-augmenting-path Hungarian method, followed by a pass that
/// picks the lexicographically smallest mapping among all optimal ones using
/// the tight-edge subgraph of the optimal duals.
Assignment hungarian_solve(const CostMatrix& m);

inline constexpr int kBruteForceLimit = 9;

/// Enumerates permutations in lexicographic order. n <= kBruteForceLimit.
Assignment brute_force_solve(const CostMatrix& m);

/// Raw allocator output. Entries may be missing, out of range or repeated.
struct Candidate {
  std::vector<std::optional<std::int64_t>> mapping;
  std::optional<Cost> claimed_cost;
  std::string raw_text;

  static Candidate from_assignment(const Assignment& a);
  nlohmann::json to_json() const;  // {"mapping":[...], "claimed_cost":..., "raw_text":...}
  static Candidate from_json(const nlohmann::json& j);
};

struct DuplicateAgent {
  int agent;
  std::vector<int> tasks;
};
struct UnassignedTask {
  int task;
};
struct FabricatedCost {
  std::optional<int> task;  // set for per-task claims; the total claim has none
  Cost claimed;
  Cost actual;
};
using Violation = std::variant<DuplicateAgent, UnassignedTask, FabricatedCost>;

std::string describe(const Violation& v);

struct ValidityReport {
  std::vector<Violation> violations;
  /// Sum of A[i][mapping[i]] over in-range entries.
  Cost recomputed_cost = 0;
  bool is_valid() const { return violations.empty(); }

  template <typename V>
  int count() const {
    int k = 0;
    for (const auto& v : violations) k += std::holds_alternative<V>(v) ? 1 : 0;
    return k;
  }
};

/// Detects duplicate agents, unassigned tasks (missing, out-of-range, or
/// displaced by an earlier task holding the same agent) and claimed costs that
/// differ from the recomputed one. Never throws on malformed candidates.
ValidityReport validate(const CostMatrix& m, const Candidate& candidate);

enum class OptimalityMode {
  CostEquality,    // valid and cost equals the optimum
  StrictMapping,   // valid and mapping equals the Hungarian mapping
};

struct InstanceScore {
  bool valid = false;
  bool optimal = false;
  Cost candidate_cost = 0;
  Cost optimal_cost = 0;
  std::vector<std::string> violations;
};

struct BatchScore {
  double accuracy = 0.0;
  double validity_rate = 0.0;
  int valid_count = 0;
  int optimal_count = 0;
  std::vector<InstanceScore> per_instance;

  nlohmann::json to_json() const;
  std::string to_csv() const;
};

/// Instances are scored in parallel over `jobs` threads; results keep input order.
BatchScore score_batch(const std::vector<CostMatrix>& instances, const std::vector<Candidate>& candidates,
                       OptimalityMode mode = OptimalityMode::CostEquality, int jobs = 1);

/// Baseline allocator: each task in order takes its cheapest unused agent.
Assignment greedy_row_solve(const CostMatrix& m);

/// Extracts a candidate from free text: lines like "task 0 -> agent 2" or
/// "Task 1: Agent 0", and a "total cost: N" line. Unparseable text yields an
/// all-missing mapping.
Candidate parse_candidate_text(const std::string& text, int n);

}  // namespace taskalloc::assign
