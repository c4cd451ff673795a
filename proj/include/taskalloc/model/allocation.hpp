#pragma once

// General multi-agent allocation model: agents with an operational cost and a
// capability, tasks split into subtasks, a utility table over
// (task, agent, subtask) triples, and a 0/1 allocation over those triples.
//
// Utility of an allocation is the sum of (quality - cost) over assigned
// triples, or negative infinity if any assigned triple is not executable.
// An allocation is feasible when its total duration fits the time budget and
// no (task, subtask) pair has more than one agent.

#include <compare>
#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskalloc/common/rational.hpp"

namespace taskalloc::model {

struct AgentSpec {
  std::string id;
  Rational operational_cost{0};  // dollars per unit of work
  Rational capability{0};        // proficiency proxy in [0, 1]
};

struct TaskSpec {
  std::string id;
  Rational difficulty{0};  // stored, not used by any valuation
  int subtask_count = 1;
  Rational workload{0};
  std::optional<Rational> reward;
};

/// (task p, agent i, subtask m).
struct Triple {
  int task = 0;
  int agent = 0;
  int subtask = 0;
  auto operator<=>(const Triple&) const = default;
};

std::string to_key(const Triple& t);  // "p/i/m"
Triple triple_from_key(const std::string& key);

class UtilityTable {
 public:
  UtilityTable() = default;
  /// `subtask_counts[p]` is the number of subtasks of task p.
  UtilityTable(int agent_count, std::vector<int> subtask_counts, Rational time_budget);

  /// Registers an executable triple. Duration must be positive.
  void set(const Triple& t, Rational quality, Rational cost, Rational duration);
  /// Marks a triple as not executable (drops any stored values).
  void forbid(const Triple& t);

  bool executable(const Triple& t) const;
  Rational quality(const Triple& t) const;
  Rational cost(const Triple& t) const;
  Rational duration(const Triple& t) const;
  Rational utility(const Triple& t) const { return quality(t) - cost(t); }

  int agent_count() const { return agent_count_; }
  int task_count() const { return static_cast<int>(subtask_counts_.size()); }
  int subtask_count(int task) const;
  int total_subtasks() const;
  const Rational& time_budget() const { return time_budget_; }

  /// Throws StructuralError if the triple is outside the table's index space.
  void check_index(const Triple& t) const;

  /// Top-level keys: agents, tasks, quality, cost, duration, t_max, and the
  /// optional inexecutable list. Triple keys are "p/i/m" strings.
  static UtilityTable from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

 private:
  struct Entry {
    Rational quality, cost, duration;
  };
  int agent_count_ = 0;
  std::vector<int> subtask_counts_;
  Rational time_budget_{1};
  std::map<Triple, Entry> entries_;
};

/// Synthetic default derivation used by tests and the demo path:
/// q = capability * reward / M, c = operational_cost * workload / M, duration 1
/// per subtask. Every triple is executable.
UtilityTable derive_table(const std::vector<AgentSpec>& agents, const std::vector<TaskSpec>& tasks,
                          Rational time_budget);

/// Set of triples with v = 1.
class AllocationMatrix {
 public:
  AllocationMatrix() = default;
  explicit AllocationMatrix(std::set<Triple> entries) : entries_(std::move(entries)) {}

  void assign(const Triple& t) { entries_.insert(t); }
  bool contains(const Triple& t) const { return entries_.count(t) != 0; }
  const std::set<Triple>& entries() const { return entries_; }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }

  /// Lexicographic order of the sorted entry lists.
  auto operator<=>(const AllocationMatrix&) const = default;

 private:
  std::set<Triple> entries_;
};

/// Either a finite rational or negative infinity.
class Valuation {
 public:
  static Valuation finite(Rational v) { return Valuation(false, v); }
  static Valuation negative_infinity() { return Valuation(true, Rational(0)); }

  bool is_negative_infinity() const { return neg_inf_; }
  /// Throws std::logic_error when negative infinity.
  const Rational& value() const;

  friend bool operator==(const Valuation& a, const Valuation& b) {
    return a.neg_inf_ == b.neg_inf_ && (a.neg_inf_ || a.value_ == b.value_);
  }
  friend bool operator<(const Valuation& a, const Valuation& b) {
    if (a.neg_inf_ || b.neg_inf_) return a.neg_inf_ && !b.neg_inf_;
    return a.value_ < b.value_;
  }

 private:
  Valuation(bool neg_inf, Rational v) : neg_inf_(neg_inf), value_(v) {}
  bool neg_inf_;
  Rational value_;
};

std::string to_string(const Valuation& v);

Valuation utility_of(const AllocationMatrix& alloc, const UtilityTable& table);

enum class Constraint {
  TimeBudget,        // sum of durations exceeds the budget
  SingleAgentPerSubtask,  // two agents on one (task, subtask)
};

struct FeasibilityVerdict {
  struct Violation {
    Constraint constraint;
    std::string detail;
  };
  std::vector<Violation> violations;
  Rational time_used{0};
  /// v is a set of triples, so non-binary entries are unrepresentable.
  static constexpr bool binary_domain_holds = true;

  bool feasible() const { return violations.empty(); }
  bool violates(Constraint c) const;
};

FeasibilityVerdict feasible(const AllocationMatrix& alloc, const UtilityTable& table);

struct BruteForceResult {
  AllocationMatrix allocation;
  Valuation utility = Valuation::finite(0);
  /// Set when no nonempty allocation is feasible; the empty allocation is returned.
  bool only_empty_feasible = false;
};

/// Upper bound on total_subtasks * agent_count accepted by brute_force_allocate.
inline constexpr int kEnumerationBound = 20;

/// Exact maximizer by depth-first search with budget and bound pruning.
/// Ties go to the lexicographically smallest entry set.
BruteForceResult brute_force_allocate(const std::vector<AgentSpec>& agents,
                                      const std::vector<TaskSpec>& tasks,
                                      const UtilityTable& table);

}  // namespace taskalloc::model
