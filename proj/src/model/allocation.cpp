#include "taskalloc/model/allocation.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "taskalloc/common/error.hpp"

namespace taskalloc::model {

std::string to_key(const Triple& t) {
  return std::to_string(t.task) + "/" + std::to_string(t.agent) + "/" + std::to_string(t.subtask);
}

Triple triple_from_key(const std::string& key) {
  Triple t;
  char s1 = 0, s2 = 0;
  std::istringstream in(key);
  if (!(in >> t.task >> s1 >> t.agent >> s2 >> t.subtask) || s1 != '/' || s2 != '/' || !in.eof()) {
    throw StructuralError("bad triple key '" + key + "', expected p/i/m");
  }
  return t;
}

UtilityTable::UtilityTable(int agent_count, std::vector<int> subtask_counts, Rational time_budget)
    : agent_count_(agent_count), subtask_counts_(std::move(subtask_counts)), time_budget_(time_budget) {
  if (agent_count_ < 0) throw StructuralError("negative agent count");
  for (int m : subtask_counts_) {
    if (m < 1) throw StructuralError("every task needs at least one subtask");
  }
  if (time_budget_ <= 0) throw StructuralError("time budget must be positive");
}

int UtilityTable::subtask_count(int task) const {
  if (task < 0 || task >= task_count()) throw StructuralError("task index out of range");
  return subtask_counts_[static_cast<std::size_t>(task)];
}

int UtilityTable::total_subtasks() const {
  return std::accumulate(subtask_counts_.begin(), subtask_counts_.end(), 0);
}

void UtilityTable::check_index(const Triple& t) const {
  if (t.task < 0 || t.task >= task_count() || t.agent < 0 || t.agent >= agent_count_ ||
      t.subtask < 0 || t.subtask >= subtask_counts_[static_cast<std::size_t>(t.task)]) {
    throw StructuralError("triple " + to_key(t) + " is outside the table");
  }
}

void UtilityTable::set(const Triple& t, Rational quality, Rational cost, Rational duration) {
  check_index(t);
  if (duration <= 0) throw StructuralError("duration of " + to_key(t) + " must be positive");
  entries_[t] = Entry{quality, cost, duration};
}

void UtilityTable::forbid(const Triple& t) {
  check_index(t);
  entries_.erase(t);
}

bool UtilityTable::executable(const Triple& t) const {
  check_index(t);
  return entries_.count(t) != 0;
}

Rational UtilityTable::quality(const Triple& t) const {
  check_index(t);
  auto it = entries_.find(t);
  if (it == entries_.end()) throw std::logic_error("quality of inexecutable triple " + to_key(t));
  return it->second.quality;
}

Rational UtilityTable::cost(const Triple& t) const {
  check_index(t);
  auto it = entries_.find(t);
  if (it == entries_.end()) throw std::logic_error("cost of inexecutable triple " + to_key(t));
  return it->second.cost;
}

Rational UtilityTable::duration(const Triple& t) const {
  check_index(t);
  auto it = entries_.find(t);
  if (it == entries_.end()) throw std::logic_error("duration of inexecutable triple " + to_key(t));
  return it->second.duration;
}

UtilityTable UtilityTable::from_json(const nlohmann::json& j) {
  for (const char* key : {"agents", "tasks", "quality", "cost", "duration", "t_max"}) {
    if (!j.contains(key)) throw StructuralError(std::string("utility table is missing '") + key + "'");
  }
  const int agents = static_cast<int>(j.at("agents").size());
  std::vector<int> subtasks;
  for (const auto& task : j.at("tasks")) {
    subtasks.push_back(task.is_object() ? task.value("subtask_count", 1) : task.get<int>());
  }
  UtilityTable table(agents, std::move(subtasks), rational_from_json(j.at("t_max")));

  const auto& q = j.at("quality");
  const auto& c = j.at("cost");
  const auto& d = j.at("duration");
  std::set<std::string> keys;
  for (const auto* m : {&q, &c, &d}) {
    for (auto it = m->begin(); it != m->end(); ++it) keys.insert(it.key());
  }
  for (const auto& key : keys) {
    if (!q.contains(key) || !c.contains(key) || !d.contains(key)) {
      throw StructuralError("triple " + key + " needs quality, cost and duration entries");
    }
    table.set(triple_from_key(key), rational_from_json(q.at(key)), rational_from_json(c.at(key)),
              rational_from_json(d.at(key)));
  }
  if (j.contains("inexecutable")) {
    for (const auto& key : j.at("inexecutable")) table.forbid(triple_from_key(key.get<std::string>()));
  }
  return table;
}

nlohmann::json UtilityTable::to_json() const {
  nlohmann::json j;
  j["agents"] = nlohmann::json::array();
  for (int i = 0; i < agent_count_; ++i) j["agents"].push_back("agent" + std::to_string(i));
  j["tasks"] = nlohmann::json::array();
  for (int m : subtask_counts_) j["tasks"].push_back({{"subtask_count", m}});
  j["quality"] = nlohmann::json::object();
  j["cost"] = nlohmann::json::object();
  j["duration"] = nlohmann::json::object();
  for (const auto& [t, e] : entries_) {
    const auto key = to_key(t);
    j["quality"][key] = rational_to_json(e.quality);
    j["cost"][key] = rational_to_json(e.cost);
    j["duration"][key] = rational_to_json(e.duration);
  }
  j["t_max"] = rational_to_json(time_budget_);
  return j;
}

UtilityTable derive_table(const std::vector<AgentSpec>& agents, const std::vector<TaskSpec>& tasks,
                          Rational time_budget) {
  std::vector<int> subtasks;
  for (const auto& task : tasks) subtasks.push_back(task.subtask_count);
  UtilityTable table(static_cast<int>(agents.size()), subtasks, time_budget);
  for (int p = 0; p < static_cast<int>(tasks.size()); ++p) {
    const auto& task = tasks[static_cast<std::size_t>(p)];
    const Rational share(1, task.subtask_count);
    for (int i = 0; i < static_cast<int>(agents.size()); ++i) {
      const auto& agent = agents[static_cast<std::size_t>(i)];
      for (int m = 0; m < task.subtask_count; ++m) {
        table.set({p, i, m}, agent.capability * task.reward.value_or(Rational(0)) * share,
                  agent.operational_cost * task.workload * share, Rational(1));
      }
    }
  }
  return table;
}

const Rational& Valuation::value() const {
  if (neg_inf_) throw std::logic_error("value() of negative infinity");
  return value_;
}

std::string to_string(const Valuation& v) {
  return v.is_negative_infinity() ? "-inf" : taskalloc::to_string(v.value());
}

Valuation utility_of(const AllocationMatrix& alloc, const UtilityTable& table) {
  for (const auto& t : alloc.entries()) table.check_index(t);
  Rational sum(0);
  for (const auto& t : alloc.entries()) {
    if (!table.executable(t)) return Valuation::negative_infinity();
    sum += table.utility(t);
  }
  return Valuation::finite(sum);
}

bool FeasibilityVerdict::violates(Constraint c) const {
  return std::any_of(violations.begin(), violations.end(),
                     [c](const Violation& v) { return v.constraint == c; });
}

FeasibilityVerdict feasible(const AllocationMatrix& alloc, const UtilityTable& table) {
  for (const auto& t : alloc.entries()) table.check_index(t);
  FeasibilityVerdict verdict;
  std::map<std::pair<int, int>, std::vector<int>> agents_on;
  for (const auto& t : alloc.entries()) {
    // Inexecutable triples have no duration; they are priced by utility_of.
    if (table.executable(t)) verdict.time_used += table.duration(t);
    agents_on[{t.task, t.subtask}].push_back(t.agent);
  }
  if (verdict.time_used > table.time_budget()) {
    verdict.violations.push_back({Constraint::TimeBudget, "time used " + taskalloc::to_string(verdict.time_used) +
                                                              " exceeds budget " +
                                                              taskalloc::to_string(table.time_budget())});
  }
  for (const auto& [slot, agents] : agents_on) {
    if (agents.size() > 1) {
      std::string who;
      for (int a : agents) who += (who.empty() ? "" : ",") + std::to_string(a);
      verdict.violations.push_back({Constraint::SingleAgentPerSubtask,
                                    "task " + std::to_string(slot.first) + " subtask " +
                                        std::to_string(slot.second) + " has agents " + who});
    }
  }
  return verdict;
}

namespace {

struct Search {
  const UtilityTable& table;
  std::vector<std::pair<int, int>> slots;       // (task, subtask)
  std::vector<std::vector<int>> choices;        // executable agents per slot
  std::vector<Rational> optimistic_tail;        // best-case gain from slot k onward
  std::vector<Triple> current;
  Rational current_utility{0};
  Rational current_time{0};
  AllocationMatrix best;
  Rational best_utility{0};

  void run(std::size_t k) {
    if (current_utility + optimistic_tail[k] < best_utility) return;
    if (k == slots.size()) {
      AllocationMatrix candidate(std::set<Triple>(current.begin(), current.end()));
      if (current_utility > best_utility || (current_utility == best_utility && candidate < best)) {
        best = std::move(candidate);
        best_utility = current_utility;
      }
      return;
    }
    run(k + 1);  // leave the slot empty
    const auto [p, m] = slots[k];
    for (int i : choices[k]) {
      const Triple t{p, i, m};
      const Rational tau = table.duration(t);
      if (current_time + tau > table.time_budget()) continue;
      const Rational u = table.utility(t);
      current.push_back(t);
      current_utility += u;
      current_time += tau;
      run(k + 1);
      current_time -= tau;
      current_utility -= u;
      current.pop_back();
    }
  }
};

}  // namespace

BruteForceResult brute_force_allocate(const std::vector<AgentSpec>& agents,
                                      const std::vector<TaskSpec>& tasks,
                                      const UtilityTable& table) {
  if (static_cast<int>(agents.size()) != table.agent_count() ||
      static_cast<int>(tasks.size()) != table.task_count()) {
    throw StructuralError("agent/task lists do not match the utility table");
  }
  for (std::size_t p = 0; p < tasks.size(); ++p) {
    if (tasks[p].subtask_count != table.subtask_count(static_cast<int>(p))) {
      throw StructuralError("subtask count of task " + tasks[p].id + " does not match the table");
    }
  }
  if (static_cast<long>(table.total_subtasks()) * table.agent_count() > kEnumerationBound) {
    throw InstanceTooLarge("brute_force_allocate: subtasks x agents exceeds " +
                           std::to_string(kEnumerationBound));
  }

  Search search{table, {}, {}, {}, {}, Rational(0), Rational(0), {}, Rational(0)};
  bool any_feasible_single = false;
  for (int p = 0; p < table.task_count(); ++p) {
    for (int m = 0; m < table.subtask_count(p); ++m) {
      search.slots.emplace_back(p, m);
      std::vector<int> options;
      for (int i = 0; i < table.agent_count(); ++i) {
        const Triple t{p, i, m};
        if (!table.executable(t)) continue;  // would value the allocation at -inf
        options.push_back(i);
        if (table.duration(t) <= table.time_budget()) any_feasible_single = true;
      }
      search.choices.push_back(std::move(options));
    }
  }
  search.optimistic_tail.assign(search.slots.size() + 1, Rational(0));
  for (std::size_t k = search.slots.size(); k-- > 0;) {
    Rational gain(0);
    for (int i : search.choices[k]) {
      gain = std::max(gain, table.utility({search.slots[k].first, i, search.slots[k].second}));
    }
    search.optimistic_tail[k] = search.optimistic_tail[k + 1] + gain;
  }
  search.run(0);

  BruteForceResult result;
  result.allocation = search.best;
  result.utility = Valuation::finite(search.best_utility);
  result.only_empty_feasible = !any_feasible_single;
  return result;
}

}  // namespace taskalloc::model
