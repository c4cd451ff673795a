#include <doctest.h>

#include <random>

#include "taskalloc/common/error.hpp"
#include "taskalloc/model/allocation.hpp"

using namespace taskalloc;
using namespace taskalloc::model;

namespace {

// Plain exhaustive oracle: every slot is empty or takes any agent, including
// inexecutable ones. Independent of the pruned search.
struct Exhaustive {
  AllocationMatrix best;
  Valuation best_value = Valuation::finite(0);
  long visited = 0;
};

Exhaustive enumerate_all(const UtilityTable& table) {
  std::vector<std::pair<int, int>> slots;
  for (int p = 0; p < table.task_count(); ++p) {
    for (int m = 0; m < table.subtask_count(p); ++m) slots.emplace_back(p, m);
  }
  const int base = table.agent_count() + 1;
  long total = 1;
  for (std::size_t k = 0; k < slots.size(); ++k) total *= base;
  Exhaustive out;
  bool have = false;
  for (long code = 0; code < total; ++code) {
    AllocationMatrix alloc;
    long c = code;
    for (auto [p, m] : slots) {
      const int choice = static_cast<int>(c % base);
      c /= base;
      if (choice > 0) alloc.assign({p, choice - 1, m});
    }
    ++out.visited;
    if (!feasible(alloc, table).feasible()) continue;
    const auto value = utility_of(alloc, table);
    if (!have || out.best_value < value || (value == out.best_value && alloc < out.best)) {
      out.best = alloc;
      out.best_value = value;
      have = true;
    }
  }
  return out;
}

std::vector<AgentSpec> agents_n(int n) {
  std::vector<AgentSpec> v;
  for (int i = 0; i < n; ++i) v.push_back({"a" + std::to_string(i), Rational(1), Rational(1, 2)});
  return v;
}

std::vector<TaskSpec> tasks_with(const std::vector<int>& subtasks) {
  std::vector<TaskSpec> v;
  for (std::size_t p = 0; p < subtasks.size(); ++p) {
    v.push_back({"t" + std::to_string(p), Rational(0), subtasks[p], Rational(1), Rational(2)});
  }
  return v;
}

UtilityTable random_table(std::mt19937_64& rng, int agents, const std::vector<int>& subtasks) {
  std::uniform_int_distribution<int> q(0, 9), c(0, 6), tau(1, 4), coin(0, 7);
  UtilityTable t(agents, subtasks, Rational(std::uniform_int_distribution<int>(1, 8)(rng)));
  for (int p = 0; p < static_cast<int>(subtasks.size()); ++p) {
    for (int i = 0; i < agents; ++i) {
      for (int m = 0; m < subtasks[static_cast<std::size_t>(p)]; ++m) {
        if (coin(rng) == 0) continue;  // inexecutable
        t.set({p, i, m}, Rational(q(rng)), Rational(c(rng)), Rational(tau(rng)));
      }
    }
  }
  return t;
}

}  // namespace

TEST_CASE("utility_of examples") {
  UtilityTable table(2, {1, 1}, Rational(10));
  table.set({0, 0, 0}, Rational(5), Rational(2), Rational(1));
  table.set({0, 1, 0}, Rational(1), Rational(0), Rational(1));
  table.set({1, 0, 0}, Rational(4), Rational(1), Rational(1));

  CHECK(utility_of(AllocationMatrix{}, table) == Valuation::finite(0));
  CHECK(utility_of(AllocationMatrix({{0, 0, 0}}), table) == Valuation::finite(3));
  // (1,1,0) is inexecutable and poisons the sum.
  const auto poisoned = utility_of(AllocationMatrix({{0, 0, 0}, {1, 0, 0}, {1, 1, 0}}), table);
  CHECK(poisoned.is_negative_infinity());
  CHECK_THROWS_AS(poisoned.value(), std::logic_error);

  CHECK_THROWS_AS(utility_of(AllocationMatrix({{2, 0, 0}}), table), StructuralError);
  CHECK_THROWS_AS(utility_of(AllocationMatrix({{0, 2, 0}}), table), StructuralError);
  CHECK_THROWS_AS(utility_of(AllocationMatrix({{0, 0, 1}}), table), StructuralError);
}

TEST_CASE("negative infinity orders below every finite value") {
  const auto ninf = Valuation::negative_infinity();
  CHECK(ninf < Valuation::finite(Rational(-1000000)));
  CHECK_FALSE(Valuation::finite(0) < ninf);
  CHECK_FALSE(ninf < ninf);
  CHECK(to_string(ninf) == "-inf");
}

TEST_CASE("feasible examples") {
  UtilityTable table(2, {1}, Rational(5));
  table.set({0, 0, 0}, Rational(1), Rational(0), Rational(10));
  table.set({0, 1, 0}, Rational(1), Rational(0), Rational(1));

  const auto empty = feasible(AllocationMatrix{}, table);
  CHECK(empty.feasible());
  CHECK(empty.time_used == Rational(0));
  CHECK(FeasibilityVerdict::binary_domain_holds);

  const auto over = feasible(AllocationMatrix({{0, 0, 0}}), table);
  CHECK_FALSE(over.feasible());
  CHECK(over.violates(Constraint::TimeBudget));
  CHECK_FALSE(over.violates(Constraint::SingleAgentPerSubtask));

  UtilityTable roomy(2, {1}, Rational(100));
  roomy.set({0, 0, 0}, Rational(1), Rational(0), Rational(1));
  roomy.set({0, 1, 0}, Rational(1), Rational(0), Rational(1));
  const auto doubled = feasible(AllocationMatrix({{0, 0, 0}, {0, 1, 0}}), roomy);
  CHECK_FALSE(doubled.feasible());
  CHECK(doubled.violates(Constraint::SingleAgentPerSubtask));
  CHECK(doubled.violations.size() == 1);
}

TEST_CASE("brute_force_allocate small examples") {
  SUBCASE("single option") {
    UtilityTable t(1, {1}, Rational(1));
    t.set({0, 0, 0}, Rational(4), Rational(0), Rational(1));
    const auto r = brute_force_allocate(agents_n(1), tasks_with({1}), t);
    CHECK(r.allocation == AllocationMatrix({{0, 0, 0}}));
    CHECK(r.utility == Valuation::finite(4));
    CHECK_FALSE(r.only_empty_feasible);
  }
  SUBCASE("pick the larger utility") {
    UtilityTable t(2, {1}, Rational(1));
    t.set({0, 0, 0}, Rational(3), Rational(0), Rational(1));
    t.set({0, 1, 0}, Rational(7), Rational(0), Rational(1));
    const auto r = brute_force_allocate(agents_n(2), tasks_with({1}), t);
    CHECK(r.allocation == AllocationMatrix({{0, 1, 0}}));
  }
  SUBCASE("2 agents x 2 subtasks mixed grid") {
    UtilityTable t(2, {2}, Rational(4));
    t.set({0, 0, 0}, Rational(5), Rational(1), Rational(2));
    t.set({0, 1, 0}, Rational(6), Rational(1), Rational(3));
    t.set({0, 0, 1}, Rational(3), Rational(0), Rational(1));
    t.set({0, 1, 1}, Rational(4), Rational(2), Rational(2));
    const auto oracle = enumerate_all(t);
    CHECK(oracle.visited == 9);
    // Frozen from the oracle: agent 1 on subtask 0, agent 0 on subtask 1.
    CHECK(oracle.best == AllocationMatrix({{0, 1, 0}, {0, 0, 1}}));
    CHECK(oracle.best_value == Valuation::finite(8));
    const auto r = brute_force_allocate(agents_n(2), tasks_with({2}), t);
    CHECK(r.allocation == oracle.best);
    CHECK(r.utility == oracle.best_value);
  }
  SUBCASE("nothing fits the budget") {
    UtilityTable t(1, {2}, Rational(1));
    t.set({0, 0, 0}, Rational(5), Rational(0), Rational(2));
    t.set({0, 0, 1}, Rational(5), Rational(0), Rational(3));
    const auto r = brute_force_allocate(agents_n(1), tasks_with({2}), t);
    CHECK(r.allocation.empty());
    CHECK(r.utility == Valuation::finite(0));
    CHECK(r.only_empty_feasible);
  }
  SUBCASE("equal utilities resolve to the smaller entry set") {
    UtilityTable t(2, {1}, Rational(1));
    t.set({0, 0, 0}, Rational(2), Rational(0), Rational(1));
    t.set({0, 1, 0}, Rational(2), Rational(0), Rational(1));
    CHECK(brute_force_allocate(agents_n(2), tasks_with({1}), t).allocation == AllocationMatrix({{0, 0, 0}}));
  }
  SUBCASE("too large") {
    UtilityTable t(3, {4, 4}, Rational(1));
    CHECK_THROWS_AS(brute_force_allocate(agents_n(3), tasks_with({4, 4}), t), InstanceTooLarge);
  }
}

TEST_CASE("brute_force_allocate matches exhaustive enumeration on random instances") {
  std::mt19937_64 rng(2024);
  const std::vector<std::pair<int, std::vector<int>>> shapes = {
      {1, {3}}, {2, {1, 2}}, {3, {2, 1}}, {2, {2, 2, 1}}, {4, {1, 1, 1}}, {1, {5, 3}}, {2, {3, 2}}};
  for (int round = 0; round < 40; ++round) {
    for (const auto& [agents, subtasks] : shapes) {
      const auto table = random_table(rng, agents, subtasks);
      const auto oracle = enumerate_all(table);
      const auto r = brute_force_allocate(agents_n(agents), tasks_with(subtasks), table);
      REQUIRE(feasible(r.allocation, table).feasible());
      CHECK(r.utility == utility_of(r.allocation, table));
      CHECK(r.utility == oracle.best_value);
      CHECK(r.allocation == oracle.best);
    }
  }
}

TEST_CASE("utility_of is additive over disjoint entry sets") {
  std::mt19937_64 rng(7);
  for (int round = 0; round < 50; ++round) {
    UtilityTable t(3, {2, 2}, Rational(100));
    std::uniform_int_distribution<int> d(-5, 9);
    std::vector<Triple> all;
    for (int p = 0; p < 2; ++p)
      for (int i = 0; i < 3; ++i)
        for (int m = 0; m < 2; ++m) {
          t.set({p, i, m}, Rational(d(rng), 3), Rational(d(rng), 7), Rational(1));
          all.push_back({p, i, m});
        }
    AllocationMatrix left, right, both;
    for (const auto& tr : all) {
      const int side = std::uniform_int_distribution<int>(0, 2)(rng);
      if (side == 1) left.assign(tr);
      if (side == 2) right.assign(tr);
      if (side != 0) both.assign(tr);
    }
    CHECK(utility_of(both, t).value() == utility_of(left, t).value() + utility_of(right, t).value());
  }
}

TEST_CASE("scaling quality and cost scales utility and keeps the argmax") {
  std::mt19937_64 rng(99);
  for (int round = 0; round < 30; ++round) {
    const std::vector<int> subtasks = {2, 2};
    const auto base = random_table(rng, 2, subtasks);
    const Rational k(std::uniform_int_distribution<int>(1, 9)(rng), std::uniform_int_distribution<int>(1, 5)(rng));
    UtilityTable scaled(2, subtasks, base.time_budget());
    for (int p = 0; p < 2; ++p)
      for (int i = 0; i < 2; ++i)
        for (int m = 0; m < 2; ++m)
          if (base.executable({p, i, m}))
            scaled.set({p, i, m}, base.quality({p, i, m}) * k, base.cost({p, i, m}) * k, base.duration({p, i, m}));
    const auto a = brute_force_allocate(agents_n(2), tasks_with(subtasks), base);
    const auto b = brute_force_allocate(agents_n(2), tasks_with(subtasks), scaled);
    CHECK(a.allocation == b.allocation);
    CHECK(b.utility.value() == a.utility.value() * k);
  }
}

TEST_CASE("derived default table") {
  std::vector<AgentSpec> agents = {{"a", Rational(2), Rational(1, 2)}, {"b", Rational(1), Rational(1)}};
  std::vector<TaskSpec> tasks = {{"t", Rational(3), 2, Rational(4), Rational(10)}};
  const auto t = derive_table(agents, tasks, Rational(5));
  CHECK(t.quality({0, 0, 1}) == Rational(5, 2));  // 1/2 * 10 / 2
  CHECK(t.cost({0, 0, 1}) == Rational(4));        // 2 * 4 / 2
  CHECK(t.quality({0, 1, 0}) == Rational(5));
  CHECK(t.cost({0, 1, 0}) == Rational(2));
  CHECK(t.duration({0, 1, 0}) == Rational(1));
}

TEST_CASE("utility table JSON") {
  const auto j = nlohmann::json::parse(R"({
    "agents": ["a0", "a1"],
    "tasks": [{"subtask_count": 2}],
    "quality": {"0/0/0": 5, "0/1/1": "3/2"},
    "cost": {"0/0/0": 2, "0/1/1": 0.5},
    "duration": {"0/0/0": 1, "0/1/1": 2},
    "t_max": 3
  })");
  const auto t = UtilityTable::from_json(j);
  CHECK(t.agent_count() == 2);
  CHECK(t.subtask_count(0) == 2);
  CHECK(t.utility({0, 0, 0}) == Rational(3));
  CHECK(t.utility({0, 1, 1}) == Rational(1));
  CHECK_FALSE(t.executable({0, 1, 0}));
  const auto again = UtilityTable::from_json(t.to_json());
  CHECK(again.to_json() == t.to_json());

  auto broken = j;
  broken.erase("t_max");
  CHECK_THROWS_AS(UtilityTable::from_json(broken), StructuralError);
  auto partial = j;
  partial["quality"]["0/1/0"] = 1;
  CHECK_THROWS_AS(UtilityTable::from_json(partial), StructuralError);
  auto bad_key = j;
  bad_key["quality"]["0-0-1"] = 1;
  CHECK_THROWS_AS(UtilityTable::from_json(bad_key), StructuralError);
}
