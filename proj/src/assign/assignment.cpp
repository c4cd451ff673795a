#include "taskalloc/assign/assignment.hpp"

#include <algorithm>
#include <limits>
#include <numeric>
#include <regex>
#include <sstream>
#include <thread>

#include "taskalloc/common/error.hpp"
#include "taskalloc/common/rng.hpp"

namespace taskalloc::assign {

CostMatrix::CostMatrix(std::vector<std::vector<Cost>> values) : values_(std::move(values)) {
  if (values_.empty()) throw StructuralError("cost matrix must have n >= 1");
  for (const auto& row : values_) {
    if (row.size() != values_.size()) throw StructuralError("cost matrix must be square");
    for (Cost c : row) {
      if (c < 0) throw StructuralError("cost matrix entries must be non-negative");
    }
  }
}

CostMatrix CostMatrix::with_row_offset(int task, Cost k) const {
  auto values = values_;
  for (auto& c : values.at(static_cast<std::size_t>(task))) c += k;
  return CostMatrix(std::move(values));
}

nlohmann::json CostMatrix::to_json() const {
  return {{"n", n()}, {"values", values_}};
}

CostMatrix CostMatrix::from_json(const nlohmann::json& j) {
  if (!j.contains("values")) throw StructuralError("cost matrix JSON needs 'values'");
  CostMatrix m(j.at("values").get<std::vector<std::vector<Cost>>>());
  if (j.contains("n") && j.at("n").get<int>() != m.n()) {
    throw StructuralError("cost matrix 'n' disagrees with 'values'");
  }
  return m;
}

CostMatrix generate_instance(int n, std::uint64_t seed, Cost lo, Cost hi) {
  if (n < 1) throw StructuralError("generate_instance: n must be >= 1");
  if (lo < 0 || lo > hi) throw StructuralError("generate_instance: need 0 <= lo <= hi");
  Engine eng(seed);
  std::vector<std::vector<Cost>> values(static_cast<std::size_t>(n));
  for (auto& row : values) {
    row.resize(static_cast<std::size_t>(n));
    for (auto& c : row) c = uniform_int(eng, lo, hi);
  }
  return CostMatrix(std::move(values));
}

namespace {

Cost total_of(const CostMatrix& m, const std::vector<int>& mapping) {
  Cost sum = 0;
  for (int i = 0; i < m.n(); ++i) sum += m.at(i, mapping[static_cast<std::size_t>(i)]);
  return sum;
}

// Rewrites a perfect matching on the tight subgraph into the lexicographically
// smallest one. Every optimal assignment uses only edges that are tight under
// an optimal dual, so this enumerates exactly the optimal mappings.
class LexMinPass {
 public:
  LexMinPass(std::vector<std::vector<char>> tight, std::vector<int> row_to_col)
      : n_(static_cast<int>(tight.size())), tight_(std::move(tight)), row_to_col_(std::move(row_to_col)),
        col_to_row_(static_cast<std::size_t>(n_)), locked_col_(static_cast<std::size_t>(n_), 0) {
    for (int r = 0; r < n_; ++r) col_to_row_[static_cast<std::size_t>(row_to_col_[static_cast<std::size_t>(r)])] = r;
  }

  std::vector<int> run() {
    for (int i = 0; i < n_; ++i) {
      for (int j = 0; j < n_; ++j) {
        if (!tight_[ix(i)][ix(j)] || locked_col_[ix(j)]) continue;
        if (row_to_col_[ix(i)] == j || reroute(i, j)) {
          locked_col_[ix(j)] = 1;
          break;
        }
      }
    }
    return row_to_col_;
  }

 private:
  static std::size_t ix(int k) { return static_cast<std::size_t>(k); }

  // Tries to give column j to row i. The row currently holding j must find a
  // new column, ending at the column i releases.
  bool reroute(int i, int j) {
    const int displaced = col_to_row_[ix(j)];
    const int released = row_to_col_[ix(i)];
    std::vector<char> seen(ix(n_), 0);
    seen[ix(j)] = 1;
    std::vector<std::pair<int, int>> path;  // (row, new column)
    if (!augment(displaced, released, seen, path, i)) return false;
    for (auto [r, c] : path) {
      row_to_col_[ix(r)] = c;
      col_to_row_[ix(c)] = r;
    }
    row_to_col_[ix(i)] = j;
    col_to_row_[ix(j)] = i;
    return true;
  }

  bool augment(int row, int target, std::vector<char>& seen, std::vector<std::pair<int, int>>& path,
               int excluded_row) {
    for (int c = 0; c < n_; ++c) {
      if (!tight_[ix(row)][ix(c)] || locked_col_[ix(c)] || seen[ix(c)]) continue;
      seen[ix(c)] = 1;
      if (c == target) {
        path.emplace_back(row, c);
        return true;
      }
      const int next = col_to_row_[ix(c)];
      if (next == excluded_row) continue;
      path.emplace_back(row, c);
      if (augment(next, target, seen, path, excluded_row)) return true;
      path.pop_back();
    }
    return false;
  }

  int n_;
  std::vector<std::vector<char>> tight_;
  std::vector<int> row_to_col_;
  std::vector<int> col_to_row_;
  std::vector<char> locked_col_;
};

}  // namespace

Assignment hungarian_solve(const CostMatrix& m) {
  const int n = m.n();
  constexpr Cost kInf = std::numeric_limits<Cost>::max() / 4;
  // 1-based potentials; index 0 is the virtual column used to start each phase.
  std::vector<Cost> u(static_cast<std::size_t>(n) + 1, 0), v(static_cast<std::size_t>(n) + 1, 0);
  std::vector<int> p(static_cast<std::size_t>(n) + 1, 0), way(static_cast<std::size_t>(n) + 1, 0);
  auto a = [&](int i, int j) { return m.at(i - 1, j - 1); };

  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<Cost> minv(static_cast<std::size_t>(n) + 1, kInf);
    std::vector<char> used(static_cast<std::size_t>(n) + 1, 0);
    do {
      used[static_cast<std::size_t>(j0)] = 1;
      const int i0 = p[static_cast<std::size_t>(j0)];
      Cost delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) continue;
        const Cost cur = a(i0, j) - u[static_cast<std::size_t>(i0)] - v[static_cast<std::size_t>(j)];
        if (cur < minv[static_cast<std::size_t>(j)]) {
          minv[static_cast<std::size_t>(j)] = cur;
          way[static_cast<std::size_t>(j)] = j0;
        }
        if (minv[static_cast<std::size_t>(j)] < delta) {
          delta = minv[static_cast<std::size_t>(j)];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[static_cast<std::size_t>(j)]) {
          u[static_cast<std::size_t>(p[static_cast<std::size_t>(j)])] += delta;
          v[static_cast<std::size_t>(j)] -= delta;
        } else {
          minv[static_cast<std::size_t>(j)] -= delta;
        }
      }
      j0 = j1;
    } while (p[static_cast<std::size_t>(j0)] != 0);
    do {
      const int j1 = way[static_cast<std::size_t>(j0)];
      p[static_cast<std::size_t>(j0)] = p[static_cast<std::size_t>(j1)];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<int> row_to_col(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j) row_to_col[static_cast<std::size_t>(p[static_cast<std::size_t>(j)] - 1)] = j - 1;

  std::vector<std::vector<char>> tight(static_cast<std::size_t>(n), std::vector<char>(static_cast<std::size_t>(n)));
  for (int i = 1; i <= n; ++i) {
    for (int j = 1; j <= n; ++j) {
      tight[static_cast<std::size_t>(i - 1)][static_cast<std::size_t>(j - 1)] =
          a(i, j) - u[static_cast<std::size_t>(i)] - v[static_cast<std::size_t>(j)] == 0;
    }
  }
  Assignment out;
  out.mapping = LexMinPass(std::move(tight), std::move(row_to_col)).run();
  out.total_cost = total_of(m, out.mapping);
  return out;
}

Assignment brute_force_solve(const CostMatrix& m) {
  if (m.n() > kBruteForceLimit) {
    throw InstanceTooLarge("brute_force_solve: n = " + std::to_string(m.n()) + " exceeds " +
                           std::to_string(kBruteForceLimit));
  }
  std::vector<int> perm(static_cast<std::size_t>(m.n()));
  std::iota(perm.begin(), perm.end(), 0);
  Assignment best{perm, total_of(m, perm)};
  while (std::next_permutation(perm.begin(), perm.end())) {
    const Cost c = total_of(m, perm);
    if (c < best.total_cost) best = {perm, c};  // strict: first optimum in lex order wins
  }
  return best;
}

Assignment greedy_row_solve(const CostMatrix& m) {
  std::vector<char> used(static_cast<std::size_t>(m.n()), 0);
  Assignment out;
  for (int i = 0; i < m.n(); ++i) {
    int pick = -1;
    for (int j = 0; j < m.n(); ++j) {
      if (!used[static_cast<std::size_t>(j)] && (pick < 0 || m.at(i, j) < m.at(i, pick))) pick = j;
    }
    used[static_cast<std::size_t>(pick)] = 1;
    out.mapping.push_back(pick);
  }
  out.total_cost = total_of(m, out.mapping);
  return out;
}

Candidate Candidate::from_assignment(const Assignment& a) {
  Candidate c;
  for (int j : a.mapping) c.mapping.emplace_back(j);
  c.claimed_cost = a.total_cost;
  return c;
}

nlohmann::json Candidate::to_json() const {
  nlohmann::json j;
  j["mapping"] = nlohmann::json::array();
  for (const auto& e : mapping) j["mapping"].push_back(e ? nlohmann::json(*e) : nlohmann::json(nullptr));
  j["claimed_cost"] = claimed_cost ? nlohmann::json(*claimed_cost) : nlohmann::json(nullptr);
  j["raw_text"] = raw_text;
  return j;
}

Candidate Candidate::from_json(const nlohmann::json& j) {
  Candidate c;
  if (j.contains("mapping") && j.at("mapping").is_array()) {
    for (const auto& e : j.at("mapping")) {
      if (e.is_number_integer()) {
        c.mapping.emplace_back(e.get<std::int64_t>());
      } else {
        c.mapping.emplace_back(std::nullopt);
      }
    }
  }
  if (j.contains("claimed_cost") && j.at("claimed_cost").is_number_integer()) {
    c.claimed_cost = j.at("claimed_cost").get<Cost>();
  }
  c.raw_text = j.value("raw_text", "");
  return c;
}

std::string describe(const Violation& v) {
  struct {
    std::string operator()(const DuplicateAgent& d) const {
      std::string tasks;
      for (int t : d.tasks) tasks += (tasks.empty() ? "" : ",") + std::to_string(t);
      return "DuplicateAgent(agent " + std::to_string(d.agent) + ", tasks " + tasks + ")";
    }
    std::string operator()(const UnassignedTask& u) const {
      return "UnassignedTask(task " + std::to_string(u.task) + ")";
    }
    std::string operator()(const FabricatedCost& f) const {
      std::string where = f.task ? "task " + std::to_string(*f.task) + ", " : "";
      return "FabricatedCost(" + where + "claimed " + std::to_string(f.claimed) + ", actual " +
             std::to_string(f.actual) + ")";
    }
  } visitor;
  return std::visit(visitor, v);
}

ValidityReport validate(const CostMatrix& m, const Candidate& candidate) {
  ValidityReport report;
  const int n = m.n();
  std::vector<std::vector<int>> tasks_of(static_cast<std::size_t>(n));
  std::vector<char> covered(static_cast<std::size_t>(n), 0);
  for (int i = 0; i < n; ++i) {
    const auto idx = static_cast<std::size_t>(i);
    if (idx >= candidate.mapping.size() || !candidate.mapping[idx]) continue;
    const auto agent = *candidate.mapping[idx];
    if (agent < 0 || agent >= n) continue;
    report.recomputed_cost += m.at(i, static_cast<int>(agent));
    tasks_of[static_cast<std::size_t>(agent)].push_back(i);
  }
  // The first task naming an agent keeps it; later ones count as unassigned.
  for (int j = 0; j < n; ++j) {
    const auto& ts = tasks_of[static_cast<std::size_t>(j)];
    if (ts.empty()) continue;
    covered[static_cast<std::size_t>(ts.front())] = 1;
    if (ts.size() > 1) report.violations.emplace_back(DuplicateAgent{j, ts});
  }
  for (int i = 0; i < n; ++i) {
    if (!covered[static_cast<std::size_t>(i)]) report.violations.emplace_back(UnassignedTask{i});
  }
  if (candidate.claimed_cost && *candidate.claimed_cost != report.recomputed_cost) {
    report.violations.emplace_back(FabricatedCost{std::nullopt, *candidate.claimed_cost, report.recomputed_cost});
  }
  return report;
}

nlohmann::json BatchScore::to_json() const {
  nlohmann::json j;
  j["accuracy"] = accuracy;
  j["validity_rate"] = validity_rate;
  j["valid_count"] = valid_count;
  j["optimal_count"] = optimal_count;
  j["instances"] = per_instance.size();
  j["per_instance"] = nlohmann::json::array();
  for (const auto& s : per_instance) {
    j["per_instance"].push_back({{"valid", s.valid},
                                 {"optimal", s.optimal},
                                 {"candidate_cost", s.candidate_cost},
                                 {"optimal_cost", s.optimal_cost},
                                 {"violations", s.violations}});
  }
  return j;
}

std::string BatchScore::to_csv() const {
  std::ostringstream out;
  out << "instance,valid,optimal,candidate_cost,optimal_cost,violations\n";
  for (std::size_t k = 0; k < per_instance.size(); ++k) {
    const auto& s = per_instance[k];
    std::string v;
    for (const auto& d : s.violations) v += (v.empty() ? "" : "; ") + d;
    out << k << ',' << (s.valid ? 1 : 0) << ',' << (s.optimal ? 1 : 0) << ',' << s.candidate_cost << ','
        << s.optimal_cost << ",\"" << v << "\"\n";
  }
  return out.str();
}

BatchScore score_batch(const std::vector<CostMatrix>& instances, const std::vector<Candidate>& candidates,
                       OptimalityMode mode, int jobs) {
  if (instances.size() != candidates.size()) {
    throw StructuralError("score_batch: " + std::to_string(instances.size()) + " instances but " +
                          std::to_string(candidates.size()) + " candidates");
  }
  BatchScore score;
  score.per_instance.resize(instances.size());
  auto score_one = [&](std::size_t k) {
    const auto report = validate(instances[k], candidates[k]);
    const auto truth = hungarian_solve(instances[k]);
    InstanceScore& s = score.per_instance[k];
    s.valid = report.is_valid();
    s.candidate_cost = report.recomputed_cost;
    s.optimal_cost = truth.total_cost;
    for (const auto& v : report.violations) s.violations.push_back(describe(v));
    if (s.valid) {
      if (mode == OptimalityMode::CostEquality) {
        s.optimal = s.candidate_cost == truth.total_cost;
      } else {
        s.optimal = true;
        for (std::size_t i = 0; i < truth.mapping.size(); ++i) {
          s.optimal = s.optimal && *candidates[k].mapping[i] == truth.mapping[i];
        }
      }
    }
  };
  const std::size_t workers = std::max<std::size_t>(1, std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), instances.size()));
  if (workers <= 1) {
    for (std::size_t k = 0; k < instances.size(); ++k) score_one(k);
  } else {
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        for (std::size_t k = w; k < instances.size(); k += workers) score_one(k);
      });
    }
    for (auto& t : pool) t.join();
  }
  for (const auto& s : score.per_instance) {
    score.valid_count += s.valid ? 1 : 0;
    score.optimal_count += s.optimal ? 1 : 0;
  }
  if (!instances.empty()) {
    score.validity_rate = static_cast<double>(score.valid_count) / static_cast<double>(instances.size());
    score.accuracy = static_cast<double>(score.optimal_count) / static_cast<double>(instances.size());
  }
  return score;
}

Candidate parse_candidate_text(const std::string& text, int n) {
  Candidate c;
  c.raw_text = text;
  c.mapping.assign(static_cast<std::size_t>(n), std::nullopt);
  static const std::regex pair_re(R"(task\s*(\d+)\s*(?:->|=>|:|=|is assigned to|assigned to|to)\s*agent\s*(\d+))",
                                  std::regex::icase);
  static const std::regex cost_re(R"(total\s+cost\s*(?:is|=|:)?\s*\$?\s*(\d+))", std::regex::icase);
  for (auto it = std::sregex_iterator(text.begin(), text.end(), pair_re); it != std::sregex_iterator(); ++it) {
    const long task = std::stol((*it)[1].str());
    const long agent = std::stol((*it)[2].str());
    if (task >= 0 && task < n) c.mapping[static_cast<std::size_t>(task)] = agent;
  }
  std::smatch cost;
  std::string::const_iterator from = text.begin();
  while (std::regex_search(from, text.end(), cost, cost_re)) {
    c.claimed_cost = std::stoll(cost[1].str());  // last mention wins
    from = cost[0].second;
  }
  return c;
}

}  // namespace taskalloc::assign
