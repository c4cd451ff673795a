// Python extension: assignment solvers and scoring, allocation search, the
// kitchen simulator, scripted episodes, replay and cost arithmetic.

#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "taskalloc/accounting/accounting.hpp"
#include "taskalloc/assign/assignment.hpp"
#include "taskalloc/common/error.hpp"
#include "taskalloc/coordination/action_parse.hpp"
#include "taskalloc/coordination/episode.hpp"
#include "taskalloc/coordination/scripted.hpp"
#include "taskalloc/kitchen/trace.hpp"
#include "taskalloc/model/allocation.hpp"

namespace py = pybind11;
using namespace taskalloc;
using nlohmann::json;

namespace {

py::object to_py(const json& j) { return py::module_::import("json").attr("loads")(j.dump()); }

json from_py(const py::handle& o) { return json::parse(py::module_::import("json").attr("dumps")(o).cast<std::string>()); }

py::object fraction(const Rational& r) {
  return py::module_::import("fractions").attr("Fraction")(r.numerator(), r.denominator());
}

/// int, str ("3/4", "0.125") or fractions.Fraction.
Rational rational_arg(const py::handle& o) { return parse_rational(py::str(o).cast<std::string>()); }

assign::CostMatrix matrix_arg(const std::vector<std::vector<assign::Cost>>& rows) { return assign::CostMatrix(rows); }

py::dict assignment_dict(const assign::Assignment& a) {
  py::dict d;
  d["mapping"] = a.mapping;
  d["total_cost"] = a.total_cost;
  return d;
}

assign::Candidate candidate_arg(const py::handle& o) {
  if (py::isinstance<py::dict>(o)) return assign::Candidate::from_json(from_py(o));
  assign::Candidate c;
  for (const auto& v : o) {
    if (v.is_none()) {
      c.mapping.emplace_back(std::nullopt);
    } else {
      c.mapping.emplace_back(v.cast<std::int64_t>());
    }
  }
  return c;
}

assign::OptimalityMode optimality_arg(const std::string& s) {
  if (s == "cost") return assign::OptimalityMode::CostEquality;
  if (s == "strict") return assign::OptimalityMode::StrictMapping;
  throw py::value_error("optimality must be 'cost' or 'strict'");
}

model::UtilityTable table_arg(const py::handle& o) { return model::UtilityTable::from_json(from_py(o)); }

model::AllocationMatrix allocation_arg(const std::vector<std::string>& keys) {
  model::AllocationMatrix a;
  for (const auto& k : keys) a.assign(model::triple_from_key(k));
  return a;
}

std::vector<std::string> allocation_keys(const model::AllocationMatrix& a) {
  std::vector<std::string> out;
  for (const auto& t : a.entries()) out.push_back(model::to_key(t));
  return out;
}

py::object valuation(const model::Valuation& v) {
  if (v.is_negative_infinity()) return py::float_(-std::numeric_limits<double>::infinity());
  return fraction(v.value());
}

py::dict allocate(const py::handle& table_obj) {
  const auto table = table_arg(table_obj);
  std::vector<model::AgentSpec> agents(static_cast<std::size_t>(table.agent_count()));
  std::vector<model::TaskSpec> tasks(static_cast<std::size_t>(table.task_count()));
  for (int i = 0; i < table.agent_count(); ++i) agents[static_cast<std::size_t>(i)].id = "agent" + std::to_string(i);
  for (int p = 0; p < table.task_count(); ++p) {
    tasks[static_cast<std::size_t>(p)].id = "task" + std::to_string(p);
    tasks[static_cast<std::size_t>(p)].subtask_count = table.subtask_count(p);
  }
  const auto r = model::brute_force_allocate(agents, tasks, table);
  py::dict d;
  d["allocation"] = allocation_keys(r.allocation);
  d["utility"] = valuation(r.utility);
  d["only_empty_feasible"] = r.only_empty_feasible;
  return d;
}

py::dict feasibility(const py::handle& table_obj, const std::vector<std::string>& keys) {
  const auto v = model::feasible(allocation_arg(keys), table_arg(table_obj));
  py::list violations;
  for (const auto& x : v.violations) {
    violations.append(py::make_tuple(x.constraint == model::Constraint::TimeBudget ? "time_budget" : "single_agent",
                                     x.detail));
  }
  py::dict d;
  d["feasible"] = v.feasible();
  d["violations"] = violations;
  d["time_used"] = fraction(v.time_used);
  return d;
}

py::object episode(const std::string& level_id, int agents, std::uint64_t seed, const std::string& mode,
                   int step_budget, const std::string& capability_mode) {
  const auto m = coordination::mode_from_string(mode);
  auto env = kitchen::load_level(kitchen::builtin_level(level_id), agents, seed);
  coordination::EpisodeOptions opts;
  opts.seed = seed;
  opts.step_budget = step_budget;
  opts.capability_mode = coordination::capability_mode_from_string(capability_mode);
  auto bindings = coordination::scripted_bindings(m, env);
  coordination::EpisodeReport r;
  {
    py::gil_scoped_release release;
    r = coordination::run_episode(m, std::move(env), bindings, opts);
  }
  auto j = r.to_json();
  std::ostringstream trace;
  kitchen::write_trace(trace, r.trace);
  j["trace"] = trace.str();
  const auto eff = r.efficiency().efficiency;
  j["efficiency_value"] = eff ? json(to_double(*eff)) : json(nullptr);
  return to_py(j);
}

py::dict replay_text(const std::string& text) {
  std::istringstream in(text);
  const auto rep = kitchen::replay(kitchen::read_trace(in));
  py::dict d;
  d["ok"] = rep.ok;
  d["steps_checked"] = rep.steps_checked;
  d["first_mismatch_step"] = rep.first_mismatch_step ? py::object(py::int_(*rep.first_mismatch_step)) : py::none();
  d["detail"] = rep.detail;
  return d;
}

/// Step-by-step access to one kitchen with text actions.
class Kitchen {
 public:
  Kitchen(const std::string& level_id, int agents, std::uint64_t seed)
      : state_(kitchen::load_level(kitchen::builtin_level(level_id), agents, seed)),
        items_(coordination::level_items(*state_.level)) {}

  std::string observation() const { return kitchen::render_observation(state_); }
  std::string observation_hash() const { return kitchen::observation_hash(state_); }
  std::vector<std::string> agents() const { return state_.agent_ids(); }
  int step_index() const { return state_.step; }
  bool finished() const { return state_.finished(); }

  py::dict counters() const {
    py::dict d;
    d["introduced"] = state_.counters.introduced;
    d["completed"] = state_.counters.completed;
    d["expired"] = state_.counters.expired;
    d["live"] = state_.orders.size();
    return d;
  }

  std::vector<std::string> legal_actions(const std::string& agent) const {
    if (!state_.has_agent(agent)) throw py::key_error(agent);
    std::vector<std::string> out;
    for (const auto& a : kitchen::legal_actions(state_, agent)) out.push_back(kitchen::to_text(a));
    return out;
  }

  /// Agents missing from `actions` take noop. Unparseable text raises ValueError.
  py::dict step(const std::map<std::string, std::string>& actions) {
    kitchen::JointAction joint;
    for (const auto& a : state_.agent_ids()) joint[a] = kitchen::Noop{a};
    for (const auto& [agent, text] : actions) {
      if (!state_.has_agent(agent)) throw py::key_error(agent);
      const auto d = coordination::parse_action(text, state_.agent_ids(), state_.location_ids(), items_);
      if (!d.parse_ok || kitchen::agent_of(*d.parsed) != agent) {
        throw py::value_error("cannot read an action for " + agent + " from '" + text + "'");
      }
      joint[agent] = *d.parsed;
    }
    auto out = kitchen::step(state_, joint);
    state_ = std::move(out.next_state);
    py::dict results;
    for (const auto& [agent, r] : out.per_agent_result) results[py::str(agent)] = kitchen::to_string(r);
    json events = json::array();
    for (const auto& e : out.events) events.push_back(kitchen::to_json(e));
    py::dict d;
    d["results"] = results;
    d["events"] = to_py(events);
    return d;
  }

 private:
  kitchen::KitchenState state_;
  std::vector<kitchen::ItemId> items_;
};

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Task allocation core";

  py::register_exception<StructuralError>(m, "StructuralError", PyExc_ValueError);
  py::register_exception<InstanceTooLarge>(m, "InstanceTooLarge", PyExc_ValueError);

  // Assignment
  m.def("generate_instance", [](int n, std::uint64_t seed, assign::Cost lo, assign::Cost hi) {
    const auto mat = assign::generate_instance(n, seed, lo, hi);
    std::vector<std::vector<assign::Cost>> rows;
    for (int i = 0; i < mat.n(); ++i) {
      rows.emplace_back();
      for (int j = 0; j < mat.n(); ++j) rows.back().push_back(mat.at(i, j));
    }
    return rows;
  }, py::arg("n"), py::arg("seed"), py::arg("lo") = 0, py::arg("hi") = 99);
  m.def("hungarian_solve", [](const std::vector<std::vector<assign::Cost>>& a) {
    return assignment_dict(assign::hungarian_solve(matrix_arg(a)));
  }, py::arg("matrix"));
  m.def("brute_force_solve", [](const std::vector<std::vector<assign::Cost>>& a) {
    return assignment_dict(assign::brute_force_solve(matrix_arg(a)));
  }, py::arg("matrix"));
  m.def("greedy_row_solve", [](const std::vector<std::vector<assign::Cost>>& a) {
    return assignment_dict(assign::greedy_row_solve(matrix_arg(a)));
  }, py::arg("matrix"));
  m.def("validate", [](const std::vector<std::vector<assign::Cost>>& a, const py::handle& mapping,
                       std::optional<assign::Cost> claimed_cost) {
    auto c = candidate_arg(mapping);
    if (claimed_cost) c.claimed_cost = claimed_cost;
    const auto r = assign::validate(matrix_arg(a), c);
    std::vector<std::string> violations;
    for (const auto& v : r.violations) violations.push_back(assign::describe(v));
    py::dict d;
    d["valid"] = r.is_valid();
    d["violations"] = violations;
    d["recomputed_cost"] = r.recomputed_cost;
    return d;
  }, py::arg("matrix"), py::arg("mapping"), py::arg("claimed_cost") = py::none());
  m.def("parse_candidate_text", [](const std::string& text, int n) {
    return to_py(assign::parse_candidate_text(text, n).to_json());
  }, py::arg("text"), py::arg("n"));
  m.def("score_batch", [](const std::vector<std::vector<std::vector<assign::Cost>>>& instances,
                          const py::list& candidates, const std::string& optimality) {
    std::vector<assign::CostMatrix> ms;
    for (const auto& a : instances) ms.push_back(matrix_arg(a));
    std::vector<assign::Candidate> cs;
    for (const auto& c : candidates) cs.push_back(candidate_arg(c));
    return to_py(assign::score_batch(ms, cs, optimality_arg(optimality)).to_json());
  }, py::arg("instances"), py::arg("candidates"), py::arg("optimality") = "cost");

  // Allocation model
  m.def("allocate", &allocate, py::arg("table"));
  m.def("utility", [](const py::handle& table, const std::vector<std::string>& keys) {
    return valuation(model::utility_of(allocation_arg(keys), table_arg(table)));
  }, py::arg("table"), py::arg("allocation"));
  m.def("feasible", &feasibility, py::arg("table"), py::arg("allocation"));

  // Kitchen and episodes
  m.def("builtin_levels", &kitchen::builtin_level_ids);
  m.def("level", [](const std::string& id) { return to_py(kitchen::builtin_level(id).to_json()); }, py::arg("id"));
  py::class_<Kitchen>(m, "Kitchen")
      .def(py::init<const std::string&, int, std::uint64_t>(), py::arg("level"), py::arg("agents"), py::arg("seed"))
      .def("observation", &Kitchen::observation)
      .def("observation_hash", &Kitchen::observation_hash)
      .def("legal_actions", &Kitchen::legal_actions, py::arg("agent"))
      .def("step", &Kitchen::step, py::arg("actions"))
      .def_property_readonly("agents", &Kitchen::agents)
      .def_property_readonly("step_index", &Kitchen::step_index)
      .def_property_readonly("finished", &Kitchen::finished)
      .def_property_readonly("counters", &Kitchen::counters);
  m.def("run_episode", &episode, py::arg("level"), py::arg("agents"), py::arg("seed"), py::arg("mode") = "individual",
        py::arg("step_budget") = 0, py::arg("capability_mode") = "on-the-fly");
  m.def("replay", &replay_text, py::arg("trace"));

  // Accounting
  m.def("call_cost", [](const std::string& model_id, std::int64_t tokens_in, std::int64_t tokens_out) {
    const auto price = accounting::PriceTable::defaults().lookup(model_id);
    if (!price) throw py::key_error(model_id);
    return fraction(accounting::call_cost(*price, tokens_in, tokens_out));
  }, py::arg("model_id"), py::arg("tokens_in"), py::arg("tokens_out"));
  m.def("efficiency", [](int completed, const py::handle& usd) -> py::object {
    const auto e = accounting::efficiency(completed, rational_arg(usd)).efficiency;
    return e ? fraction(*e) : py::none();
  }, py::arg("completed"), py::arg("usd"));
}
