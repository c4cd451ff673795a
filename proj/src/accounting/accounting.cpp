#include "taskalloc/accounting/accounting.hpp"

#include <algorithm>
#include <sstream>

#include "taskalloc/common/error.hpp"

namespace taskalloc::accounting {
namespace {

using i128 = __int128;

std::string i128_to_string(i128 v) {
  if (v == 0) return "0";
  const bool neg = v < 0;
  if (neg) v = -v;
  std::string s;
  while (v > 0) {
    s.push_back(static_cast<char>('0' + static_cast<int>(v % 10)));
    v /= 10;
  }
  if (neg) s.push_back('-');
  std::reverse(s.begin(), s.end());
  return s;
}

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

ModelPrice price_from_json(const std::string& id, const nlohmann::json& j) {
  ModelPrice p{rational_from_json(j.at("input")), rational_from_json(j.at("output"))};
  if (p.input_per_mtok <= Rational(0) || p.output_per_mtok <= Rational(0)) {
    throw StructuralError("prices for '" + id + "' must be positive");
  }
  return p;
}

}  // namespace

std::string to_decimal_string(const Rational& r) {
  std::int64_t d = r.denominator();
  int twos = 0, fives = 0;
  while (d % 2 == 0) d /= 2, ++twos;
  while (d % 5 == 0) d /= 5, ++fives;
  const int digits = std::max(twos, fives);
  if (d != 1 || digits > 18) return taskalloc::to_string(r);
  i128 scale = 1;
  for (int k = 0; k < digits; ++k) scale *= 10;
  const i128 scaled = static_cast<i128>(r.numerator()) * (scale / r.denominator());
  if (digits == 0) return i128_to_string(scaled);
  const i128 mag = scaled < 0 ? -scaled : scaled;
  std::string frac = i128_to_string(mag % scale);
  frac.insert(0, static_cast<std::size_t>(digits) - frac.size(), '0');
  return (scaled < 0 ? "-" : "") + i128_to_string(mag / scale) + "." + frac;
}

std::string format_fixed(const Rational& r, int digits) {
  i128 scale = 1;
  for (int k = 0; k < digits; ++k) scale *= 10;
  const i128 n = static_cast<i128>(r.numerator());
  const i128 d = r.denominator();
  const i128 mag = ((n < 0 ? -n : n) * scale * 2 + d) / (2 * d);
  std::string frac = i128_to_string(mag % scale);
  if (digits > 0) frac.insert(0, static_cast<std::size_t>(digits) - frac.size(), '0');
  std::string out = (n < 0 && mag != 0 ? "-" : "") + i128_to_string(mag / scale);
  if (digits > 0) out += "." + frac;
  return out;
}

// PriceTable ----------------------------------------------------------------

PriceTable PriceTable::defaults() {
  PriceTable t;
  t.set("claude-3.7", {parse_rational("3.00"), parse_rational("15.00")});
  t.set("gpt-4o", {parse_rational("2.50"), parse_rational("10.00")});
  t.set("gpt-4o-mini", {parse_rational("0.15"), parse_rational("0.60")});
  t.set("Llama-3.1-70B", {parse_rational("0.80"), parse_rational("2.80")});
  t.set("Qwen2.5-32B", {parse_rational("0.40"), parse_rational("1.40")});
  t.alias("claude-3.7-sonnet", "claude-3.7");
  t.alias("claude-3-7-sonnet", "claude-3.7");
  t.alias("gpt-4o-v2", "gpt-4o");
  t.alias("Llama-3.1-70B-Instruct", "Llama-3.1-70B");
  t.alias("Qwen2.5-32B-Instruct", "Qwen2.5-32B");
  return t;
}

PriceTable PriceTable::from_json(const nlohmann::json& j) {
  try {
    PriceTable t;
    const auto& models = j.contains("models") ? j.at("models") : j;
    for (auto it = models.begin(); it != models.end(); ++it) {
      if (it.key() == "aliases") continue;
      t.set(it.key(), price_from_json(it.key(), it.value()));
    }
    if (j.contains("aliases")) {
      for (auto it = j.at("aliases").begin(); it != j.at("aliases").end(); ++it) {
        t.alias(it.key(), it.value().get<std::string>());
      }
    }
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw StructuralError(std::string("malformed price table: ") + e.what());
  }
}

nlohmann::json PriceTable::to_json() const {
  nlohmann::json models = nlohmann::json::object();
  for (const auto& [id, p] : prices_) {
    models[id] = {{"input", to_decimal_string(p.input_per_mtok)}, {"output", to_decimal_string(p.output_per_mtok)}};
  }
  return {{"models", models}, {"aliases", aliases_}};
}

void PriceTable::set(const std::string& model_id, ModelPrice price) {
  if (price.input_per_mtok <= Rational(0) || price.output_per_mtok <= Rational(0)) {
    throw StructuralError("prices for '" + model_id + "' must be positive");
  }
  prices_[model_id] = price;
}

void PriceTable::alias(const std::string& name, const std::string& model_id) {
  if (!prices_.count(model_id)) throw StructuralError("alias '" + name + "' targets unpriced '" + model_id + "'");
  aliases_[name] = model_id;
}

std::string PriceTable::canonical(const std::string& model_id) const {
  const auto it = aliases_.find(model_id);
  return it == aliases_.end() ? model_id : it->second;
}

std::optional<ModelPrice> PriceTable::lookup(const std::string& model_id) const {
  const auto it = prices_.find(canonical(model_id));
  if (it == prices_.end()) return std::nullopt;
  return it->second;
}

Usd call_cost(const ModelPrice& price, std::int64_t tokens_in, std::int64_t tokens_out) {
  if (tokens_in < 0 || tokens_out < 0) throw StructuralError("token counts must be non-negative");
  const Rational million(1'000'000);
  return Rational(tokens_in) / million * price.input_per_mtok + Rational(tokens_out) / million * price.output_per_mtok;
}

// Roles ----------------------------------------------------------------------

std::string to_string(const Role& r) {
  switch (r.kind) {
    case RoleKind::Planner: return "planner";
    case RoleKind::Orchestrator: return "orchestrator";
    case RoleKind::Worker: return "worker(" + r.agent + ")";
  }
  return "worker";
}

Role role_from_string(const std::string& s) {
  if (s == "planner") return Role::planner();
  if (s == "orchestrator") return Role::orchestrator();
  if (s.rfind("worker(", 0) == 0 && s.size() > 8 && s.back() == ')') return Role::worker(s.substr(7, s.size() - 8));
  throw StructuralError("unknown role '" + s + "'");
}

// CostLedger -----------------------------------------------------------------

CostLedger::CostLedger(PriceTable prices) : prices_(std::move(prices)) {}

CostLedger::CostLedger(const CostLedger& other) {
  std::lock_guard lock(other.mu_);
  prices_ = other.prices_;
  rows_ = other.rows_;
  warnings_ = other.warnings_;
}

CostLedger& CostLedger::operator=(const CostLedger& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  prices_ = other.prices_;
  rows_ = other.rows_;
  warnings_ = other.warnings_;
  return *this;
}

LedgerRow CostLedger::record_call(const std::string& model_id, Role role, std::int64_t tokens_in,
                                  std::int64_t tokens_out, int step) {
  if (tokens_in < 0 || tokens_out < 0) throw StructuralError("token counts must be non-negative");
  if (model_id.find(',') != std::string::npos) throw StructuralError("model id must not contain ','");
  LedgerRow row{step, std::move(role), model_id, tokens_in, tokens_out, Usd(0), false};
  if (const auto price = prices_.lookup(model_id)) {
    row.usd = call_cost(*price, tokens_in, tokens_out);
  } else {
    row.unpriced = true;
  }
  std::lock_guard lock(mu_);
  if (row.unpriced) {
    const auto w = "model '" + model_id + "' has no price; its calls count as $0";
    if (std::find(warnings_.begin(), warnings_.end(), w) == warnings_.end()) warnings_.push_back(w);
  }
  rows_.push_back(row);
  return row;
}

std::vector<LedgerRow> CostLedger::rows() const {
  std::vector<LedgerRow> out;
  {
    std::lock_guard lock(mu_);
    out = rows_;
  }
  std::stable_sort(out.begin(), out.end(), [](const LedgerRow& a, const LedgerRow& b) {
    return std::tie(a.step, a.role) < std::tie(b.step, b.role);
  });
  return out;
}

Usd CostLedger::total() const {
  std::lock_guard lock(mu_);
  Usd sum(0);
  for (const auto& r : rows_) sum += r.usd;
  return sum;
}

std::int64_t CostLedger::total_tokens_in() const {
  std::lock_guard lock(mu_);
  std::int64_t n = 0;
  for (const auto& r : rows_) n += r.tokens_in;
  return n;
}

std::int64_t CostLedger::total_tokens_out() const {
  std::lock_guard lock(mu_);
  std::int64_t n = 0;
  for (const auto& r : rows_) n += r.tokens_out;
  return n;
}

std::vector<std::string> CostLedger::warnings() const {
  std::lock_guard lock(mu_);
  return warnings_;
}

std::string CostLedger::to_csv() const {
  std::ostringstream o;
  o << "step,role,model_id,tokens_in,tokens_out,usd,unpriced\n";
  for (const auto& r : rows()) {
    o << r.step << ',' << to_string(r.role) << ',' << r.model_id << ',' << r.tokens_in << ',' << r.tokens_out << ','
      << to_decimal_string(r.usd) << ',' << (r.unpriced ? 1 : 0) << '\n';
  }
  return o.str();
}

CostLedger CostLedger::from_csv(const std::string& csv, PriceTable prices) {
  CostLedger ledger(std::move(prices));
  std::istringstream in(csv);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 7) throw StructuralError("ledger line " + std::to_string(lineno) + ": expected 7 fields");
    try {
      const auto row = ledger.record_call(f[2], role_from_string(f[1]), std::stoll(f[3]), std::stoll(f[4]),
                                          std::stoi(f[0]));
      if (row.usd != parse_rational(f[5])) {
        throw StructuralError("usd " + f[5] + " disagrees with the price table");
      }
    } catch (const std::exception& e) {
      throw StructuralError("ledger line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  return ledger;
}

nlohmann::json CostLedger::summary() const {
  std::map<std::string, Usd> by_model;
  for (const auto& r : rows()) {
    auto [it, inserted] = by_model.try_emplace(r.model_id, Usd(0));
    it->second += r.usd;
  }
  nlohmann::json models = nlohmann::json::object();
  for (const auto& [m, usd] : by_model) models[m] = to_decimal_string(usd);
  return {{"calls", rows().size()},
          {"tokens_in", total_tokens_in()},
          {"tokens_out", total_tokens_out()},
          {"total_usd", to_decimal_string(total())},
          {"by_model", models},
          {"warnings", warnings()}};
}

// ActionHistogram ------------------------------------------------------------

void ActionHistogram::add(kitchen::ActionKind k, long n) {
  counts_[k] += n;
  total_ += n;
}

long ActionHistogram::count(kitchen::ActionKind k) const {
  const auto it = counts_.find(k);
  return it == counts_.end() ? 0 : it->second;
}

std::map<std::string, double> ActionHistogram::fractions() const {
  std::map<std::string, double> out;
  for (auto k : kitchen::kAllActionKinds) {
    out[kitchen::to_string(k)] = total_ == 0 ? 0.0 : static_cast<double>(count(k)) / static_cast<double>(total_);
  }
  return out;
}

nlohmann::json ActionHistogram::to_json() const {
  nlohmann::json counts = nlohmann::json::object();
  for (auto k : kitchen::kAllActionKinds) counts[kitchen::to_string(k)] = count(k);
  return {{"total", total_}, {"counts", counts}, {"fractions", fractions()}};
}

std::string ActionHistogram::to_csv() const {
  std::ostringstream o;
  o << "kind,count,fraction\n";
  const auto f = fractions();
  for (auto k : kitchen::kAllActionKinds) {
    const auto name = kitchen::to_string(k);
    o << name << ',' << count(k) << ',';
    if (total_ == 0) {
      o << "0";
    } else {
      o << format_fixed(Rational(count(k), total_), 6);
    }
    o << '\n';
  }
  return o.str();
}

// Efficiency -----------------------------------------------------------------

nlohmann::json EfficiencyReport::to_json() const {
  nlohmann::json j{{"completed_orders", completed_orders},
                   {"total_usd", to_decimal_string(total_usd)},
                   {"action_histogram", action_histogram}};
  if (efficiency) {
    j["efficiency"] = to_double(*efficiency);
    j["efficiency_exact"] = taskalloc::to_string(*efficiency);
  } else {
    j["efficiency"] = nullptr;
  }
  return j;
}

EfficiencyReport efficiency(int completed, const Usd& total_usd, const ActionHistogram& histogram) {
  if (completed < 0) throw StructuralError("completed orders must be non-negative");
  if (total_usd < Rational(0)) throw StructuralError("total cost must be non-negative");
  EfficiencyReport r;
  r.completed_orders = completed;
  r.total_usd = total_usd;
  if (total_usd != Rational(0)) r.efficiency = Rational(completed) / total_usd;
  r.action_histogram = histogram.fractions();
  return r;
}

EfficiencyReport efficiency(int completed, const CostLedger& ledger, const ActionHistogram& histogram) {
  return efficiency(completed, ledger.total(), histogram);
}

// CapabilityProfile ----------------------------------------------------------

CapabilityProfile::CapabilityProfile(const CapabilityProfile& other) {
  std::lock_guard lock(other.mu_);
  entries_ = other.entries_;
}

CapabilityProfile& CapabilityProfile::operator=(const CapabilityProfile& other) {
  if (this == &other) return *this;
  std::scoped_lock lock(mu_, other.mu_);
  entries_ = other.entries_;
  return *this;
}

void CapabilityProfile::update(const kitchen::AgentId& agent, const std::string& model_id, bool succeeded) {
  std::lock_guard lock(mu_);
  auto& c = entries_[{agent, model_id}];
  ++c.attempted;
  if (succeeded) ++c.succeeded;
}

CapabilityCounts CapabilityProfile::counts(const kitchen::AgentId& agent, const std::string& model_id) const {
  std::lock_guard lock(mu_);
  const auto it = entries_.find({agent, model_id});
  return it == entries_.end() ? CapabilityCounts{} : it->second;
}

std::map<std::pair<kitchen::AgentId, std::string>, CapabilityCounts> CapabilityProfile::entries() const {
  std::lock_guard lock(mu_);
  return entries_;
}

nlohmann::json CapabilityProfile::to_json() const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& [key, c] : entries()) {
    nlohmann::json e{{"agent", key.first}, {"model_id", key.second}, {"attempted", c.attempted},
                     {"succeeded", c.succeeded}};
    if (const auto rate = c.success_rate()) {
      e["success_rate"] = to_double(*rate);
    } else {
      e["success_rate"] = nullptr;
    }
    arr.push_back(std::move(e));
  }
  return arr;
}

std::string capability_hint(const CapabilityProfile& profile, const std::vector<RosterEntry>& roster) {
  std::ostringstream o;
  o << kCapabilityHeader << '\n';
  for (const auto& m : roster) {
    const auto rate = profile.counts(m.agent, m.model_id).success_rate();
    o << "- " << m.agent << " (" << m.model_id << "): success rate " << (rate ? format_fixed(*rate, 2) : "unknown")
      << '\n';
  }
  return o.str();
}

}  // namespace taskalloc::accounting
