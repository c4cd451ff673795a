#pragma once

// Price table, per-call cost ledger, efficiency metric, action histogram and
// per-worker capability profile. Dollar amounts are exact rationals.

#include <cstdint>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "taskalloc/common/rational.hpp"
#include "taskalloc/kitchen/kitchen.hpp"

namespace taskalloc::accounting {

using Usd = Rational;

/// Exact decimal text when the denominator has only factors 2 and 5, the
/// rational form "n/d" otherwise. parse_rational reads both back.
std::string to_decimal_string(const Rational& r);

/// Rounds half away from zero to `digits` decimals, e.g. 7/10 -> "0.70".
std::string format_fixed(const Rational& r, int digits);

struct ModelPrice {
  Rational input_per_mtok;   // USD per million input tokens
  Rational output_per_mtok;  // USD per million output tokens
  friend bool operator==(const ModelPrice&, const ModelPrice&) = default;
};

class PriceTable {
 public:
  /// claude-3.7, gpt-4o, gpt-4o-mini, Llama-3.1-70B, Qwen2.5-32B plus common
  /// alias spellings (e.g. "gpt-4o-v2", "claude-3.7-sonnet", "-Instruct").
  static PriceTable defaults();

  /// {"models": {id: {"input": "0.15", "output": "0.60"}}, "aliases": {alias: id}}.
  /// Prices must be positive.
  static PriceTable from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;

  void set(const std::string& model_id, ModelPrice price);
  void alias(const std::string& name, const std::string& model_id);
  std::string canonical(const std::string& model_id) const;
  std::optional<ModelPrice> lookup(const std::string& model_id) const;
  bool priced(const std::string& model_id) const { return lookup(model_id).has_value(); }

 private:
  std::map<std::string, ModelPrice> prices_;
  std::map<std::string, std::string> aliases_;
};

/// tokens_in * input / 10^6 + tokens_out * output / 10^6. Throws
/// StructuralError on negative counts.
Usd call_cost(const ModelPrice& price, std::int64_t tokens_in, std::int64_t tokens_out);

enum class RoleKind { Planner, Orchestrator, Worker };

struct Role {
  RoleKind kind = RoleKind::Worker;
  kitchen::AgentId agent;  // Worker only

  static Role planner() { return {RoleKind::Planner, {}}; }
  static Role orchestrator() { return {RoleKind::Orchestrator, {}}; }
  static Role worker(kitchen::AgentId a) { return {RoleKind::Worker, std::move(a)}; }
  friend auto operator<=>(const Role&, const Role&) = default;
};
std::string to_string(const Role& r);  // "planner", "orchestrator", "worker(agent0)"
Role role_from_string(const std::string& s);

struct LedgerRow {
  int step = 0;
  Role role;
  std::string model_id;
  std::int64_t tokens_in = 0;
  std::int64_t tokens_out = 0;
  Usd usd{0};
  bool unpriced = false;
  friend bool operator==(const LedgerRow&, const LedgerRow&) = default;
};

/// Append-only and safe for concurrent record_call.
class CostLedger {
 public:
  CostLedger() : CostLedger(PriceTable::defaults()) {}
  explicit CostLedger(PriceTable prices);
  CostLedger(const CostLedger& other);
  CostLedger& operator=(const CostLedger& other);

  /// Unpriced models cost $0 and add a warning. Negative counts throw
  /// StructuralError.
  LedgerRow record_call(const std::string& model_id, Role role, std::int64_t tokens_in, std::int64_t tokens_out,
                        int step);

  /// Rows ordered by (step, role), stable for equal keys.
  std::vector<LedgerRow> rows() const;
  Usd total() const;
  std::int64_t total_tokens_in() const;
  std::int64_t total_tokens_out() const;
  std::vector<std::string> warnings() const;
  const PriceTable& prices() const { return prices_; }

  /// Header: step,role,model_id,tokens_in,tokens_out,usd,unpriced
  std::string to_csv() const;
  static CostLedger from_csv(const std::string& csv, PriceTable prices = PriceTable::defaults());
  nlohmann::json summary() const;

 private:
  PriceTable prices_;
  mutable std::mutex mu_;
  std::vector<LedgerRow> rows_;
  std::vector<std::string> warnings_;
};

class ActionHistogram {
 public:
  void add(kitchen::ActionKind k, long n = 1);
  long count(kitchen::ActionKind k) const;
  long total() const { return total_; }
  /// Fractions over goto/get/put/activate/noop; all zero when empty.
  std::map<std::string, double> fractions() const;
  nlohmann::json to_json() const;
  std::string to_csv() const;  // kind,count,fraction

 private:
  std::map<kitchen::ActionKind, long> counts_;
  long total_ = 0;
};

struct EfficiencyReport {
  int completed_orders = 0;
  Usd total_usd{0};
  std::optional<Rational> efficiency;  // absent when total_usd is zero
  std::map<std::string, double> action_histogram;

  nlohmann::json to_json() const;
};

EfficiencyReport efficiency(int completed, const CostLedger& ledger, const ActionHistogram& histogram = {});
EfficiencyReport efficiency(int completed, const Usd& total_usd, const ActionHistogram& histogram = {});

struct CapabilityCounts {
  long attempted = 0;
  long succeeded = 0;
  std::optional<Rational> success_rate() const {
    if (attempted == 0) return std::nullopt;
    return Rational(succeeded, attempted);
  }
  friend bool operator==(const CapabilityCounts&, const CapabilityCounts&) = default;
};

/// Per (agent, model) action outcomes. Safe for concurrent updates.
class CapabilityProfile {
 public:
  CapabilityProfile() = default;
  CapabilityProfile(const CapabilityProfile& other);
  CapabilityProfile& operator=(const CapabilityProfile& other);

  void update(const kitchen::AgentId& agent, const std::string& model_id, bool succeeded);
  void update(const kitchen::AgentId& agent, const std::string& model_id, const kitchen::ActionResult& r) {
    update(agent, model_id, r.succeeded);
  }
  CapabilityCounts counts(const kitchen::AgentId& agent, const std::string& model_id) const;
  std::map<std::pair<kitchen::AgentId, std::string>, CapabilityCounts> entries() const;
  nlohmann::json to_json() const;

 private:
  mutable std::mutex mu_;
  std::map<std::pair<kitchen::AgentId, std::string>, CapabilityCounts> entries_;
};

struct RosterEntry {
  kitchen::AgentId agent;
  std::string model_id;
};

inline constexpr const char* kCapabilityHeader = "Worker capabilities (observed action success rates):";

/// Header line plus one "- agentK (model): success rate 0.70" line per roster
/// member, in roster order; "unknown" when the member has no attempts yet.
std::string capability_hint(const CapabilityProfile& profile, const std::vector<RosterEntry>& roster);

}  // namespace taskalloc::accounting
