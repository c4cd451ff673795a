#pragma once

// Model-backed policies. Each call goes through a GatewayClient; gateway
// errors and unreadable replies come back as failed decisions, never as
// exceptions, so the episode loop can fall back to Noop.

#include <memory>
#include <string>
#include <vector>

#include "taskalloc/coordination/policy.hpp"
#include "taskalloc/gateway/gateway.hpp"

namespace taskalloc::coordination {

/// Action grammar and the level's recipes, shared by every role's system prompt.
std::string action_reference(const kitchen::LevelConfig& level);

std::vector<gateway::ChatMessage> worker_messages(const PolicyQuery& q);
std::vector<gateway::ChatMessage> orchestrator_messages(const PolicyQuery& q);

/// Planner prompt. `capability_block` is inserted verbatim when present and
/// roster model ids are listed only then.
std::string planner_prompt(const KitchenState& state, const std::vector<KitchenEvent>& events, const Plan* prior,
                           const std::vector<accounting::RosterEntry>& roster,
                           const std::optional<std::string>& capability_block);

/// Reads "agentK: directive; directive" lines. Agents without a line are idle.
/// Returns nullopt when no line names a roster agent.
std::optional<Plan> parse_plan(const std::string& text, const std::vector<AgentId>& roster);

class LlmWorker : public WorkerPolicy {
 public:
  LlmWorker(std::shared_ptr<gateway::GatewayClient> client, gateway::ModelBinding binding,
            gateway::Decoding decoding = {});
  WorkerDecision decide(const PolicyQuery& q) override;
  std::string model_id() const override { return binding_.model_id; }

 private:
  std::shared_ptr<gateway::GatewayClient> client_;
  gateway::ModelBinding binding_;
  gateway::Decoding decoding_;
};

/// Expects one action per line; the last action naming each agent wins.
class LlmOrchestrator : public CentralPolicy {
 public:
  LlmOrchestrator(std::shared_ptr<gateway::GatewayClient> client, gateway::ModelBinding binding,
                  gateway::Decoding decoding = {});
  CentralDecision decide(const PolicyQuery& q) override;
  std::string model_id() const override { return binding_.model_id; }

 private:
  std::shared_ptr<gateway::GatewayClient> client_;
  gateway::ModelBinding binding_;
  gateway::Decoding decoding_;
};

/// Sends ReplanInput::prompt as the user message.
class LlmPlanner : public PlannerPolicy {
 public:
  LlmPlanner(std::shared_ptr<gateway::GatewayClient> client, gateway::ModelBinding binding,
             gateway::Decoding decoding = {});
  PlannerDecision replan(const ReplanInput& in) override;
  std::string model_id() const override { return binding_.model_id; }

 private:
  std::shared_ptr<gateway::GatewayClient> client_;
  gateway::ModelBinding binding_;
  gateway::Decoding decoding_;
};

}  // namespace taskalloc::coordination
