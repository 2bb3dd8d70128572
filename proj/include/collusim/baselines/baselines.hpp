#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "collusim/collusion/episode.hpp"
#include "collusim/random.hpp"

namespace collusim::baselines {

enum class BaselineKind { AllK, GreedyCap, Random };

struct BaselinePolicy {
  BaselineKind kind = BaselineKind::AllK;
  int value = 1;  // k for AllK, A_max otherwise
};

/// Parses "all:<k>", "greedy:<cap>" or "random:<cap>". Throws ConfigError.
BaselinePolicy parse_baseline(const std::string& text);

/// Checks the policy against the scenario cap: 0 <= k <= a_max (k = 1 is always allowed).
void validate_baseline(const BaselinePolicy& policy, int a_max);

std::string baseline_name(const BaselinePolicy& policy);

/// Stateless for AllK and GreedyCap; Random keeps one seeded stream per agent and draws
/// independently at every decision.
class BaselineAttack final : public collusion::AttackPolicy {
 public:
  explicit BaselineAttack(BaselinePolicy policy, std::uint64_t seed = 0);

  std::string name() const override { return baseline_name(policy_); }
  void begin_episode(std::uint64_t seed) override;
  std::vector<int> decide(const collusion::DecisionContext& ctx) override;

  /// The action of one agent at one decision.
  int act(int agent);

 private:
  BaselinePolicy policy_;
  std::uint64_t seed_;
  std::vector<Rng> streams_;
};

}  // namespace collusim::baselines
