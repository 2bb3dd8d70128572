#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "collusim/collusion/episode.hpp"
#include "collusim/collusion/model.hpp"
#include "collusim/nn/ppo.hpp"
#include "collusim/nn/rollout.hpp"

namespace collusim::collusion {

struct AttackTrainConfig {
  int episodes = 300;
  int rollout_episodes = 2;  // episodes per PPO update
  int eval_every = 10;       // greedy evaluation cadence for the kept snapshot
  int ckpt_every = 0;        // 0 disables periodic checkpoints
  int final_window = 50;     // training episodes averaged into final_reward
  bool keep_best = true;
  double reward_scale = 0.2;  // applied to buffer rewards only
  NetSizes sizes;
  nn::PpoConfig ppo;

  AttackTrainConfig();
  void validate() const;  // throws ConfigError
};

/// CollusionVeh acting through a CollusionNet. With a buffer attached, every decision is
/// recorded for PPO (observation, neighbour context, action, log-prob, value, reward).
class LearnedPolicy final : public AttackPolicy {
 public:
  LearnedPolicy(const CollusionNet& net, Mode mode, nn::RolloutBuffer* record = nullptr, double reward_scale = 1.0);

  std::string name() const override { return "learned"; }
  void set_episode_index(int episode) { episode_ = episode; }
  void begin_episode(std::uint64_t seed) override;
  std::vector<int> decide(const DecisionContext& ctx) override;
  void feedback(std::span<const int> agents, double reward, bool done) override;
  void end_episode() override;

 private:
  const CollusionNet* net_;
  Mode mode_;
  nn::RolloutBuffer* record_;
  double reward_scale_;
  Rng rng_;
  int episode_ = 0;
  std::vector<std::size_t> pending_rows_;
  std::vector<long long> last_row_;  // per agent, -1 if none this episode
};

struct AttackCurvePoint {
  int episode = 0;
  double reward = 0.0;       // team reward summed over the episode
  double eval_reward = 0.0;  // greedy evaluation, when evaluated is true
  bool evaluated = false;
};

struct AttackTrainResult {
  CollusionNet net;
  std::vector<AttackCurvePoint> curve;
  int best_episode = 0;
  double best_eval_reward = 0.0;
  double final_reward = 0.0;  // mean training reward over the final window
};

using AttackProgress = std::function<void(const AttackCurvePoint&)>;
using AttackCheckpoint = std::function<void(int episode, const CollusionNet&)>;

/// Multi-agent PPO against a frozen controller on a fixed trip set. Gradients of all
/// agents meet in the shared blocks; private blocks only see their own rows.
/// Throws TrainingDiverged.
AttackTrainResult train_collusion(const sim::RoadNetwork& net, const sim::ScenarioConfig& scenario,
                                  const std::vector<sim::VehicleSpec>& trips, std::span<const int> colluders,
                                  sim::SignalController& atcs, Arm arm, const AttackTrainConfig& config,
                                  std::uint64_t seed, const AttackProgress& progress = {},
                                  const AttackCheckpoint& checkpoint = {});

}  // namespace collusim::collusion
