#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "collusim/atcs/signal.hpp"
#include "collusim/nn/ppo.hpp"
#include "collusim/sim/scenario.hpp"

namespace collusim::atcs {

struct AtcsTrainConfig {
  SignalShape shape;
  double reward_scale = 0.02;
  int max_episodes = 300;
  int min_episodes = 150;
  int episodes_per_update = 2;
  int moving_window = 10;
  int eval_every = 10;
  int eval_episodes = 3;
  double demand_jitter = 0.3;  // training demand scaled by U[1 - j, 1 + j]
  nn::PpoConfig ppo;

  AtcsTrainConfig();
  void validate() const;  // throws ConfigError
};

struct AtcsCurvePoint {
  int episode = 0;
  double reward = 0.0;        // summed over intersections and decisions
  double fixed_reward = 0.0;  // fixed-time controller on the same demand
};

struct AtcsTrainResult {
  SignalPolicy policy;
  std::vector<AtcsCurvePoint> curve;
  int episodes = 0;
  int best_episode = 0;      // snapshot kept
  double eval_wait = 0.0;    // mean vehicle wait of the kept snapshot on held-out demand
  double fixed_eval_wait = 0.0;
};

/// Per-intersection reward for one decision window: the negative waiting increments on its
/// own approach lanes plus alpha times those of each 1-hop neighbour.
std::vector<double> atcs_rewards(const sim::RoadNetwork& net, const std::vector<std::int64_t>& lane_wait_before,
                                 const std::vector<std::int64_t>& lane_wait_after, double alpha);

/// Mean vehicle wait of `controller` over honest episodes with the given demand seeds.
double mean_wait_over(const sim::RoadNetwork& net, const sim::ScenarioConfig& scenario,
                      sim::SignalController& controller, const std::vector<std::uint64_t>& demand_seeds);

using AtcsProgress = std::function<void(const AtcsCurvePoint&)>;

/// Trains on honest traffic with randomized demand until the moving-average reward beats
/// the fixed-time controller (after min_episodes) or max_episodes is reached. Returns the
/// snapshot with the lowest held-out mean wait, frozen. Throws TrainingDiverged.
AtcsTrainResult train_atcs(const sim::RoadNetwork& net, const sim::ScenarioConfig& scenario,
                           const AtcsTrainConfig& config, std::uint64_t seed, const AtcsProgress& progress = {});

}  // namespace collusim::atcs
