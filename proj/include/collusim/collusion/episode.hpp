#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "collusim/collusion/metrics.hpp"
#include "collusim/collusion/observation.hpp"
#include "collusim/sim/environment.hpp"
#include "collusim/sim/scenario.hpp"
#include "collusim/sim/trace.hpp"

namespace collusim::collusion {

/// What the attack sees at one decision instant: the running colluders (C_R) with their
/// raw observations.
struct DecisionContext {
  const sim::RoadNetwork* net = nullptr;
  const sim::SimState* state = nullptr;
  int decision = 0;
  std::vector<int> agents;    // agent indices
  std::vector<int> vehicles;  // matching vehicle ids
  std::vector<sim::IntersectionId> upcoming;
  std::vector<std::vector<double>> observations;
};

/// A vehicle-side attack: decides the count each running colluder reports.
class AttackPolicy {
 public:
  virtual ~AttackPolicy() = default;
  virtual std::string name() const = 0;
  virtual void begin_episode(std::uint64_t /*seed*/) {}
  /// One reported count per agent in ctx.agents.
  virtual std::vector<int> decide(const DecisionContext& ctx) = 0;
  /// Team reward of the window that followed the last decision.
  virtual void feedback(std::span<const int> /*agents*/, double /*reward*/, bool /*done*/) {}
  virtual void end_episode() {}
};

/// -(1/|C_R|) * sum of waiting increments over the agents in C_R; 0 for an empty C_R.
double compute_reward(std::span<const int> wait_before, std::span<const int> wait_after);

struct EpisodeResult {
  sim::SimState final_state;
  sim::EpisodeTrace trace;
  EpisodeMetrics metrics;
};

/// One episode against `atcs`. At every tau boundary the running colluders decide, present
/// ones report, the controller picks phases and the simulator advances tau steps.
/// `colluders` maps agent index to vehicle id.
EpisodeResult run_attack_episode(const sim::RoadNetwork& net, const sim::ScenarioConfig& scenario,
                                 const std::vector<sim::VehicleSpec>& trips, std::span<const int> colluders,
                                 sim::SignalController& atcs, AttackPolicy& policy, std::uint64_t seed,
                                 const sim::StepObserver& observer = {});

}  // namespace collusim::collusion
