#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "collusim/sim/network.hpp"
#include "collusim/sim/reports.hpp"
#include "collusim/sim/state.hpp"

namespace collusim::sim {

using StepObserver = std::function<void(const SimState&)>;

/// One episode of the queue simulator with the currently held phases.
class TrafficEnv {
 public:
  TrafficEnv(const RoadNetwork& net, SimConfig config, std::vector<VehicleSpec> trips, std::uint64_t seed = 0);

  void reset();

  /// Holds `green` for `steps` steps, stopping early at the episode end.
  void advance(std::span<const int> green, int steps, const StepObserver& observer = {});

  bool done() const { return state_.clock >= config_.episode_len; }
  const SimState& state() const { return state_; }
  const RoadNetwork& network() const { return *net_; }
  const SimConfig& config() const { return config_; }
  std::span<const int> phases() const { return phases_; }

 private:
  const RoadNetwork* net_;
  SimConfig config_;
  std::vector<VehicleSpec> trips_;
  std::uint64_t seed_;
  SimState state_;
  std::vector<int> phases_;
};

/// Anything that chooses phases from (possibly falsified) per-lane counts.
class SignalController {
 public:
  virtual ~SignalController() = default;
  virtual void reset() {}
  virtual std::vector<int> decide(const RoadNetwork& net, const SimState& state,
                                  const std::vector<std::vector<int>>& reported_counts,
                                  std::span<const int> current_phases) = 0;
};

/// Fixed-time round robin: every decision advances each intersection to its next phase.
class FixedTimeController final : public SignalController {
 public:
  std::vector<int> decide(const RoadNetwork& net, const SimState& state,
                          const std::vector<std::vector<int>>& reported_counts,
                          std::span<const int> current_phases) override;
};

/// Runs a whole honest episode (every vehicle reports 1) under `controller`.
SimState run_honest_episode(const RoadNetwork& net, const SimConfig& config, std::vector<VehicleSpec> trips,
                            SignalController& controller, const StepObserver& observer = {});

/// Mean waiting steps over every vehicle that departed; 0 when nobody did.
double mean_vehicle_wait(const SimState& state);

}  // namespace collusim::sim
