#include "collusim/sim/environment.hpp"

#include <algorithm>

namespace collusim::sim {

TrafficEnv::TrafficEnv(const RoadNetwork& net, SimConfig config, std::vector<VehicleSpec> trips, std::uint64_t seed)
    : net_(&net), config_(config), trips_(std::move(trips)), seed_(seed) {
  reset();
}

void TrafficEnv::reset() {
  state_ = make_state(*net_, trips_, seed_);
  phases_.assign(net_->intersections.size(), 0);
}

void TrafficEnv::advance(std::span<const int> green, int steps, const StepObserver& observer) {
  phases_.assign(green.begin(), green.end());
  const int n = std::min(steps, config_.episode_len - state_.clock);
  for (int i = 0; i < n; ++i) {
    step_in_place(*net_, state_, phases_, config_);
    if (observer) observer(state_);
  }
}

std::vector<int> FixedTimeController::decide(const RoadNetwork& net, const SimState&,
                                             const std::vector<std::vector<int>>&,
                                             std::span<const int> current_phases) {
  std::vector<int> next(net.intersections.size());
  for (std::size_t i = 0; i < next.size(); ++i) {
    next[i] = (current_phases[i] + 1) % static_cast<int>(net.intersections[i].phases.size());
  }
  return next;
}

SimState run_honest_episode(const RoadNetwork& net, const SimConfig& config, std::vector<VehicleSpec> trips,
                            SignalController& controller, const StepObserver& observer) {
  TrafficEnv env(net, config, std::move(trips));
  controller.reset();
  while (!env.done()) {
    const auto counts = reported_counts_all(net, env.state(), {});
    const auto green = controller.decide(net, env.state(), counts, env.phases());
    env.advance(green, config.tau, observer);
  }
  return env.state();
}

double mean_vehicle_wait(const SimState& state) {
  double sum = 0.0;
  int n = 0;
  for (const auto& v : state.vehicles) {
    if (v.where == Location::Pending) continue;
    sum += v.wait;
    ++n;
  }
  return n > 0 ? sum / n : 0.0;
}

}  // namespace collusim::sim
