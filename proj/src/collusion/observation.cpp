#include "collusim/collusion/observation.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

#include "collusim/sim/reports.hpp"

namespace collusim::collusion {

ObservationLayout ObservationLayout::of(const sim::RoadNetwork& net, int k_intervals) {
  return {k_intervals, static_cast<int>(net.intersections.size()), net.max_lanes()};
}

std::vector<double> CollusionObservation::flat() const {
  std::vector<double> out;
  out.reserve(time.size() + location.size() + vehicles.size() + colluders.size());
  for (const auto* part : {&time, &location, &vehicles, &colluders}) out.insert(out.end(), part->begin(), part->end());
  return out;
}

int time_interval(int clock, int episode_len, int k_intervals) {
  const long long idx = static_cast<long long>(clock) * k_intervals / std::max(episode_len, 1);
  return static_cast<int>(std::clamp<long long>(idx, 0, k_intervals - 1));
}

sim::IntersectionId upcoming_intersection(const sim::RoadNetwork& net, const sim::SimState& state, int vehicle) {
  return net.links[state.vehicles[vehicle].link()].to;
}

CollusionObservation observe_vehicle(const sim::RoadNetwork& net, const sim::SimState& state, int vehicle,
                                     int k_intervals, int episode_len) {
  if (vehicle < 0 || vehicle >= static_cast<int>(state.vehicles.size()) || !state.vehicles[vehicle].running()) {
    throw std::invalid_argument("vehicle " + std::to_string(vehicle) + " is not running");
  }
  const int lanes = net.max_lanes();
  const auto at = upcoming_intersection(net, state, vehicle);
  CollusionObservation o;
  o.time.assign(k_intervals, 0.0);
  o.time[time_interval(state.clock, episode_len, k_intervals)] = 1.0;
  o.location.assign(net.intersections.size(), 0.0);
  o.location[at] = 1.0;
  o.vehicles.assign(lanes, 0.0);
  o.colluders.assign(lanes, 0.0);
  const auto v = sim::true_lane_counts(net, state, at);
  const auto c = sim::true_colluding_counts(net, state, at);
  std::copy(v.begin(), v.end(), o.vehicles.begin());
  std::copy(c.begin(), c.end(), o.colluders.begin());
  return o;
}

}  // namespace collusim::collusion
