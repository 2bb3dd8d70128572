#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "collusim/sim/network.hpp"
#include "collusim/sim/state.hpp"

namespace collusim::collusion {

/// Dimensions of the four observation parts for one scenario.
struct ObservationLayout {
  int k_intervals = 6;
  int intersections = 1;
  int max_lanes = 1;

  int time_offset() const { return 0; }
  int location_offset() const { return k_intervals; }
  int vehicles_offset() const { return k_intervals + intersections; }
  int colluders_offset() const { return k_intervals + intersections + max_lanes; }
  int size() const { return k_intervals + intersections + 2 * max_lanes; }
  /// Sizes of the four parts in order T, L, V, C.
  std::vector<int> part_sizes() const { return {k_intervals, intersections, max_lanes, max_lanes}; }

  static ObservationLayout of(const sim::RoadNetwork& net, int k_intervals);
};

struct CollusionObservation {
  std::vector<double> time;        // one-hot over the k intervals
  std::vector<double> location;    // one-hot over intersections (the upcoming one)
  std::vector<double> vehicles;    // true lane counts there, padded to max_lanes
  std::vector<double> colluders;   // colluding lane counts there, including the agent

  std::vector<double> flat() const;
};

/// Interval index floor(clock * k / episode_len), clamped to k - 1.
int time_interval(int clock, int episode_len, int k_intervals);

/// Downstream intersection of the link the vehicle is on.
sim::IntersectionId upcoming_intersection(const sim::RoadNetwork& net, const sim::SimState& state, int vehicle);

/// Throws std::invalid_argument for a vehicle that is not running.
CollusionObservation observe_vehicle(const sim::RoadNetwork& net, const sim::SimState& state, int vehicle,
                                     int k_intervals, int episode_len);

}  // namespace collusim::collusion
