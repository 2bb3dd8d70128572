#pragma once

#include <span>
#include <vector>

#include "collusim/sim/network.hpp"
#include "collusim/sim/state.hpp"

namespace collusim::sim {

/// A vehicle's claim of how many vehicles it is. Honest vehicles implicitly report 1.
struct PresenceReport {
  int vehicle = 0;
  LinkId lane = 0;
  int count = 1;
};

/// Queued on `lane`, or in transit on it within the link's detection zone.
bool present_on_lane(const RoadNetwork& net, const Vehicle& v, LinkId lane);

/// Per-lane counts a signal would see at `intersection`. Every report must come from a
/// vehicle present on the named lane of this intersection; vehicles without a report count once.
/// Throws ReportError otherwise.
std::vector<int> reported_lane_counts(const RoadNetwork& net, const SimState& state, IntersectionId intersection,
                                      std::span<const PresenceReport> reports);

/// Reported counts for every intersection (reports are routed to the lane's intersection).
std::vector<std::vector<int>> reported_counts_all(const RoadNetwork& net, const SimState& state,
                                                  std::span<const PresenceReport> reports);

/// True per-lane queue counts, one per vehicle.
std::vector<int> true_lane_counts(const RoadNetwork& net, const SimState& state, IntersectionId intersection);

/// Per-lane counts of colluding vehicles only, one each regardless of their reports.
std::vector<int> true_colluding_counts(const RoadNetwork& net, const SimState& state, IntersectionId intersection);

}  // namespace collusim::sim
