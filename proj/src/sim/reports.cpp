#include "collusim/sim/reports.hpp"

#include <string>
#include <unordered_map>

#include "collusim/errors.hpp"

namespace collusim::sim {

namespace {

void check_report(const RoadNetwork& net, const SimState& state, const PresenceReport& r) {
  if (r.vehicle < 0 || r.vehicle >= static_cast<int>(state.vehicles.size())) {
    throw ReportError("report from unknown vehicle " + std::to_string(r.vehicle));
  }
  if (r.count < 0) throw ReportError("negative report count from vehicle " + std::to_string(r.vehicle));
  if (r.lane < 0 || r.lane >= static_cast<int>(net.links.size())) {
    throw ReportError("report names unknown lane " + std::to_string(r.lane));
  }
  const Vehicle& v = state.vehicles[r.vehicle];
  if (!present_on_lane(net, v, r.lane)) {
    throw ReportError("vehicle " + std::to_string(r.vehicle) + " is not present on lane " + net.links[r.lane].name);
  }
}

template <typename Pred>
std::vector<int> count_present(const RoadNetwork& net, const SimState& state, IntersectionId intersection, Pred pred) {
  const auto& node = net.intersections.at(intersection);
  std::vector<int> counts(node.lanes.size(), 0);
  for (std::size_t s = 0; s < node.lanes.size(); ++s) {
    const LinkId lane = node.lanes[s];
    for (int id : state.queues[lane]) counts[s] += pred(state.vehicles[id]) ? 1 : 0;
    for (int id : state.transit[lane]) {
      const Vehicle& v = state.vehicles[id];
      counts[s] += v.remaining <= net.links[lane].detect_steps && pred(v) ? 1 : 0;
    }
  }
  return counts;
}

}  // namespace

bool present_on_lane(const RoadNetwork& net, const Vehicle& v, LinkId lane) {
  if (!v.running() || v.link() != lane) return false;
  return v.where == Location::Queued || v.remaining <= net.links[lane].detect_steps;
}

std::vector<int> reported_lane_counts(const RoadNetwork& net, const SimState& state, IntersectionId intersection,
                                      std::span<const PresenceReport> reports) {
  const auto& node = net.intersections.at(intersection);
  auto counts = count_present(net, state, intersection, [](const Vehicle&) { return true; });
  std::unordered_map<int, int> seen;
  for (const auto& r : reports) {
    check_report(net, state, r);
    const Link& lane = net.links[r.lane];
    if (lane.to != intersection) {
      throw ReportError("report for lane " + lane.name + " sent to intersection " + node.name);
    }
    if (seen[r.vehicle]++) throw ReportError("duplicate report from vehicle " + std::to_string(r.vehicle));
    counts[lane.lane] += r.count - 1;
  }
  return counts;
}

std::vector<std::vector<int>> reported_counts_all(const RoadNetwork& net, const SimState& state,
                                                  std::span<const PresenceReport> reports) {
  std::vector<std::vector<PresenceReport>> routed(net.intersections.size());
  for (const auto& r : reports) {
    check_report(net, state, r);
    routed[net.links[r.lane].to].push_back(r);
  }
  std::vector<std::vector<int>> out;
  out.reserve(net.intersections.size());
  for (std::size_t i = 0; i < net.intersections.size(); ++i) {
    out.push_back(reported_lane_counts(net, state, static_cast<int>(i), routed[i]));
  }
  return out;
}

std::vector<int> true_lane_counts(const RoadNetwork& net, const SimState& state, IntersectionId intersection) {
  return reported_lane_counts(net, state, intersection, {});
}

std::vector<int> true_colluding_counts(const RoadNetwork& net, const SimState& state, IntersectionId intersection) {
  return count_present(net, state, intersection, [](const Vehicle& v) { return v.colluding; });
}

}  // namespace collusim::sim
