#include "collusim/sim/state.hpp"

#include <algorithm>
#include <cassert>
#include <stdexcept>
#include <string>

namespace collusim::sim {

namespace {

int occupancy(const SimState& s, LinkId link) {
  return static_cast<int>(s.transit[link].size() + s.queues[link].size());
}

void enter_link(const RoadNetwork& net, SimState& s, Vehicle& v, LinkId link) {
  v.where = Location::Transit;
  v.remaining = net.links[link].travel_steps;
  s.transit[link].push_back(v.id);
}

}  // namespace

SimState make_state(const RoadNetwork& net, std::vector<VehicleSpec> trips, std::uint64_t seed) {
  SimState s;
  s.rng_seed = seed;
  s.queues.resize(net.links.size());
  s.transit.resize(net.links.size());
  s.lane_wait.assign(net.links.size(), 0);
  s.vehicles.reserve(trips.size());
  for (std::size_t i = 0; i < trips.size(); ++i) {
    auto& t = trips[i];
    if (t.id != static_cast<int>(i)) throw std::invalid_argument("vehicle ids must equal their index");
    if (t.route.empty()) throw std::invalid_argument("vehicle " + std::to_string(t.id) + " has an empty route");
    if (t.depart_step < 0) throw std::invalid_argument("vehicle " + std::to_string(t.id) + " departs before 0");
    for (std::size_t k = 0; k < t.route.size(); ++k) {
      const LinkId l = t.route[k];
      if (l < 0 || l >= static_cast<int>(net.links.size())) {
        throw std::invalid_argument("vehicle " + std::to_string(t.id) + " routes over an unknown link");
      }
      if (k > 0 && net.links[t.route[k - 1]].to != net.links[l].from) {
        throw std::invalid_argument("vehicle " + std::to_string(t.id) + " has a disconnected route");
      }
    }
    Vehicle v;
    v.id = t.id;
    v.route = std::move(t.route);
    v.depart_step = t.depart_step;
    v.colluding = t.colluding;
    s.vehicles.push_back(std::move(v));
  }
  std::vector<int> order(s.vehicles.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  std::stable_sort(order.begin(), order.end(),
                   [&](int a, int b) { return s.vehicles[a].depart_step < s.vehicles[b].depart_step; });
  s.pending.assign(order.begin(), order.end());
  return s;
}

void step_in_place(const RoadNetwork& net, SimState& s, std::span<const int> green, const SimConfig& config) {
  if (green.size() != net.intersections.size()) throw std::invalid_argument("green vector has wrong length");
  for (std::size_t i = 0; i < green.size(); ++i) {
    if (green[i] < 0 || green[i] >= static_cast<int>(net.intersections[i].phases.size())) {
      throw std::invalid_argument("invalid phase index for intersection " + std::to_string(i));
    }
  }

  // Free-flow transit: vehicles on one link share a travel time, so they arrive in entry order.
  for (std::size_t l = 0; l < s.transit.size(); ++l) {
    auto& lane = s.transit[l];
    for (int id : lane) --s.vehicles[id].remaining;
    while (!lane.empty() && s.vehicles[lane.front()].remaining <= 0) {
      Vehicle& v = s.vehicles[lane.front()];
      lane.pop_front();
      v.where = Location::Queued;
      s.queues[l].push_back(v.id);
    }
  }

  // Departures. A full entry link holds its vehicles back without blocking other origins.
  for (auto it = s.pending.begin(); it != s.pending.end();) {
    Vehicle& v = s.vehicles[*it];
    if (v.depart_step > s.clock) break;
    const LinkId first = v.route.front();
    if (occupancy(s, first) < net.links[first].capacity) {
      enter_link(net, s, v, first);
      it = s.pending.erase(it);
    } else {
      ++it;
    }
  }

  // Discharge from green lanes; a full receiving link blocks the lane (spillback).
  for (const auto& node : net.intersections) {
    for (int slot : node.phases[green[node.id]]) {
      const LinkId link = node.lanes[slot];
      auto& queue = s.queues[link];
      for (int moved = 0; moved < config.discharge_rate && !queue.empty(); ++moved) {
        Vehicle& v = s.vehicles[queue.front()];
        if (v.leg + 1 == static_cast<int>(v.route.size())) {
          queue.pop_front();
          v.where = Location::Done;
          v.done_step = s.clock + 1;
          continue;
        }
        const LinkId next = v.route[v.leg + 1];
        if (occupancy(s, next) >= net.links[next].capacity) break;
        queue.pop_front();
        ++v.leg;
        enter_link(net, s, v, next);
      }
    }
  }

  for (std::size_t l = 0; l < s.queues.size(); ++l) {
    for (int id : s.queues[l]) ++s.vehicles[id].wait;
    s.lane_wait[l] += static_cast<std::int64_t>(s.queues[l].size());
  }

  ++s.clock;
  assert(consistent(s));
}

SimState step(const RoadNetwork& net, SimState state, std::span<const int> green, const SimConfig& config) {
  step_in_place(net, state, green, config);
  return state;
}

Census census(const SimState& s) {
  Census c;
  c.pending = static_cast<int>(s.pending.size());
  for (const auto& q : s.transit) c.transit += static_cast<int>(q.size());
  for (const auto& q : s.queues) c.queued += static_cast<int>(q.size());
  for (const auto& v : s.vehicles) c.done += v.where == Location::Done ? 1 : 0;
  return c;
}

bool consistent(const SimState& s) {
  if (census(s).total() != static_cast<int>(s.vehicles.size())) return false;
  std::vector<int> seen(s.vehicles.size(), 0);
  for (std::size_t l = 0; l < s.queues.size(); ++l) {
    for (int id : s.queues[l]) {
      const Vehicle& v = s.vehicles[id];
      if (seen[id]++ || v.where != Location::Queued || v.link() != static_cast<int>(l)) return false;
    }
    for (int id : s.transit[l]) {
      const Vehicle& v = s.vehicles[id];
      if (seen[id]++ || v.where != Location::Transit || v.link() != static_cast<int>(l)) return false;
    }
  }
  for (int id : s.pending) {
    if (seen[id]++ || s.vehicles[id].where != Location::Pending) return false;
  }
  for (const auto& v : s.vehicles) {
    if (v.where == Location::Done && (!v.done_step || seen[v.id])) return false;
    if (v.where != Location::Done && v.done_step) return false;
  }
  return true;
}

std::int64_t total_wait(const SimState& s) {
  std::int64_t sum = 0;
  for (const auto& v : s.vehicles) sum += v.wait;
  return sum;
}

}  // namespace collusim::sim
