#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <span>
#include <vector>

#include "collusim/sim/network.hpp"

namespace collusim::sim {

/// Static description of one trip.
struct VehicleSpec {
  int id = 0;
  std::vector<LinkId> route;
  int depart_step = 0;
  bool colluding = false;
};

enum class Location : std::uint8_t { Pending, Transit, Queued, Done };

struct Vehicle {
  int id = 0;
  std::vector<LinkId> route;
  int depart_step = 0;
  bool colluding = false;

  Location where = Location::Pending;
  int leg = 0;        // index into route of the current link
  int remaining = 0;  // free-flow steps left while in transit
  int wait = 0;       // accumulated waiting steps
  std::optional<int> done_step;

  bool running() const { return where == Location::Transit || where == Location::Queued; }
  LinkId link() const { return route[leg]; }
};

struct SimConfig {
  int discharge_rate = 1;
  int tau = 5;
  int episode_len = 300;
};

struct SimState {
  int clock = 0;
  std::vector<Vehicle> vehicles;            // indexed by vehicle id
  std::vector<std::deque<int>> queues;      // per link, head at front
  std::vector<std::deque<int>> transit;     // per link, in entry order
  std::deque<int> pending;                  // not yet entered, by (depart_step, id)
  std::vector<std::int64_t> lane_wait;      // cumulative waiting steps per link
  std::uint64_t rng_seed = 0;
};

struct Census {
  int pending = 0;
  int transit = 0;
  int queued = 0;
  int done = 0;
  int total() const { return pending + transit + queued + done; }
};

/// Initial state for a set of trips. Vehicle ids must equal their index.
SimState make_state(const RoadNetwork& net, std::vector<VehicleSpec> trips, std::uint64_t seed = 0);

/// Advances one step with `green[i]` the phase index for intersection i.
void step_in_place(const RoadNetwork& net, SimState& state, std::span<const int> green, const SimConfig& config);
SimState step(const RoadNetwork& net, SimState state, std::span<const int> green, const SimConfig& config);

/// Counts vehicles by container, scanning every queue and transit list.
Census census(const SimState& state);

/// Checks conservation, single-membership of queues and per-vehicle bookkeeping.
bool consistent(const SimState& state);

std::int64_t total_wait(const SimState& state);

}  // namespace collusim::sim
