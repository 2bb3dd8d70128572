#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "collusim/sim/network.hpp"
#include "collusim/sim/state.hpp"

namespace collusim::sim {

/// Time-varying demand. Each entry link of group g departs a vehicle each step with
/// probability base * profiles[g][interval]; base is chosen so the expected trip count
/// equals `vehicles`. Group "*" is the fallback profile.
struct DemandConfig {
  double vehicles = 120.0;
  double horizon_fraction = 0.7;  // no departures after this fraction of the episode
  int min_route_links = 2;
  std::map<std::string, std::vector<double>> profiles;
};

struct ScenarioConfig {
  NetworkSpec network;
  SimConfig sim;
  DemandConfig demand;
  int k_intervals = 6;
  int a_max = 10;
  int collusion_size = 12;
  double alpha = 0.5;
  double seconds_per_step = 1.0;
  std::vector<std::uint64_t> seeds{0, 1, 10, 12, 42};
};

/// Reads the scenario keys of a config tree. Unknown sections are ignored so training
/// sections can live in the same file. Throws ConfigError.
ScenarioConfig parse_scenario(const nlohmann::json& tree);

/// Throws ConfigError on any out-of-range field.
void validate_scenario(const ScenarioConfig& config);

/// Deterministic trip set for `seed`. Nobody is marked colluding.
std::vector<VehicleSpec> generate_trips(const RoadNetwork& net, const ScenarioConfig& config, std::uint64_t seed);

/// Seeded order in which vehicles join the collusion group. Any prefix is a valid group,
/// so groups of increasing size drawn from one seed are nested. Only vehicles departing in
/// the first half of the episode are eligible.
std::vector<int> collusion_order(std::span<const VehicleSpec> trips, const ScenarioConfig& config,
                                 std::uint64_t seed);

/// Marks the first `size` vehicles of `order` as colluding and returns their ids (agent order).
std::vector<int> mark_colluders(std::vector<VehicleSpec>& trips, std::span<const int> order, int size);

}  // namespace collusim::sim
