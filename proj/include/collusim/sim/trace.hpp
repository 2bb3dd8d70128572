#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "collusim/sim/state.hpp"

namespace collusim::sim {

struct VehicleOutcome {
  int id = 0;
  bool colluding = false;
  bool departed = false;
  int depart_step = 0;
  std::optional<int> done_step;
  int wait = 0;
};

/// One attack decision: the running colluders, what they reported and their waiting
/// counters at both ends of the decision window.
struct DecisionRecord {
  int clock = 0;
  double reward = 0.0;
  std::vector<int> agents;  // vehicle ids
  std::vector<int> reported;
  std::vector<int> wait_before;
  std::vector<int> wait_after;
};

/// Everything needed to recompute episode metrics offline ("COLLUSIM-TRACE v1").
struct EpisodeTrace {
  int episode_len = 0;
  std::uint64_t seed = 0;
  std::string policy;
  std::vector<VehicleOutcome> vehicles;
  std::vector<DecisionRecord> decisions;
};

std::vector<VehicleOutcome> vehicle_outcomes(const SimState& state);

void write_trace(std::ostream& os, const EpisodeTrace& trace);
EpisodeTrace read_trace(std::istream& is);  // throws ConfigError on malformed input

}  // namespace collusim::sim
