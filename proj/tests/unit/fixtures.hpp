#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "json.hpp"

#include "collusim/harness/config.hpp"
#include "collusim/sim/network.hpp"
#include "collusim/sim/scenario.hpp"

namespace fixtures {

inline std::filesystem::path source_dir() { return COLLUSIM_SOURCE_DIR; }

inline nlohmann::json desk_tree() {
  std::ifstream is(source_dir() / "configs" / "desk.json");
  return nlohmann::json::parse(is);
}

inline collusim::sim::ScenarioConfig desk() { return collusim::sim::parse_scenario(desk_tree()); }

inline collusim::harness::ExperimentConfig desk_experiment() {
  return collusim::harness::parse_experiment(desk_tree());
}

inline collusim::sim::RoadNetwork grid(int rows, int cols, int detect = 0, int phases = 2) {
  collusim::sim::NetworkSpec spec;
  collusim::sim::GridSpec g;
  g.rows = rows;
  g.cols = cols;
  g.phases = phases;
  g.detect_steps = detect;
  spec.grid = g;
  return collusim::sim::build_network(spec);
}

/// One exit intersection "X" fed by entry links "w" (slot 0) and "n" (slot 1), one phase each.
inline nlohmann::json single_tree(int travel = 2, int detect = 0) {
  return nlohmann::json::parse(R"({
    "intersections": [{"name": "X", "exit": true, "phases": [["w"], ["n"]]}],
    "links": [
      {"name": "w", "to": "X", "travel": )" + std::to_string(travel) + R"(, "capacity": 50, "group": "west", "detect_steps": )" +
                               std::to_string(detect) + R"(},
      {"name": "n", "to": "X", "travel": )" + std::to_string(travel) + R"(, "capacity": 50, "group": "north", "detect_steps": )" +
                               std::to_string(detect) + R"(}
    ]})");
}

inline collusim::sim::RoadNetwork single(int travel = 2, int detect = 0) {
  nlohmann::json tree;
  tree["network"] = single_tree(travel, detect);
  return collusim::sim::build_network(collusim::sim::parse_scenario(tree).network);
}

}  // namespace fixtures
