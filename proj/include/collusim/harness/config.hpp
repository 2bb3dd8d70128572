#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "collusim/atcs/train.hpp"
#include "collusim/collusion/train.hpp"
#include "collusim/sim/scenario.hpp"

namespace collusim::harness {

struct SweepConfig {
  std::vector<int> sizes{4, 8, 16};
  std::vector<int> caps{2, 4, 10};
  std::uint64_t seed = 42;
};

/// Everything a run needs, read from one JSON config tree.
struct ExperimentConfig {
  sim::ScenarioConfig scenario;
  atcs::AtcsTrainConfig atcs;
  collusion::AttackTrainConfig attack;
  std::vector<collusion::Arm> ablation_arms{collusion::Arm::VehInt, collusion::Arm::MaskedRoadEnc,
                                            collusion::Arm::RoadEncVehInt, collusion::Arm::Full};
  SweepConfig sweeps;
  nlohmann::json tree;
};

/// Parses and validates. Throws ConfigError.
ExperimentConfig parse_experiment(const nlohmann::json& tree);

/// Reads a config file. Throws IoError when unreadable and ConfigError when invalid.
ExperimentConfig load_experiment(const std::filesystem::path& path);

/// FNV-1a over the canonical dump of the tree, as 16 hex digits.
std::string config_hash(const nlohmann::json& tree);

}  // namespace collusim::harness
