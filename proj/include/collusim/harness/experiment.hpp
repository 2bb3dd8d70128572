#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "collusim/atcs/signal.hpp"
#include "collusim/baselines/baselines.hpp"
#include "collusim/collusion/episode.hpp"
#include "collusim/collusion/train.hpp"
#include "collusim/harness/config.hpp"
#include "collusim/harness/results.hpp"

namespace collusim::harness {

/// Runs fn(0..n-1) on up to `jobs` threads. Every index runs even if others throw; the
/// first exception (by index) is rethrown at the end.
void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn);

/// Trip set and collusion group (agent order) for one seed.
struct World {
  std::vector<sim::VehicleSpec> trips;
  std::vector<int> colluders;
};

World make_world(const sim::RoadNetwork& net, const sim::ScenarioConfig& scenario, std::uint64_t seed);

/// Frozen controllers per seed: loaded from `dir` (dir/seed_<s> when present, else dir) or
/// trained on first use with the seed itself. Safe to share between jobs.
class AtcsProvider {
 public:
  AtcsProvider(const sim::RoadNetwork& net, const ExperimentConfig& config,
               std::optional<std::filesystem::path> dir = std::nullopt);

  atcs::SignalPolicy get(std::uint64_t seed);
  /// Training outcome for seeds that were trained here.
  std::optional<atcs::AtcsTrainResult> training(std::uint64_t seed);

 private:
  const sim::RoadNetwork* net_;
  const ExperimentConfig* config_;
  std::optional<std::filesystem::path> dir_;
  std::mutex mutex_;
  std::map<std::uint64_t, atcs::AtcsTrainResult> trained_;
  std::map<std::uint64_t, atcs::SignalPolicy> loaded_;
};

enum class PolicyKind { Baseline, Learned, LearnedDir };

struct PolicySpec {
  PolicyKind kind = PolicyKind::Baseline;
  baselines::BaselinePolicy baseline;
  std::filesystem::path dir;
  collusion::Arm arm = collusion::Arm::Full;
  std::string label;
};

/// "all:<k>", "greedy:<cap>", "random:<cap>", "learned" (trained in-process) or
/// "learned:<dir>". Throws ConfigError.
PolicySpec parse_policy(const std::string& text, int a_max);

/// Saves a trained attack with a small descriptor so it can be reloaded with its arm.
void save_attack(const std::filesystem::path& dir, const collusion::CollusionNet& net);
collusion::CollusionNet load_attack(const std::filesystem::path& dir, const sim::RoadNetwork& net,
                                    const sim::ScenarioConfig& scenario, const collusion::AttackTrainConfig& config);

/// One full deterministic rollout of `policy` against `controller` on the seed's world.
collusion::EpisodeResult run_episode(const sim::RoadNetwork& net, const sim::ScenarioConfig& scenario,
                                     sim::SignalController& controller, collusion::AttackPolicy& policy,
                                     std::uint64_t seed);

struct SeedRun {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  std::string error_kind;  // "diverged", "config", "io", "other"
  collusion::EpisodeMetrics metrics;
  sim::EpisodeTrace trace;
  std::optional<collusion::AttackTrainResult> training;
};

/// Trains (when needed) and evaluates one policy on one seed. Never throws.
SeedRun run_seed(const ExperimentConfig& config, const sim::RoadNetwork& net, AtcsProvider& atcs,
                 const PolicySpec& policy, std::uint64_t seed);

struct Stat {
  double mean = 0.0;
  double std = 0.0;  // population convention
};

Stat mean_std(const std::vector<double>& xs);

struct AggregateResult {
  std::string label;
  std::size_t seeds = 0;
  Stat reward, colluding_travel, colluding_wait, other_travel, other_wait, censored;
};

/// Needs at least two metric sets. Throws std::invalid_argument otherwise.
AggregateResult aggregate(const std::string& label, const std::vector<collusion::EpisodeMetrics>& runs);

struct ArmResult {
  std::string label;
  std::vector<SeedRun> runs;
  bool failed = false;  // some seed failed
  std::optional<AggregateResult> aggregate;  // over successful seeds, when at least two
};

/// Throws ConfigError for fewer than two seeds.
ArmResult evaluate_arm(const ExperimentConfig& config, const sim::RoadNetwork& net, AtcsProvider& atcs,
                       const PolicySpec& policy, const std::vector<std::uint64_t>& seeds, int jobs);

struct AblationRow {
  collusion::Arm arm = collusion::Arm::Full;
  SeedRun run;
  double final_reward = 0.0;
  double eval_reward = 0.0;
  std::size_t shared_params = 0;
  std::size_t private_params = 0;
  int best_episode = 0;
};

/// Trains every configured arm on every seed with identical budgets.
std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const sim::RoadNetwork& net,
                                      AtcsProvider& atcs, const std::vector<std::uint64_t>& seeds, int jobs);

struct SizeSweepRow {
  std::uint64_t seed = 0;
  int size = 0;
  std::vector<int> colluders;
  SeedRun all_one;
  SeedRun learned;
  double avg_time_saved = 0.0;
  double total_time_saved = 0.0;
};

/// Groups are nested prefixes of one seeded order. Throws ConfigError when a size exceeds
/// the eligible vehicles.
std::vector<SizeSweepRow> sweep_collusion_size(const ExperimentConfig& config, const sim::RoadNetwork& net,
                                               AtcsProvider& atcs, const std::vector<int>& sizes,
                                               const std::vector<std::uint64_t>& seeds, int jobs);

struct ActionSweepRow {
  std::uint64_t seed = 0;
  int cap = 0;
  SeedRun learned;
  SeedRun greedy;
  SeedRun all_one;
};

std::vector<ActionSweepRow> sweep_action_space(const ExperimentConfig& config, const sim::RoadNetwork& net,
                                               AtcsProvider& atcs, const std::vector<int>& caps,
                                               const std::vector<std::uint64_t>& seeds, int jobs);

Table metrics_table(const std::vector<ArmResult>& arms, double seconds_per_step);
Table ablation_table(const std::vector<AblationRow>& rows);
Table size_sweep_table(const std::vector<SizeSweepRow>& rows);
Table action_sweep_table(const std::vector<ActionSweepRow>& rows);

}  // namespace collusim::harness
