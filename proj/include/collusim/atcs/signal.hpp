#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <vector>

#include "collusim/nn/checkpoint.hpp"
#include "collusim/nn/mlp.hpp"
#include "collusim/nn/ppo.hpp"
#include "collusim/random.hpp"
#include "collusim/sim/environment.hpp"

namespace collusim::atcs {

enum class ActMode { Stochastic, Deterministic };

/// Raised when something tries to modify a frozen policy.
class FrozenPolicyError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// [own lane counts, current phase one-hot, alpha * lane counts of each 1-hop neighbour
/// in ascending id order]. `reported_counts` holds the counts of every intersection.
std::vector<double> signal_observe(const sim::RoadNetwork& net, const std::vector<std::vector<int>>& reported_counts,
                                   std::span<const int> phases, sim::IntersectionId intersection, double alpha);

int signal_observation_size(const sim::RoadNetwork& net, sim::IntersectionId intersection);

/// Per-intersection actor (output = phase count) and critic. Counts are multiplied by
/// `input_scale` before entering the networks; the phase one-hot is left as is.
struct SignalShape {
  int hidden = 32;
  double input_scale = 0.1;
};

class SignalPolicy final : public sim::SignalController {
 public:
  SignalPolicy(const sim::RoadNetwork& net, double alpha, SignalShape shape = {});

  void initialize(std::uint64_t seed);

  std::size_t size() const { return actors_.size(); }
  double alpha() const { return alpha_; }
  const SignalShape& shape() const { return shape_; }
  const sim::RoadNetwork& network() const { return *net_; }
  const nn::MlpLayout& actor(sim::IntersectionId i) const { return actors_[i]; }
  const nn::MlpLayout& critic(sim::IntersectionId i) const { return critics_[i]; }

  /// Actor parameters followed by critic parameters.
  std::span<const double> parameters(sim::IntersectionId i) const { return params_[i]; }
  std::span<double> mutable_parameters(sim::IntersectionId i);

  void freeze() { frozen_ = true; }
  bool frozen() const { return frozen_; }

  std::vector<double> observe(const std::vector<std::vector<int>>& reported_counts, std::span<const int> phases,
                              sim::IntersectionId i) const {
    return signal_observe(*net_, reported_counts, phases, i, alpha_);
  }
  /// Network input for a raw observation.
  std::vector<double> scaled_input(sim::IntersectionId i, std::span<const double> obs) const;
  nn::PolicyOutput evaluate(sim::IntersectionId i, std::span<const double> obs) const;
  int act(sim::IntersectionId i, std::span<const double> obs, ActMode mode, Rng* rng = nullptr) const;

  /// Mode used by decide(); stochastic decisions draw from a stream seeded here.
  void set_mode(ActMode mode, std::uint64_t seed = 0);
  ActMode mode() const { return mode_; }

  std::vector<int> decide(const sim::RoadNetwork& net, const sim::SimState& state,
                          const std::vector<std::vector<int>>& reported_counts,
                          std::span<const int> current_phases) override;

  std::vector<nn::NetManifest> manifest(sim::IntersectionId i) const;
  nn::Checkpoint checkpoint(sim::IntersectionId i) const;

  /// Writes atcs_<id>.ckpt for every intersection.
  void save(const std::filesystem::path& dir) const;
  /// Loads a frozen policy. Throws IoError / ConfigError on missing or mismatched files.
  static SignalPolicy load(const std::filesystem::path& dir, const sim::RoadNetwork& net, double alpha,
                           SignalShape shape = {});

 private:
  const sim::RoadNetwork* net_;
  double alpha_;
  SignalShape shape_;
  std::vector<nn::MlpLayout> actors_;
  std::vector<nn::MlpLayout> critics_;
  std::vector<std::vector<double>> params_;
  std::vector<int> lane_counts_;
  bool frozen_ = false;
  ActMode mode_ = ActMode::Deterministic;
  Rng rng_;
};

}  // namespace collusim::atcs
