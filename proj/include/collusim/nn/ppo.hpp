#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "collusim/nn/optim.hpp"
#include "collusim/nn/rollout.hpp"
#include "collusim/random.hpp"

namespace collusim::nn {

/// Max-shifted softmax.
std::vector<double> softmax(std::span<const double> logits);

int argmax(std::span<const double> values);

struct ActionSample {
  int action = 0;
  double log_prob = 0.0;
};

/// Inverse-CDF categorical draw.
ActionSample sample_action(std::span<const double> probs, Rng& rng);

struct Targets {
  std::vector<double> returns;
  std::vector<double> advantages;
};

/// Discounted Monte-Carlo returns per trajectory and advantages return - V, optionally
/// normalised to zero mean and unit variance over the whole buffer. Throws on empty input.
Targets compute_returns_and_advantages(const RolloutBuffer& buffer, double gamma, bool normalize = true);

/// min(w * A, clip(w, 1 - eps, 1 + eps) * A).
double ppo_surrogate(double ratio, double advantage, double eps);

struct PpoConfig {
  double gamma = 0.99;
  double clip = 0.2;
  double learning_rate = 3e-4;
  int epochs = 4;
  int minibatch = 64;
  double entropy_coef = 0.01;
  double value_coef = 0.5;
  double max_grad_norm = 0.5;  // 0 disables clipping
  bool normalize_advantages = true;

  void validate() const;  // throws ConfigError
};

struct PpoStats {
  double mean_ratio = 1.0;
  double clip_fraction = 0.0;
  double value_loss = 0.0;
  double policy_loss = 0.0;
  double entropy = 0.0;
  std::size_t minibatches = 0;
};

struct PolicyOutput {
  std::vector<double> logits;
  double value = 0.0;
};

struct HeadGradient {
  std::vector<double> logits;
  double value = 0.0;
};

using HeadLoss = std::function<HeadGradient(const PolicyOutput&)>;

/// Anything trainable by ppo_update: a flat parameter vector plus a per-row forward pass
/// that accepts the loss gradient at its heads and backpropagates it.
class ActorCriticModel {
 public:
  virtual ~ActorCriticModel() = default;
  virtual std::span<double> parameters() = 0;
  /// Evaluates row `row` of `buffer`, asks `loss` for d loss / d heads, and adds the
  /// resulting parameter gradient into `grad`.
  virtual PolicyOutput forward_backward(const RolloutBuffer& buffer, std::size_t row, const HeadLoss& loss,
                                        std::span<double> grad) = 0;
};

/// Clipped-surrogate update over shuffled minibatches. Throws TrainingDiverged (leaving the
/// parameters of the failing minibatch untouched) when a loss or gradient is non-finite.
PpoStats ppo_update(ActorCriticModel& model, Adam& optimizer, const RolloutBuffer& buffer,
                    std::span<const double> advantages, std::span<const double> returns, const PpoConfig& config,
                    std::uint64_t shuffle_seed);

}  // namespace collusim::nn
