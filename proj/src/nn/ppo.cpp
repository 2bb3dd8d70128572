#include "collusim/nn/ppo.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "collusim/errors.hpp"

namespace collusim::nn {

std::vector<double> softmax(std::span<const double> logits) {
  if (logits.empty()) return {};
  const double top = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - top);
    sum += p[i];
  }
  for (double& x : p) x /= sum;
  return p;
}

int argmax(std::span<const double> values) {
  return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

ActionSample sample_action(std::span<const double> probs, Rng& rng) {
  const double u = uniform01(rng);
  double cdf = 0.0;
  int last = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (probs[i] <= 0.0) continue;
    last = static_cast<int>(i);
    cdf += probs[i];
    if (u < cdf) return {last, std::log(probs[i])};
  }
  // Rounding left u above the accumulated mass: take the last supported action.
  return {last, std::log(probs[last])};
}

Targets compute_returns_and_advantages(const RolloutBuffer& buffer, double gamma, bool normalize) {
  if (buffer.empty()) throw std::invalid_argument("cannot compute returns of an empty buffer");
  const std::size_t n = buffer.size();
  Targets t;
  t.returns.assign(n, 0.0);
  t.advantages.assign(n, 0.0);
  std::unordered_map<int, double> running;
  for (std::size_t i = n; i-- > 0;) {
    double& g = running[buffer.trajectory[i]];
    if (buffer.done[i]) g = 0.0;
    g = buffer.reward[i] + gamma * g;
    t.returns[i] = g;
    t.advantages[i] = g - buffer.value[i];
  }
  if (normalize) {
    const double mean = std::accumulate(t.advantages.begin(), t.advantages.end(), 0.0) / static_cast<double>(n);
    double var = 0.0;
    for (double a : t.advantages) var += (a - mean) * (a - mean);
    const double sd = std::sqrt(var / static_cast<double>(n));
    for (double& a : t.advantages) a = sd > 1e-8 ? (a - mean) / sd : a - mean;
  }
  return t;
}

double ppo_surrogate(double ratio, double advantage, double eps) {
  const double clipped = std::clamp(ratio, 1.0 - eps, 1.0 + eps);
  return std::min(ratio * advantage, clipped * advantage);
}

void PpoConfig::validate() const {
  if (!(gamma >= 0.0 && gamma < 1.0)) throw ConfigError("ppo.gamma", "must lie in [0, 1)");
  if (!(clip > 0.0 && clip < 1.0)) throw ConfigError("ppo.clip", "must lie in (0, 1)");
  if (!(learning_rate > 0.0)) throw ConfigError("ppo.learning_rate", "must be positive");
  if (epochs < 1) throw ConfigError("ppo.epochs", "must be >= 1");
  if (minibatch < 1) throw ConfigError("ppo.minibatch", "must be >= 1");
  if (entropy_coef < 0.0 || value_coef < 0.0 || max_grad_norm < 0.0) {
    throw ConfigError("ppo", "coefficients must be non-negative");
  }
}

PpoStats ppo_update(ActorCriticModel& model, Adam& optimizer, const RolloutBuffer& buffer,
                    std::span<const double> advantages, std::span<const double> returns, const PpoConfig& config,
                    std::uint64_t shuffle_seed) {
  if (buffer.empty()) throw std::invalid_argument("ppo_update needs a nonempty buffer");
  if (advantages.size() != buffer.size() || returns.size() != buffer.size()) {
    throw std::invalid_argument("advantage/return columns do not match the buffer");
  }
  config.validate();

  auto params = model.parameters();
  std::vector<double> grad(params.size());
  std::vector<std::size_t> order(buffer.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng(shuffle_seed);

  PpoStats stats;
  double ratio_sum = 0.0, clipped = 0.0, vloss_sum = 0.0, ploss_sum = 0.0, ent_sum = 0.0;
  std::size_t seen = 0;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[uniform_index(rng, i)]);
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(config.minibatch)) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(config.minibatch));
      const double scale = 1.0 / static_cast<double>(end - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double mb_ploss = 0.0, mb_vloss = 0.0, mb_ent = 0.0;

      for (std::size_t k = start; k < end; ++k) {
        const std::size_t row = order[k];
        const double adv = advantages[row];
        const double ret = returns[row];
        const int act = buffer.action[row];
        const HeadLoss loss = [&](const PolicyOutput& out) {
          const auto probs = softmax(out.logits);
          double entropy = 0.0;
          for (double p : probs) entropy -= p > 0.0 ? p * std::log(p) : 0.0;
          const double logp = std::log(probs[act]);
          const double ratio = std::exp(logp - buffer.log_prob[row]);
          const double surrogate = ppo_surrogate(ratio, adv, config.clip);
          const double verr = out.value - ret;

          ratio_sum += ratio;
          clipped += std::abs(ratio - 1.0) > config.clip ? 1.0 : 0.0;
          mb_ploss -= surrogate;
          mb_vloss += 0.5 * verr * verr;
          mb_ent += entropy;

          HeadGradient g;
          g.logits.assign(probs.size(), 0.0);
          // The unclipped branch carries gradient whenever min() selects it.
          const bool active = ratio * adv <= std::clamp(ratio, 1.0 - config.clip, 1.0 + config.clip) * adv;
          for (std::size_t j = 0; j < probs.size(); ++j) {
            double d = 0.0;
            if (active) d -= adv * ratio * ((static_cast<int>(j) == act ? 1.0 : 0.0) - probs[j]);
            if (probs[j] > 0.0) d += config.entropy_coef * probs[j] * (std::log(probs[j]) + entropy);
            g.logits[j] = d * scale;
          }
          g.value = config.value_coef * verr * scale;
          return g;
        };
        model.forward_backward(buffer, row, loss, grad);
      }

      double norm = 0.0;
      for (double g : grad) norm += g * g;
      norm = std::sqrt(norm);
      if (!std::isfinite(mb_ploss) || !std::isfinite(mb_vloss) || !std::isfinite(norm)) {
        std::ostringstream msg;
        msg << "non-finite PPO loss at epoch " << epoch << ", rows " << start << ".." << end
            << ": policy_loss=" << mb_ploss << " value_loss=" << mb_vloss << " grad_norm=" << norm;
        throw TrainingDiverged(msg.str());
      }
      if (config.max_grad_norm > 0.0 && norm > config.max_grad_norm) {
        const double shrink = config.max_grad_norm / norm;
        for (double& g : grad) g *= shrink;
      }
      optimizer.step(params, grad);

      ploss_sum += mb_ploss;
      vloss_sum += mb_vloss;
      ent_sum += mb_ent;
      seen += end - start;
      ++stats.minibatches;
    }
  }
  stats.mean_ratio = ratio_sum / static_cast<double>(seen);
  stats.clip_fraction = clipped / static_cast<double>(seen);
  stats.policy_loss = ploss_sum / static_cast<double>(seen);
  stats.value_loss = vloss_sum / static_cast<double>(seen);
  stats.entropy = ent_sum / static_cast<double>(seen);
  return stats;
}

}  // namespace collusim::nn
