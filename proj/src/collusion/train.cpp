#include "collusim/collusion/train.hpp"

#include <algorithm>
#include <map>

#include "collusim/errors.hpp"

namespace collusim::collusion {

AttackTrainConfig::AttackTrainConfig() {
  ppo.gamma = 0.9;
  ppo.learning_rate = 1e-3;
  ppo.minibatch = 256;
  ppo.entropy_coef = 0.01;
  ppo.value_coef = 0.5;
}

void AttackTrainConfig::validate() const {
  ppo.validate();
  if (episodes < 1) throw ConfigError("attack.episodes", "must be >= 1");
  if (rollout_episodes < 1) throw ConfigError("attack.rollout_episodes", "must be >= 1");
  if (eval_every < 1) throw ConfigError("attack.eval_every", "must be >= 1");
  if (ckpt_every < 0) throw ConfigError("attack.ckpt_every", "must be >= 0");
  if (final_window < 1) throw ConfigError("attack.final_window", "must be >= 1");
  if (!(reward_scale > 0.0)) throw ConfigError("attack.reward_scale", "must be positive");
}

LearnedPolicy::LearnedPolicy(const CollusionNet& net, Mode mode, nn::RolloutBuffer* record, double reward_scale)
    : net_(&net), mode_(mode), record_(record), reward_scale_(reward_scale) {}

void LearnedPolicy::begin_episode(std::uint64_t seed) {
  rng_.seed(mix_seed(seed, 0x1ea7));
  pending_rows_.clear();
  last_row_.assign(net_->agents(), -1);
}

std::vector<int> LearnedPolicy::decide(const DecisionContext& ctx) {
  const std::size_t n = ctx.agents.size();
  std::vector<std::vector<double>> obs(n), plcys(n);
  for (std::size_t i = 0; i < n; ++i) {
    obs[i] = net_->prepare(ctx.observations[i]);
    plcys[i] = net_->plcy(ctx.agents[i], obs[i]);
  }
  std::map<sim::IntersectionId, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[ctx.upcoming[i]].push_back(i);

  std::vector<int> reports(n);
  pending_rows_.clear();
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::vector<double>> neighbors;
    for (std::size_t j : groups[ctx.upcoming[i]]) {
      if (j != i) neighbors.push_back(plcys[j]);
    }
    auto context = net_->make_context(neighbors);
    const auto out = net_->evaluate(ctx.agents[i], obs[i], context);
    const auto s = net_->act(out, mode_, rng_);
    reports[i] = net_->actions().report(s.action);
    if (record_ != nullptr) {
      const int agent = ctx.agents[i];
      const auto row = record_->add(episode_ * net_->agents() + agent, agent, std::move(obs[i]), std::move(context),
                                    s.action, s.log_prob, out.value);
      pending_rows_.push_back(row);
      last_row_[agent] = static_cast<long long>(row);
    }
  }
  return reports;
}

void LearnedPolicy::feedback(std::span<const int>, double reward, bool done) {
  if (record_ == nullptr) return;
  for (std::size_t row : pending_rows_) record_->set_outcome(row, reward * reward_scale_, done);
  pending_rows_.clear();
}

void LearnedPolicy::end_episode() {
  if (record_ == nullptr) return;
  for (long long row : last_row_) {
    if (row >= 0) record_->done[static_cast<std::size_t>(row)] = 1;
  }
}

AttackTrainResult train_collusion(const sim::RoadNetwork& net, const sim::ScenarioConfig& scenario,
                                  const std::vector<sim::VehicleSpec>& trips, std::span<const int> colluders,
                                  sim::SignalController& atcs, Arm arm, const AttackTrainConfig& config,
                                  std::uint64_t seed, const AttackProgress& progress,
                                  const AttackCheckpoint& checkpoint) {
  config.validate();
  CollusionNet model(ObservationLayout::of(net, scenario.k_intervals), static_cast<int>(colluders.size()),
                     ActionSpace{scenario.a_max}, arm, config.sizes);
  model.initialize(seed);
  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.ppo.learning_rate;
  nn::Adam adam(model.parameters().size(), adam_cfg);

  AttackTrainResult result{model, {}, 0, 0.0, 0.0};
  auto evaluate = [&]() {
    LearnedPolicy greedy(model, Mode::Greedy);
    return run_attack_episode(net, scenario, trips, colluders, atcs, greedy, seed).metrics.reward;
  };
  result.best_eval_reward = evaluate();

  nn::RolloutBuffer buffer;
  LearnedPolicy behaviour(model, Mode::Sample, &buffer, config.reward_scale);
  int update = 0;
  for (int episode = 1; episode <= config.episodes; ++episode) {
    behaviour.set_episode_index(episode);
    const auto ep = run_attack_episode(net, scenario, trips, colluders, atcs, behaviour,
                                       mix_seed(seed, 0x5a00 + static_cast<std::uint64_t>(episode)));
    AttackCurvePoint point{episode, ep.metrics.reward, 0.0, false};

    if ((episode % config.rollout_episodes == 0 || episode == config.episodes) && !buffer.empty()) {
      const auto t = nn::compute_returns_and_advantages(buffer, config.ppo.gamma, config.ppo.normalize_advantages);
      nn::ppo_update(model, adam, buffer, t.advantages, t.returns, config.ppo,
                     mix_seed(seed, 0x7d00 + static_cast<std::uint64_t>(update++)));
      buffer.clear();
    }
    if (episode % config.eval_every == 0 || episode == config.episodes) {
      point.eval_reward = evaluate();
      point.evaluated = true;
      if (!config.keep_best || point.eval_reward > result.best_eval_reward) {
        result.net = model;
        result.best_episode = episode;
        result.best_eval_reward = point.eval_reward;
      }
    }
    result.curve.push_back(point);
    if (progress) progress(point);
    if (checkpoint && config.ckpt_every > 0 && episode % config.ckpt_every == 0) checkpoint(episode, model);
  }

  const std::size_t window = std::min<std::size_t>(config.final_window, result.curve.size());
  double sum = 0.0;
  for (std::size_t i = result.curve.size() - window; i < result.curve.size(); ++i) sum += result.curve[i].reward;
  result.final_reward = sum / static_cast<double>(window);
  return result;
}

}  // namespace collusim::collusion
