#include "collusim/atcs/train.hpp"

#include <algorithm>
#include <numeric>

#include "collusim/errors.hpp"

namespace collusim::atcs {

namespace {

class IntersectionModel final : public nn::ActorCriticModel {
 public:
  IntersectionModel(SignalPolicy& policy, sim::IntersectionId id) : policy_(policy), id_(id) {}

  std::span<double> parameters() override { return policy_.mutable_parameters(id_); }

  nn::PolicyOutput forward_backward(const nn::RolloutBuffer& buffer, std::size_t row, const nn::HeadLoss& loss,
                                    std::span<double> grad) override {
    const auto& actor = policy_.actor(id_);
    const auto& critic = policy_.critic(id_);
    const auto params = policy_.parameters(id_);
    const std::size_t na = actor.param_count();
    const auto x = policy_.scaled_input(id_, buffer.observation[row]);
    nn::MlpTape ta, tc;
    nn::PolicyOutput out;
    out.logits = actor.forward(params.first(na), x, ta);
    out.value = critic.forward(params.subspan(na), x, tc)[0];
    const auto g = loss(out);
    actor.backward(params.first(na), ta, g.logits, grad.first(na));
    const double dv[1] = {g.value};
    critic.backward(params.subspan(na), tc, dv, grad.subspan(na));
    return out;
  }

 private:
  SignalPolicy& policy_;
  sim::IntersectionId id_;
};

sim::ScenarioConfig jittered(const sim::ScenarioConfig& scenario, double jitter, Rng& rng) {
  sim::ScenarioConfig s = scenario;
  s.demand.vehicles *= 1.0 + jitter * (2.0 * uniform01(rng) - 1.0);
  return s;
}

struct EpisodeOutcome {
  double reward = 0.0;
  double fixed_reward = 0.0;
};

}  // namespace

AtcsTrainConfig::AtcsTrainConfig() {
  ppo.gamma = 0.9;
  ppo.learning_rate = 2e-3;
  ppo.epochs = 8;
  ppo.minibatch = 32;
  ppo.entropy_coef = 0.01;
}

void AtcsTrainConfig::validate() const {
  ppo.validate();
  if (max_episodes < 1) throw ConfigError("atcs.max_episodes", "must be >= 1");
  if (min_episodes < 0 || min_episodes > max_episodes) throw ConfigError("atcs.min_episodes", "must lie in [0, max]");
  if (episodes_per_update < 1) throw ConfigError("atcs.episodes_per_update", "must be >= 1");
  if (moving_window < 1) throw ConfigError("atcs.moving_window", "must be >= 1");
  if (eval_every < 1 || eval_episodes < 1) throw ConfigError("atcs.eval", "eval_every and eval_episodes must be >= 1");
  if (!(demand_jitter >= 0.0 && demand_jitter < 1.0)) throw ConfigError("atcs.demand_jitter", "must lie in [0, 1)");
  if (!(reward_scale > 0.0)) throw ConfigError("atcs.reward_scale", "must be positive");
}

std::vector<double> atcs_rewards(const sim::RoadNetwork& net, const std::vector<std::int64_t>& before,
                                 const std::vector<std::int64_t>& after, double alpha) {
  std::vector<double> own(net.intersections.size(), 0.0);
  for (const auto& node : net.intersections) {
    for (sim::LinkId l : node.lanes) own[node.id] += static_cast<double>(after[l] - before[l]);
  }
  std::vector<double> r(own.size());
  for (const auto& node : net.intersections) {
    double s = own[node.id];
    for (sim::IntersectionId j : net.neighbors(node.id)) s += alpha * own[j];
    r[node.id] = -s;
  }
  return r;
}

double mean_wait_over(const sim::RoadNetwork& net, const sim::ScenarioConfig& scenario,
                      sim::SignalController& controller, const std::vector<std::uint64_t>& demand_seeds) {
  double sum = 0.0;
  for (auto s : demand_seeds) {
    const auto end = sim::run_honest_episode(net, scenario.sim, sim::generate_trips(net, scenario, s), controller);
    sum += sim::mean_vehicle_wait(end);
  }
  return demand_seeds.empty() ? 0.0 : sum / static_cast<double>(demand_seeds.size());
}

AtcsTrainResult train_atcs(const sim::RoadNetwork& net, const sim::ScenarioConfig& scenario,
                           const AtcsTrainConfig& config, std::uint64_t seed, const AtcsProgress& progress) {
  config.validate();
  const std::size_t n = net.intersections.size();
  SignalPolicy policy(net, scenario.alpha, config.shape);
  policy.initialize(seed);

  nn::AdamConfig adam_cfg;
  adam_cfg.learning_rate = config.ppo.learning_rate;
  std::vector<nn::Adam> optimizers;
  std::vector<nn::RolloutBuffer> buffers(n);
  for (std::size_t i = 0; i < n; ++i) optimizers.emplace_back(policy.parameters(static_cast<int>(i)).size(), adam_cfg);

  std::vector<std::uint64_t> eval_seeds;
  for (int k = 0; k < config.eval_episodes; ++k) eval_seeds.push_back(mix_seed(seed, 0xe7a1 + k));
  sim::FixedTimeController fixed;

  AtcsTrainResult result{policy, {}, 0, 0, 0.0, mean_wait_over(net, scenario, fixed, eval_seeds)};
  auto snapshot_eval = [&](int episode) {
    SignalPolicy probe = policy;
    probe.set_mode(ActMode::Deterministic);
    const double w = mean_wait_over(net, scenario, probe, eval_seeds);
    if (episode == 0 || w < result.eval_wait) {
      result.policy = policy;
      result.best_episode = episode;
      result.eval_wait = w;
    }
  };
  snapshot_eval(0);

  Rng rng(mix_seed(seed, 0xa7c));
  int update = 0;
  for (int episode = 1; episode <= config.max_episodes; ++episode) {
    Rng demand_rng(mix_seed(seed, 0xd3 + static_cast<std::uint64_t>(episode)));
    const auto s = jittered(scenario, config.demand_jitter, demand_rng);
    const auto trips = sim::generate_trips(net, s, demand_rng());

    EpisodeOutcome outcome;
    {
      const auto end = sim::run_honest_episode(net, s.sim, trips, fixed);
      const std::vector<std::int64_t> zero(end.lane_wait.size(), 0);
      for (double r : atcs_rewards(net, zero, end.lane_wait, s.alpha)) outcome.fixed_reward += r * config.reward_scale;
    }

    sim::TrafficEnv env(net, s.sim, trips);
    std::vector<std::size_t> last_row(n);
    while (!env.done()) {
      const auto counts = sim::reported_counts_all(net, env.state(), {});
      std::vector<int> green(n);
      for (std::size_t i = 0; i < n; ++i) {
        const int id = static_cast<int>(i);
        auto obs = policy.observe(counts, env.phases(), id);
        const auto out = policy.evaluate(id, obs);
        const auto sample = nn::sample_action(nn::softmax(out.logits), rng);
        green[i] = sample.action;
        last_row[i] = buffers[i].add(episode, id, std::move(obs), {}, sample.action, sample.log_prob, out.value);
      }
      const auto before = env.state().lane_wait;
      env.advance(green, s.sim.tau);
      const auto rewards = atcs_rewards(net, before, env.state().lane_wait, s.alpha);
      for (std::size_t i = 0; i < n; ++i) {
        const double r = rewards[i] * config.reward_scale;
        buffers[i].set_outcome(last_row[i], r, env.done());
        outcome.reward += r;
      }
    }

    const AtcsCurvePoint point{episode, outcome.reward, outcome.fixed_reward};
    result.curve.push_back(point);
    if (progress) progress(point);

    if (episode % config.episodes_per_update == 0 || episode == config.max_episodes) {
      for (std::size_t i = 0; i < n; ++i) {
        const auto t = nn::compute_returns_and_advantages(buffers[i], config.ppo.gamma, config.ppo.normalize_advantages);
        IntersectionModel model(policy, static_cast<int>(i));
        nn::ppo_update(model, optimizers[i], buffers[i], t.advantages, t.returns, config.ppo,
                       mix_seed(seed, 0x9e00 + static_cast<std::uint64_t>(update) * n + i));
        buffers[i].clear();
      }
      ++update;
    }
    if (episode % config.eval_every == 0) snapshot_eval(episode);

    result.episodes = episode;
    if (episode >= config.min_episodes && episode % config.episodes_per_update == 0 &&
        static_cast<int>(result.curve.size()) >= config.moving_window) {
      double ours = 0.0, base = 0.0;
      for (auto it = result.curve.end() - config.moving_window; it != result.curve.end(); ++it) {
        ours += it->reward;
        base += it->fixed_reward;
      }
      if (ours > base && result.eval_wait < result.fixed_eval_wait) break;
    }
  }
  if (result.episodes % config.eval_every != 0) snapshot_eval(result.episodes);
  result.policy.freeze();
  result.policy.set_mode(ActMode::Deterministic);
  return result;
}

}  // namespace collusim::atcs
