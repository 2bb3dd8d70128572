#include "collusim/harness/config.hpp"

#include <cstdio>
#include <fstream>

#include "collusim/errors.hpp"

namespace collusim::harness {

using nlohmann::json;

namespace {

template <typename T>
void read_into(const json& node, const char* key, T& out, const std::string& where) {
  if (!node.contains(key)) return;
  try {
    out = node.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key, e.what());
  }
}

const json& section(const json& tree, const char* key) {
  static const json empty = json::object();
  if (!tree.contains(key)) return empty;
  const json& s = tree.at(key);
  if (!s.is_object()) throw ConfigError(key, "must be an object");
  return s;
}

void read_ppo(const json& node, nn::PpoConfig& ppo, const std::string& where) {
  const json& p = section(node, "ppo");
  const std::string w = where + ".ppo";
  read_into(p, "gamma", ppo.gamma, w);
  read_into(p, "clip", ppo.clip, w);
  read_into(p, "learning_rate", ppo.learning_rate, w);
  read_into(p, "epochs", ppo.epochs, w);
  read_into(p, "minibatch", ppo.minibatch, w);
  read_into(p, "entropy_coef", ppo.entropy_coef, w);
  read_into(p, "value_coef", ppo.value_coef, w);
  read_into(p, "max_grad_norm", ppo.max_grad_norm, w);
  read_into(p, "normalize_advantages", ppo.normalize_advantages, w);
}

}  // namespace

ExperimentConfig parse_experiment(const json& tree) {
  ExperimentConfig c;
  c.tree = tree;
  c.scenario = sim::parse_scenario(tree);
  sim::validate_scenario(c.scenario);

  const json& a = section(tree, "atcs");
  read_into(a, "hidden", c.atcs.shape.hidden, "atcs");
  read_into(a, "input_scale", c.atcs.shape.input_scale, "atcs");
  read_into(a, "reward_scale", c.atcs.reward_scale, "atcs");
  read_into(a, "max_episodes", c.atcs.max_episodes, "atcs");
  read_into(a, "min_episodes", c.atcs.min_episodes, "atcs");
  read_into(a, "episodes_per_update", c.atcs.episodes_per_update, "atcs");
  read_into(a, "moving_window", c.atcs.moving_window, "atcs");
  read_into(a, "eval_every", c.atcs.eval_every, "atcs");
  read_into(a, "eval_episodes", c.atcs.eval_episodes, "atcs");
  read_into(a, "demand_jitter", c.atcs.demand_jitter, "atcs");
  read_ppo(a, c.atcs.ppo, "atcs");
  c.atcs.validate();

  const json& k = section(tree, "attack");
  read_into(k, "episodes", c.attack.episodes, "attack");
  read_into(k, "rollout_episodes", c.attack.rollout_episodes, "attack");
  read_into(k, "eval_every", c.attack.eval_every, "attack");
  read_into(k, "ckpt_every", c.attack.ckpt_every, "attack");
  read_into(k, "final_window", c.attack.final_window, "attack");
  read_into(k, "keep_best", c.attack.keep_best, "attack");
  read_into(k, "reward_scale", c.attack.reward_scale, "attack");
  read_into(k, "count_scale", c.attack.sizes.count_scale, "attack");
  read_ppo(k, c.attack.ppo, "attack");
  c.attack.validate();

  const json& ab = section(tree, "ablation");
  if (ab.contains("arms")) {
    std::vector<std::string> names;
    read_into(ab, "arms", names, "ablation");
    c.ablation_arms.clear();
    for (const auto& n : names) c.ablation_arms.push_back(collusion::parse_arm(n));
  }

  const json& sw = section(tree, "sweeps");
  read_into(sw, "sizes", c.sweeps.sizes, "sweeps");
  read_into(sw, "caps", c.sweeps.caps, "sweeps");
  read_into(sw, "seed", c.sweeps.seed, "sweeps");
  for (std::size_t i = 0; i < c.sweeps.sizes.size(); ++i) {
    if (c.sweeps.sizes[i] < 1 || (i > 0 && c.sweeps.sizes[i] <= c.sweeps.sizes[i - 1])) {
      throw ConfigError("sweeps.sizes", "sizes must be positive and ascending");
    }
  }
  for (int cap : c.sweeps.caps) {
    if (cap < 1) throw ConfigError("sweeps.caps", "caps must be >= 1");
  }
  return c;
}

ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot read config " + path.string());
  json tree;
  try {
    tree = json::parse(is);
  } catch (const json::parse_error& e) {
    throw ConfigError(path.string(), e.what());
  }
  return parse_experiment(tree);
}

std::string config_hash(const json& tree) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : tree.dump()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace collusim::harness
