#include "collusim/atcs/signal.hpp"

#include "collusim/errors.hpp"

namespace collusim::atcs {

std::vector<double> signal_observe(const sim::RoadNetwork& net, const std::vector<std::vector<int>>& reported_counts,
                                   std::span<const int> phases, sim::IntersectionId intersection, double alpha) {
  const auto& node = net.intersections[intersection];
  std::vector<double> obs;
  obs.reserve(signal_observation_size(net, intersection));
  for (int c : reported_counts[intersection]) obs.push_back(c);
  for (std::size_t p = 0; p < node.phases.size(); ++p) obs.push_back(static_cast<int>(p) == phases[intersection]);
  for (sim::IntersectionId j : net.neighbors(intersection)) {
    for (int c : reported_counts[j]) obs.push_back(alpha * c);
  }
  return obs;
}

int signal_observation_size(const sim::RoadNetwork& net, sim::IntersectionId intersection) {
  const auto& node = net.intersections[intersection];
  int n = static_cast<int>(node.lanes.size() + node.phases.size());
  for (sim::IntersectionId j : net.neighbors(intersection)) n += static_cast<int>(net.intersections[j].lanes.size());
  return n;
}

SignalPolicy::SignalPolicy(const sim::RoadNetwork& net, double alpha, SignalShape shape)
    : net_(&net), alpha_(alpha), shape_(shape) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ConfigError("alpha", "spatial discount must lie in [0, 1]");
  if (shape.hidden < 1) throw ConfigError("atcs.hidden", "must be >= 1");
  for (const auto& node : net.intersections) {
    const int in = signal_observation_size(net, node.id);
    actors_.emplace_back(std::vector<int>{in, shape.hidden, static_cast<int>(node.phases.size())});
    critics_.emplace_back(std::vector<int>{in, shape.hidden, 1});
    params_.emplace_back(actors_.back().param_count() + critics_.back().param_count(), 0.0);
    lane_counts_.push_back(static_cast<int>(node.lanes.size()));
  }
}

void SignalPolicy::initialize(std::uint64_t seed) {
  for (std::size_t i = 0; i < params_.size(); ++i) {
    auto p = mutable_parameters(static_cast<int>(i));
    Rng rng(mix_seed(seed, 0xa7c5 + i));
    actors_[i].initialize(p.first(actors_[i].param_count()), 0.01, rng);
    critics_[i].initialize(p.subspan(actors_[i].param_count()), 1.0, rng);
  }
}

std::span<double> SignalPolicy::mutable_parameters(sim::IntersectionId i) {
  if (frozen_) throw FrozenPolicyError("signal policy is frozen");
  return params_[i];
}

std::vector<double> SignalPolicy::scaled_input(sim::IntersectionId i, std::span<const double> obs) const {
  std::vector<double> x(obs.begin(), obs.end());
  const std::size_t own = lane_counts_[i];
  const std::size_t phases = net_->intersections[i].phases.size();
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (k < own || k >= own + phases) x[k] *= shape_.input_scale;
  }
  return x;
}

nn::PolicyOutput SignalPolicy::evaluate(sim::IntersectionId i, std::span<const double> obs) const {
  const auto x = scaled_input(i, obs);
  std::span<const double> p = params_[i];
  nn::PolicyOutput out;
  out.logits = actors_[i].forward(p.first(actors_[i].param_count()), x);
  out.value = critics_[i].forward(p.subspan(actors_[i].param_count()), x)[0];
  return out;
}

int SignalPolicy::act(sim::IntersectionId i, std::span<const double> obs, ActMode mode, Rng* rng) const {
  const auto x = scaled_input(i, obs);
  const auto logits = actors_[i].forward(std::span<const double>(params_[i]).first(actors_[i].param_count()), x);
  if (mode == ActMode::Deterministic || rng == nullptr) return nn::argmax(logits);
  return nn::sample_action(nn::softmax(logits), *rng).action;
}

void SignalPolicy::set_mode(ActMode mode, std::uint64_t seed) {
  mode_ = mode;
  rng_.seed(mix_seed(seed, 0x5157));
}

std::vector<int> SignalPolicy::decide(const sim::RoadNetwork&, const sim::SimState&,
                                      const std::vector<std::vector<int>>& reported_counts,
                                      std::span<const int> current_phases) {
  std::vector<int> green(params_.size());
  for (std::size_t i = 0; i < green.size(); ++i) {
    const int id = static_cast<int>(i);
    green[i] = act(id, observe(reported_counts, current_phases, id), mode_, &rng_);
  }
  return green;
}

std::vector<nn::NetManifest> SignalPolicy::manifest(sim::IntersectionId i) const {
  return {{"actor", actors_[i].sizes(), actors_[i].output_activation()},
          {"critic", critics_[i].sizes(), critics_[i].output_activation()}};
}

nn::Checkpoint SignalPolicy::checkpoint(sim::IntersectionId i) const { return {manifest(i), params_[i]}; }

void SignalPolicy::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  for (std::size_t i = 0; i < params_.size(); ++i) {
    nn::save_checkpoint(dir / ("atcs_" + std::to_string(i) + ".ckpt"), checkpoint(static_cast<int>(i)));
  }
}

SignalPolicy SignalPolicy::load(const std::filesystem::path& dir, const sim::RoadNetwork& net, double alpha,
                                SignalShape shape) {
  SignalPolicy policy(net, alpha, shape);
  for (std::size_t i = 0; i < policy.params_.size(); ++i) {
    const int id = static_cast<int>(i);
    auto ckpt = nn::load_checkpoint(dir / ("atcs_" + std::to_string(i) + ".ckpt"), policy.manifest(id));
    policy.params_[i] = std::move(ckpt.params);
  }
  policy.freeze();
  return policy;
}

}  // namespace collusim::atcs
