#include "collusim/baselines/baselines.hpp"

#include <charconv>

#include "collusim/errors.hpp"

namespace collusim::baselines {

BaselinePolicy parse_baseline(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw ConfigError("policy", "expected <kind>:<value>, got '" + text + "'");
  const std::string kind = text.substr(0, colon);
  const std::string num = text.substr(colon + 1);
  int value = 0;
  const auto [ptr, ec] = std::from_chars(num.data(), num.data() + num.size(), value);
  if (ec != std::errc() || ptr != num.data() + num.size() || value < 0) {
    throw ConfigError("policy", "bad value in '" + text + "'");
  }
  if (kind == "all") return {BaselineKind::AllK, value};
  if (kind == "greedy") return {BaselineKind::GreedyCap, value};
  if (kind == "random") return {BaselineKind::Random, value};
  throw ConfigError("policy", "unknown baseline kind '" + kind + "'");
}

void validate_baseline(const BaselinePolicy& policy, int a_max) {
  if (policy.kind == BaselineKind::AllK && policy.value == 1) return;
  if (policy.value > a_max) {
    throw ConfigError("policy", baseline_name(policy) + " exceeds the action cap " + std::to_string(a_max));
  }
}

std::string baseline_name(const BaselinePolicy& policy) {
  switch (policy.kind) {
    case BaselineKind::AllK: return "all:" + std::to_string(policy.value);
    case BaselineKind::GreedyCap: return "greedy:" + std::to_string(policy.value);
    case BaselineKind::Random: return "random:" + std::to_string(policy.value);
  }
  return "?";
}

BaselineAttack::BaselineAttack(BaselinePolicy policy, std::uint64_t seed) : policy_(policy), seed_(seed) {}

void BaselineAttack::begin_episode(std::uint64_t seed) {
  seed_ = seed;
  streams_.clear();
}

int BaselineAttack::act(int agent) {
  if (policy_.kind != BaselineKind::Random) return policy_.value;
  while (static_cast<int>(streams_.size()) <= agent) {
    streams_.emplace_back(mix_seed(seed_, 0x4a0d + streams_.size()));
  }
  return static_cast<int>(uniform_index(streams_[agent], static_cast<std::uint64_t>(policy_.value) + 1));
}

std::vector<int> BaselineAttack::decide(const collusion::DecisionContext& ctx) {
  std::vector<int> out;
  out.reserve(ctx.agents.size());
  for (int a : ctx.agents) out.push_back(act(a));
  return out;
}

}  // namespace collusim::baselines
