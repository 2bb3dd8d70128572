#include "collusim/nn/rollout.hpp"

#include <cmath>

namespace collusim::nn {

std::size_t RolloutBuffer::add(int traj, int agent_id, std::vector<double> obs, std::vector<double> ctx, int act,
                               double logp, double v) {
  trajectory.push_back(traj);
  agent.push_back(agent_id);
  observation.push_back(std::move(obs));
  context.push_back(std::move(ctx));
  action.push_back(act);
  log_prob.push_back(logp);
  reward.push_back(0.0);
  value.push_back(v);
  done.push_back(0);
  return action.size() - 1;
}

void RolloutBuffer::set_outcome(std::size_t row, double r, bool is_done) {
  reward.at(row) = r;
  done.at(row) = is_done ? 1 : 0;
}

void RolloutBuffer::append(const RolloutBuffer& o) {
  trajectory.insert(trajectory.end(), o.trajectory.begin(), o.trajectory.end());
  agent.insert(agent.end(), o.agent.begin(), o.agent.end());
  observation.insert(observation.end(), o.observation.begin(), o.observation.end());
  context.insert(context.end(), o.context.begin(), o.context.end());
  action.insert(action.end(), o.action.begin(), o.action.end());
  log_prob.insert(log_prob.end(), o.log_prob.begin(), o.log_prob.end());
  reward.insert(reward.end(), o.reward.begin(), o.reward.end());
  value.insert(value.end(), o.value.begin(), o.value.end());
  done.insert(done.end(), o.done.begin(), o.done.end());
}

void RolloutBuffer::clear() { *this = RolloutBuffer{}; }

bool RolloutBuffer::valid() const {
  const std::size_t n = action.size();
  if (trajectory.size() != n || agent.size() != n || observation.size() != n || context.size() != n ||
      log_prob.size() != n || reward.size() != n || value.size() != n || done.size() != n) {
    return false;
  }
  for (double lp : log_prob) {
    if (!std::isfinite(lp) || lp > 0.0) return false;
  }
  return true;
}

}  // namespace collusim::nn
