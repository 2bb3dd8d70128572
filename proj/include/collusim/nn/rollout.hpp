#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace collusim::nn {

/// Column store of on-policy experience. A row is one (agent, decision) pair; rows of a
/// trajectory share `trajectory` and the last one carries done = 1.
struct RolloutBuffer {
  std::vector<int> trajectory;
  std::vector<int> agent;
  std::vector<std::vector<double>> observation;
  std::vector<std::vector<double>> context;  // model-specific side input
  std::vector<int> action;
  std::vector<double> log_prob;  // under the behaviour policy
  std::vector<double> reward;
  std::vector<double> value;
  std::vector<std::uint8_t> done;

  std::size_t size() const { return action.size(); }
  bool empty() const { return action.empty(); }

  /// Appends a row whose reward/done are filled in later by set_outcome.
  std::size_t add(int traj, int agent_id, std::vector<double> obs, std::vector<double> ctx, int act, double logp,
                  double v);
  void set_outcome(std::size_t row, double r, bool is_done);
  void append(const RolloutBuffer& other);
  void clear();

  /// Equal column lengths and finite log-probabilities that are <= 0.
  bool valid() const;
};

}  // namespace collusim::nn
