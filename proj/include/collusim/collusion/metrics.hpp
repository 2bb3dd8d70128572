#pragma once

#include "collusim/sim/trace.hpp"

namespace collusim::collusion {

/// The five episode metrics in steps. Averages run over departed vehicles; a vehicle
/// unfinished at the episode end counts with travel time episode_len - depart_step and
/// is tallied in `censored`.
struct EpisodeMetrics {
  double reward = 0.0;
  double colluding_travel = 0.0;
  double colluding_wait = 0.0;
  double other_travel = 0.0;
  double other_wait = 0.0;
  int colluding_count = 0;
  int other_count = 0;
  int censored = 0;
};

EpisodeMetrics episode_metrics(const sim::EpisodeTrace& trace);

}  // namespace collusim::collusion
