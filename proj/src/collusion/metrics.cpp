#include "collusim/collusion/metrics.hpp"

namespace collusim::collusion {

EpisodeMetrics episode_metrics(const sim::EpisodeTrace& trace) {
  EpisodeMetrics m;
  for (const auto& d : trace.decisions) m.reward += d.reward;
  double ct = 0.0, cw = 0.0, ot = 0.0, ow = 0.0;
  for (const auto& v : trace.vehicles) {
    if (!v.departed) continue;
    const int end = v.done_step ? *v.done_step : trace.episode_len;
    if (!v.done_step) ++m.censored;
    const double travel = end - v.depart_step;
    if (v.colluding) {
      ct += travel;
      cw += v.wait;
      ++m.colluding_count;
    } else {
      ot += travel;
      ow += v.wait;
      ++m.other_count;
    }
  }
  if (m.colluding_count > 0) {
    m.colluding_travel = ct / m.colluding_count;
    m.colluding_wait = cw / m.colluding_count;
  }
  if (m.other_count > 0) {
    m.other_travel = ot / m.other_count;
    m.other_wait = ow / m.other_count;
  }
  return m;
}

}  // namespace collusim::collusion
