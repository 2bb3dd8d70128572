#include "collusim/collusion/episode.hpp"

#include <stdexcept>

#include "collusim/sim/reports.hpp"

namespace collusim::collusion {

double compute_reward(std::span<const int> wait_before, std::span<const int> wait_after) {
  if (wait_before.size() != wait_after.size()) throw std::invalid_argument("wait vectors differ in length");
  if (wait_before.empty()) return 0.0;
  long long sum = 0;
  for (std::size_t i = 0; i < wait_before.size(); ++i) sum += wait_after[i] - wait_before[i];
  return -static_cast<double>(sum) / static_cast<double>(wait_before.size());
}

EpisodeResult run_attack_episode(const sim::RoadNetwork& net, const sim::ScenarioConfig& scenario,
                                 const std::vector<sim::VehicleSpec>& trips, std::span<const int> colluders,
                                 sim::SignalController& atcs, AttackPolicy& policy, std::uint64_t seed,
                                 const sim::StepObserver& observer) {
  sim::TrafficEnv env(net, scenario.sim, trips, seed);
  atcs.reset();
  policy.begin_episode(seed);

  EpisodeResult result;
  result.trace.episode_len = scenario.sim.episode_len;
  result.trace.seed = seed;
  result.trace.policy = policy.name();

  int decision = 0;
  while (!env.done()) {
    const sim::SimState& st = env.state();
    DecisionContext ctx;
    ctx.net = &net;
    ctx.state = &st;
    ctx.decision = decision;
    for (std::size_t a = 0; a < colluders.size(); ++a) {
      const int v = colluders[a];
      if (!st.vehicles[v].running()) continue;
      ctx.agents.push_back(static_cast<int>(a));
      ctx.vehicles.push_back(v);
      ctx.upcoming.push_back(upcoming_intersection(net, st, v));
      ctx.observations.push_back(
          observe_vehicle(net, st, v, scenario.k_intervals, scenario.sim.episode_len).flat());
    }

    std::vector<int> counts;
    if (!ctx.agents.empty()) {
      counts = policy.decide(ctx);
      if (counts.size() != ctx.agents.size()) throw std::logic_error("attack policy returned the wrong report count");
    }
    std::vector<sim::PresenceReport> reports;
    for (std::size_t i = 0; i < ctx.vehicles.size(); ++i) {
      const auto& veh = st.vehicles[ctx.vehicles[i]];
      if (sim::present_on_lane(net, veh, veh.link())) reports.push_back({veh.id, veh.link(), counts[i]});
    }

    sim::DecisionRecord rec;
    rec.clock = st.clock;
    rec.agents = ctx.vehicles;
    rec.reported = counts;
    for (int v : ctx.vehicles) rec.wait_before.push_back(st.vehicles[v].wait);

    const auto reported = sim::reported_counts_all(net, st, reports);
    const auto green = atcs.decide(net, st, reported, env.phases());
    env.advance(green, scenario.sim.tau, observer);

    for (int v : ctx.vehicles) rec.wait_after.push_back(env.state().vehicles[v].wait);
    rec.reward = compute_reward(rec.wait_before, rec.wait_after);
    if (!ctx.agents.empty()) policy.feedback(ctx.agents, rec.reward, env.done());
    result.trace.decisions.push_back(std::move(rec));
    ++decision;
  }
  policy.end_episode();

  result.final_state = env.state();
  result.trace.vehicles = sim::vehicle_outcomes(result.final_state);
  result.metrics = episode_metrics(result.trace);
  return result;
}

}  // namespace collusim::collusion
