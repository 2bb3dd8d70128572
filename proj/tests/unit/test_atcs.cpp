#include <cmath>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "collusim/atcs/signal.hpp"
#include "collusim/atcs/train.hpp"
#include "collusim/errors.hpp"
#include "collusim/sim/reports.hpp"

using namespace collusim;

namespace {

std::vector<std::vector<int>> random_counts(const sim::RoadNetwork& net, Rng& rng) {
  std::vector<std::vector<int>> c;
  for (const auto& node : net.intersections) {
    std::vector<int> lanes(node.lanes.size());
    for (auto& x : lanes) x = static_cast<int>(uniform_index(rng, 15));
    c.push_back(lanes);
  }
  return c;
}

atcs::SignalPolicy with_logits(const sim::RoadNetwork& net, std::vector<double> logits) {
  atcs::SignalPolicy p(net, 0.5);
  auto params = p.mutable_parameters(0);
  std::fill(params.begin(), params.end(), 0.0);
  const auto& actor = p.actor(0);
  const std::size_t bias = actor.param_count() - logits.size();
  for (std::size_t k = 0; k < logits.size(); ++k) params[bias + k] = logits[k];
  return p;
}

sim::ScenarioConfig one_way_scenario() {
  nlohmann::json tree;
  tree["network"] = fixtures::single_tree(2, 1);
  tree["sim"] = {{"tau", 5}, {"episode_len", 200}};
  tree["demand"] = {{"vehicles", 80},
                    {"horizon_fraction", 0.8},
                    {"min_route_links", 1},
                    {"profiles", {{"west", {1, 1, 1, 1, 1, 1}}, {"north", {0, 0, 0, 0, 0, 0}}}}};
  tree["collusion"] = {{"size", 1}, {"a_max", 10}};
  return sim::parse_scenario(tree);
}

}  // namespace

TEST_CASE("observation assembles own counts, phase and discounted neighbours") {
  const auto net = fixtures::grid(3, 3);
  Rng rng(1);
  for (int trial = 0; trial < 20; ++trial) {
    const auto counts = random_counts(net, rng);
    std::vector<int> phases(net.intersections.size());
    for (auto& p : phases) p = static_cast<int>(uniform_index(rng, 2));
    for (const auto& node : net.intersections) {
      const double alpha = uniform01(rng);
      std::vector<double> expect;
      for (int c : counts[node.id]) expect.push_back(c);
      for (std::size_t k = 0; k < node.phases.size(); ++k) expect.push_back(phases[node.id] == static_cast<int>(k));
      for (auto j : net.neighbors(node.id))
        for (int c : counts[j]) expect.push_back(alpha * c);
      const auto obs = atcs::signal_observe(net, counts, phases, node.id, alpha);
      CHECK(obs == expect);
      CHECK(static_cast<int>(obs.size()) == atcs::signal_observation_size(net, node.id));
      for (double x : obs) CHECK(x >= 0.0);
    }
  }
}

TEST_CASE("alpha zero hides the neighbours") {
  const auto net = fixtures::grid(3, 3);
  Rng rng(2);
  auto a = random_counts(net, rng);
  auto b = a;
  for (std::size_t i = 0; i < b.size(); ++i)
    if (i != 4)
      for (auto& x : b[i]) x += 7;
  const std::vector<int> phases(9, 1);
  CHECK(atcs::signal_observe(net, a, phases, 4, 0.0) == atcs::signal_observe(net, b, phases, 4, 0.0));
}

TEST_CASE("empty network state gives zero counts with the phase intact") {
  const auto net = fixtures::grid(2, 2);
  const auto scenario = fixtures::desk();
  auto s = sim::make_state(net, {});
  const auto counts = sim::reported_counts_all(net, s, {});
  const std::vector<int> phases{1, 0, 1, 0};
  const auto obs = atcs::signal_observe(net, counts, phases, 0, 0.5);
  const auto lanes = net.intersections[0].lanes.size();
  for (std::size_t k = 0; k < obs.size(); ++k) {
    if (k == lanes + 1)
      CHECK(obs[k] == 1.0);
    else
      CHECK(obs[k] == 0.0);
  }
}

TEST_CASE("inflating one report changes only its entry, upwards") {
  const auto net = fixtures::grid(3, 3);
  Rng rng(3);
  const auto counts = random_counts(net, rng);
  const std::vector<int> phases(9, 0);
  for (int lane = 0; lane < static_cast<int>(counts[4].size()); ++lane) {
    auto inflated = counts;
    inflated[4][lane] += 5;
    const auto a = atcs::signal_observe(net, counts, phases, 4, 0.5);
    const auto b = atcs::signal_observe(net, inflated, phases, 4, 0.5);
    for (std::size_t k = 0; k < a.size(); ++k) {
      if (static_cast<int>(k) == lane)
        CHECK(b[k] > a[k]);
      else
        CHECK(b[k] == a[k]);
    }
  }
}

TEST_CASE("deterministic action is the argmax") {
  const auto net = fixtures::grid(2, 2);
  const auto p = with_logits(net, {5.0, -5.0});
  const auto obs = std::vector<double>(static_cast<std::size_t>(atcs::signal_observation_size(net, 0)), 1.0);
  CHECK(p.act(0, obs, atcs::ActMode::Deterministic) == 0);
  const auto q = with_logits(net, {-5.0, 5.0});
  CHECK(q.act(0, obs, atcs::ActMode::Deterministic) == 1);
}

TEST_CASE("stochastic action with uniform logits is balanced") {
  const auto net = fixtures::grid(2, 2);
  const auto p = with_logits(net, {0.0, 0.0});
  const auto obs = std::vector<double>(static_cast<std::size_t>(atcs::signal_observation_size(net, 0)), 0.0);
  Rng rng(4);
  const int n = 10000;
  int zeros = 0;
  for (int i = 0; i < n; ++i) zeros += p.act(0, obs, atcs::ActMode::Stochastic, &rng) == 0;
  CHECK(std::abs(zeros - n / 2.0) < 3 * std::sqrt(n * 0.25));
}

TEST_CASE("frozen policies reject mutation and act repeatably") {
  const auto net = fixtures::grid(2, 2);
  atcs::SignalPolicy p(net, 0.5);
  p.initialize(1);
  p.freeze();
  CHECK_THROWS_AS(p.mutable_parameters(0), atcs::FrozenPolicyError);
  Rng rng(5);
  const auto obs = std::vector<double>(static_cast<std::size_t>(atcs::signal_observation_size(net, 2)), 0.0);
  auto probe = obs;
  for (auto& x : probe) x = uniform01(rng) * 10;
  CHECK(p.act(2, probe, atcs::ActMode::Deterministic) == p.act(2, probe, atcs::ActMode::Deterministic));
}

TEST_CASE("save and load keep every probe decision") {
  const auto net = fixtures::grid(3, 3);
  atcs::SignalPolicy p(net, 0.5);
  p.initialize(7);
  // Larger weights so the probes are not all decided by one phase.
  for (std::size_t i = 0; i < p.size(); ++i)
    for (auto& w : p.mutable_parameters(static_cast<int>(i))) w *= 40.0;
  const auto dir = std::filesystem::temp_directory_path() / "collusim_atcs_test";
  std::filesystem::remove_all(dir);
  p.save(dir);
  const auto q = atcs::SignalPolicy::load(dir, net, 0.5);
  CHECK(q.frozen());
  Rng rng(8);
  int phase1 = 0;
  for (int k = 0; k < 100; ++k) {
    const int i = static_cast<int>(uniform_index(rng, p.size()));
    std::vector<double> obs(static_cast<std::size_t>(atcs::signal_observation_size(net, i)));
    for (auto& x : obs) x = uniform01(rng) * 10;
    const int a = p.act(i, obs, atcs::ActMode::Deterministic);
    CHECK(a == q.act(i, obs, atcs::ActMode::Deterministic));
    phase1 += a;
  }
  CHECK(phase1 > 0);
  CHECK(phase1 < 100);

  // A manifest edit is caught on load.
  std::ifstream is(dir / "atcs_0.ckpt");
  std::string text((std::istreambuf_iterator<char>(is)), std::istreambuf_iterator<char>());
  is.close();
  const auto at = text.find("actor");
  REQUIRE(at != std::string::npos);
  text.replace(at, 5, "actoz");
  std::ofstream(dir / "atcs_0.ckpt") << text;
  CHECK_THROWS_AS(atcs::SignalPolicy::load(dir, net, 0.5), ConfigError);
  CHECK_THROWS_AS(atcs::SignalPolicy::load(dir / "nothing", net, 0.5), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("reward is own plus discounted neighbour waiting increments") {
  const auto net = fixtures::grid(3, 3);
  Rng rng(9);
  std::vector<std::int64_t> before(net.links.size()), after(net.links.size());
  for (std::size_t l = 0; l < before.size(); ++l) {
    before[l] = static_cast<std::int64_t>(uniform_index(rng, 50));
    after[l] = before[l] + static_cast<std::int64_t>(uniform_index(rng, 10));
  }
  const double alpha = 0.5;
  const auto r = atcs::atcs_rewards(net, before, after, alpha);
  for (const auto& node : net.intersections) {
    auto own = [&](int i) {
      double s = 0.0;
      for (auto l : net.intersections[i].lanes) s += static_cast<double>(after[l] - before[l]);
      return s;
    };
    double expect = -own(node.id);
    for (auto j : net.neighbors(node.id)) expect -= alpha * own(j);
    CHECK(r[node.id] == doctest::Approx(expect).epsilon(1e-12));
  }
}

TEST_CASE("one-way demand teaches the controller to hold the loaded approach") {
  const auto scenario = one_way_scenario();
  const auto net = sim::build_network(scenario.network);
  atcs::AtcsTrainConfig cfg;
  cfg.max_episodes = 60;
  cfg.min_episodes = 30;
  auto result = atcs::train_atcs(net, scenario, cfg, 1);
  auto policy = result.policy;
  int decisions = 0, west = 0;
  struct Counter final : sim::SignalController {
    atcs::SignalPolicy* inner;
    int* decisions;
    int* west;
    std::vector<int> decide(const sim::RoadNetwork& n, const sim::SimState& s, const std::vector<std::vector<int>>& c,
                            std::span<const int> cur) override {
      auto g = inner->decide(n, s, c, cur);
      ++*decisions;
      *west += g[0] == 0;
      return g;
    }
  } counter;
  counter.inner = &policy;
  counter.decisions = &decisions;
  counter.west = &west;
  sim::run_honest_episode(net, scenario.sim, sim::generate_trips(net, scenario, 2), counter);
  REQUIRE(decisions > 0);
  CHECK(static_cast<double>(west) / decisions >= 0.9);
}

TEST_CASE("training is deterministic for a fixed seed") {
  auto scenario = fixtures::desk();
  const auto net = sim::build_network(scenario.network);
  atcs::AtcsTrainConfig cfg;
  cfg.max_episodes = 6;
  cfg.min_episodes = 6;
  cfg.eval_every = 3;
  const auto a = atcs::train_atcs(net, scenario, cfg, 3);
  const auto b = atcs::train_atcs(net, scenario, cfg, 3);
  REQUIRE(a.curve.size() == b.curve.size());
  for (std::size_t i = 0; i < a.curve.size(); ++i) CHECK(a.curve[i].reward == b.curve[i].reward);
  for (std::size_t i = 0; i < a.policy.size(); ++i) {
    const auto pa = a.policy.parameters(static_cast<int>(i));
    const auto pb = b.policy.parameters(static_cast<int>(i));
    CHECK(std::equal(pa.begin(), pa.end(), pb.begin(), pb.end()));
  }
  CHECK(a.policy.frozen());
}
