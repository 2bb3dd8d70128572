#include <cmath>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "collusim/baselines/baselines.hpp"
#include "collusim/errors.hpp"
#include "collusim/harness/experiment.hpp"
#include "collusim/harness/manifest.hpp"
#include "collusim/harness/results.hpp"

using namespace collusim;
using namespace collusim::harness;
namespace fs = std::filesystem;

namespace {

// An untrained, frozen controller saved once so harness tests skip ATCS training.
fs::path saved_atcs() {
  static const fs::path dir = [] {
    const auto d = fs::temp_directory_path() / "collusim_harness_atcs";
    fs::remove_all(d);
    const auto cfg = fixtures::desk_experiment();
    const auto net = sim::build_network(cfg.scenario.network);
    atcs::SignalPolicy p(net, cfg.scenario.alpha, cfg.atcs.shape);
    p.initialize(5);
    p.save(d);
    return d;
  }();
  return dir;
}

ExperimentConfig quick_config() {
  auto cfg = fixtures::desk_experiment();
  cfg.attack.episodes = 2;
  cfg.attack.eval_every = 1;
  cfg.attack.final_window = 2;
  return cfg;
}

collusion::EpisodeMetrics metrics_with_reward(double r) {
  collusion::EpisodeMetrics m;
  m.reward = r;
  m.colluding_wait = 2.0;
  return m;
}

}  // namespace

TEST_CASE("population statistics") {
  const auto s = mean_std({-10.0, -20.0});
  CHECK(s.mean == -15.0);
  CHECK(s.std == 5.0);
  const auto a = aggregate("stub", {metrics_with_reward(3.0), metrics_with_reward(3.0), metrics_with_reward(3.0)});
  CHECK(a.reward.std == 0.0);
  CHECK(a.colluding_wait.mean == 2.0);
  CHECK(a.seeds == 3);
  CHECK_THROWS(aggregate("one", {metrics_with_reward(1.0)}));
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    std::vector<double> xs(2 + uniform_index(rng, 8));
    for (auto& x : xs) x = 100 * uniform01(rng) - 50;
    const auto st = mean_std(xs);
    double m = 0.0;
    for (double x : xs) m += x;
    m /= static_cast<double>(xs.size());
    double v = 0.0;
    for (double x : xs) v += (x - m) * (x - m);
    CHECK(st.mean == doctest::Approx(m).epsilon(1e-12));
    CHECK(st.std == doctest::Approx(std::sqrt(v / static_cast<double>(xs.size()))).epsilon(1e-12));
    CHECK(st.std >= 0.0);
  }
}

TEST_CASE("baseline actions") {
  baselines::BaselineAttack one({baselines::BaselineKind::AllK, 1});
  baselines::BaselineAttack greedy({baselines::BaselineKind::GreedyCap, 10});
  for (int a = 0; a < 5; ++a) {
    CHECK(one.act(a) == 1);
    CHECK(greedy.act(a) == 10);
  }
  baselines::BaselineAttack random({baselines::BaselineKind::Random, 10}, 3);
  random.begin_episode(0);
  const int n = 100000;
  std::vector<int> freq(11, 0);
  for (int i = 0; i < n; ++i) ++freq[static_cast<std::size_t>(random.act(i % 4))];
  const double p = 1.0 / 11, sigma = std::sqrt(n * p * (1 - p));
  for (int f : freq) CHECK(std::abs(f - n * p) < 3 * sigma);
}

TEST_CASE("baseline parsing and validation") {
  CHECK(baselines::parse_baseline("all:5").value == 5);
  CHECK(baselines::parse_baseline("greedy:10").kind == baselines::BaselineKind::GreedyCap);
  CHECK(baselines::parse_baseline("random:3").kind == baselines::BaselineKind::Random);
  CHECK_THROWS_AS(baselines::parse_baseline("most:3"), ConfigError);
  CHECK_THROWS_AS(baselines::parse_baseline("all:x"), ConfigError);
  CHECK_THROWS_AS(baselines::validate_baseline({baselines::BaselineKind::AllK, 11}, 10), ConfigError);
  CHECK_NOTHROW(baselines::validate_baseline({baselines::BaselineKind::AllK, 1}, 0));
  CHECK(parse_policy("learned", 10).kind == PolicyKind::Learned);
  CHECK(parse_policy("learned:/tmp/x", 10).dir == fs::path("/tmp/x"));
  CHECK_THROWS_AS(parse_policy("greedy:11", 10), ConfigError);
}

TEST_CASE("episodes are deterministic and zero demand is empty") {
  auto cfg = quick_config();
  const auto net = sim::build_network(cfg.scenario.network);
  auto ctl = atcs::SignalPolicy::load(saved_atcs(), net, cfg.scenario.alpha);
  baselines::BaselineAttack a({baselines::BaselineKind::AllK, 1}), b({baselines::BaselineKind::AllK, 1});
  const auto r1 = run_episode(net, cfg.scenario, ctl, a, 0);
  const auto r2 = run_episode(net, cfg.scenario, ctl, b, 0);
  CHECK(r1.metrics.reward == r2.metrics.reward);
  CHECK(r1.metrics.other_travel == r2.metrics.other_travel);

  cfg.scenario.demand.vehicles = 0;
  cfg.scenario.collusion_size = 0;
  const auto empty = run_episode(net, cfg.scenario, ctl, a, 0);
  CHECK(empty.metrics.reward == 0.0);
  CHECK(empty.metrics.colluding_count == 0);
  CHECK(empty.metrics.other_count == 0);
  CHECK(empty.metrics.other_travel == 0.0);
}

TEST_CASE("trace replay reproduces the metrics") {
  const auto cfg = quick_config();
  const auto net = sim::build_network(cfg.scenario.network);
  auto ctl = atcs::SignalPolicy::load(saved_atcs(), net, cfg.scenario.alpha);
  baselines::BaselineAttack attack({baselines::BaselineKind::Random, 10}, 2);
  const auto r = run_episode(net, cfg.scenario, ctl, attack, 1);
  std::stringstream ss;
  sim::write_trace(ss, r.trace);
  const auto back = sim::read_trace(ss);
  // Independent recomputation from the parsed rows.
  double ct = 0, cw = 0, ot = 0, ow = 0;
  int nc = 0, no = 0;
  for (const auto& v : back.vehicles) {
    if (!v.departed) continue;
    const double travel = (v.done_step ? *v.done_step : back.episode_len) - v.depart_step;
    if (v.colluding) {
      ct += travel;
      cw += v.wait;
      ++nc;
    } else {
      ot += travel;
      ow += v.wait;
      ++no;
    }
  }
  double reward = 0;
  for (const auto& d : back.decisions) reward += d.reward;
  CHECK(r.metrics.colluding_travel == doctest::Approx(ct / nc).epsilon(1e-15));
  CHECK(r.metrics.colluding_wait == doctest::Approx(cw / nc).epsilon(1e-15));
  CHECK(r.metrics.other_travel == doctest::Approx(ot / no).epsilon(1e-15));
  CHECK(r.metrics.other_wait == doctest::Approx(ow / no).epsilon(1e-15));
  CHECK(r.metrics.reward == doctest::Approx(reward).epsilon(1e-15));
}

TEST_CASE("arm evaluation isolates seeds and ignores the job count") {
  const auto cfg = quick_config();
  const auto net = sim::build_network(cfg.scenario.network);
  AtcsProvider atcs(net, cfg, saved_atcs());
  const auto spec = parse_policy("random:10", 10);
  const auto a = evaluate_arm(cfg, net, atcs, spec, {0, 1, 10}, 1);
  const auto b = evaluate_arm(cfg, net, atcs, spec, {0, 1, 10}, 3);
  const auto c = evaluate_arm(cfg, net, atcs, spec, {12, 0}, 2);
  REQUIRE(a.aggregate);
  CHECK_FALSE(a.failed);
  for (std::size_t i = 0; i < 3; ++i) CHECK(a.runs[i].metrics.reward == b.runs[i].metrics.reward);
  CHECK(a.runs[0].metrics.reward == c.runs[1].metrics.reward);
  CHECK(a.runs[0].metrics.colluding_wait == c.runs[1].metrics.colluding_wait);
  CHECK_THROWS_AS(evaluate_arm(cfg, net, atcs, spec, {0}, 1), ConfigError);
}

TEST_CASE("a failing seed marks the arm without touching the others") {
  const auto cfg = quick_config();
  const auto net = sim::build_network(cfg.scenario.network);
  const auto dir = fs::temp_directory_path() / "collusim_learned_dir";
  fs::remove_all(dir);
  collusion::CollusionNet model(collusion::ObservationLayout::of(net, cfg.scenario.k_intervals),
                                cfg.scenario.collusion_size, collusion::ActionSpace{cfg.scenario.a_max});
  model.initialize(3);
  save_attack(dir / "seed_0", model);
  save_attack(dir / "seed_10", model);
  AtcsProvider atcs(net, cfg, saved_atcs());
  const auto arm = evaluate_arm(cfg, net, atcs, parse_policy("learned:" + dir.string(), 10), {0, 1, 10}, 2);
  CHECK(arm.failed);
  CHECK(arm.runs[0].ok);
  CHECK_FALSE(arm.runs[1].ok);
  CHECK(arm.runs[1].error_kind == "io");
  CHECK(arm.runs[2].ok);
  REQUIRE(arm.aggregate);
  CHECK(arm.aggregate->seeds == 2);
  const auto table = metrics_table({arm}, 1.0);
  CHECK(format_cell(table.rows[1].back()) == "failed:io");
  fs::remove_all(dir);
}

TEST_CASE("ablation arms share budgets and report parameter counts") {
  auto cfg = quick_config();
  const auto net = sim::build_network(cfg.scenario.network);
  AtcsProvider atcs(net, cfg, saved_atcs());
  const auto rows = run_ablation(cfg, net, atcs, {0, 1}, 2);
  REQUIRE(rows.size() == 8);
  std::map<collusion::Arm, std::size_t> priv;
  for (const auto& r : rows) {
    CHECK(r.run.ok);
    REQUIRE(r.run.training);
    CHECK(r.run.training->curve.size() == static_cast<std::size_t>(cfg.attack.episodes));
    priv[r.arm] = r.private_params;
  }
  CHECK(priv[collusion::Arm::VehInt] > priv[collusion::Arm::RoadEncVehInt]);
  const auto t = ablation_table(rows);
  CHECK(t.header.front() == "arm");
  CHECK(t.rows.size() == 8 + 2 * 4);
}

TEST_CASE("collusion-size sweep uses nested groups") {
  const auto cfg = quick_config();
  const auto net = sim::build_network(cfg.scenario.network);
  AtcsProvider atcs(net, cfg, saved_atcs());
  const auto rows = sweep_collusion_size(cfg, net, atcs, {2, 4, 8}, {42}, 2);
  REQUIRE(rows.size() == 3);
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const std::set<int> small(rows[i - 1].colluders.begin(), rows[i - 1].colluders.end());
    const std::set<int> big(rows[i].colluders.begin(), rows[i].colluders.end());
    CHECK(std::includes(big.begin(), big.end(), small.begin(), small.end()));
    CHECK(big.size() == static_cast<std::size_t>(rows[i].size));
  }
  for (const auto& r : rows) {
    REQUIRE(r.learned.ok);
    CHECK(r.avg_time_saved == r.all_one.metrics.colluding_wait - r.learned.metrics.colluding_wait);
    CHECK(r.total_time_saved == doctest::Approx(r.avg_time_saved * r.size));
  }
  CHECK_THROWS_AS(sweep_collusion_size(cfg, net, atcs, {4, 2}, {42}, 1), ConfigError);
  CHECK_THROWS_AS(sweep_collusion_size(cfg, net, atcs, {4, 5000}, {42}, 1), ConfigError);
}

TEST_CASE("action sweep at cap one collapses greedy onto all-one") {
  const auto cfg = quick_config();
  const auto net = sim::build_network(cfg.scenario.network);
  AtcsProvider atcs(net, cfg, saved_atcs());
  const auto rows = sweep_action_space(cfg, net, atcs, {1}, {42}, 1);
  REQUIRE(rows.size() == 1);
  CHECK(rows[0].greedy.metrics.reward == rows[0].all_one.metrics.reward);
  CHECK(rows[0].greedy.metrics.colluding_wait == rows[0].all_one.metrics.colluding_wait);
  CHECK(rows[0].learned.ok);
  CHECK_THROWS_AS(sweep_action_space(cfg, net, atcs, {0}, {42}, 1), ConfigError);
}

TEST_CASE("csv export is stable and parses back exactly") {
  Table t;
  t.header = {"arm", "seed", "value"};
  Rng rng(4);
  std::vector<double> values;
  for (int i = 0; i < 50; ++i) {
    const double v = (uniform01(rng) - 0.5) * std::pow(10.0, static_cast<double>(uniform_index(rng, 12)) - 6);
    values.push_back(v);
    t.add({std::string("a"), static_cast<long long>(i), v});
  }
  CHECK_THROWS(t.add({std::string("short")}));
  std::ostringstream a, b;
  write_csv(a, t);
  write_csv(b, t);
  CHECK(a.str() == b.str());
  std::istringstream is(a.str());
  const auto rows = read_csv(is);
  REQUIRE(rows.size() == 51);
  CHECK(rows[0] == std::vector<std::string>{"arm", "seed", "value"});
  for (int i = 0; i < 50; ++i) CHECK(std::stod(rows[static_cast<std::size_t>(i + 1)][2]) == values[static_cast<std::size_t>(i)]);

  const auto path = fs::temp_directory_path() / "collusim_csv_test" / "t.csv";
  write_csv(path, t);
  write_csv(path, t);
  std::ifstream f(path);
  std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  CHECK(text == a.str());
  fs::remove_all(path.parent_path());
}

TEST_CASE("metrics table columns are fixed") {
  ArmResult arm;
  arm.label = "all:1";
  const auto t = metrics_table({arm}, 2.0);
  CHECK(t.header == std::vector<std::string>{"arm", "row", "seed", "reward", "colluding_travel", "colluding_wait",
                                             "other_travel", "other_wait", "colluding_travel_s", "colluding_wait_s",
                                             "other_travel_s", "other_wait_s", "colluding_count", "other_count",
                                             "censored", "status"});
}

TEST_CASE("experiment config parsing and hashing") {
  const auto tree = fixtures::desk_tree();
  const auto cfg = parse_experiment(tree);
  CHECK(cfg.scenario.collusion_size == 12);
  CHECK(cfg.ablation_arms.size() == 4);
  CHECK(config_hash(tree) == config_hash(fixtures::desk_tree()));
  CHECK(config_hash(tree).size() == 16);
  auto changed = tree;
  changed["alpha"] = 0.25;
  CHECK(config_hash(changed) != config_hash(tree));
  auto bad = tree;
  bad["sweeps"] = {{"sizes", {8, 4}}};
  CHECK_THROWS_AS(parse_experiment(bad), ConfigError);
  bad = tree;
  bad["ablation"] = {{"arms", {"full", "nothing"}}};
  CHECK_THROWS_AS(parse_experiment(bad), ConfigError);
  bad = tree;
  bad["attack"] = {{"episodes", "many"}};
  CHECK_THROWS_AS(parse_experiment(bad), ConfigError);
  CHECK_THROWS_AS(load_experiment("/nonexistent/config.json"), IoError);
}

TEST_CASE("manifest round trip") {
  RunManifest m;
  m.command = "eval";
  m.args = {"--config", "c.json", "--seeds", "0,1"};
  m.config_path = "c.json";
  m.config_hash = "0123456789abcdef";
  m.code_version = code_version();
  m.seeds = {0, 1};
  m.outputs = {"metrics.csv"};
  const auto dir = fs::temp_directory_path() / "collusim_manifest_test";
  write_manifest(dir, m);
  const auto back = read_manifest(dir / "manifest.json");
  CHECK(back.command == m.command);
  CHECK(back.args == m.args);
  CHECK(back.seeds == m.seeds);
  CHECK(back.outputs == m.outputs);
  CHECK(back.config_hash == m.config_hash);
  CHECK_FALSE(back.code_version.empty());
  fs::remove_all(dir);
}
