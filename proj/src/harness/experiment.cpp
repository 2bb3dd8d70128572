#include "collusim/harness/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

#include "collusim/errors.hpp"

namespace collusim::harness {

namespace fs = std::filesystem;
using nlohmann::json;

void parallel_for(std::size_t n, int jobs, const std::function<void(std::size_t)>& fn) {
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, jobs)));
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

World make_world(const sim::RoadNetwork& net, const sim::ScenarioConfig& scenario, std::uint64_t seed) {
  World w;
  w.trips = sim::generate_trips(net, scenario, seed);
  const auto order = sim::collusion_order(w.trips, scenario, seed);
  if (scenario.collusion_size > static_cast<int>(order.size()))
    throw ConfigError("collusion_size", "needs " + std::to_string(scenario.collusion_size) +
                                            " colluders but only " + std::to_string(order.size()) +
                                            " vehicles are eligible for seed " + std::to_string(seed));
  w.colluders = sim::mark_colluders(w.trips, order, scenario.collusion_size);
  return w;
}

AtcsProvider::AtcsProvider(const sim::RoadNetwork& net, const ExperimentConfig& config,
                           std::optional<fs::path> dir)
    : net_(&net), config_(&config), dir_(std::move(dir)) {}

atcs::SignalPolicy AtcsProvider::get(std::uint64_t seed) {
  {
    std::lock_guard lock(mutex_);
    if (dir_) {
      if (auto it = loaded_.find(seed); it != loaded_.end()) return it->second;
    } else if (auto it = trained_.find(seed); it != trained_.end()) {
      return it->second.policy;
    }
  }
  if (dir_) {
    const fs::path per_seed = *dir_ / ("seed_" + std::to_string(seed));
    const fs::path from = fs::is_directory(per_seed) ? per_seed : *dir_;
    auto policy = atcs::SignalPolicy::load(from, *net_, config_->scenario.alpha, config_->atcs.shape);
    policy.set_mode(atcs::ActMode::Deterministic);
    std::lock_guard lock(mutex_);
    return loaded_.emplace(seed, std::move(policy)).first->second;
  }
  // Trained outside the lock; a racing duplicate produces the same result.
  auto result = atcs::train_atcs(*net_, config_->scenario, config_->atcs, seed);
  result.policy.set_mode(atcs::ActMode::Deterministic);
  std::lock_guard lock(mutex_);
  return trained_.emplace(seed, std::move(result)).first->second.policy;
}

std::optional<atcs::AtcsTrainResult> AtcsProvider::training(std::uint64_t seed) {
  std::lock_guard lock(mutex_);
  if (auto it = trained_.find(seed); it != trained_.end()) return it->second;
  return std::nullopt;
}

PolicySpec parse_policy(const std::string& text, int a_max) {
  PolicySpec spec;
  spec.label = text;
  if (text == "learned") {
    spec.kind = PolicyKind::Learned;
    return spec;
  }
  if (text.rfind("learned:", 0) == 0) {
    spec.kind = PolicyKind::LearnedDir;
    spec.dir = text.substr(8);
    if (spec.dir.empty()) throw ConfigError("policy", "learned:<dir> needs a directory");
    return spec;
  }
  spec.kind = PolicyKind::Baseline;
  spec.baseline = baselines::parse_baseline(text);
  baselines::validate_baseline(spec.baseline, a_max);
  return spec;
}

void save_attack(const fs::path& dir, const collusion::CollusionNet& net) {
  net.save(dir);
  json j;
  j["arm"] = collusion::arm_name(net.arm());
  j["agents"] = net.agents();
  j["a_max"] = net.actions().a_max;
  j["k_intervals"] = net.layout().k_intervals;
  j["sizes"] = {{"embed", net.sizes().embed},
                {"plcy", net.sizes().plcy},
                {"msg", net.sizes().msg},
                {"trunk", net.sizes().trunk},
                {"count_scale", net.sizes().count_scale}};
  std::ofstream os(dir / "attack.json", std::ios::binary);
  if (!os) throw IoError("cannot write " + (dir / "attack.json").string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("failed writing attack.json");
}

collusion::CollusionNet load_attack(const fs::path& dir, const sim::RoadNetwork& net,
                                    const sim::ScenarioConfig& scenario, const collusion::AttackTrainConfig& config) {
  std::ifstream is(dir / "attack.json", std::ios::binary);
  if (!is) throw IoError("cannot read " + (dir / "attack.json").string());
  collusion::Arm arm = collusion::Arm::Full;
  collusion::NetSizes sizes = config.sizes;
  int agents = 0, a_max = 0, k = 0;
  try {
    const json j = json::parse(is);
    arm = collusion::parse_arm(j.at("arm").get<std::string>());
    agents = j.at("agents").get<int>();
    a_max = j.at("a_max").get<int>();
    k = j.at("k_intervals").get<int>();
    const auto& s = j.at("sizes");
    sizes.embed = s.at("embed").get<int>();
    sizes.plcy = s.at("plcy").get<int>();
    sizes.msg = s.at("msg").get<int>();
    sizes.trunk = s.at("trunk").get<int>();
    sizes.count_scale = s.at("count_scale").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError((dir / "attack.json").string(), e.what());
  }
  if (agents != scenario.collusion_size)
    throw ConfigError("checkpoint", "trained for " + std::to_string(agents) + " colluders, scenario has " +
                                        std::to_string(scenario.collusion_size));
  if (a_max != scenario.a_max)
    throw ConfigError("checkpoint", "trained with a_max " + std::to_string(a_max) + ", scenario has " +
                                        std::to_string(scenario.a_max));
  if (k != scenario.k_intervals) throw ConfigError("checkpoint", "k_intervals differs from the scenario");
  collusion::CollusionNet model(collusion::ObservationLayout::of(net, k), agents, collusion::ActionSpace{a_max}, arm,
                                sizes);
  model.load(dir);
  return model;
}

collusion::EpisodeResult run_episode(const sim::RoadNetwork& net, const sim::ScenarioConfig& scenario,
                                     sim::SignalController& controller, collusion::AttackPolicy& policy,
                                     std::uint64_t seed) {
  const World w = make_world(net, scenario, seed);
  return collusion::run_attack_episode(net, scenario, w.trips, w.colluders, controller, policy, seed);
}

namespace {

void record_failure(SeedRun& run, const std::exception& e) {
  run.ok = false;
  run.error = e.what();
  if (dynamic_cast<const TrainingDiverged*>(&e))
    run.error_kind = "diverged";
  else if (dynamic_cast<const ConfigError*>(&e))
    run.error_kind = "config";
  else if (dynamic_cast<const IoError*>(&e))
    run.error_kind = "io";
  else
    run.error_kind = "other";
}

SeedRun run_seed_impl(const ExperimentConfig& config, const sim::RoadNetwork& net, AtcsProvider& atcs,
                      const PolicySpec& policy, std::uint64_t seed, collusion::Arm arm) {
  SeedRun run;
  run.seed = seed;
  try {
    const auto& sc = config.scenario;
    const World w = make_world(net, sc, seed);
    auto controller = atcs.get(seed);
    collusion::EpisodeResult result;
    switch (policy.kind) {
      case PolicyKind::Baseline: {
        baselines::BaselineAttack attack(policy.baseline, seed);
        result = collusion::run_attack_episode(net, sc, w.trips, w.colluders, controller, attack, seed);
        break;
      }
      case PolicyKind::Learned: {
        auto trained = collusion::train_collusion(net, sc, w.trips, w.colluders, controller, arm, config.attack, seed);
        collusion::LearnedPolicy greedy(trained.net, collusion::Mode::Greedy);
        result = collusion::run_attack_episode(net, sc, w.trips, w.colluders, controller, greedy, seed);
        run.training = std::move(trained);
        break;
      }
      case PolicyKind::LearnedDir: {
        const fs::path per_seed = policy.dir / ("seed_" + std::to_string(seed));
        const auto model =
            load_attack(fs::is_directory(per_seed) ? per_seed : policy.dir, net, sc, config.attack);
        collusion::LearnedPolicy greedy(model, collusion::Mode::Greedy);
        result = collusion::run_attack_episode(net, sc, w.trips, w.colluders, controller, greedy, seed);
        break;
      }
    }
    run.metrics = result.metrics;
    run.trace = std::move(result.trace);
    run.trace.policy = policy.label;
    run.ok = true;
  } catch (const std::exception& e) {
    record_failure(run, e);
  }
  return run;
}

}  // namespace

SeedRun run_seed(const ExperimentConfig& config, const sim::RoadNetwork& net, AtcsProvider& atcs,
                 const PolicySpec& policy, std::uint64_t seed) {
  return run_seed_impl(config, net, atcs, policy, seed, policy.arm);
}

Stat mean_std(const std::vector<double>& xs) {
  if (xs.empty()) throw std::invalid_argument("mean_std of an empty sample");
  double sum = 0.0;
  for (double x : xs) sum += x;
  const double mean = sum / static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(xs.size()))};
}

AggregateResult aggregate(const std::string& label, const std::vector<collusion::EpisodeMetrics>& runs) {
  if (runs.size() < 2) throw std::invalid_argument("aggregation needs at least two seeds");
  auto column = [&](auto field) {
    std::vector<double> xs;
    for (const auto& m : runs) xs.push_back(static_cast<double>(m.*field));
    return mean_std(xs);
  };
  using M = collusion::EpisodeMetrics;
  AggregateResult a;
  a.label = label;
  a.seeds = runs.size();
  a.reward = column(&M::reward);
  a.colluding_travel = column(&M::colluding_travel);
  a.colluding_wait = column(&M::colluding_wait);
  a.other_travel = column(&M::other_travel);
  a.other_wait = column(&M::other_wait);
  a.censored = column(&M::censored);
  return a;
}

ArmResult evaluate_arm(const ExperimentConfig& config, const sim::RoadNetwork& net, AtcsProvider& atcs,
                       const PolicySpec& policy, const std::vector<std::uint64_t>& seeds, int jobs) {
  if (seeds.size() < 2) throw ConfigError("seeds", "evaluation needs at least two seeds");
  ArmResult arm;
  arm.label = policy.label;
  arm.runs.resize(seeds.size());
  parallel_for(seeds.size(), jobs, [&](std::size_t i) { arm.runs[i] = run_seed(config, net, atcs, policy, seeds[i]); });
  std::vector<collusion::EpisodeMetrics> ok;
  for (const auto& r : arm.runs) {
    if (r.ok)
      ok.push_back(r.metrics);
    else
      arm.failed = true;
  }
  if (ok.size() >= 2) arm.aggregate = aggregate(arm.label, ok);
  return arm;
}

std::vector<AblationRow> run_ablation(const ExperimentConfig& config, const sim::RoadNetwork& net,
                                      AtcsProvider& atcs, const std::vector<std::uint64_t>& seeds, int jobs) {
  const auto& arms = config.ablation_arms;
  std::vector<AblationRow> rows(arms.size() * seeds.size());
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    auto& row = rows[i];
    row.arm = arms[i / seeds.size()];
    PolicySpec spec;
    spec.kind = PolicyKind::Learned;
    spec.arm = row.arm;
    spec.label = collusion::arm_name(row.arm);
    row.run = run_seed(config, net, atcs, spec, seeds[i % seeds.size()]);
    if (row.run.training) {
      const auto& t = *row.run.training;
      row.final_reward = t.final_reward;
      row.eval_reward = row.run.metrics.reward;
      row.shared_params = t.net.shared_param_count();
      row.private_params = t.net.private_param_count();
      row.best_episode = t.best_episode;
    }
  });
  return rows;
}

std::vector<SizeSweepRow> sweep_collusion_size(const ExperimentConfig& config, const sim::RoadNetwork& net,
                                               AtcsProvider& atcs, const std::vector<int>& sizes,
                                               const std::vector<std::uint64_t>& seeds, int jobs) {
  if (sizes.empty()) throw ConfigError("sizes", "no collusion sizes given");
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    if (sizes[i] < 1) throw ConfigError("sizes", "collusion sizes must be positive");
    if (i > 0 && sizes[i] <= sizes[i - 1]) throw ConfigError("sizes", "collusion sizes must be ascending");
  }
  for (auto seed : seeds) {
    const auto trips = sim::generate_trips(net, config.scenario, seed);
    const auto order = sim::collusion_order(trips, config.scenario, seed);
    if (sizes.back() > static_cast<int>(order.size()))
      throw ConfigError("sizes", "size " + std::to_string(sizes.back()) + " exceeds the " +
                                     std::to_string(order.size()) + " eligible vehicles for seed " +
                                     std::to_string(seed));
  }
  std::vector<SizeSweepRow> rows(seeds.size() * sizes.size());
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    auto& row = rows[i];
    row.seed = seeds[i / sizes.size()];
    row.size = sizes[i % sizes.size()];
    ExperimentConfig cfg = config;
    cfg.scenario.collusion_size = row.size;
    row.colluders = make_world(net, cfg.scenario, row.seed).colluders;
    PolicySpec all_one;
    all_one.baseline = {baselines::BaselineKind::AllK, 1};
    all_one.label = "all:1";
    PolicySpec learned;
    learned.kind = PolicyKind::Learned;
    learned.label = "learned";
    row.all_one = run_seed(cfg, net, atcs, all_one, row.seed);
    row.learned = run_seed(cfg, net, atcs, learned, row.seed);
    if (row.all_one.ok && row.learned.ok) {
      row.avg_time_saved = row.all_one.metrics.colluding_wait - row.learned.metrics.colluding_wait;
      row.total_time_saved = row.avg_time_saved * row.learned.metrics.colluding_count;
    }
  });
  return rows;
}

std::vector<ActionSweepRow> sweep_action_space(const ExperimentConfig& config, const sim::RoadNetwork& net,
                                               AtcsProvider& atcs, const std::vector<int>& caps,
                                               const std::vector<std::uint64_t>& seeds, int jobs) {
  if (caps.empty()) throw ConfigError("caps", "no action caps given");
  for (int c : caps)
    if (c < 1) throw ConfigError("caps", "action caps must be at least 1");
  std::vector<ActionSweepRow> rows(seeds.size() * caps.size());
  parallel_for(rows.size(), jobs, [&](std::size_t i) {
    auto& row = rows[i];
    row.seed = seeds[i / caps.size()];
    row.cap = caps[i % caps.size()];
    ExperimentConfig cfg = config;
    cfg.scenario.a_max = row.cap;
    PolicySpec learned;
    learned.kind = PolicyKind::Learned;
    learned.label = "learned";
    PolicySpec greedy;
    greedy.baseline = {baselines::BaselineKind::GreedyCap, row.cap};
    greedy.label = baselines::baseline_name(greedy.baseline);
    PolicySpec all_one;
    all_one.baseline = {baselines::BaselineKind::AllK, 1};
    all_one.label = "all:1";
    row.learned = run_seed(cfg, net, atcs, learned, row.seed);
    row.greedy = run_seed(cfg, net, atcs, greedy, row.seed);
    row.all_one = run_seed(cfg, net, atcs, all_one, row.seed);
  });
  return rows;
}

namespace {

std::string status(const SeedRun& r) { return r.ok ? "ok" : "failed:" + r.error_kind; }

Cell metric(const SeedRun& r, double v) { return r.ok ? Cell{v} : Cell{std::string()}; }

Cell count(const SeedRun& r, int v) { return r.ok ? Cell{static_cast<long long>(v)} : Cell{std::string()}; }

}  // namespace

Table metrics_table(const std::vector<ArmResult>& arms, double seconds_per_step) {
  Table t;
  t.header = {"arm",          "row",          "seed",           "reward",         "colluding_travel",
              "colluding_wait", "other_travel", "other_wait",     "colluding_travel_s", "colluding_wait_s",
              "other_travel_s", "other_wait_s", "colluding_count", "other_count",    "censored",
              "status"};
  const double s = seconds_per_step;
  for (const auto& arm : arms) {
    for (const auto& r : arm.runs) {
      const auto& m = r.metrics;
      t.add({arm.label, std::string("seed"), static_cast<long long>(r.seed), metric(r, m.reward),
             metric(r, m.colluding_travel), metric(r, m.colluding_wait), metric(r, m.other_travel),
             metric(r, m.other_wait), metric(r, m.colluding_travel * s), metric(r, m.colluding_wait * s),
             metric(r, m.other_travel * s), metric(r, m.other_wait * s), count(r, m.colluding_count),
             count(r, m.other_count), count(r, m.censored), status(r)});
    }
    if (!arm.aggregate) continue;
    const auto& a = *arm.aggregate;
    const std::string st = arm.failed ? "partial" : "ok";
    for (int which = 0; which < 2; ++which) {
      auto pick = [&](const Stat& x) { return which == 0 ? x.mean : x.std; };
      t.add({arm.label, std::string(which == 0 ? "mean" : "std"), static_cast<long long>(a.seeds), pick(a.reward),
             pick(a.colluding_travel), pick(a.colluding_wait), pick(a.other_travel), pick(a.other_wait),
             pick(a.colluding_travel) * s, pick(a.colluding_wait) * s, pick(a.other_travel) * s,
             pick(a.other_wait) * s, std::string(), std::string(), pick(a.censored), st});
    }
  }
  return t;
}

Table ablation_table(const std::vector<AblationRow>& rows) {
  Table t;
  t.header = {"arm",          "seed",           "final_reward",  "eval_reward",    "colluding_travel",
              "colluding_wait", "other_travel", "other_wait",    "censored",       "shared_params",
              "private_params", "best_episode", "status"};
  for (const auto& row : rows) {
    const auto& r = row.run;
    const auto& m = r.metrics;
    t.add({collusion::arm_name(row.arm), static_cast<long long>(r.seed), metric(r, row.final_reward),
           metric(r, row.eval_reward), metric(r, m.colluding_travel), metric(r, m.colluding_wait),
           metric(r, m.other_travel), metric(r, m.other_wait), count(r, m.censored),
           static_cast<long long>(row.shared_params), static_cast<long long>(row.private_params),
           static_cast<long long>(row.best_episode), status(r)});
  }
  // Aggregate rows per arm over successful seeds.
  std::vector<collusion::Arm> order;
  for (const auto& row : rows)
    if (std::find(order.begin(), order.end(), row.arm) == order.end()) order.push_back(row.arm);
  for (auto arm : order) {
    std::vector<double> fin, ev, cw;
    bool failed = false;
    for (const auto& row : rows) {
      if (row.arm != arm) continue;
      if (!row.run.ok) {
        failed = true;
        continue;
      }
      fin.push_back(row.final_reward);
      ev.push_back(row.eval_reward);
      cw.push_back(row.run.metrics.colluding_wait);
    }
    if (fin.size() < 2) continue;
    const Stat f = mean_std(fin), e = mean_std(ev), c = mean_std(cw);
    for (int which = 0; which < 2; ++which) {
      auto pick = [&](const Stat& x) { return which == 0 ? x.mean : x.std; };
      t.add({collusion::arm_name(arm), std::string(which == 0 ? "mean" : "std"), pick(f), pick(e), std::string(),
             pick(c), std::string(), std::string(), std::string(), std::string(), std::string(), std::string(),
             std::string(failed ? "partial" : "ok")});
    }
  }
  return t;
}

Table size_sweep_table(const std::vector<SizeSweepRow>& rows) {
  Table t;
  t.header = {"seed",           "size",          "allone_colluding_wait", "learned_colluding_wait",
              "allone_reward",  "learned_reward", "avg_time_saved",       "total_time_saved",
              "learned_censored", "colluders",   "status"};
  for (const auto& row : rows) {
    const bool ok = row.all_one.ok && row.learned.ok;
    std::string ids;
    for (std::size_t i = 0; i < row.colluders.size(); ++i) ids += (i ? " " : "") + std::to_string(row.colluders[i]);
    const std::string st = ok ? "ok" : "failed:" + (row.all_one.ok ? row.learned.error_kind : row.all_one.error_kind);
    t.add({static_cast<long long>(row.seed), static_cast<long long>(row.size),
           metric(row.all_one, row.all_one.metrics.colluding_wait), metric(row.learned, row.learned.metrics.colluding_wait),
           metric(row.all_one, row.all_one.metrics.reward), metric(row.learned, row.learned.metrics.reward),
           ok ? Cell{row.avg_time_saved} : Cell{std::string()}, ok ? Cell{row.total_time_saved} : Cell{std::string()},
           count(row.learned, row.learned.metrics.censored), ids, st});
  }
  return t;
}

Table action_sweep_table(const std::vector<ActionSweepRow>& rows) {
  Table t;
  t.header = {"seed",          "cap",           "learned_reward", "greedy_reward", "allone_reward",
              "learned_colluding_wait", "greedy_colluding_wait", "allone_colluding_wait", "status"};
  for (const auto& row : rows) {
    std::string st = "ok";
    for (const SeedRun* r : {&row.learned, &row.greedy, &row.all_one})
      if (!r->ok) {
        st = "failed:" + r->error_kind;
        break;
      }
    t.add({static_cast<long long>(row.seed), static_cast<long long>(row.cap),
           metric(row.learned, row.learned.metrics.reward), metric(row.greedy, row.greedy.metrics.reward),
           metric(row.all_one, row.all_one.metrics.reward), metric(row.learned, row.learned.metrics.colluding_wait),
           metric(row.greedy, row.greedy.metrics.colluding_wait), metric(row.all_one, row.all_one.metrics.colluding_wait),
           st});
  }
  return t;
}

}  // namespace collusim::harness
