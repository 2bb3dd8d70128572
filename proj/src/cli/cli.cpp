#include "collusim/cli/cli.hpp"

#include <algorithm>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "collusim/errors.hpp"
#include "collusim/harness/experiment.hpp"
#include "collusim/harness/manifest.hpp"

namespace collusim::cli {

namespace fs = std::filesystem;
using harness::Table;

namespace {

constexpr const char* kGrammar = R"(usage:
  collusim gen-scenario --config F --out D [--seeds S]
  collusim train-atcs   --config F --out D [--seeds S] [--jobs N]
  collusim train-attack --config F --out D [--seeds S] [--atcs D] [--arm A] [--jobs N]
  collusim eval         --config F --out D --policy P... [--seeds S] [--atcs D] [--jobs N]
  collusim ablate       --config F --out D [--seeds S] [--atcs D] [--jobs N]
  collusim sweep-size   --config F --out D [--sizes L] [--seeds S] [--atcs D] [--jobs N]
  collusim sweep-action --config F --out D [--caps L] [--seeds S] [--atcs D] [--jobs N]
  collusim replay       --trace T [--out D]
  collusim replay       --manifest M [--out D]

  S, L  comma-separated integers
  P     all:<k> | greedy:<cap> | random:<cap> | learned | learned:<dir>
  A     vehint | masked | roadenc | full
  Seeds default to COLLUSIM_SEED when set, then to the config file.
  Exit codes: 0 ok, 1 internal, 2 usage, 3 invalid config, 4 I/O, 5 training diverged.)";

struct Options {
  std::string config;
  std::string out;
  std::string seeds;
  std::string atcs;
  std::string arm = "full";
  std::vector<std::string> policies;
  std::string sizes;
  std::string caps;
  std::string trace;
  std::string manifest;
  int jobs = 0;
  bool verbose = false;
};

template <typename T>
std::vector<T> parse_list(const std::string& text, const std::string& what) {
  std::vector<T> xs;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const long long v = std::stoll(item, &used);
      if (used != item.size() || (std::is_unsigned_v<T> && v < 0)) throw std::invalid_argument(item);
      xs.push_back(static_cast<T>(v));
    } catch (const std::logic_error&) {
      throw ConfigError(what, "not an integer: '" + item + "'");
    }
  }
  if (xs.empty()) throw ConfigError(what, "empty list");
  return xs;
}

/// Error classes raised by the commands, mapped to exit codes.
int code_for(const std::string& kind) {
  if (kind == "diverged") return kDiverged;
  if (kind == "config") return kConfig;
  if (kind == "io") return kIo;
  return kFailure;
}

std::string sanitize(const std::string& label) {
  std::string s = label;
  for (char& c : s)
    if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
  return s;
}

std::string join(const std::vector<std::uint64_t>& xs) {
  std::string s;
  for (std::size_t i = 0; i < xs.size(); ++i) s += (i ? "," : "") + std::to_string(xs[i]);
  return s;
}

class Session {
 public:
  Session(std::string command, std::vector<std::string> args, const Options& opt, std::ostream& out,
          std::ostream& err)
      : command_(std::move(command)), args_(std::move(args)), opt_(opt), out_(out), err_(err) {}

  int run();

 private:
  void load();
  std::vector<std::uint64_t> seeds(const std::vector<std::uint64_t>& config_default);
  int jobs() const;
  void log(const std::string& line);
  void write_table(const std::string& name, const Table& table);
  void finish(const std::vector<std::uint64_t>& seeds);
  int failures(const std::vector<const harness::SeedRun*>& runs);
  std::unique_ptr<harness::AtcsProvider> provider();

  int gen_scenario();
  int train_atcs();
  int train_attack();
  int eval();
  int ablate();
  int sweep_size();
  int sweep_action();

  std::string command_;
  std::vector<std::string> args_;
  const Options& opt_;
  std::ostream& out_;
  std::ostream& err_;
  std::mutex log_mutex_;
  harness::ExperimentConfig config_;
  sim::RoadNetwork net_;
  fs::path dir_;
  std::vector<std::string> outputs_;
};

void Session::load() {
  if (opt_.config.empty()) throw ConfigError("--config", "required");
  if (opt_.out.empty()) throw ConfigError("--out", "required");
  config_ = harness::load_experiment(opt_.config);
  net_ = sim::build_network(config_.scenario.network);
  dir_ = opt_.out;
}

std::vector<std::uint64_t> Session::seeds(const std::vector<std::uint64_t>& config_default) {
  std::vector<std::uint64_t> s;
  if (!opt_.seeds.empty()) {
    s = parse_list<std::uint64_t>(opt_.seeds, "--seeds");
  } else if (const char* env = std::getenv("COLLUSIM_SEED"); env && *env) {
    s = parse_list<std::uint64_t>(env, "COLLUSIM_SEED");
  } else {
    s = config_default;
  }
  // The manifest always records the resolved seeds so a replay does not depend on the environment.
  if (opt_.seeds.empty()) {
    args_.push_back("--seeds");
    args_.push_back(join(s));
  }
  return s;
}

int Session::jobs() const {
  if (opt_.jobs > 0) return opt_.jobs;
  return static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
}

void Session::log(const std::string& line) {
  if (!opt_.verbose) return;
  std::lock_guard lock(log_mutex_);
  err_ << line << '\n';
}

void Session::write_table(const std::string& name, const Table& table) {
  harness::write_csv(dir_ / name, table);
  outputs_.push_back(name);
}

void Session::finish(const std::vector<std::uint64_t>& seeds) {
  harness::RunManifest m;
  m.command = command_;
  m.args = args_;
  m.config_path = opt_.config;
  m.config_hash = harness::config_hash(config_.tree);
  m.code_version = harness::code_version();
  m.seeds = seeds;
  m.outputs = outputs_;
  harness::write_manifest(dir_, m);
  out_ << "wrote " << (dir_ / "manifest.json").string() << '\n';
}

int Session::failures(const std::vector<const harness::SeedRun*>& runs) {
  int code = kOk;
  for (const auto* r : runs) {
    if (r->ok) continue;
    err_ << "error kind=" << r->error_kind << " seed=" << r->seed << " msg=\"" << r->error << "\"\n";
    if (code == kOk) code = code_for(r->error_kind);
  }
  return code;
}

std::unique_ptr<harness::AtcsProvider> Session::provider() {
  std::optional<fs::path> dir;
  if (!opt_.atcs.empty()) dir = fs::path(opt_.atcs);
  return std::make_unique<harness::AtcsProvider>(net_, config_, dir);
}

int Session::gen_scenario() {
  const auto s = seeds(config_.scenario.seeds);
  fs::create_directories(dir_);
  {
    std::ofstream os(dir_ / "network.txt", std::ios::binary);
    if (!os) throw IoError("cannot write " + (dir_ / "network.txt").string());
    sim::write_network(os, net_);
  }
  outputs_.push_back("network.txt");
  for (auto seed : s) {
    const auto world = harness::make_world(net_, config_.scenario, seed);
    Table t;
    t.header = {"id", "depart_step", "colluding", "agent", "route"};
    for (const auto& v : world.trips) {
      const auto it = std::find(world.colluders.begin(), world.colluders.end(), v.id);
      const long long agent = it == world.colluders.end() ? -1 : it - world.colluders.begin();
      std::string route;
      for (std::size_t i = 0; i < v.route.size(); ++i) route += (i ? " " : "") + std::to_string(v.route[i]);
      t.add({static_cast<long long>(v.id), static_cast<long long>(v.depart_step),
             static_cast<long long>(v.colluding), agent, route});
    }
    write_table("trips_seed_" + std::to_string(seed) + ".csv", t);
    log("seed " + std::to_string(seed) + ": " + std::to_string(world.trips.size()) + " trips");
  }
  finish(s);
  return kOk;
}

int Session::train_atcs() {
  const auto s = seeds(config_.scenario.seeds);
  std::vector<std::optional<atcs::AtcsTrainResult>> results(s.size());
  std::vector<harness::SeedRun> status(s.size());
  std::vector<double> honest_wait(s.size()), fixed_wait(s.size());
  harness::parallel_for(s.size(), jobs(), [&](std::size_t i) {
    status[i].seed = s[i];
    try {
      auto r = atcs::train_atcs(net_, config_.scenario, config_.atcs, s[i]);
      r.policy.save(dir_ / ("seed_" + std::to_string(s[i])));
      const auto trips = sim::generate_trips(net_, config_.scenario, s[i]);
      sim::FixedTimeController fixed;
      fixed_wait[i] = sim::mean_vehicle_wait(sim::run_honest_episode(net_, config_.scenario.sim, trips, fixed));
      auto policy = r.policy;
      honest_wait[i] = sim::mean_vehicle_wait(sim::run_honest_episode(net_, config_.scenario.sim, trips, policy));
      log("seed " + std::to_string(s[i]) + ": " + std::to_string(r.episodes) + " episodes, wait " +
          std::to_string(honest_wait[i]) + " vs fixed-time " + std::to_string(fixed_wait[i]));
      results[i] = std::move(r);
      status[i].ok = true;
    } catch (const TrainingDiverged& e) {
      status[i].error = e.what();
      status[i].error_kind = "diverged";
    }
  });
  Table curve;
  curve.header = {"seed", "episode", "reward", "fixed_reward"};
  Table summary;
  summary.header = {"seed",      "episodes",          "best_episode", "eval_wait", "fixed_eval_wait",
                    "mean_wait", "fixed_mean_wait", "status"};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto seed = static_cast<long long>(s[i]);
    if (!results[i]) {
      summary.add({seed, std::string(), std::string(), std::string(), std::string(), std::string(), std::string(),
                   "failed:" + status[i].error_kind});
      continue;
    }
    const auto& r = *results[i];
    for (const auto& p : r.curve) curve.add({seed, static_cast<long long>(p.episode), p.reward, p.fixed_reward});
    summary.add({seed, static_cast<long long>(r.episodes), static_cast<long long>(r.best_episode), r.eval_wait,
                 r.fixed_eval_wait, honest_wait[i], fixed_wait[i], std::string("ok")});
    for (std::size_t k = 0; k < r.policy.size(); ++k)
      outputs_.push_back("seed_" + std::to_string(s[i]) + "/atcs_" + std::to_string(k) + ".ckpt");
  }
  write_table("atcs_curve.csv", curve);
  write_table("atcs_summary.csv", summary);
  finish(s);
  std::vector<const harness::SeedRun*> runs;
  for (const auto& r : status) runs.push_back(&r);
  return failures(runs);
}

int Session::train_attack() {
  const auto s = seeds(config_.scenario.seeds);
  const auto arm = collusion::parse_arm(opt_.arm);
  auto atcs = provider();
  std::vector<std::optional<collusion::AttackTrainResult>> results(s.size());
  std::vector<harness::SeedRun> status(s.size());
  harness::parallel_for(s.size(), jobs(), [&](std::size_t i) {
    status[i].seed = s[i];
    const fs::path seed_dir = dir_ / ("seed_" + std::to_string(s[i]));
    try {
      const auto world = harness::make_world(net_, config_.scenario, s[i]);
      auto controller = atcs->get(s[i]);
      auto progress = [&](const collusion::AttackCurvePoint& p) {
        if (p.evaluated)
          log("seed " + std::to_string(s[i]) + " episode " + std::to_string(p.episode) + ": reward " +
              std::to_string(p.reward) + ", greedy " + std::to_string(p.eval_reward));
      };
      auto checkpoint = [&](int episode, const collusion::CollusionNet& model) {
        harness::save_attack(seed_dir / ("episode_" + std::to_string(episode)), model);
      };
      auto r = collusion::train_collusion(net_, config_.scenario, world.trips, world.colluders, controller, arm,
                                          config_.attack, s[i], progress, checkpoint);
      harness::save_attack(seed_dir, r.net);
      collusion::LearnedPolicy greedy(r.net, collusion::Mode::Greedy);
      auto ep = collusion::run_attack_episode(net_, config_.scenario, world.trips, world.colluders, controller,
                                              greedy, s[i]);
      status[i].metrics = ep.metrics;
      results[i] = std::move(r);
      status[i].ok = true;
    } catch (const std::exception& e) {
      status[i].error = e.what();
      if (dynamic_cast<const TrainingDiverged*>(&e))
        status[i].error_kind = "diverged";
      else if (dynamic_cast<const ConfigError*>(&e))
        status[i].error_kind = "config";
      else if (dynamic_cast<const IoError*>(&e))
        status[i].error_kind = "io";
      else
        status[i].error_kind = "other";
    }
  });
  Table curve;
  curve.header = {"seed", "episode", "reward", "eval_reward"};
  Table summary;
  summary.header = {"seed", "arm", "best_episode", "best_eval_reward", "final_reward", "eval_reward",
                    "colluding_wait", "other_wait", "status"};
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto seed = static_cast<long long>(s[i]);
    if (!results[i]) {
      summary.add({seed, opt_.arm, std::string(), std::string(), std::string(), std::string(), std::string(),
                   std::string(), "failed:" + status[i].error_kind});
      continue;
    }
    const auto& r = *results[i];
    for (const auto& p : r.curve)
      curve.add({seed, static_cast<long long>(p.episode), p.reward, p.evaluated ? harness::Cell{p.eval_reward}
                                                                                 : harness::Cell{std::string()}});
    const auto& m = status[i].metrics;
    summary.add({seed, collusion::arm_name(arm), static_cast<long long>(r.best_episode), r.best_eval_reward,
                 r.final_reward, m.reward, m.colluding_wait, m.other_wait, std::string("ok")});
    outputs_.push_back("seed_" + std::to_string(s[i]) + "/attack.json");
  }
  write_table("attack_curve.csv", curve);
  write_table("attack_summary.csv", summary);
  finish(s);
  std::vector<const harness::SeedRun*> runs;
  for (const auto& r : status) runs.push_back(&r);
  return failures(runs);
}

int Session::eval() {
  if (opt_.policies.empty()) throw ConfigError("--policy", "at least one policy is required");
  const auto s = seeds(config_.scenario.seeds);
  std::vector<harness::PolicySpec> specs;
  for (const auto& p : opt_.policies) specs.push_back(harness::parse_policy(p, config_.scenario.a_max));
  auto atcs = provider();
  std::vector<harness::ArmResult> arms;
  for (const auto& spec : specs) {
    arms.push_back(harness::evaluate_arm(config_, net_, *atcs, spec, s, jobs()));
    log("evaluated " + spec.label);
  }
  for (const auto& arm : arms) {
    for (const auto& r : arm.runs) {
      if (!r.ok) continue;
      const std::string name = "traces/" + sanitize(arm.label) + "_seed_" + std::to_string(r.seed) + ".trace";
      fs::create_directories(dir_ / "traces");
      std::ofstream os(dir_ / name, std::ios::binary);
      if (!os) throw IoError("cannot write " + (dir_ / name).string());
      sim::write_trace(os, r.trace);
      outputs_.push_back(name);
    }
  }
  write_table("metrics.csv", harness::metrics_table(arms, config_.scenario.seconds_per_step));
  finish(s);
  std::vector<const harness::SeedRun*> runs;
  for (const auto& a : arms)
    for (const auto& r : a.runs) runs.push_back(&r);
  return failures(runs);
}

int Session::ablate() {
  const auto s = seeds(config_.scenario.seeds);
  auto atcs = provider();
  const auto rows = harness::run_ablation(config_, net_, *atcs, s, jobs());
  write_table("ablation.csv", harness::ablation_table(rows));
  finish(s);
  std::vector<const harness::SeedRun*> runs;
  for (const auto& r : rows) runs.push_back(&r.run);
  return failures(runs);
}

int Session::sweep_size() {
  const auto s = seeds({config_.sweeps.seed});
  const auto sizes = opt_.sizes.empty() ? config_.sweeps.sizes : parse_list<int>(opt_.sizes, "--sizes");
  auto atcs = provider();
  const auto rows = harness::sweep_collusion_size(config_, net_, *atcs, sizes, s, jobs());
  write_table("sweep_size.csv", harness::size_sweep_table(rows));
  finish(s);
  std::vector<const harness::SeedRun*> runs;
  for (const auto& r : rows) {
    runs.push_back(&r.all_one);
    runs.push_back(&r.learned);
  }
  return failures(runs);
}

int Session::sweep_action() {
  const auto s = seeds({config_.sweeps.seed});
  const auto caps = opt_.caps.empty() ? config_.sweeps.caps : parse_list<int>(opt_.caps, "--caps");
  auto atcs = provider();
  const auto rows = harness::sweep_action_space(config_, net_, *atcs, caps, s, jobs());
  write_table("sweep_action.csv", harness::action_sweep_table(rows));
  finish(s);
  std::vector<const harness::SeedRun*> runs;
  for (const auto& r : rows) {
    runs.push_back(&r.learned);
    runs.push_back(&r.greedy);
    runs.push_back(&r.all_one);
  }
  return failures(runs);
}

int Session::run() {
  load();
  if (command_ == "gen-scenario") return gen_scenario();
  if (command_ == "train-atcs") return train_atcs();
  if (command_ == "train-attack") return train_attack();
  if (command_ == "eval") return eval();
  if (command_ == "ablate") return ablate();
  if (command_ == "sweep-size") return sweep_size();
  if (command_ == "sweep-action") return sweep_action();
  throw std::logic_error("unhandled command " + command_);
}

int replay_trace(const Options& opt, std::ostream& out) {
  std::ifstream is(opt.trace, std::ios::binary);
  if (!is) throw IoError("cannot read trace " + opt.trace);
  const auto trace = sim::read_trace(is);
  const auto m = collusion::episode_metrics(trace);
  Table t;
  t.header = {"policy",     "seed",        "reward",      "colluding_travel", "colluding_wait", "other_travel",
              "other_wait", "colluding_count", "other_count", "censored"};
  t.add({trace.policy, static_cast<long long>(trace.seed), m.reward, m.colluding_travel, m.colluding_wait,
         m.other_travel, m.other_wait, static_cast<long long>(m.colluding_count),
         static_cast<long long>(m.other_count), static_cast<long long>(m.censored)});
  harness::write_csv(out, t);
  if (!opt.out.empty()) harness::write_csv(fs::path(opt.out) / "replay.csv", t);
  return kOk;
}

int replay_manifest(const Options& opt, std::ostream& out, std::ostream& err) {
  const auto m = harness::read_manifest(opt.manifest);
  if (m.command == "replay") throw ConfigError(opt.manifest, "cannot replay a replay");
  if (!m.config_path.empty()) {
    const auto cfg = harness::load_experiment(m.config_path);
    if (harness::config_hash(cfg.tree) != m.config_hash)
      throw ConfigError(m.config_path, "config changed since the run (hash " + m.config_hash + ")");
  }
  std::vector<std::string> args{m.command};
  args.insert(args.end(), m.args.begin(), m.args.end());
  if (!opt.out.empty()) {
    bool replaced = false;
    for (std::size_t i = 1; i + 1 < args.size(); ++i)
      if (args[i] == "--out") {
        args[i + 1] = opt.out;
        replaced = true;
      }
    if (!replaced) {
      args.push_back("--out");
      args.push_back(opt.out);
    }
  }
  return run_cli(args, out, err);
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Colluding-vehicle attacks on a learned traffic signal controller", "collusim"};
  app.footer(kGrammar);
  app.require_subcommand(1);
  Options opt;

  struct Spec {
    const char* name;
    const char* help;
  };
  const Spec commands[] = {
      {"gen-scenario", "Write the network and per-seed trip sets"},
      {"train-atcs", "Train the signal controller per seed"},
      {"train-attack", "Train the colluding vehicles per seed"},
      {"eval", "Evaluate attack policies over seeds"},
      {"ablate", "Train and evaluate the four ablation arms"},
      {"sweep-size", "Sweep the collusion group size"},
      {"sweep-action", "Sweep the action cap"},
  };
  for (const auto& c : commands) {
    auto* sub = app.add_subcommand(c.name, c.help);
    sub->add_option("--config", opt.config, "Experiment config (JSON)")->required();
    sub->add_option("--out", opt.out, "Output directory")->required();
    sub->add_option("--seeds", opt.seeds, "Comma-separated seeds");
    sub->add_flag("-v,--verbose", opt.verbose, "Progress on stderr");
    const std::string name = c.name;
    if (name != "gen-scenario") sub->add_option("--jobs", opt.jobs, "Worker threads")->check(CLI::PositiveNumber);
    if (name != "gen-scenario" && name != "train-atcs")
      sub->add_option("--atcs", opt.atcs, "Trained controller directory (default: train in-process)");
    if (name == "train-attack") sub->add_option("--arm", opt.arm, "Model arm");
    if (name == "eval") sub->add_option("--policy", opt.policies, "Attack policy (repeatable)")->required();
    if (name == "sweep-size") sub->add_option("--sizes", opt.sizes, "Ascending collusion sizes");
    if (name == "sweep-action") sub->add_option("--caps", opt.caps, "Action caps");
  }
  auto* replay = app.add_subcommand("replay", "Recompute metrics from a trace or re-run a manifest");
  auto* trace = replay->add_option("--trace", opt.trace, "Episode trace");
  auto* manifest = replay->add_option("--manifest", opt.manifest, "Run manifest");
  trace->excludes(manifest);
  replay->add_option("--out", opt.out, "Output directory");
  replay->add_flag("-v,--verbose", opt.verbose, "Progress on stderr");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));
    if (replay->parsed() && opt.trace.empty() && opt.manifest.empty())
      throw CLI::RequiredError("--trace or --manifest");
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    err << "error kind=usage code=" << kUsage << " msg=\"" << e.what() << "\"\n";
    return kUsage;
  }

  try {
    if (replay->parsed()) return opt.trace.empty() ? replay_manifest(opt, out, err) : replay_trace(opt, out);
    auto* sub = app.get_subcommands().front();
    std::vector<std::string> rest(args.begin() + 1, args.end());
    Session session(sub->get_name(), rest, opt, out, err);
    return session.run();
  } catch (const ConfigError& e) {
    err << "error kind=config code=" << kConfig << " msg=\"" << e.what() << "\"\n";
    return kConfig;
  } catch (const IoError& e) {
    err << "error kind=io code=" << kIo << " msg=\"" << e.what() << "\"\n";
    return kIo;
  } catch (const fs::filesystem_error& e) {
    err << "error kind=io code=" << kIo << " msg=\"" << e.what() << "\"\n";
    return kIo;
  } catch (const TrainingDiverged& e) {
    err << "error kind=diverged code=" << kDiverged << " msg=\"" << e.what() << "\"\n";
    return kDiverged;
  } catch (const std::exception& e) {
    err << "error kind=internal code=" << kFailure << " msg=\"" << e.what() << "\"\n";
    return kFailure;
  }
}

}  // namespace collusim::cli
