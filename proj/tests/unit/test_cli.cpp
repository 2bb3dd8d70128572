#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"

#include "collusim/atcs/signal.hpp"
#include "collusim/cli/cli.hpp"
#include "collusim/harness/manifest.hpp"
#include "collusim/harness/results.hpp"

using namespace collusim;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run invoke(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = cli::run_cli(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(is), std::istreambuf_iterator<char>()};
}

struct Workspace {
  fs::path root, config, atcs;
  Workspace() {
    root = fs::temp_directory_path() / "collusim_cli_test";
    fs::remove_all(root);
    fs::create_directories(root);
    auto tree = fixtures::desk_tree();
    tree["attack"] = {{"episodes", 2}, {"eval_every", 1}, {"final_window", 2}};
    config = root / "quick.json";
    std::ofstream(config) << tree.dump(2);
    const auto cfg = harness::parse_experiment(tree);
    const auto net = sim::build_network(cfg.scenario.network);
    atcs::SignalPolicy p(net, cfg.scenario.alpha, cfg.atcs.shape);
    p.initialize(5);
    atcs = root / "atcs";
    p.save(atcs);
  }
  ~Workspace() { fs::remove_all(root); }
};

}  // namespace

TEST_CASE("help and usage errors") {
  CHECK(invoke({"--help"}).code == cli::kOk);
  CHECK(invoke({"eval", "--help"}).code == cli::kOk);
  const auto unknown = invoke({"frobnicate"});
  CHECK(unknown.code == cli::kUsage);
  CHECK(unknown.err.rfind("error kind=usage code=2", 0) == 0);
  CHECK(invoke({"eval", "--config", "x.json", "--out", "o", "--policy", "all:1", "--bogus"}).code == cli::kUsage);
  CHECK(invoke({"eval", "--config", "x.json", "--out", "o"}).code == cli::kUsage);
  CHECK(invoke({"replay"}).code == cli::kUsage);
}

TEST_CASE("missing or malformed config leaves no output behind") {
  Workspace ws;
  const auto out = ws.root / "never";
  const auto missing = invoke({"gen-scenario", "--config", (ws.root / "nope.json").string(), "--out", out.string()});
  CHECK(missing.code == cli::kIo);
  CHECK(missing.err.find("kind=io") != std::string::npos);
  CHECK_FALSE(fs::exists(out));

  const auto bad = ws.root / "bad.json";
  auto tree = fixtures::desk_tree();
  tree["collusion"]["a_max"] = -3;
  std::ofstream(bad) << tree.dump();
  CHECK(invoke({"gen-scenario", "--config", bad.string(), "--out", out.string()}).code == cli::kConfig);
  CHECK_FALSE(fs::exists(out));

  const auto garbage = ws.root / "garbage.json";
  std::ofstream(garbage) << "{ not json";
  CHECK(invoke({"gen-scenario", "--config", garbage.string(), "--out", out.string()}).code == cli::kConfig);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("invalid policies and seed lists are config errors") {
  Workspace ws;
  const auto out = ws.root / "o";
  const std::vector<std::string> base{"eval", "--config", ws.config.string(), "--out", out.string(),
                                      "--atcs", ws.atcs.string()};
  auto args = base;
  args.insert(args.end(), {"--policy", "all:99"});
  CHECK(invoke(args).code == cli::kConfig);
  args = base;
  args.insert(args.end(), {"--policy", "all:1", "--seeds", "3"});
  CHECK(invoke(args).code == cli::kConfig);
  args = base;
  args.insert(args.end(), {"--policy", "all:1", "--seeds", "1,x"});
  CHECK(invoke(args).code == cli::kConfig);
}

TEST_CASE("eval writes metrics, traces and a replayable manifest") {
  Workspace ws;
  const auto out = ws.root / "eval";
  const auto r = invoke({"eval", "--config", ws.config.string(), "--out", out.string(), "--atcs", ws.atcs.string(),
                      "--policy", "all:1", "--policy", "greedy:10", "--seeds", "0,1", "--jobs", "2"});
  REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
  REQUIRE(fs::exists(out / "metrics.csv"));
  REQUIRE(fs::exists(out / "manifest.json"));
  std::istringstream is(slurp(out / "metrics.csv"));
  const auto rows = harness::read_csv(is);
  // Two arms, each with two seed rows plus mean and std.
  CHECK(rows.size() == 1 + 2 * 4);

  const auto manifest = harness::read_manifest(out / "manifest.json");
  CHECK(manifest.command == "eval");
  CHECK(manifest.seeds == std::vector<std::uint64_t>{0, 1});

  // Each trace recomputes the matching seed row.
  int traces = 0;
  for (const auto& entry : fs::directory_iterator(out / "traces")) {
    const auto rep = invoke({"replay", "--trace", entry.path().string()});
    REQUIRE(rep.code == cli::kOk);
    std::istringstream ris(rep.out);
    const auto rr = harness::read_csv(ris);
    REQUIRE(rr.size() == 2);
    bool matched = false;
    for (const auto& row : rows) {
      if (row[0] != rr[1][0] || row[1] != "seed" || row[2] != rr[1][1]) continue;
      matched = true;
      for (std::size_t k = 0; k < 5; ++k) CHECK(row[3 + k] == rr[1][2 + k]);
    }
    CHECK(matched);
    ++traces;
  }
  CHECK(traces == 4);

  const auto again = ws.root / "again";
  const auto rep = invoke({"replay", "--manifest", (out / "manifest.json").string(), "--out", again.string()});
  REQUIRE_MESSAGE(rep.code == cli::kOk, rep.err);
  CHECK(slurp(again / "metrics.csv") == slurp(out / "metrics.csv"));

  CHECK(invoke({"replay", "--trace", (ws.root / "missing.trace").string()}).code == cli::kIo);
}

TEST_CASE("seeds fall back to the environment before the config") {
  Workspace ws;
  const auto out = ws.root / "gen";
  setenv("COLLUSIM_SEED", "7,8", 1);
  const auto r = invoke({"gen-scenario", "--config", ws.config.string(), "--out", out.string()});
  unsetenv("COLLUSIM_SEED");
  REQUIRE(r.code == cli::kOk);
  CHECK(fs::exists(out / "trips_seed_7.csv"));
  CHECK(fs::exists(out / "trips_seed_8.csv"));
  CHECK_FALSE(fs::exists(out / "trips_seed_0.csv"));
  const auto m = harness::read_manifest(out / "manifest.json");
  CHECK(m.seeds == std::vector<std::uint64_t>{7, 8});
  CHECK(std::find(m.args.begin(), m.args.end(), "--seeds") != m.args.end());

  const auto flag = ws.root / "flag";
  setenv("COLLUSIM_SEED", "7", 1);
  CHECK(invoke({"gen-scenario", "--config", ws.config.string(), "--out", flag.string(), "--seeds", "3"}).code ==
        cli::kOk);
  unsetenv("COLLUSIM_SEED");
  CHECK(fs::exists(flag / "trips_seed_3.csv"));
  CHECK_FALSE(fs::exists(flag / "trips_seed_7.csv"));
}

TEST_CASE("train-attack writes checkpoints that eval can load") {
  Workspace ws;
  const auto out = ws.root / "attack";
  const auto r = invoke({"train-attack", "--config", ws.config.string(), "--out", out.string(), "--atcs",
                      ws.atcs.string(), "--seeds", "0,1", "--jobs", "1"});
  REQUIRE_MESSAGE(r.code == cli::kOk, r.err);
  CHECK(fs::exists(out / "seed_0" / "attack.json"));
  CHECK(fs::exists(out / "attack_curve.csv"));
  const auto ev = ws.root / "ev";
  const auto e = invoke({"eval", "--config", ws.config.string(), "--out", ev.string(), "--atcs", ws.atcs.string(),
                      "--policy", "learned:" + out.string(), "--seeds", "0,1"});
  CHECK_MESSAGE(e.code == cli::kOk, e.err);
}
