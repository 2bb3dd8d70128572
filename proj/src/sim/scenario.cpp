#include "collusim/sim/scenario.hpp"

#include <algorithm>
#include <deque>
#include <numeric>

#include "collusim/errors.hpp"
#include "collusim/random.hpp"

namespace collusim::sim {

using nlohmann::json;

namespace {

template <typename T>
T read(const json& obj, const char* key, T fallback, const std::string& where) {
  if (!obj.contains(key)) return fallback;
  try {
    return obj.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key, e.what());
  }
}

const json& section(const json& tree, const char* key) {
  static const json empty = json::object();
  if (!tree.contains(key)) return empty;
  const json& s = tree.at(key);
  if (!s.is_object()) throw ConfigError(key, "must be an object");
  return s;
}

NetworkSpec parse_network(const json& n) {
  NetworkSpec spec;
  if (n.contains("grid")) {
    const json& g = n.at("grid");
    GridSpec grid;
    grid.rows = read(g, "rows", grid.rows, "network.grid");
    grid.cols = read(g, "cols", grid.cols, "network.grid");
    grid.phases = read(g, "phases", grid.phases, "network.grid");
    grid.entry_travel = read(g, "entry_travel", grid.entry_travel, "network.grid");
    grid.internal_travel = read(g, "internal_travel", grid.internal_travel, "network.grid");
    grid.entry_capacity = read(g, "entry_capacity", grid.entry_capacity, "network.grid");
    grid.internal_capacity = read(g, "internal_capacity", grid.internal_capacity, "network.grid");
    grid.detect_steps = read(g, "detect_steps", grid.detect_steps, "network.grid");
    spec.grid = grid;
  }
  if (n.contains("intersections") || n.contains("links")) {
    ExplicitSpec topo;
    for (const auto& item : read(n, "intersections", json::array(), "network")) {
      ExplicitIntersectionSpec node;
      node.name = read<std::string>(item, "name", "", "network.intersections");
      node.exit = read(item, "exit", false, "network.intersections");
      node.phases = read(item, "phases", node.phases, "network.intersections." + node.name);
      topo.intersections.push_back(std::move(node));
    }
    for (const auto& item : read(n, "links", json::array(), "network")) {
      ExplicitLinkSpec link;
      link.name = read<std::string>(item, "name", "", "network.links");
      link.from = read<std::string>(item, "from", "", "network.links." + link.name);
      link.to = read<std::string>(item, "to", "", "network.links." + link.name);
      link.travel_steps = read(item, "travel", link.travel_steps, "network.links." + link.name);
      link.capacity = read(item, "capacity", link.capacity, "network.links." + link.name);
      link.detect_steps = read(item, "detect_steps", link.detect_steps, "network.links." + link.name);
      link.group = read<std::string>(item, "group", "", "network.links." + link.name);
      topo.links.push_back(std::move(link));
    }
    spec.topology = std::move(topo);
  }
  return spec;
}

// Forward hop counts from every intersection to `exit`; -1 where unreachable.
std::vector<int> hops_to(const RoadNetwork& net, IntersectionId exit) {
  std::vector<int> dist(net.intersections.size(), -1);
  std::deque<IntersectionId> frontier{exit};
  dist[exit] = 0;
  while (!frontier.empty()) {
    const IntersectionId here = frontier.front();
    frontier.pop_front();
    for (LinkId l : net.intersections[here].lanes) {
      const IntersectionId up = net.links[l].from;
      if (up == kNoIntersection || dist[up] >= 0) continue;
      dist[up] = dist[here] + 1;
      frontier.push_back(up);
    }
  }
  return dist;
}

}  // namespace

ScenarioConfig parse_scenario(const json& tree) {
  if (!tree.is_object()) throw ConfigError("config", "top level must be an object");
  ScenarioConfig c;
  if (!tree.contains("network")) throw ConfigError("network", "missing network section");
  c.network = parse_network(section(tree, "network"));

  const json& sim = section(tree, "sim");
  c.sim.tau = read(sim, "tau", c.sim.tau, "sim");
  c.sim.discharge_rate = read(sim, "discharge_rate", c.sim.discharge_rate, "sim");
  c.sim.episode_len = read(sim, "episode_len", c.sim.episode_len, "sim");

  const json& demand = section(tree, "demand");
  c.demand.vehicles = read(demand, "vehicles", c.demand.vehicles, "demand");
  c.demand.horizon_fraction = read(demand, "horizon_fraction", c.demand.horizon_fraction, "demand");
  c.demand.min_route_links = read(demand, "min_route_links", c.demand.min_route_links, "demand");
  c.demand.profiles = read(demand, "profiles", c.demand.profiles, "demand");

  const json& coll = section(tree, "collusion");
  c.collusion_size = read(coll, "size", c.collusion_size, "collusion");
  c.a_max = read(coll, "a_max", c.a_max, "collusion");
  c.k_intervals = read(coll, "k_intervals", c.k_intervals, "collusion");

  c.alpha = read(tree, "alpha", c.alpha, "config");
  c.seconds_per_step = read(tree, "seconds_per_step", c.seconds_per_step, "config");
  c.seeds = read(tree, "seeds", c.seeds, "config");
  validate_scenario(c);
  return c;
}

void validate_scenario(const ScenarioConfig& c) {
  if (c.sim.tau < 1) throw ConfigError("sim.tau", "must be >= 1");
  if (c.sim.discharge_rate < 1) throw ConfigError("sim.discharge_rate", "must be >= 1");
  if (c.sim.episode_len < 1) throw ConfigError("sim.episode_len", "must be >= 1");
  if (c.k_intervals < 1 || c.k_intervals > c.sim.episode_len) {
    throw ConfigError("collusion.k_intervals", "must lie in 1..episode_len");
  }
  if (c.a_max < 0) throw ConfigError("collusion.a_max", "must be >= 0");
  if (c.collusion_size < 0) throw ConfigError("collusion.size", "must be >= 0");
  if (c.alpha < 0.0 || c.alpha > 1.0) throw ConfigError("alpha", "must lie in [0, 1]");
  if (c.seconds_per_step <= 0.0) throw ConfigError("seconds_per_step", "must be positive");
  if (c.seeds.empty()) throw ConfigError("seeds", "must be nonempty");
  if (c.demand.vehicles < 0.0) throw ConfigError("demand.vehicles", "must be >= 0");
  if (c.demand.horizon_fraction <= 0.0 || c.demand.horizon_fraction > 1.0) {
    throw ConfigError("demand.horizon_fraction", "must lie in (0, 1]");
  }
  for (const auto& [group, profile] : c.demand.profiles) {
    if (static_cast<int>(profile.size()) != c.k_intervals) {
      throw ConfigError("demand.profiles." + group, "needs one weight per time interval");
    }
    for (double w : profile) {
      if (!(w >= 0.0)) throw ConfigError("demand.profiles." + group, "weights must be >= 0");
    }
  }
}

std::vector<VehicleSpec> generate_trips(const RoadNetwork& net, const ScenarioConfig& config, std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0x7269ULL));
  const int len = config.sim.episode_len;
  const int k = config.k_intervals;
  const int horizon = std::max(1, static_cast<int>(config.demand.horizon_fraction * len));
  const auto entries = net.entry_links();

  const auto weight = [&](LinkId entry, int step) {
    const int interval = std::min(k - 1, step * k / len);
    auto it = config.demand.profiles.find(net.links[entry].group);
    if (it == config.demand.profiles.end()) it = config.demand.profiles.find("*");
    return it == config.demand.profiles.end() ? 1.0 : it->second[interval];
  };
  double mass = 0.0;
  for (int t = 0; t < horizon; ++t) {
    for (LinkId e : entries) mass += weight(e, t);
  }
  const double base = mass > 0.0 ? config.demand.vehicles / mass : 0.0;

  // Destination candidates per entry, preferring routes with at least min_route_links links.
  std::vector<IntersectionId> exits;
  std::vector<std::vector<int>> hops;
  for (const auto& node : net.intersections) {
    if (!node.exit) continue;
    exits.push_back(node.id);
    hops.push_back(hops_to(net, node.id));
  }
  std::vector<std::vector<int>> candidates(net.links.size());
  for (LinkId e : entries) {
    std::vector<int> any, longer;
    for (std::size_t x = 0; x < exits.size(); ++x) {
      const int h = hops[x][net.links[e].to];
      if (h < 0) continue;
      any.push_back(static_cast<int>(x));
      if (h + 1 >= config.demand.min_route_links) longer.push_back(static_cast<int>(x));
    }
    candidates[e] = longer.empty() ? any : longer;
  }

  std::vector<VehicleSpec> trips;
  for (int t = 0; t < horizon; ++t) {
    for (LinkId e : entries) {
      const double p = std::min(1.0, base * weight(e, t));
      if (uniform01(rng) >= p) continue;
      const auto& options = candidates[e];
      if (options.empty()) throw ConfigError("link '" + net.links[e].name + "'", "no exit reachable from entry");
      const int x = options[uniform_index(rng, options.size())];
      VehicleSpec v;
      v.id = static_cast<int>(trips.size());
      v.depart_step = t;
      v.route.push_back(e);
      IntersectionId here = net.links[e].to;
      while (hops[x][here] > 0) {
        std::vector<LinkId> next;
        for (LinkId l : net.intersections[here].outgoing) {
          if (hops[x][net.links[l].to] == hops[x][here] - 1) next.push_back(l);
        }
        const LinkId pick = next[uniform_index(rng, next.size())];
        v.route.push_back(pick);
        here = net.links[pick].to;
      }
      trips.push_back(std::move(v));
    }
  }
  return trips;
}

std::vector<int> collusion_order(std::span<const VehicleSpec> trips, const ScenarioConfig& config,
                                 std::uint64_t seed) {
  std::vector<int> eligible;
  for (const auto& v : trips) {
    if (v.depart_step < config.sim.episode_len / 2) eligible.push_back(v.id);
  }
  Rng rng(mix_seed(seed, 0xc011ULL));
  for (std::size_t i = eligible.size(); i > 1; --i) {
    std::swap(eligible[i - 1], eligible[uniform_index(rng, i)]);
  }
  return eligible;
}

std::vector<int> mark_colluders(std::vector<VehicleSpec>& trips, std::span<const int> order, int size) {
  if (size < 0 || size > static_cast<int>(order.size())) {
    throw ConfigError("collusion.size", "collusion size " + std::to_string(size) + " exceeds the " +
                                            std::to_string(order.size()) + " eligible vehicles");
  }
  for (auto& v : trips) v.colluding = false;
  std::vector<int> ids(order.begin(), order.begin() + size);
  for (int id : ids) trips.at(id).colluding = true;
  return ids;
}

}  // namespace collusim::sim
