#include "collusim/sim/network.hpp"

#include <algorithm>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>

#include "collusim/errors.hpp"

namespace collusim::sim {

namespace {

constexpr const char* kNetHeader = "COLLUSIM-NET v1";

bool valid_name(const std::string& s) {
  return !s.empty() && std::none_of(s.begin(), s.end(), [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r';
  });
}

// Populates lane slots and outgoing lists from the link table.
void index_links(RoadNetwork& net) {
  for (auto& node : net.intersections) {
    node.lanes.clear();
    node.outgoing.clear();
  }
  for (auto& link : net.links) {
    if (link.to < 0 || link.to >= static_cast<int>(net.intersections.size())) continue;
    auto& lanes = net.intersections[link.to].lanes;
    link.lane = static_cast<int>(lanes.size());
    lanes.push_back(link.id);
    if (link.from >= 0 && link.from < static_cast<int>(net.intersections.size())) {
      net.intersections[link.from].outgoing.push_back(link.id);
    }
  }
}

RoadNetwork build_grid(const GridSpec& g) {
  if (g.rows < 1 || g.cols < 1) throw ConfigError("grid", "rows and cols must be >= 1");
  if (g.phases != 2 && g.phases != 4) throw ConfigError("grid.phases", "grid generator supports 2 or 4 phases");
  if (g.entry_travel < 1 || g.internal_travel < 1) throw ConfigError("grid", "travel times must be >= 1 step");
  if (g.entry_capacity < 1 || g.internal_capacity < 1) throw ConfigError("grid", "capacities must be >= 1");
  if (g.detect_steps < 0) throw ConfigError("grid.detect_steps", "must be >= 0");

  RoadNetwork net;
  const auto id_of = [&](int r, int c) { return r * g.cols + c; };
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      Intersection node;
      node.id = id_of(r, c);
      node.name = "r" + std::to_string(r) + "c" + std::to_string(c);
      node.exit = (r == g.rows - 1) || (c == g.cols - 1);
      net.intersections.push_back(std::move(node));
    }
  }

  // Approaches are created per intersection in N, E, S, W order.
  enum Dir { kNorth, kEast, kSouth, kWest };
  std::vector<std::vector<int>> slot_dirs(net.intersections.size());
  const auto add_link = [&](int from, int to, int travel, int cap, std::string name, std::string group) {
    Link link;
    link.id = static_cast<LinkId>(net.links.size());
    link.name = std::move(name);
    link.from = from;
    link.to = to;
    link.travel_steps = travel;
    link.capacity = cap;
    link.detect_steps = std::min(g.detect_steps, travel);
    link.group = std::move(group);
    net.links.push_back(std::move(link));
  };
  for (int r = 0; r < g.rows; ++r) {
    for (int c = 0; c < g.cols; ++c) {
      const int here = id_of(r, c);
      const std::string& hn = net.intersections[here].name;
      auto& dirs = slot_dirs[here];
      if (r > 0) {
        add_link(id_of(r - 1, c), here, g.internal_travel, g.internal_capacity,
                 net.intersections[id_of(r - 1, c)].name + "-" + hn, "");
      } else {
        add_link(kNoIntersection, here, g.entry_travel, g.entry_capacity, "in_north_c" + std::to_string(c), "north");
      }
      dirs.push_back(kNorth);
      if (c < g.cols - 1) {
        add_link(id_of(r, c + 1), here, g.internal_travel, g.internal_capacity,
                 net.intersections[id_of(r, c + 1)].name + "-" + hn, "");
        dirs.push_back(kEast);
      }
      if (r < g.rows - 1) {
        add_link(id_of(r + 1, c), here, g.internal_travel, g.internal_capacity,
                 net.intersections[id_of(r + 1, c)].name + "-" + hn, "");
        dirs.push_back(kSouth);
      }
      if (c > 0) {
        add_link(id_of(r, c - 1), here, g.internal_travel, g.internal_capacity,
                 net.intersections[id_of(r, c - 1)].name + "-" + hn, "");
      } else {
        add_link(kNoIntersection, here, g.entry_travel, g.entry_capacity, "in_west_r" + std::to_string(r), "west");
      }
      dirs.push_back(kWest);
    }
  }
  index_links(net);

  for (auto& node : net.intersections) {
    const auto& dirs = slot_dirs[node.id];
    if (g.phases == 2) {
      SignalPhase ns, ew;
      for (int s = 0; s < static_cast<int>(dirs.size()); ++s) {
        (dirs[s] == kNorth || dirs[s] == kSouth ? ns : ew).push_back(s);
      }
      node.phases = {ns, ew};
    } else {
      for (int s = 0; s < static_cast<int>(dirs.size()); ++s) node.phases.push_back({s});
    }
  }
  return net;
}

RoadNetwork build_explicit(const ExplicitSpec& spec) {
  RoadNetwork net;
  std::map<std::string, int> node_ids;
  for (const auto& n : spec.intersections) {
    const std::string where = "intersection '" + n.name + "'";
    if (!valid_name(n.name)) throw ConfigError(where, "name must be non-empty without whitespace");
    if (node_ids.count(n.name)) throw ConfigError(where, "duplicate intersection name");
    Intersection node;
    node.id = static_cast<int>(net.intersections.size());
    node.name = n.name;
    node.exit = n.exit;
    node_ids[n.name] = node.id;
    net.intersections.push_back(std::move(node));
  }
  std::map<std::string, int> link_ids;
  for (const auto& l : spec.links) {
    const std::string where = "link '" + l.name + "'";
    if (!valid_name(l.name)) throw ConfigError(where, "name must be non-empty without whitespace");
    if (link_ids.count(l.name)) throw ConfigError(where, "duplicate link name");
    Link link;
    link.id = static_cast<int>(net.links.size());
    link.name = l.name;
    link.travel_steps = l.travel_steps;
    link.capacity = l.capacity;
    link.detect_steps = l.detect_steps;
    link.group = l.group;
    auto to = node_ids.find(l.to);
    if (to == node_ids.end()) throw ConfigError(where, "downstream intersection '" + l.to + "' does not exist");
    link.to = to->second;
    if (!l.from.empty()) {
      auto from = node_ids.find(l.from);
      if (from == node_ids.end()) throw ConfigError(where, "upstream intersection '" + l.from + "' does not exist");
      link.from = from->second;
    }
    link_ids[l.name] = link.id;
    net.links.push_back(std::move(link));
  }
  index_links(net);

  for (std::size_t i = 0; i < spec.intersections.size(); ++i) {
    const auto& n = spec.intersections[i];
    auto& node = net.intersections[i];
    for (std::size_t p = 0; p < n.phases.size(); ++p) {
      SignalPhase phase;
      for (const auto& lname : n.phases[p]) {
        const std::string where = "intersection '" + n.name + "' phase " + std::to_string(p);
        auto it = link_ids.find(lname);
        if (it == link_ids.end()) throw ConfigError(where, "unknown link '" + lname + "'");
        const Link& link = net.links[it->second];
        if (link.to != node.id) throw ConfigError(where, "link '" + lname + "' does not approach this intersection");
        phase.push_back(link.lane);
      }
      std::sort(phase.begin(), phase.end());
      node.phases.push_back(std::move(phase));
    }
  }
  return net;
}

}  // namespace

int RoadNetwork::max_lanes() const {
  int m = 0;
  for (const auto& n : intersections) m = std::max(m, static_cast<int>(n.lanes.size()));
  return m;
}

std::vector<IntersectionId> RoadNetwork::neighbors(IntersectionId i) const {
  std::set<IntersectionId> out;
  for (const auto& l : links) {
    if (l.from == kNoIntersection) continue;
    if (l.to == i && l.from != i) out.insert(l.from);
    if (l.from == i && l.to != i) out.insert(l.to);
  }
  return {out.begin(), out.end()};
}

std::vector<LinkId> RoadNetwork::entry_links() const {
  std::vector<LinkId> out;
  for (const auto& l : links) {
    if (l.from == kNoIntersection) out.push_back(l.id);
  }
  return out;
}

void validate_network(const RoadNetwork& net) {
  const int n = static_cast<int>(net.intersections.size());
  if (n == 0) throw ConfigError("network", "no intersections");
  for (int i = 0; i < static_cast<int>(net.links.size()); ++i) {
    const Link& l = net.links[i];
    const std::string where = "link '" + l.name + "'";
    if (l.id != i) throw ConfigError(where, "link ids must be dense and ordered");
    if (l.to < 0 || l.to >= n) throw ConfigError(where, "downstream intersection does not exist");
    if (l.from != kNoIntersection && (l.from < 0 || l.from >= n)) {
      throw ConfigError(where, "upstream intersection does not exist");
    }
    if (l.travel_steps < 1) throw ConfigError(where, "travel_steps must be >= 1");
    if (l.capacity < 1) throw ConfigError(where, "capacity must be >= 1");
    if (l.detect_steps < 0 || l.detect_steps > l.travel_steps) {
      throw ConfigError(where, "detect_steps must lie in [0, travel_steps]");
    }
    const auto& lanes = net.intersections[l.to].lanes;
    if (l.lane < 0 || l.lane >= static_cast<int>(lanes.size()) || lanes[l.lane] != l.id) {
      throw ConfigError(where, "lane slot does not match its downstream intersection");
    }
  }
  for (const auto& node : net.intersections) {
    const std::string where = "intersection '" + node.name + "'";
    const int lanes = static_cast<int>(node.lanes.size());
    const int phases = static_cast<int>(node.phases.size());
    if (phases < 2 || phases > 6) {
      throw ConfigError(where, "phase count " + std::to_string(phases) + " outside 2..6");
    }
    std::vector<bool> covered(lanes, false);
    std::set<SignalPhase> seen;
    for (int p = 0; p < phases; ++p) {
      SignalPhase phase = node.phases[p];
      if (phase.empty()) throw ConfigError(where, "phase " + std::to_string(p) + " is empty");
      std::sort(phase.begin(), phase.end());
      if (std::adjacent_find(phase.begin(), phase.end()) != phase.end()) {
        throw ConfigError(where, "phase " + std::to_string(p) + " lists a lane twice");
      }
      for (int slot : phase) {
        if (slot < 0 || slot >= lanes) throw ConfigError(where, "phase " + std::to_string(p) + " names a missing lane");
        covered[slot] = true;
      }
      if (!seen.insert(phase).second) throw ConfigError(where, "phase " + std::to_string(p) + " duplicates another phase");
    }
    for (int s = 0; s < lanes; ++s) {
      if (!covered[s]) {
        throw ConfigError(where, "lane '" + net.links[node.lanes[s]].name + "' appears in no phase");
      }
    }
  }
}

RoadNetwork build_network(const NetworkSpec& spec) {
  if (spec.grid.has_value() == spec.topology.has_value()) {
    throw ConfigError("network", "exactly one of grid or explicit topology must be given");
  }
  RoadNetwork net = spec.grid ? build_grid(*spec.grid) : build_explicit(*spec.topology);
  validate_network(net);
  return net;
}

void write_network(std::ostream& os, const RoadNetwork& net) {
  os << kNetHeader << '\n';
  os << "intersections " << net.intersections.size() << '\n';
  for (const auto& node : net.intersections) {
    os << "intersection " << node.id << ' ' << node.name << ' ' << (node.exit ? 1 : 0) << ' '
       << node.phases.size() << '\n';
    for (const auto& phase : node.phases) {
      os << "phase " << phase.size();
      for (int s : phase) os << ' ' << s;
      os << '\n';
    }
  }
  os << "links " << net.links.size() << '\n';
  for (const auto& l : net.links) {
    os << "link " << l.id << ' ' << l.name << ' ' << l.from << ' ' << l.to << ' ' << l.travel_steps << ' '
       << l.capacity << ' ' << l.lane << ' ' << l.detect_steps << ' ' << (l.group.empty() ? "-" : l.group) << '\n';
  }
}

RoadNetwork read_network(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kNetHeader) {
    throw ConfigError("network file", "missing or unsupported header (expected '" + std::string(kNetHeader) + "')");
  }
  const auto expect = [&](std::istringstream& ss, const std::string& tag) {
    std::string word;
    if (!(ss >> word) || word != tag) throw ConfigError("network file", "expected '" + tag + "'");
  };
  const auto next = [&]() {
    if (!std::getline(is, line)) throw ConfigError("network file", "unexpected end of file");
    return std::istringstream(line);
  };

  RoadNetwork net;
  auto ss = next();
  std::size_t count = 0;
  expect(ss, "intersections");
  ss >> count;
  for (std::size_t i = 0; i < count; ++i) {
    auto row = next();
    expect(row, "intersection");
    Intersection node;
    int exit = 0;
    std::size_t phases = 0;
    if (!(row >> node.id >> node.name >> exit >> phases)) throw ConfigError("network file", "bad intersection row");
    node.exit = exit != 0;
    for (std::size_t p = 0; p < phases; ++p) {
      auto prow = next();
      expect(prow, "phase");
      std::size_t k = 0;
      prow >> k;
      SignalPhase phase(k);
      for (auto& s : phase) prow >> s;
      if (!prow) throw ConfigError("network file", "bad phase row");
      node.phases.push_back(std::move(phase));
    }
    net.intersections.push_back(std::move(node));
  }
  ss = next();
  expect(ss, "links");
  ss >> count;
  for (std::size_t i = 0; i < count; ++i) {
    auto row = next();
    expect(row, "link");
    Link l;
    if (!(row >> l.id >> l.name >> l.from >> l.to >> l.travel_steps >> l.capacity >> l.lane >> l.detect_steps >> l.group)) {
      throw ConfigError("network file", "bad link row");
    }
    if (l.group == "-") l.group.clear();
    net.links.push_back(std::move(l));
  }
  std::vector<int> slots;
  for (const auto& l : net.links) slots.push_back(l.lane);
  index_links(net);
  for (std::size_t i = 0; i < net.links.size(); ++i) {
    if (net.links[i].lane != slots[i]) throw ConfigError("network file", "lane slots out of order");
  }
  validate_network(net);
  return net;
}

}  // namespace collusim::sim
