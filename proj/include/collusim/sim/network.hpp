#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace collusim::sim {

using LinkId = int;
using IntersectionId = int;

inline constexpr int kNoIntersection = -1;

/// Directed road segment feeding exactly one approach lane of its downstream intersection.
struct Link {
  LinkId id = 0;
  std::string name;
  IntersectionId from = kNoIntersection;  // kNoIntersection for network entries
  IntersectionId to = kNoIntersection;
  int travel_steps = 1;
  int capacity = 1;
  int lane = 0;  // approach-lane slot at `to`
  int detect_steps = 0;  // transit vehicles this close to `to` already count as on the approach lane
  std::string group;  // demand group for entry links ("west", "north", ...)
};

/// A signal phase: the approach-lane slots that receive green together.
using SignalPhase = std::vector<int>;

struct Intersection {
  IntersectionId id = 0;
  std::string name;
  std::vector<LinkId> lanes;  // incoming links, indexed by lane slot
  std::vector<LinkId> outgoing;
  std::vector<SignalPhase> phases;
  bool exit = false;  // vehicles may end their trip here
};

struct RoadNetwork {
  std::vector<Intersection> intersections;
  std::vector<Link> links;

  int max_lanes() const;
  /// One-hop neighbours (connected by a link in either direction), ascending.
  std::vector<IntersectionId> neighbors(IntersectionId i) const;
  std::vector<LinkId> entry_links() const;
};

struct GridSpec {
  int rows = 3;
  int cols = 3;
  int phases = 2;  // 2: N/S vs E/W, 4: one approach per phase
  int entry_travel = 4;
  int internal_travel = 6;
  int entry_capacity = 60;
  int internal_capacity = 12;
  int detect_steps = 0;
};

struct ExplicitLinkSpec {
  std::string name;
  std::string from;  // empty for an entry link
  std::string to;
  int travel_steps = 1;
  int capacity = 10;
  int detect_steps = 0;
  std::string group;
};

struct ExplicitIntersectionSpec {
  std::string name;
  bool exit = false;
  std::vector<std::vector<std::string>> phases;  // link names per phase
};

struct ExplicitSpec {
  std::vector<ExplicitIntersectionSpec> intersections;
  std::vector<ExplicitLinkSpec> links;
};

/// Either a generated grid or an explicit topology.
struct NetworkSpec {
  std::optional<GridSpec> grid;
  std::optional<ExplicitSpec> topology;
};

/// Builds and validates a network. Throws ConfigError naming the offending element.
RoadNetwork build_network(const NetworkSpec& spec);

/// Checks every structural invariant; throws ConfigError on the first violation.
void validate_network(const RoadNetwork& net);

void write_network(std::ostream& os, const RoadNetwork& net);
RoadNetwork read_network(std::istream& is);

}  // namespace collusim::sim
