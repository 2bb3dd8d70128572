#include "collusim/sim/trace.hpp"

#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "collusim/errors.hpp"

namespace collusim::sim {

namespace {
constexpr const char* kTraceHeader = "COLLUSIM-TRACE v1";
}

std::vector<VehicleOutcome> vehicle_outcomes(const SimState& state) {
  std::vector<VehicleOutcome> out;
  out.reserve(state.vehicles.size());
  for (const auto& v : state.vehicles) {
    VehicleOutcome o;
    o.id = v.id;
    o.colluding = v.colluding;
    o.departed = v.where != Location::Pending;
    o.depart_step = v.depart_step;
    o.done_step = v.done_step;
    o.wait = v.wait;
    out.push_back(o);
  }
  return out;
}

void write_trace(std::ostream& os, const EpisodeTrace& t) {
  os << kTraceHeader << '\n';
  os << "episode_len " << t.episode_len << '\n';
  os << "seed " << t.seed << '\n';
  os << "policy " << (t.policy.empty() ? "-" : t.policy) << '\n';
  os << "vehicles " << t.vehicles.size() << '\n';
  for (const auto& v : t.vehicles) {
    os << "v " << v.id << ' ' << (v.colluding ? 1 : 0) << ' ' << (v.departed ? 1 : 0) << ' ' << v.depart_step << ' '
       << (v.done_step ? *v.done_step : -1) << ' ' << v.wait << '\n';
  }
  os << "decisions " << t.decisions.size() << '\n';
  os << std::setprecision(17);
  for (const auto& d : t.decisions) {
    os << "d " << d.clock << ' ' << d.reward << ' ' << d.agents.size();
    for (std::size_t i = 0; i < d.agents.size(); ++i) {
      os << ' ' << d.agents[i] << ' ' << d.reported[i] << ' ' << d.wait_before[i] << ' ' << d.wait_after[i];
    }
    os << '\n';
  }
}

EpisodeTrace read_trace(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kTraceHeader) {
    throw ConfigError("trace", "missing or unsupported header (expected '" + std::string(kTraceHeader) + "')");
  }
  EpisodeTrace t;
  std::string tag;
  std::size_t n = 0;
  const auto fail = [](const std::string& what) { throw ConfigError("trace", what); };
  if (!(is >> tag >> t.episode_len) || tag != "episode_len") fail("missing episode_len");
  if (!(is >> tag >> t.seed) || tag != "seed") fail("missing seed");
  if (!(is >> tag >> t.policy) || tag != "policy") fail("missing policy");
  if (t.policy == "-") t.policy.clear();
  if (!(is >> tag >> n) || tag != "vehicles") fail("missing vehicle block");
  t.vehicles.resize(n);
  for (auto& v : t.vehicles) {
    int coll = 0, dep = 0, done = 0;
    if (!(is >> tag >> v.id >> coll >> dep >> v.depart_step >> done >> v.wait) || tag != "v") fail("bad vehicle row");
    v.colluding = coll != 0;
    v.departed = dep != 0;
    if (done >= 0) v.done_step = done;
  }
  if (!(is >> tag >> n) || tag != "decisions") fail("missing decision block");
  t.decisions.resize(n);
  for (auto& d : t.decisions) {
    std::size_t k = 0;
    if (!(is >> tag >> d.clock >> d.reward >> k) || tag != "d") fail("bad decision row");
    d.agents.resize(k);
    d.reported.resize(k);
    d.wait_before.resize(k);
    d.wait_after.resize(k);
    for (std::size_t i = 0; i < k; ++i) {
      if (!(is >> d.agents[i] >> d.reported[i] >> d.wait_before[i] >> d.wait_after[i])) fail("bad decision row");
    }
  }
  return t;
}

}  // namespace collusim::sim
