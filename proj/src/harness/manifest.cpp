#include "collusim/harness/manifest.hpp"

#include <fstream>

#include "json.hpp"

#include "collusim/errors.hpp"

#ifndef COLLUSIM_CODE_VERSION
#define COLLUSIM_CODE_VERSION "unknown"
#endif

namespace collusim::harness {

using nlohmann::json;

std::string code_version() { return COLLUSIM_CODE_VERSION; }

void write_manifest(const std::filesystem::path& dir, const RunManifest& m) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json j;
  j["format"] = "collusim-manifest v1";
  j["command"] = m.command;
  j["args"] = m.args;
  j["config_path"] = m.config_path;
  j["config_hash"] = m.config_hash;
  j["code_version"] = m.code_version;
  j["seeds"] = m.seeds;
  j["outputs"] = m.outputs;
  std::ofstream os(dir / "manifest.json", std::ios::binary);
  if (!os) throw IoError("cannot write " + (dir / "manifest.json").string());
  os << j.dump(2) << '\n';
  if (!os) throw IoError("failed writing manifest");
}

RunManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot read manifest " + path.string());
  try {
    const json j = json::parse(is);
    if (j.value("format", "") != "collusim-manifest v1") throw ConfigError(path.string(), "not a run manifest");
    RunManifest m;
    m.command = j.at("command").get<std::string>();
    m.args = j.at("args").get<std::vector<std::string>>();
    m.config_path = j.value("config_path", "");
    m.config_hash = j.value("config_hash", "");
    m.code_version = j.value("code_version", "");
    m.seeds = j.value("seeds", std::vector<std::uint64_t>{});
    m.outputs = j.value("outputs", std::vector<std::string>{});
    return m;
  } catch (const json::exception& e) {
    throw ConfigError(path.string(), e.what());
  }
}

}  // namespace collusim::harness
