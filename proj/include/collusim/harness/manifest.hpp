#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace collusim::harness {

/// Provenance of one CLI run; `args` is the full argument vector after the program name,
/// so re-running it reproduces the outputs.
struct RunManifest {
  std::string command;
  std::vector<std::string> args;
  std::string config_path;
  std::string config_hash;
  std::string code_version;
  std::vector<std::uint64_t> seeds;
  std::vector<std::string> outputs;  // relative to the output directory
};

std::string code_version();

/// Writes <dir>/manifest.json. Throws IoError.
void write_manifest(const std::filesystem::path& dir, const RunManifest& manifest);
/// Throws IoError / ConfigError.
RunManifest read_manifest(const std::filesystem::path& path);

}  // namespace collusim::harness
