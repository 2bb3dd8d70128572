#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "collusim/nn/mlp.hpp"

namespace collusim::nn {

/// One entry of a checkpoint's layer-size manifest.
struct NetManifest {
  std::string name;
  std::vector<int> sizes;
  OutputActivation output = OutputActivation::Linear;

  bool operator==(const NetManifest&) const = default;
};

/// Text checkpoint: "COLLUSIM-CKPT v1", the manifest, then every parameter at 17 significant digits.
struct Checkpoint {
  std::vector<NetManifest> nets;
  std::vector<double> params;

  std::size_t expected_param_count() const;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt);
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);

/// Throws ConfigError on version or manifest problems and IoError on unreadable files.
Checkpoint read_checkpoint(std::istream& is);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Loads and checks that the manifest equals `expected`.
Checkpoint load_checkpoint(const std::filesystem::path& path, const std::vector<NetManifest>& expected);

}  // namespace collusim::nn
