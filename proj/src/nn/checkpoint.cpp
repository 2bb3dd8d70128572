#include "collusim/nn/checkpoint.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>
#include <sstream>

#include "collusim/errors.hpp"

namespace collusim::nn {

namespace {
constexpr const char* kCkptHeader = "COLLUSIM-CKPT v1";
}

std::size_t Checkpoint::expected_param_count() const {
  std::size_t n = 0;
  for (const auto& net : nets) n += MlpLayout(net.sizes, net.output).param_count();
  return n;
}

void write_checkpoint(std::ostream& os, const Checkpoint& ckpt) {
  os << kCkptHeader << '\n';
  os << "nets " << ckpt.nets.size() << '\n';
  for (const auto& net : ckpt.nets) {
    os << "net " << net.name << ' ' << (net.output == OutputActivation::Tanh ? "tanh" : "linear") << ' '
       << net.sizes.size();
    for (int s : net.sizes) os << ' ' << s;
    os << '\n';
  }
  os << "params " << ckpt.params.size() << '\n';
  os << std::setprecision(17);
  for (double p : ckpt.params) os << p << '\n';
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write checkpoint " + path.string());
  write_checkpoint(os, ckpt);
  if (!os) throw IoError("failed writing checkpoint " + path.string());
}

Checkpoint read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kCkptHeader) {
    throw ConfigError("checkpoint", "unsupported version header '" + line + "'");
  }
  Checkpoint ckpt;
  std::string tag;
  std::size_t count = 0;
  if (!(is >> tag >> count) || tag != "nets") throw ConfigError("checkpoint", "missing net manifest");
  for (std::size_t i = 0; i < count; ++i) {
    NetManifest net;
    std::string act;
    std::size_t layers = 0;
    if (!(is >> tag >> net.name >> act >> layers) || tag != "net") throw ConfigError("checkpoint", "bad manifest row");
    if (act != "tanh" && act != "linear") throw ConfigError("checkpoint", "unknown activation '" + act + "'");
    net.output = act == "tanh" ? OutputActivation::Tanh : OutputActivation::Linear;
    net.sizes.resize(layers);
    for (int& s : net.sizes) {
      if (!(is >> s) || s < 1) throw ConfigError("checkpoint", "bad layer size in manifest");
    }
    if (layers < 2) throw ConfigError("checkpoint", "net '" + net.name + "' needs at least two layer sizes");
    ckpt.nets.push_back(std::move(net));
  }
  if (!(is >> tag >> count) || tag != "params") throw ConfigError("checkpoint", "missing parameter block");
  if (count != ckpt.expected_param_count()) {
    throw ConfigError("checkpoint", "parameter count " + std::to_string(count) + " disagrees with manifest (" +
                                        std::to_string(ckpt.expected_param_count()) + ")");
  }
  ckpt.params.resize(count);
  for (double& p : ckpt.params) {
    if (!(is >> p)) throw ConfigError("checkpoint", "truncated parameter block");
  }
  return ckpt;
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open checkpoint " + path.string());
  try {
    return read_checkpoint(is);
  } catch (const ConfigError& e) {
    throw ConfigError(path.string(), e.what());
  }
}

Checkpoint load_checkpoint(const std::filesystem::path& path, const std::vector<NetManifest>& expected) {
  Checkpoint ckpt = load_checkpoint(path);
  if (ckpt.nets != expected) throw ConfigError(path.string(), "layer manifest does not match the expected network");
  return ckpt;
}

}  // namespace collusim::nn
