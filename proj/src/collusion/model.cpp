#include "collusim/collusion/model.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "collusim/errors.hpp"

namespace collusim::collusion {

namespace {
constexpr std::array<const char*, 4> kBranchNames{"roadenc_t", "roadenc_l", "roadenc_v", "roadenc_c"};
}

ArmSpec arm_spec(Arm arm) {
  switch (arm) {
    case Arm::VehInt: return {false, false, false};
    case Arm::MaskedRoadEnc: return {true, true, false};
    case Arm::RoadEncVehInt: return {true, false, false};
    case Arm::Full: return {true, false, true};
  }
  throw std::invalid_argument("unknown arm");
}

std::string arm_name(Arm arm) {
  switch (arm) {
    case Arm::VehInt: return "vehint";
    case Arm::MaskedRoadEnc: return "masked";
    case Arm::RoadEncVehInt: return "roadenc";
    case Arm::Full: return "full";
  }
  return "?";
}

Arm parse_arm(const std::string& name) {
  if (name == "vehint" || name == "1") return Arm::VehInt;
  if (name == "masked" || name == "2") return Arm::MaskedRoadEnc;
  if (name == "roadenc" || name == "3") return Arm::RoadEncVehInt;
  if (name == "full" || name == "4") return Arm::Full;
  throw ConfigError("arm", "unknown arm '" + name + "'");
}

CollusionNet::CollusionNet(ObservationLayout layout, int agents, ActionSpace actions, Arm arm, NetSizes sizes)
    : layout_(layout), agents_(agents), actions_(actions), arm_(arm), spec_(arm_spec(arm)), sizes_(sizes) {
  if (agents < 1) throw ConfigError("collusion.size", "needs at least one agent");
  if (actions.a_max < 0) throw ConfigError("a_max", "must be >= 0");
  const auto parts = layout.part_sizes();
  for (int b = 0; b < 4; ++b) road_enc_[b] = nn::MlpLayout({parts[b], sizes.embed}, nn::OutputActivation::Tanh);
  veh_int_ = nn::MlpLayout({4 * sizes.embed, sizes.plcy}, nn::OutputActivation::Tanh);
  comm_ = nn::MlpLayout({sizes.plcy, sizes.msg}, nn::OutputActivation::Tanh);
  trunk_ = nn::MlpLayout({sizes.plcy + (spec_.comm ? sizes.msg : 0), sizes.trunk}, nn::OutputActivation::Tanh);
  actor_ = nn::MlpLayout({sizes.trunk, actions.size()});
  critic_ = nn::MlpLayout({sizes.trunk, 1});

  std::size_t at = 0;
  if (spec_.shared_road_enc) {
    for (int b = 0; b < 4; ++b) {
      shared_road_enc_[b] = at;
      at += road_enc_[b].param_count();
    }
  }
  if (spec_.comm) {
    comm_offset_ = at;
    at += comm_.param_count();
  }
  shared_count_ = at;
  for (int a = 0; a < agents; ++a) {
    AgentBlocks blk;
    for (int b = 0; b < 4; ++b) {
      if (spec_.shared_road_enc) {
        blk.road_enc[b] = shared_road_enc_[b];
      } else {
        blk.road_enc[b] = at;
        at += road_enc_[b].param_count();
      }
    }
    blk.veh_int = at;
    at += veh_int_.param_count();
    blk.trunk = at;
    at += trunk_.param_count();
    blk.actor = at;
    at += actor_.param_count();
    blk.critic = at;
    at += critic_.param_count();
    blocks_.push_back(blk);
  }
  agent_count_ = (at - shared_count_) / static_cast<std::size_t>(agents);
  params_.assign(at, 0.0);
}

void CollusionNet::initialize(std::uint64_t seed) {
  Rng rng(mix_seed(seed, 0xc0ee));
  std::span<double> p = params_;
  if (spec_.shared_road_enc) {
    for (int b = 0; b < 4; ++b) road_enc_[b].initialize(p.subspan(shared_road_enc_[b], road_enc_[b].param_count()), 1.0, rng);
  }
  if (spec_.comm) comm_.initialize(p.subspan(comm_offset_, comm_.param_count()), 1.0, rng);
  for (const auto& blk : blocks_) {
    if (!spec_.shared_road_enc) {
      for (int b = 0; b < 4; ++b) road_enc_[b].initialize(p.subspan(blk.road_enc[b], road_enc_[b].param_count()), 1.0, rng);
    }
    veh_int_.initialize(p.subspan(blk.veh_int, veh_int_.param_count()), 1.0, rng);
    trunk_.initialize(p.subspan(blk.trunk, trunk_.param_count()), 1.0, rng);
    actor_.initialize(p.subspan(blk.actor, actor_.param_count()), 0.01, rng);
    critic_.initialize(p.subspan(blk.critic, critic_.param_count()), 1.0, rng);
  }
}

std::span<const double> CollusionNet::road_enc_params(int agent, int branch) const {
  return std::span<const double>(params_).subspan(blocks_[agent].road_enc[branch], road_enc_[branch].param_count());
}

std::span<const double> CollusionNet::comm_params() const {
  if (!spec_.comm) return {};
  return std::span<const double>(params_).subspan(comm_offset_, comm_.param_count());
}

std::span<const double> CollusionNet::veh_int_params(int agent) const {
  return std::span<const double>(params_).subspan(blocks_[agent].veh_int, veh_int_.param_count());
}

std::span<const double> CollusionNet::trunk_params(int agent) const {
  return std::span<const double>(params_).subspan(blocks_[agent].trunk, trunk_.param_count());
}

std::span<const double> CollusionNet::actor_params(int agent) const {
  return std::span<const double>(params_).subspan(blocks_[agent].actor, actor_.param_count());
}

std::span<const double> CollusionNet::critic_params(int agent) const {
  return std::span<const double>(params_).subspan(blocks_[agent].critic, critic_.param_count());
}

std::vector<double> CollusionNet::prepare(std::vector<double> obs) const {
  if (static_cast<int>(obs.size()) != layout_.size()) throw std::invalid_argument("observation size mismatch");
  if (spec_.mask_time_location) {
    std::fill(obs.begin(), obs.begin() + layout_.vehicles_offset(), 0.0);
  }
  return obs;
}

std::vector<double> CollusionNet::encode_input(int branch, std::span<const double> obs) const {
  static constexpr std::array<int (ObservationLayout::*)() const, 4> offsets{
      &ObservationLayout::time_offset, &ObservationLayout::location_offset, &ObservationLayout::vehicles_offset,
      &ObservationLayout::colluders_offset};
  const int off = (layout_.*offsets[branch])();
  const int len = layout_.part_sizes()[branch];
  std::vector<double> x(obs.begin() + off, obs.begin() + off + len);
  if (branch >= 2) {
    for (double& v : x) v *= sizes_.count_scale;
  }
  return x;
}

std::vector<double> CollusionNet::road_enc(int agent, std::span<const double> obs) const {
  if (static_cast<int>(obs.size()) != layout_.size()) throw std::invalid_argument("observation size mismatch");
  std::vector<double> emb;
  emb.reserve(4 * sizes_.embed);
  for (int b = 0; b < 4; ++b) {
    const auto out = road_enc_[b].forward(road_enc_params(agent, b), encode_input(b, obs));
    emb.insert(emb.end(), out.begin(), out.end());
  }
  return emb;
}

std::vector<double> CollusionNet::veh_int(int agent, std::span<const double> emb) const {
  return veh_int_.forward(veh_int_params(agent), emb);
}

std::vector<double> CollusionNet::comm_mech(std::span<const std::vector<double>> plcys) const {
  if (plcys.empty()) throw std::invalid_argument("comm_mech needs at least one policy vector");
  return comm_.forward(comm_params(), std::span<const double>(make_context(plcys)).subspan(1));
}

nn::PolicyOutput CollusionNet::heads(int agent, std::span<const double> plcy, std::span<const double> msg) const {
  std::vector<double> in(plcy.begin(), plcy.end());
  if (spec_.comm) in.insert(in.end(), msg.begin(), msg.end());
  const auto h = trunk_.forward(trunk_params(agent), in);
  nn::PolicyOutput out;
  out.logits = actor_.forward(actor_params(agent), h);
  out.value = critic_.forward(critic_params(agent), h)[0];
  return out;
}

std::vector<double> CollusionNet::make_context(std::span<const std::vector<double>> neighbor_plcys) const {
  std::vector<double> ctx(1 + sizes_.plcy, 0.0);
  if (neighbor_plcys.empty()) {
    ctx[0] = 1.0;
    return ctx;
  }
  // Summed in lexicographic order so the mean is exactly permutation invariant.
  std::vector<const std::vector<double>*> order;
  for (const auto& p : neighbor_plcys) order.push_back(&p);
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return *a < *b; });
  for (const auto* p : order) {
    for (int i = 0; i < sizes_.plcy; ++i) ctx[1 + i] += (*p)[i];
  }
  for (int i = 0; i < sizes_.plcy; ++i) ctx[1 + i] /= static_cast<double>(neighbor_plcys.size());
  return ctx;
}

nn::PolicyOutput CollusionNet::evaluate(int agent, std::span<const double> obs, std::span<const double> context) const {
  const auto p = plcy(agent, obs);
  std::vector<double> msg;
  if (spec_.comm) {
    msg = context[0] > 0.5 ? comm_.forward(comm_params(), p) : comm_.forward(comm_params(), context.subspan(1));
  }
  return heads(agent, p, msg);
}

nn::ActionSample CollusionNet::act(const nn::PolicyOutput& out, Mode mode, Rng& rng) const {
  const auto probs = nn::softmax(out.logits);
  if (mode == Mode::Greedy) {
    const int a = nn::argmax(probs);
    return {a, std::log(probs[a])};
  }
  return nn::sample_action(probs, rng);
}

nn::PolicyOutput CollusionNet::forward_backward(const nn::RolloutBuffer& buffer, std::size_t row,
                                                const nn::HeadLoss& loss, std::span<double> grad) {
  const int agent = buffer.agent[row];
  const auto& obs = buffer.observation[row];
  const auto& ctx = buffer.context[row];
  const auto& blk = blocks_[agent];
  const std::span<const double> p = params_;
  auto block = [&](std::size_t off, const nn::MlpLayout& l) { return p.subspan(off, l.param_count()); };
  auto gblock = [&](std::size_t off, const nn::MlpLayout& l) { return grad.subspan(off, l.param_count()); };

  std::array<nn::MlpTape, 4> enc_tapes;
  std::vector<double> emb;
  emb.reserve(4 * sizes_.embed);
  for (int b = 0; b < 4; ++b) {
    const auto out = road_enc_[b].forward(block(blk.road_enc[b], road_enc_[b]), encode_input(b, obs), enc_tapes[b]);
    emb.insert(emb.end(), out.begin(), out.end());
  }
  nn::MlpTape vt, ct, tt, at, qt;
  const auto pl = veh_int_.forward(block(blk.veh_int, veh_int_), emb, vt);
  const bool self_loop = spec_.comm && ctx[0] > 0.5;
  std::vector<double> trunk_in = pl;
  if (spec_.comm) {
    const auto msg = self_loop ? comm_.forward(block(comm_offset_, comm_), pl, ct)
                               : comm_.forward(block(comm_offset_, comm_), std::span<const double>(ctx).subspan(1), ct);
    trunk_in.insert(trunk_in.end(), msg.begin(), msg.end());
  }
  const auto h = trunk_.forward(block(blk.trunk, trunk_), trunk_in, tt);
  nn::PolicyOutput out;
  out.logits = actor_.forward(block(blk.actor, actor_), h, at);
  out.value = critic_.forward(block(blk.critic, critic_), h, qt)[0];

  const auto g = loss(out);
  auto dh = actor_.backward(block(blk.actor, actor_), at, g.logits, gblock(blk.actor, actor_));
  const double dv[1] = {g.value};
  const auto dh2 = critic_.backward(block(blk.critic, critic_), qt, dv, gblock(blk.critic, critic_));
  for (std::size_t i = 0; i < dh.size(); ++i) dh[i] += dh2[i];
  const auto din = trunk_.backward(block(blk.trunk, trunk_), tt, dh, gblock(blk.trunk, trunk_));
  std::vector<double> dplcy(din.begin(), din.begin() + sizes_.plcy);
  if (spec_.comm) {
    const std::span<const double> dmsg(din.data() + sizes_.plcy, sizes_.msg);
    const auto dc = comm_.backward(block(comm_offset_, comm_), ct, dmsg, gblock(comm_offset_, comm_));
    if (self_loop) {
      for (int i = 0; i < sizes_.plcy; ++i) dplcy[i] += dc[i];
    }
  }
  const auto demb = veh_int_.backward(block(blk.veh_int, veh_int_), vt, dplcy, gblock(blk.veh_int, veh_int_));
  for (int b = 0; b < 4; ++b) {
    const std::span<const double> d(demb.data() + b * sizes_.embed, sizes_.embed);
    road_enc_[b].backward(block(blk.road_enc[b], road_enc_[b]), enc_tapes[b], d, gblock(blk.road_enc[b], road_enc_[b]));
  }
  return out;
}

std::vector<nn::NetManifest> CollusionNet::road_enc_manifest() const {
  std::vector<nn::NetManifest> m;
  for (int b = 0; b < 4; ++b) m.push_back({kBranchNames[b], road_enc_[b].sizes(), road_enc_[b].output_activation()});
  return m;
}

std::vector<nn::NetManifest> CollusionNet::comm_manifest() const {
  return {{"commmech", comm_.sizes(), comm_.output_activation()}};
}

std::vector<nn::NetManifest> CollusionNet::agent_manifest() const {
  std::vector<nn::NetManifest> m;
  if (!spec_.shared_road_enc) m = road_enc_manifest();
  m.push_back({"vehint", veh_int_.sizes(), veh_int_.output_activation()});
  m.push_back({"trunk", trunk_.sizes(), trunk_.output_activation()});
  m.push_back({"actor", actor_.sizes(), actor_.output_activation()});
  m.push_back({"critic", critic_.sizes(), critic_.output_activation()});
  return m;
}

namespace {

std::vector<double> slice(const std::vector<double>& v, std::size_t off, std::size_t n) {
  return {v.begin() + static_cast<std::ptrdiff_t>(off), v.begin() + static_cast<std::ptrdiff_t>(off + n)};
}

}  // namespace

void CollusionNet::save(const std::filesystem::path& dir) const {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  std::size_t enc_total = 0;
  for (const auto& l : road_enc_) enc_total += l.param_count();
  if (spec_.shared_road_enc) {
    nn::save_checkpoint(dir / "roadenc.ckpt", {road_enc_manifest(), slice(params_, shared_road_enc_[0], enc_total)});
  }
  if (spec_.comm) nn::save_checkpoint(dir / "commmech.ckpt", {comm_manifest(), slice(params_, comm_offset_, comm_.param_count())});
  for (int a = 0; a < agents_; ++a) {
    const std::size_t start = spec_.shared_road_enc ? blocks_[a].veh_int : blocks_[a].road_enc[0];
    nn::save_checkpoint(dir / ("agent_" + std::to_string(a) + ".ckpt"), {agent_manifest(), slice(params_, start, agent_count_)});
  }
}

void CollusionNet::load(const std::filesystem::path& dir) {
  auto put = [&](std::size_t off, const std::vector<double>& v) { std::copy(v.begin(), v.end(), params_.begin() + off); };
  if (spec_.shared_road_enc) put(shared_road_enc_[0], nn::load_checkpoint(dir / "roadenc.ckpt", road_enc_manifest()).params);
  if (spec_.comm) put(comm_offset_, nn::load_checkpoint(dir / "commmech.ckpt", comm_manifest()).params);
  for (int a = 0; a < agents_; ++a) {
    const std::size_t start = spec_.shared_road_enc ? blocks_[a].veh_int : blocks_[a].road_enc[0];
    put(start, nn::load_checkpoint(dir / ("agent_" + std::to_string(a) + ".ckpt"), agent_manifest()).params);
  }
}

}  // namespace collusim::collusion
