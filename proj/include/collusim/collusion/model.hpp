#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "collusim/collusion/observation.hpp"
#include "collusim/nn/checkpoint.hpp"
#include "collusim/nn/mlp.hpp"
#include "collusim/nn/ppo.hpp"
#include "collusim/random.hpp"

namespace collusim::collusion {

/// Reported counts an agent may choose. Action a reports a vehicles; with a_max = 0 the only
/// action is the honest report of one.
struct ActionSpace {
  int a_max = 10;

  int size() const { return a_max + 1; }
  int report(int action) const { return a_max == 0 ? 1 : action; }
};

/// The four ablation arms, from the bare per-agent network up to the full model.
enum class Arm { VehInt = 1, MaskedRoadEnc = 2, RoadEncVehInt = 3, Full = 4 };

struct ArmSpec {
  bool shared_road_enc = true;
  bool mask_time_location = false;
  bool comm = true;
};

ArmSpec arm_spec(Arm arm);
std::string arm_name(Arm arm);
Arm parse_arm(const std::string& name);  // "vehint", "masked", "roadenc", "full" or 1..4

struct NetSizes {
  int embed = 16;  // per RoadEnc branch
  int plcy = 64;
  int msg = 16;
  int trunk = 64;
  double count_scale = 0.2;  // applied to the two count parts before encoding
};

enum class Mode { Sample, Greedy };

/// All agents' networks in one flat parameter vector. Shared blocks (RoadEnc, CommMech)
/// are stored once and read by every agent; VehInt, trunk and heads are per agent.
class CollusionNet final : public nn::ActorCriticModel {
 public:
  CollusionNet(ObservationLayout layout, int agents, ActionSpace actions, Arm arm = Arm::Full, NetSizes sizes = {});

  void initialize(std::uint64_t seed);

  const ObservationLayout& layout() const { return layout_; }
  int agents() const { return agents_; }
  const ActionSpace& actions() const { return actions_; }
  Arm arm() const { return arm_; }
  const ArmSpec& spec() const { return spec_; }
  const NetSizes& sizes() const { return sizes_; }

  std::span<double> parameters() override { return params_; }
  std::span<const double> parameters() const { return params_; }

  std::size_t shared_param_count() const { return shared_count_; }
  std::size_t private_param_count() const { return agent_count_; }  // per agent

  /// Views of one block as seen by `agent`. Shared blocks return the same storage for every agent.
  std::span<const double> road_enc_params(int agent, int branch) const;
  std::span<const double> comm_params() const;
  std::span<const double> veh_int_params(int agent) const;
  std::span<const double> trunk_params(int agent) const;
  std::span<const double> actor_params(int agent) const;
  std::span<const double> critic_params(int agent) const;

  /// Zeroes o_T and o_L for the masked arm; identity otherwise.
  std::vector<double> prepare(std::vector<double> obs) const;

  std::vector<double> road_enc(int agent, std::span<const double> obs) const;
  std::vector<double> veh_int(int agent, std::span<const double> emb) const;
  /// CommMech applied to the mean of the given policy vectors (nonempty).
  std::vector<double> comm_mech(std::span<const std::vector<double>> plcys) const;
  /// Actor logits and value from plcy (and msg when the arm communicates).
  nn::PolicyOutput heads(int agent, std::span<const double> plcy, std::span<const double> msg) const;

  std::vector<double> plcy(int agent, std::span<const double> obs) const { return veh_int(agent, road_enc(agent, obs)); }

  /// Context stored with a buffer row: [self flag, mean neighbour plcy]. With no neighbours
  /// the agent's own plcy feeds CommMech (self loop).
  std::vector<double> make_context(std::span<const std::vector<double>> neighbor_plcys) const;

  /// Whole pipeline for one decision.
  nn::PolicyOutput evaluate(int agent, std::span<const double> obs, std::span<const double> context) const;
  nn::ActionSample act(const nn::PolicyOutput& out, Mode mode, Rng& rng) const;

  nn::PolicyOutput forward_backward(const nn::RolloutBuffer& buffer, std::size_t row, const nn::HeadLoss& loss,
                                    std::span<double> grad) override;

  /// Manifests of roadenc.ckpt / commmech.ckpt / agent_<id>.ckpt.
  std::vector<nn::NetManifest> road_enc_manifest() const;
  std::vector<nn::NetManifest> comm_manifest() const;
  std::vector<nn::NetManifest> agent_manifest() const;

  void save(const std::filesystem::path& dir) const;
  /// Loads parameters into a net of matching shape. Throws IoError / ConfigError.
  void load(const std::filesystem::path& dir);

 private:
  struct AgentBlocks {
    std::array<std::size_t, 4> road_enc{};
    std::size_t veh_int = 0, trunk = 0, actor = 0, critic = 0;
  };

  std::vector<double> encode_input(int branch, std::span<const double> obs) const;

  ObservationLayout layout_;
  int agents_;
  ActionSpace actions_;
  Arm arm_;
  ArmSpec spec_;
  NetSizes sizes_;

  std::array<nn::MlpLayout, 4> road_enc_;
  nn::MlpLayout veh_int_, comm_, trunk_, actor_, critic_;

  std::array<std::size_t, 4> shared_road_enc_{};
  std::size_t comm_offset_ = 0;
  std::size_t shared_count_ = 0;
  std::size_t agent_count_ = 0;
  std::vector<AgentBlocks> blocks_;
  std::vector<double> params_;
};

}  // namespace collusim::collusion
