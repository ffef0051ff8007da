#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "bnnswarm/bayesian_nn.hpp"
#include "bnnswarm/consensus.hpp"
#include "bnnswarm/lidar.hpp"
#include "bnnswarm/transport.hpp"

namespace bnnswarm {

struct ModelConfig {
  nn::Architecture architecture;
  std::uint64_t init_seed = 11;
  std::uint64_t noise_seed = 13;
};

struct OptimizerSection {
  consensus::OptimizerConfig adam;
  consensus::PenaltyWeights weights;
  int iters_per_round = 100;
  std::size_t full_batch_limit = 1024;
  std::size_t minibatch_size = 512;
};

enum class TransportKind { simulated, udp };

struct ProtocolConfig {
  std::string topology = "full";  // full | ring
  std::uint32_t max_round = 30;
  TransportKind transport = TransportKind::simulated;
  protocol::SimulatedNetworkConfig sim;
  std::uint16_t udp_base_port = 47000;
  int udp_timeout_ms = 120000;
};

struct EvaluationConfig {
  int nx = 128;
  int ny = 128;
  int mc_passes = 32;
  std::uint64_t seed = 17;
  double holdout_fraction = 0.1;
  double wall_margin = 0.5;  // cells this close to the walls are left out of the IoU
  std::string kde_mode = "pooled";  // pooled | per_agent
};

struct ExperimentConfig {
  int agents = 4;
  lidar::ScenarioConfig scenario;
  ModelConfig model;
  OptimizerSection optimizer;
  ProtocolConfig protocol;
  EvaluationConfig evaluation;

  // Throws ConfigError on out-of-range values.
  void validate() const;
  // Replaces every seed with one derived from `seed`.
  void override_seed(std::uint64_t seed);
};

nlohmann::json to_json(const ExperimentConfig& config);
// Missing keys keep their defaults; unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

TransportKind parse_transport(const std::string& name);
std::string to_string(TransportKind kind);

}  // namespace bnnswarm
