#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <vector>

#include "bnnswarm/bayesian_nn.hpp"
#include "bnnswarm/param_vector.hpp"

namespace bnnswarm::consensus {

// Dual variables for the mu and rho sections; start at zero.
struct DualState {
  std::vector<double> mu;
  std::vector<double> rho;

  static DualState zeros_like(const ParamVector& layout);
  bool operator==(const DualState&) const = default;
};

// Regularisation targets theta_reg for both sections.
struct ConsensusTargets {
  std::vector<double> mu;
  std::vector<double> rho;

  static ConsensusTargets from(const ParamVector& p) { return {p.mu, p.rho}; }
  bool operator==(const ConsensusTargets&) const = default;
};

struct PenaltyWeights {
  double w_mu = 0.1;
  double w_rho = 0.1;
  double growth = 1.0;

  // Multiplies both weights by `growth`; called once per protocol round.
  void grow();
};

// sum_i KL(N(0, s_i^2) || N(0, r_i^2)) with s = softplus(rho), r = softplus(rho_reg).
double kl_rho_regularizer(std::span<const double> rho, std::span<const double> rho_reg);
// Adds scale * d kl_rho_regularizer / d rho into `out`.
void add_kl_rho_gradient(std::span<const double> rho, std::span<const double> rho_reg, double scale,
                         std::span<double> out);

// sum_i (mu_i - mu_reg_i)^2
double l2_mu_regularizer(std::span<const double> mu, std::span<const double> mu_reg);
void add_l2_mu_gradient(std::span<const double> mu, std::span<const double> mu_reg, double scale,
                        std::span<double> out);

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// Adam with bias correction. Owns the gradient buffer it consumes.
class Adam {
 public:
  Adam(AdamConfig config, std::size_t n);

  void zero_grad();
  std::span<double> grad() { return grad_; }
  void step(std::span<double> params);

  std::int64_t step_count() const { return t_; }
  const AdamConfig& config() const { return config_; }

 private:
  AdamConfig config_;
  std::vector<double> grad_;
  std::vector<double> m_;
  std::vector<double> v_;
  std::int64_t t_ = 0;
};

// The data term of the local loss (PredLoss). evaluate() returns the loss
// at `params` and writes its gradient into `grad`; the rho part of `grad`
// is only filled when `want_rho` is set.
class PredictionObjective {
 public:
  virtual ~PredictionObjective() = default;
  virtual double evaluate(const ParamVector& params, ParamVector& grad, bool want_rho) = 0;
};

// PredLoss = BCE of one stochastic pass over a minibatch. Uses the full
// data set when it holds at most `full_batch_limit` points, otherwise
// walks shuffled minibatches of `minibatch_size`.
class BceObjective : public PredictionObjective {
 public:
  BceObjective(nn::BnnModel model_template, nn::LabeledBatch data, std::uint64_t seed,
               std::size_t full_batch_limit = 1024, std::size_t minibatch_size = 512);

  double evaluate(const ParamVector& params, ParamVector& grad, bool want_rho) override;

  // Replays the given noise on every call instead of drawing fresh samples.
  void freeze_noise(std::vector<double> eps) { frozen_eps_ = std::move(eps); }
  const nn::LabeledBatch& data() const { return data_; }

 private:
  const nn::LabeledBatch& next_batch();

  nn::BnnModel model_;
  nn::LabeledBatch data_;
  nn::NoiseSource noise_;
  std::mt19937_64 rng_;
  std::size_t full_batch_limit_;
  std::size_t minibatch_size_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  nn::LabeledBatch batch_;
  std::vector<double> frozen_eps_;
  std::vector<double> eps_;
  nn::ForwardTrace trace_;
};

struct OptimizerConfig {
  AdamConfig mu{1e-3, 0.9, 0.999, 1e-8};
  AdamConfig rho{1e-4, 0.9, 0.999, 1e-8};
  // Adds PredLoss to Loss_rho as well; off by default.
  bool rho_uses_pred_loss = false;
};

struct LossBreakdown {
  double pred = 0.0;
  double reg_mu = 0.0;
  double reg_rho = 0.0;
  double loss_mu = 0.0;
  double loss_rho = 0.0;
};

// Loss_mu = PredLoss + <mu, duals_mu> + w_mu * L2(mu, target_mu)
// Loss_rho = <rho, duals_rho> + w_rho * KL(rho, target_rho)
// `grad` holds the PredLoss gradient on entry and the gradients of Loss_mu
// (mu part) and Loss_rho (rho part) on return.
LossBreakdown compose_losses(const ParamVector& params, double pred_loss, ParamVector& grad, const DualState& duals,
                             const ConsensusTargets& targets, const PenaltyWeights& weights,
                             bool rho_uses_pred_loss = false);

// The dual-augmented local optimisation. Keeps one Adam per section; the
// moment estimates persist across calls (i.e. across protocol rounds).
class LocalOptimizer {
 public:
  LocalOptimizer(OptimizerConfig config, std::size_t mu_count, std::size_t rho_count);

  // Runs `iters` iterations in place on `params`; returns the losses of the
  // last iteration. Throws DivergedError on a non-finite loss.
  LossBreakdown run(ParamVector& params, PredictionObjective& objective, const DualState& duals,
                    const ConsensusTargets& targets, const PenaltyWeights& weights, int iters);

  const Adam& mu_optimizer() const { return opt_mu_; }
  const Adam& rho_optimizer() const { return opt_rho_; }

 private:
  OptimizerConfig config_;
  Adam opt_mu_;
  Adam opt_rho_;
  ParamVector grad_;
};

nn::BnnModel local_optimize(nn::BnnModel model, PredictionObjective& objective, LocalOptimizer& optimizer,
                            const DualState& duals, const ConsensusTargets& targets,
                            const PenaltyWeights& weights, int iters, LossBreakdown* last = nullptr);

struct PeerParams {
  std::uint32_t id;
  std::reference_wrapper<const ParamVector> params;
};

struct NodeUpdateResult {
  ConsensusTargets targets;
  DualState duals;
};

// duals += w * sum_j (own - peer_j) for each section; targets = mean of own
// and all peers. Peers are summed in ascending id order.
NodeUpdateResult node_update(const ParamVector& own, std::span<const PeerParams> peers, const DualState& duals,
                             const PenaltyWeights& weights);
// Convenience overload: peer j gets id j.
NodeUpdateResult node_update(const ParamVector& own, std::span<const ParamVector> peers, const DualState& duals,
                             const PenaltyWeights& weights);

}  // namespace bnnswarm::consensus
