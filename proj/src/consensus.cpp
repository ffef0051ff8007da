#include "bnnswarm/consensus.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "bnnswarm/errors.hpp"

namespace bnnswarm::consensus {

namespace {

void require_same_length(std::size_t a, std::size_t b, const char* what) {
  if (a != b)
    throw ArgumentError("consensus_opt", std::string(what) + ": length " + std::to_string(a) + " vs " +
                                             std::to_string(b));
}

}  // namespace

DualState DualState::zeros_like(const ParamVector& layout) {
  return {std::vector<double>(layout.mu.size(), 0.0), std::vector<double>(layout.rho.size(), 0.0)};
}

void PenaltyWeights::grow() {
  w_mu *= growth;
  w_rho *= growth;
}

double kl_rho_regularizer(std::span<const double> rho, std::span<const double> rho_reg) {
  require_same_length(rho.size(), rho_reg.size(), "kl_rho_regularizer");
  double sum = 0.0;
  for (std::size_t i = 0; i < rho.size(); ++i) {
    if (rho[i] == rho_reg[i]) continue;
    const double s = nn::softplus(rho[i]);
    const double r = nn::softplus(rho_reg[i]);
    const double ratio = s / r;
    sum += -std::log(ratio) + 0.5 * ratio * ratio - 0.5;
  }
  return sum;
}

void add_kl_rho_gradient(std::span<const double> rho, std::span<const double> rho_reg, double scale,
                         std::span<double> out) {
  require_same_length(rho.size(), rho_reg.size(), "add_kl_rho_gradient");
  require_same_length(rho.size(), out.size(), "add_kl_rho_gradient output");
  for (std::size_t i = 0; i < rho.size(); ++i) {
    const double s = nn::softplus(rho[i]);
    const double r = nn::softplus(rho_reg[i]);
    out[i] += scale * (-1.0 / s + s / (r * r)) * nn::softplus_grad(rho[i]);
  }
}

double l2_mu_regularizer(std::span<const double> mu, std::span<const double> mu_reg) {
  require_same_length(mu.size(), mu_reg.size(), "l2_mu_regularizer");
  double sum = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const double d = mu[i] - mu_reg[i];
    sum += d * d;
  }
  return sum;
}

void add_l2_mu_gradient(std::span<const double> mu, std::span<const double> mu_reg, double scale,
                        std::span<double> out) {
  require_same_length(mu.size(), mu_reg.size(), "add_l2_mu_gradient");
  require_same_length(mu.size(), out.size(), "add_l2_mu_gradient output");
  for (std::size_t i = 0; i < mu.size(); ++i) out[i] += scale * 2.0 * (mu[i] - mu_reg[i]);
}

Adam::Adam(AdamConfig config, std::size_t n) : config_(config), grad_(n, 0.0), m_(n, 0.0), v_(n, 0.0) {
  if (!(config.step_size > 0.0) || !(config.beta1 > 0.0 && config.beta1 < 1.0) ||
      !(config.beta2 > 0.0 && config.beta2 < 1.0) || !(config.epsilon > 0.0))
    throw ArgumentError("consensus_opt", "invalid Adam hyperparameters");
}

void Adam::zero_grad() { std::fill(grad_.begin(), grad_.end(), 0.0); }

void Adam::step(std::span<double> params) {
  require_same_length(params.size(), grad_.size(), "Adam::step");
  ++t_;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double g = grad_[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g * g;
    const double m_hat = m_[i] / c1;
    const double v_hat = v_[i] / c2;
    params[i] -= config_.step_size * m_hat / (std::sqrt(v_hat) + config_.epsilon);
  }
}

BceObjective::BceObjective(nn::BnnModel model_template, nn::LabeledBatch data, std::uint64_t seed,
                           std::size_t full_batch_limit, std::size_t minibatch_size)
    : model_(std::move(model_template)),
      data_(std::move(data)),
      noise_(seed),
      rng_(seed ^ 0x9e3779b97f4a7c15ULL),
      full_batch_limit_(full_batch_limit),
      minibatch_size_(minibatch_size) {
  if (minibatch_size_ == 0) throw ArgumentError("consensus_opt", "minibatch size must be positive");
  order_.resize(data_.size());
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  cursor_ = order_.size();
}

const nn::LabeledBatch& BceObjective::next_batch() {
  if (data_.size() <= full_batch_limit_) return data_;
  const std::size_t dim = static_cast<std::size_t>(data_.inputs.rows());
  batch_.inputs.resize(static_cast<Eigen::Index>(dim), static_cast<Eigen::Index>(minibatch_size_));
  batch_.labels.resize(minibatch_size_);
  for (std::size_t b = 0; b < minibatch_size_; ++b) {
    if (cursor_ >= order_.size()) {
      std::shuffle(order_.begin(), order_.end(), rng_);
      cursor_ = 0;
    }
    const std::size_t idx = order_[cursor_++];
    batch_.inputs.col(static_cast<Eigen::Index>(b)) = data_.inputs.col(static_cast<Eigen::Index>(idx));
    batch_.labels[b] = data_.labels[idx];
  }
  return batch_;
}

double BceObjective::evaluate(const ParamVector& params, ParamVector& grad, bool want_rho) {
  model_.unflatten(params);
  const auto& batch = next_batch();
  if (!frozen_eps_.empty()) {
    eps_ = frozen_eps_;
  } else {
    eps_.resize(model_.rho_count());
    noise_.fill(eps_);
  }
  Eigen::MatrixXd grad_out;
  const double loss = nn::bce_loss(model_, batch, eps_, &trace_, &grad_out);
  ParamVector g = nn::backward(model_, trace_, grad_out);
  grad.mu = std::move(g.mu);
  if (want_rho) {
    grad.rho = std::move(g.rho);
  } else {
    grad.rho.assign(params.rho.size(), 0.0);
  }
  return loss;
}

LossBreakdown compose_losses(const ParamVector& params, double pred_loss, ParamVector& grad, const DualState& duals,
                             const ConsensusTargets& targets, const PenaltyWeights& weights,
                             bool rho_uses_pred_loss) {
  require_same_length(params.mu.size(), duals.mu.size(), "duals_mu");
  require_same_length(params.rho.size(), duals.rho.size(), "duals_rho");
  require_same_length(params.mu.size(), targets.mu.size(), "theta_mu_reg");
  require_same_length(params.rho.size(), targets.rho.size(), "theta_rho_reg");
  require_same_length(params.mu.size(), grad.mu.size(), "mu gradient");
  require_same_length(params.rho.size(), grad.rho.size(), "rho gradient");

  LossBreakdown out;
  out.pred = pred_loss;
  out.reg_mu = l2_mu_regularizer(params.mu, targets.mu);
  out.reg_rho = kl_rho_regularizer(params.rho, targets.rho);
  const double dual_mu = std::inner_product(params.mu.begin(), params.mu.end(), duals.mu.begin(), 0.0);
  const double dual_rho = std::inner_product(params.rho.begin(), params.rho.end(), duals.rho.begin(), 0.0);
  out.loss_mu = pred_loss + dual_mu + weights.w_mu * out.reg_mu;
  out.loss_rho = dual_rho + weights.w_rho * out.reg_rho;
  if (rho_uses_pred_loss) out.loss_rho += pred_loss;

  for (std::size_t i = 0; i < params.mu.size(); ++i) grad.mu[i] += duals.mu[i];
  add_l2_mu_gradient(params.mu, targets.mu, weights.w_mu, grad.mu);
  if (!rho_uses_pred_loss) std::fill(grad.rho.begin(), grad.rho.end(), 0.0);
  for (std::size_t i = 0; i < params.rho.size(); ++i) grad.rho[i] += duals.rho[i];
  add_kl_rho_gradient(params.rho, targets.rho, weights.w_rho, grad.rho);
  return out;
}

LocalOptimizer::LocalOptimizer(OptimizerConfig config, std::size_t mu_count, std::size_t rho_count)
    : config_(config), opt_mu_(config.mu, mu_count), opt_rho_(config.rho, rho_count), grad_(mu_count, rho_count) {}

LossBreakdown LocalOptimizer::run(ParamVector& params, PredictionObjective& objective, const DualState& duals,
                                  const ConsensusTargets& targets, const PenaltyWeights& weights, int iters) {
  if (iters < 1) throw ArgumentError("consensus_opt", "local_optimize needs iters >= 1");
  require_same_length(params.mu.size(), opt_mu_.grad().size(), "mu optimizer");
  require_same_length(params.rho.size(), opt_rho_.grad().size(), "rho optimizer");

  LossBreakdown last;
  for (int it = 0; it < iters; ++it) {
    opt_mu_.zero_grad();
    opt_rho_.zero_grad();
    grad_.mu.assign(params.mu.size(), 0.0);
    grad_.rho.assign(params.rho.size(), 0.0);
    const double pred = objective.evaluate(params, grad_, config_.rho_uses_pred_loss);
    last = compose_losses(params, pred, grad_, duals, targets, weights, config_.rho_uses_pred_loss);
    if (!std::isfinite(last.loss_mu) || !std::isfinite(last.loss_rho))
      throw DivergedError(it, "non-finite local loss");
    std::copy(grad_.mu.begin(), grad_.mu.end(), opt_mu_.grad().begin());
    std::copy(grad_.rho.begin(), grad_.rho.end(), opt_rho_.grad().begin());
    opt_mu_.step(params.mu);
    if (!params.rho.empty()) opt_rho_.step(params.rho);
  }
  return last;
}

nn::BnnModel local_optimize(nn::BnnModel model, PredictionObjective& objective, LocalOptimizer& optimizer,
                            const DualState& duals, const ConsensusTargets& targets,
                            const PenaltyWeights& weights, int iters, LossBreakdown* last) {
  ParamVector params = model.flatten();
  const auto result = optimizer.run(params, objective, duals, targets, weights, iters);
  if (last) *last = result;
  model.unflatten(params);
  return model;
}

NodeUpdateResult node_update(const ParamVector& own, std::span<const PeerParams> peers, const DualState& duals,
                             const PenaltyWeights& weights) {
  if (peers.empty()) throw ArgumentError("consensus_opt", "node_update needs at least one peer");
  require_same_length(own.mu.size(), duals.mu.size(), "duals_mu");
  require_same_length(own.rho.size(), duals.rho.size(), "duals_rho");
  std::vector<const PeerParams*> sorted;
  sorted.reserve(peers.size());
  for (const auto& p : peers) {
    if (!p.params.get().same_layout(own)) throw ArgumentError("consensus_opt", "peer parameter layout mismatch");
    sorted.push_back(&p);
  }
  std::stable_sort(sorted.begin(), sorted.end(), [](const auto* a, const auto* b) { return a->id < b->id; });

  NodeUpdateResult out{ConsensusTargets::from(own), duals};
  const double inv_count = 1.0 / static_cast<double>(peers.size() + 1);
  auto update_section = [&](const std::vector<double>& mine, auto section, std::vector<double>& target,
                            std::vector<double>& dual, double w) {
    for (std::size_t i = 0; i < mine.size(); ++i) {
      double disagreement = 0.0;
      double sum = mine[i];
      for (const auto* p : sorted) {
        const double theirs = (p->params.get().*section)[i];
        disagreement += mine[i] - theirs;
        sum += theirs;
      }
      dual[i] += w * disagreement;
      target[i] = sum * inv_count;
    }
  };
  update_section(own.mu, &ParamVector::mu, out.targets.mu, out.duals.mu, weights.w_mu);
  update_section(own.rho, &ParamVector::rho, out.targets.rho, out.duals.rho, weights.w_rho);
  return out;
}

NodeUpdateResult node_update(const ParamVector& own, std::span<const ParamVector> peers, const DualState& duals,
                             const PenaltyWeights& weights) {
  std::vector<PeerParams> views;
  views.reserve(peers.size());
  for (std::size_t j = 0; j < peers.size(); ++j) views.push_back({static_cast<std::uint32_t>(j), std::cref(peers[j])});
  return node_update(own, views, duals, weights);
}

}  // namespace bnnswarm::consensus
