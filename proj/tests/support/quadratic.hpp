#pragma once

#include <memory>
#include <vector>

#include "bnnswarm/consensus.hpp"
#include "bnnswarm/transport.hpp"

namespace testsupport {

// PredLoss = sum_i (mu_i - a_i)^2; no rho dependence.
class QuadraticObjective : public bnnswarm::consensus::PredictionObjective {
 public:
  explicit QuadraticObjective(std::vector<double> a) : a_(std::move(a)) {}
  double evaluate(const bnnswarm::ParamVector& p, bnnswarm::ParamVector& grad, bool) override {
    double loss = 0.0;
    for (std::size_t i = 0; i < a_.size(); ++i) {
      const double d = p.mu[i] - a_[i];
      loss += d * d;
      grad.mu[i] += 2.0 * d;
    }
    return loss;
  }

 private:
  std::vector<double> a_;
};

struct ScalarConsensusRun {
  std::vector<double> theta;  // final value per node
  std::vector<std::uint32_t> updates;
};

// n nodes with local losses (theta - a_i)^2, coordinated by the peer
// protocol over the simulated network; each round is node_update followed
// by `iters` Adam steps.
inline ScalarConsensusRun run_scalar_consensus(const std::vector<double>& a, std::uint32_t rounds,
                                               bnnswarm::protocol::Topology topology, double step_size = 0.05,
                                               int iters = 50, double w = 0.5,
                                               bnnswarm::protocol::SimulatedNetworkConfig net = {}) {
  using namespace bnnswarm;
  struct Ctx {
    QuadraticObjective obj;
    consensus::LocalOptimizer opt;
    consensus::DualState duals{{0.0}, {}};
    consensus::PenaltyWeights weights;
  };
  consensus::OptimizerConfig oc;
  oc.mu.step_size = step_size;
  std::vector<std::unique_ptr<Ctx>> ctx;
  std::vector<protocol::PeerNode> nodes;
  for (std::uint32_t i = 0; i < a.size(); ++i) {
    ctx.push_back(std::unique_ptr<Ctx>(new Ctx{QuadraticObjective({a[i]}), consensus::LocalOptimizer(oc, 1, 0)}));
    ctx.back()->weights.w_mu = w;
    ctx.back()->weights.w_rho = w;
    Ctx* c = ctx.back().get();
    auto fn = [c, iters](const ParamVector& own, std::span<const protocol::PeerSnapshot> peers, std::uint32_t) {
      std::vector<consensus::PeerParams> pp;
      for (const auto& p : peers) pp.push_back({p.id, std::cref(*p.state)});
      auto upd = consensus::node_update(own, pp, c->duals, c->weights);
      c->duals = upd.duals;
      ParamVector params = own;
      c->opt.run(params, c->obj, c->duals, upd.targets, c->weights, iters);
      return params;
    };
    nodes.emplace_back(protocol::NodeRuntime::create(i, topology.neighbors(i), rounds, ParamVector(std::vector<double>{0.0}, std::vector<double>{})), fn);
  }
  protocol::SimulatedNetwork(topology, net).run(nodes);
  ScalarConsensusRun out;
  for (const auto& n : nodes) {
    out.theta.push_back(n.runtime().state.mu[0]);
    out.updates.push_back(n.update_count());
  }
  return out;
}

}  // namespace testsupport
