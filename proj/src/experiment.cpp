#include "bnnswarm/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <random>
#include <thread>

#include "bnnswarm/errors.hpp"
#include "bnnswarm/kde.hpp"
#include "bnnswarm/kernels.hpp"
#include "bnnswarm/seed.hpp"
#include "bnnswarm/stats.hpp"
#include "bnnswarm/transport.hpp"

namespace bnnswarm::experiment {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

protocol::Topology make_topology(const ExperimentConfig& config) {
  const auto n = static_cast<std::uint32_t>(config.agents);
  if (config.protocol.topology == "ring") return protocol::Topology::ring(n);
  return protocol::Topology::fully_connected(n);
}

// Same rectangle generate_environment uses.
Rect room_bounds(const ExperimentConfig& config) { return {{0.0, 0.0}, {config.scenario.width, config.scenario.height}}; }

// Everything one node keeps between rounds.
struct NodeContext {
  consensus::BceObjective objective;
  consensus::LocalOptimizer optimizer;
  consensus::DualState duals;
  consensus::PenaltyWeights weights;
  consensus::LossBreakdown last;
  int iters;
};

std::unique_ptr<NodeContext> make_context(const ExperimentConfig& config, const nn::BnnModel& model,
                                          const lidar::LidarDataset& train, const Rect& bounds, std::uint32_t id) {
  const auto& o = config.optimizer;
  const ParamVector layout = model.flatten();
  return std::unique_ptr<NodeContext>(new NodeContext{
      consensus::BceObjective(model, lidar::to_batch(train, bounds), mix_seed(config.model.noise_seed, id),
                              o.full_batch_limit, o.minibatch_size),
      consensus::LocalOptimizer(o.adam, layout.mu.size(), layout.rho.size()),
      consensus::DualState::zeros_like(layout),
      o.weights,
      {},
      o.iters_per_round});
}

json loss_json(const consensus::LossBreakdown& l) {
  return {{"pred", l.pred}, {"reg_mu", l.reg_mu}, {"reg_rho", l.reg_rho}, {"loss_mu", l.loss_mu},
          {"loss_rho", l.loss_rho}};
}

consensus::LossBreakdown loss_from_json(const json& j) {
  consensus::LossBreakdown l;
  l.pred = j.at("pred").get<double>();
  l.reg_mu = j.at("reg_mu").get<double>();
  l.reg_rho = j.at("reg_rho").get<double>();
  l.loss_mu = j.at("loss_mu").get<double>();
  l.loss_rho = j.at("loss_rho").get<double>();
  return l;
}

json region_json(const Rect& r) { return json::array({r.min.x, r.min.y, r.max.x, r.max.y}); }

// JSON null for values that are not defined in this run.
json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

double masked_median(const GridField& grid, const GridField& mask, bool inside) {
  std::vector<double> vals;
  for (std::size_t k = 0; k < grid.size(); ++k)
    if ((mask.values[k] != 0.0) == inside) vals.push_back(grid.values[k]);
  return vals.empty() ? std::numeric_limits<double>::quiet_NaN() : stats::median(std::move(vals));
}

GridField elementwise_mean(const std::vector<GridField>& grids) {
  GridField out = grids.front();
  for (std::size_t g = 1; g < grids.size(); ++g)
    for (std::size_t k = 0; k < out.size(); ++k) out.values[k] += grids[g].values[k];
  for (double& v : out.values) v /= static_cast<double>(grids.size());
  return out;
}

GridField threshold(const GridField& grid, double t) {
  GridField out = grid;
  for (double& v : out.values) v = v >= t ? 1.0 : 0.0;
  return out;
}

kde::DensityModel fit_density(const lidar::LidarDataset& data) {
  std::vector<Vec2> pts;
  pts.reserve(data.size());
  for (const auto& p : data.points) pts.push_back(p.position);
  try {
    return kde::fit_kde(pts);
  } catch (const DegenerateDataError& e) {
    std::cerr << "warning: " << e.what() << "; using a diagonal bandwidth\n";
    return kde::fit_kde_diagonal(pts);
  }
}

void write_training_state(const TrainResult& result, Mode mode, const std::string& dir) {
  json nodes = json::array();
  for (const auto& n : result.nodes)
    nodes.push_back({{"id", n.id}, {"updates", n.updates}, {"loss", loss_json(n.last)}});
  write_json({{"mode", to_string(mode)}, {"rounds", result.rounds}, {"messages", result.messages}, {"nodes", nodes}},
             (fs::path(dir) / "training.json").string());
  for (const auto& n : result.nodes) write_params_file(n.model.flatten(), params_path(dir, n.id));
}

}  // namespace

std::string to_string(Mode mode) { return mode == Mode::single ? "single" : "swarm"; }

std::string params_path(const std::string& dir, std::uint32_t node) {
  return (fs::path(dir) / ("params_" + std::to_string(node) + ".bin")).string();
}

void write_json(const json& j, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  out << j.dump(2) << '\n';
  if (!out) throw IoError(path, "write failed");
}

json read_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw IoError(path, e.what());
  }
}

DataSplit split_holdout(const lidar::LidarDataset& data, double fraction, std::uint64_t seed) {
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  // Fisher-Yates by hand: std::shuffle's draw sequence is library-specific.
  for (std::size_t i = order.size(); i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const auto n_hold = static_cast<std::size_t>(std::floor(fraction * static_cast<double>(data.size())));
  std::vector<char> hold(data.size(), 0);
  for (std::size_t k = 0; k < n_hold; ++k) hold[order[k]] = 1;
  DataSplit split;
  for (std::size_t i = 0; i < data.size(); ++i) (hold[i] ? split.holdout : split.train).points.push_back(data.points[i]);
  return split;
}

nn::BnnModel initial_model(const ExperimentConfig& config) {
  return nn::BnnModel::build(config.model.architecture, config.model.init_seed);
}

Prepared prepare(const ExperimentConfig& config) {
  Prepared p;
  p.scenario = lidar::generate_scenario(config.scenario, config.agents);
  for (std::size_t a = 0; a < p.scenario.agents.size(); ++a)
    p.splits.push_back(split_holdout(p.scenario.agents[a].dataset, config.evaluation.holdout_fraction,
                                     mix_seed(config.scenario.seed, 500 + a)));
  return p;
}

TrainResult train_single(const ExperimentConfig& config, const lidar::LidarDataset& train) {
  const nn::BnnModel model = initial_model(config);
  const Rect bounds = room_bounds(config);
  auto ctx = make_context(config, model, train, bounds, 0);
  ParamVector params = model.flatten();
  for (std::uint32_t r = 0; r < config.protocol.max_round; ++r) {
    const auto targets = consensus::ConsensusTargets::from(params);
    ctx->last = ctx->optimizer.run(params, ctx->objective, ctx->duals, targets, ctx->weights, ctx->iters);
    ctx->weights.grow();
  }
  TrainResult result;
  result.rounds = config.protocol.max_round;
  TrainedNode node{0, model, ctx->last, config.protocol.max_round};
  node.model.unflatten(params);
  result.nodes.push_back(std::move(node));
  return result;
}

TrainResult train_swarm(const ExperimentConfig& config, const std::vector<lidar::LidarDataset>& train_sets) {
  if (train_sets.size() != static_cast<std::size_t>(config.agents))
    throw ArgumentError("experiment_cli", "one training set per agent required");
  const nn::BnnModel model = initial_model(config);
  const Rect bounds = room_bounds(config);
  const auto topology = make_topology(config);
  const auto n = static_cast<std::uint32_t>(config.agents);

  std::vector<std::unique_ptr<NodeContext>> contexts;
  for (std::uint32_t i = 0; i < n; ++i) contexts.push_back(make_context(config, model, train_sets[i], bounds, i));

  auto update_fn = [&](std::uint32_t i) -> protocol::UpdateFn {
    NodeContext* ctx = contexts[i].get();
    return [ctx](const ParamVector& own, std::span<const protocol::PeerSnapshot> peers, std::uint32_t) {
      std::vector<consensus::PeerParams> pp;
      pp.reserve(peers.size());
      for (const auto& p : peers) pp.push_back({p.id, std::cref(*p.state)});
      auto upd = consensus::node_update(own, pp, ctx->duals, ctx->weights);
      ctx->duals = std::move(upd.duals);
      ParamVector params = own;
      ctx->last = ctx->optimizer.run(params, ctx->objective, ctx->duals, upd.targets, ctx->weights, ctx->iters);
      ctx->weights.grow();
      return params;
    };
  };

  const ParamVector init = model.flatten();
  TrainResult result;
  result.rounds = config.protocol.max_round;
  std::vector<ParamVector> finals(n);
  std::vector<std::uint32_t> updates(n, 0);

  if (config.protocol.transport == TransportKind::simulated) {
    std::vector<protocol::PeerNode> nodes;
    for (std::uint32_t i = 0; i < n; ++i)
      nodes.emplace_back(protocol::NodeRuntime::create(i, topology.neighbors(i), config.protocol.max_round, init),
                         update_fn(i));
    protocol::SimulatedNetwork net(topology, config.protocol.sim);
    result.messages = net.run(nodes).delivered;
    for (std::uint32_t i = 0; i < n; ++i) {
      finals[i] = nodes[i].runtime().state;
      updates[i] = nodes[i].update_count();
    }
  } else {
    const auto timeout = std::chrono::milliseconds(config.protocol.udp_timeout_ms);
    const auto port = [&](std::uint32_t i) { return static_cast<std::uint16_t>(config.protocol.udp_base_port + i); };
    // Bind every socket before any node starts sending.
    std::vector<std::unique_ptr<protocol::UdpTransport>> transports;
    for (std::uint32_t i = 0; i < n; ++i) {
      std::vector<protocol::UdpPeer> peers;
      for (auto j : topology.neighbors(i)) peers.push_back({j, "127.0.0.1", port(j)});
      transports.push_back(std::make_unique<protocol::UdpTransport>(i, port(i), peers, timeout));
    }
    std::vector<std::exception_ptr> errors(n);
    std::vector<std::thread> threads;
    for (std::uint32_t i = 0; i < n; ++i) {
      threads.emplace_back([&, i] {
        try {
          finals[i] = protocol::run_node(
              protocol::NodeRuntime::create(i, topology.neighbors(i), config.protocol.max_round, init),
              *transports[i], update_fn(i), &updates[i]);
        } catch (...) {
          errors[i] = std::current_exception();
        }
      });
    }
    for (auto& t : threads) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
  }

  for (std::uint32_t i = 0; i < n; ++i) {
    TrainedNode node{i, model, contexts[i]->last, updates[i]};
    node.model.unflatten(finals[i]);
    result.nodes.push_back(std::move(node));
  }
  return result;
}

UncertaintyGrids uncertainty_grid(const nn::BnnModel& model, const Rect& region, int nx, int ny, int mc_passes,
                                  std::uint64_t seed, const Rect& input_bounds) {
  if (mc_passes < 2) throw ArgumentError("experiment_cli", "uncertainty_grid needs mc_passes >= 2");
  const auto centers = cell_centers(region, nx, ny);
  Eigen::MatrixXd inputs(2, static_cast<Eigen::Index>(centers.size()));
  for (std::size_t k = 0; k < centers.size(); ++k) {
    const auto x = lidar::normalize(centers[k], input_bounds);
    inputs(0, static_cast<Eigen::Index>(k)) = x[0];
    inputs(1, static_cast<Eigen::Index>(k)) = x[1];
  }
  auto field = kernels::mc_predict_omp(model, inputs, mc_passes, seed);
  UncertaintyGrids g{GridField(region, nx, ny), GridField(region, nx, ny)};
  g.mean.values = std::move(field.mean);
  g.std.values = std::move(field.std);
  return g;
}

double correlation_report(const GridField& std_grid, const GridField& density_grid) {
  if (!std_grid.same_shape(density_grid)) throw ArgumentError("experiment_cli", "grid shapes differ");
  return stats::spearman(std_grid.values, density_grid.values);
}

double holdout_accuracy(const nn::BnnModel& model, const lidar::LidarDataset& holdout, const Rect& input_bounds,
                        int mc_passes, std::uint64_t seed) {
  if (holdout.empty()) throw ArgumentError("experiment_cli", "empty holdout set");
  const auto batch = lidar::to_batch(holdout, input_bounds);
  const auto field = kernels::mc_predict_omp(model, batch.inputs, mc_passes, seed);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < batch.size(); ++i) correct += (field.mean[i] >= 0.5) == (batch.labels[i] >= 0.5);
  return static_cast<double>(correct) / static_cast<double>(batch.size());
}

GridField visited_mask(const Rect& region, int nx, int ny, const std::vector<Vec2>& poses, double radius) {
  GridField mask(region, nx, ny);
  const double r2 = radius * radius;
  for (std::size_t k = 0; k < mask.size(); ++k) {
    const Vec2 c = mask.cell_center(k);
    for (const auto& p : poses) {
      const Vec2 d = c - p;
      if (dot(d, d) <= r2) {
        mask.values[k] = 1.0;
        break;
      }
    }
  }
  return mask;
}

GridField evaluation_mask(const Rect& bounds, int nx, int ny, const std::vector<Rect>& regions, double margin) {
  GridField mask(bounds, nx, ny);
  for (std::size_t k = 0; k < mask.size(); ++k) {
    const Vec2 c = mask.cell_center(k);
    const bool clear_of_walls = c.x >= bounds.min.x + margin && c.x <= bounds.max.x - margin &&
                                c.y >= bounds.min.y + margin && c.y <= bounds.max.y - margin;
    const bool in_region = std::any_of(regions.begin(), regions.end(), [&](const Rect& r) { return r.contains(c); });
    mask.values[k] = clear_of_walls && in_region ? 1.0 : 0.0;
  }
  return mask;
}

json evaluate_run(const ExperimentConfig& config, const Prepared& prepared, Mode mode, const TrainResult& trained,
                  const std::string& out_dir, double* seconds) {
  const auto t0 = Clock::now();
  fs::create_directories(out_dir);
  const auto& ev = config.evaluation;
  const Rect bounds = prepared.scenario.env.bounds;
  const std::size_t covered = mode == Mode::single ? 1 : prepared.scenario.agents.size();

  std::vector<Rect> regions;
  std::vector<Vec2> poses;
  lidar::LidarDataset observed;
  for (std::size_t a = 0; a < covered; ++a) {
    regions.push_back(prepared.scenario.agents[a].trajectory.region);
    const auto& tp = prepared.scenario.agents[a].trajectory.poses;
    poses.insert(poses.end(), tp.begin(), tp.end());
    observed.append(prepared.splits[a].train);
  }

  const GridField truth = lidar::rasterize_obstacles(prepared.scenario.env, bounds, ev.nx, ev.ny);
  const GridField mask = evaluation_mask(bounds, ev.nx, ev.ny, regions, ev.wall_margin);
  const GridField visited = visited_mask(bounds, ev.nx, ev.ny, poses, config.scenario.max_range);
  render_grid(truth, (fs::path(out_dir) / "ground_truth").string());

  // Data-density baseline.
  std::vector<GridField> densities;
  if (ev.kde_mode == "per_agent") {
    for (std::size_t a = 0; a < covered; ++a) {
      densities.push_back(kde::density_grid(fit_density(prepared.splits[a].train), bounds, ev.nx, ev.ny));
      render_grid(densities.back(), (fs::path(out_dir) / ("density_" + std::to_string(a))).string());
    }
  }
  const GridField density = ev.kde_mode == "per_agent" ? elementwise_mean(densities)
                                                        : kde::density_grid(fit_density(observed), bounds, ev.nx, ev.ny);
  render_grid(density, (fs::path(out_dir) / "density").string());

  json nodes = json::array();
  std::vector<GridField> means;
  std::vector<GridField> stds;
  double acc_sum = 0.0;
  for (const auto& node : trained.nodes) {
    const auto grids = uncertainty_grid(node.model, bounds, ev.nx, ev.ny, ev.mc_passes, mix_seed(ev.seed, node.id), bounds);
    render_grid(grids.mean, (fs::path(out_dir) / ("map_" + std::to_string(node.id))).string());
    render_grid(grids.std, (fs::path(out_dir) / ("uncertainty_" + std::to_string(node.id))).string());
    write_params_file(node.model.flatten(), params_path(out_dir, node.id));

    const auto& holdout = prepared.splits[node.id].holdout;
    const double acc = holdout.empty() ? std::numeric_limits<double>::quiet_NaN()
                                       : holdout_accuracy(node.model, holdout, bounds, ev.mc_passes,
                                                          mix_seed(ev.seed, 1000 + node.id));
    acc_sum += acc;
    const auto pred = threshold(grids.mean, 0.5);
    json entry{{"id", node.id},
               {"updates", node.updates},
               {"loss", loss_json(node.last)},
               {"holdout_accuracy", number_or_null(acc)},
               {"holdout_points", holdout.size()},
               {"train_points", prepared.splits[node.id].train.size()},
               {"iou", stats::iou(pred.values, truth.values, mask.values)},
               {"mean_uncertainty", grids.std.mean()},
               {"median_uncertainty", stats::median(grids.std.values)}};
    if (ev.kde_mode == "per_agent") {
      try {
        entry["spearman"] = correlation_report(grids.std, densities.at(node.id));
      } catch (const ArgumentError&) {
        entry["spearman"] = nullptr;
      }
    }
    nodes.push_back(std::move(entry));
    means.push_back(grids.mean);
    stds.push_back(grids.std);
  }

  const GridField mean_map = elementwise_mean(means);
  const GridField mean_std = elementwise_mean(stds);
  if (trained.nodes.size() > 1) {
    render_grid(mean_map, (fs::path(out_dir) / "map_mean").string());
    render_grid(mean_std, (fs::path(out_dir) / "uncertainty_mean").string());
  }

  json spearman;
  try {
    spearman = correlation_report(mean_std, density);
  } catch (const ArgumentError&) {
    spearman = nullptr;  // constant uncertainty or density grid
  }
  const double med_visited = masked_median(mean_std, visited, true);
  const double med_unvisited = masked_median(mean_std, visited, false);

  json report{
      {"mode", to_string(mode)},
      {"agents", trained.nodes.size()},
      {"transport", to_string(config.protocol.transport)},
      {"rounds", trained.rounds},
      {"messages", trained.messages},
      {"grid", {{"region", region_json(bounds)}, {"nx", ev.nx}, {"ny", ev.ny}, {"mc_passes", ev.mc_passes}}},
      {"nodes", nodes},
      {"holdout_accuracy", number_or_null(acc_sum / static_cast<double>(trained.nodes.size()))},
      {"iou", stats::iou(threshold(mean_map, 0.5).values, truth.values, mask.values)},
      {"mean_uncertainty", mean_std.mean()},
      {"median_uncertainty_visited", number_or_null(med_visited)},
      {"median_uncertainty_unvisited", number_or_null(med_unvisited)},
      {"unvisited_over_visited", number_or_null(med_unvisited / med_visited)},
      {"visited_fraction", visited.mean()},
      {"spearman", spearman},
      {"kde_mode", ev.kde_mode},
      {"config", to_json(config)}};
  write_json(report, (fs::path(out_dir) / "report.json").string());
  if (seconds) *seconds = seconds_since(t0);
  return report;
}

namespace {

TrainResult train_mode(const ExperimentConfig& config, const Prepared& prepared, Mode mode) {
  if (mode == Mode::single || config.agents == 1) return train_single(config, prepared.splits.at(0).train);
  std::vector<lidar::LidarDataset> sets;
  for (const auto& s : prepared.splits) sets.push_back(s.train);
  return train_swarm(config, sets);
}

}  // namespace

json run_experiment(const ExperimentConfig& config, Mode mode, const std::string& out_dir, Timing* timing) {
  Timing t;
  auto t0 = Clock::now();
  const Prepared prepared = prepare(config);
  t.generate_s = seconds_since(t0);
  t0 = Clock::now();
  const TrainResult trained = train_mode(config, prepared, mode);
  t.train_s = seconds_since(t0);
  fs::create_directories(out_dir);
  write_training_state(trained, mode, out_dir);
  json report = evaluate_run(config, prepared, mode, trained, out_dir, &t.evaluate_s);
  if (timing) *timing = t;
  return report;
}

json comparison(const json& single, const json& swarm) {
  const double single_mean = single.at("mean_uncertainty").get<double>();
  const double swarm_mean = swarm.at("mean_uncertainty").get<double>();
  json c{{"single_mean_uncertainty", single_mean},
         {"swarm_mean_uncertainty", swarm_mean},
         {"swarm_uncertainty_lower", swarm_mean < single_mean},
         {"single_unvisited_over_visited", single.at("unvisited_over_visited")},
         {"swarm_spearman", swarm.at("spearman")},
         {"single_holdout_accuracy", single.at("holdout_accuracy")},
         {"single_iou", single.at("iou")},
         {"swarm_holdout_accuracy", swarm.at("holdout_accuracy")},
         {"swarm_iou", swarm.at("iou")}};
  const auto& ratio = single.at("unvisited_over_visited");
  c["single_unvisited_at_least_2x"] = ratio.is_number() && ratio.get<double>() >= 2.0;
  const auto& rho = swarm.at("spearman");
  c["swarm_spearman_at_most_minus_0_3"] = rho.is_number() && rho.get<double>() <= -0.3;
  return c;
}

json compare(const ExperimentConfig& config, const std::string& out_dir) {
  if (config.agents < 2) throw ConfigError("experiment_cli", "compare needs agents >= 2");
  fs::create_directories(out_dir);
  json timing;
  auto t0 = Clock::now();
  const Prepared prepared = prepare(config);
  timing["generate_s"] = seconds_since(t0);

  json reports;
  for (Mode mode : {Mode::single, Mode::swarm}) {
    const std::string dir = (fs::path(out_dir) / to_string(mode)).string();
    fs::create_directories(dir);
    t0 = Clock::now();
    const TrainResult trained = train_mode(config, prepared, mode);
    timing[to_string(mode)]["train_s"] = seconds_since(t0);
    write_training_state(trained, mode, dir);
    double eval_s = 0.0;
    reports[to_string(mode)] = evaluate_run(config, prepared, mode, trained, dir, &eval_s);
    timing[to_string(mode)]["evaluate_s"] = eval_s;
  }

  json summary{{"comparison", comparison(reports["single"], reports["swarm"])}, {"config", to_json(config)}};
  for (const char* m : {"single", "swarm"}) {
    json r = reports[m];
    r.erase("config");
    summary[m] = std::move(r);
  }
  write_json(summary, (fs::path(out_dir) / "report.json").string());
  timing["threads"] = kernels::max_threads();
  write_json(timing, (fs::path(out_dir) / "timing.json").string());
  return summary;
}

TrainResult load_training(const ExperimentConfig& config, const std::string& dir, Mode* mode) {
  const json state = read_json((fs::path(dir) / "training.json").string());
  if (mode) *mode = state.at("mode").get<std::string>() == "single" ? Mode::single : Mode::swarm;
  TrainResult result;
  result.rounds = state.at("rounds").get<std::uint32_t>();
  result.messages = state.at("messages").get<std::uint64_t>();
  const nn::BnnModel layout = initial_model(config);
  for (const auto& n : state.at("nodes")) {
    TrainedNode node{n.at("id").get<std::uint32_t>(), layout, loss_from_json(n.at("loss")),
                     n.at("updates").get<std::uint32_t>()};
    const ParamVector params = read_params_file(params_path(dir, node.id));
    if (!params.same_layout(layout.flatten()))
      throw ConfigError("experiment_cli", params_path(dir, node.id) + " does not match the configured architecture");
    node.model.unflatten(params);
    result.nodes.push_back(std::move(node));
  }
  return result;
}

}  // namespace bnnswarm::experiment
