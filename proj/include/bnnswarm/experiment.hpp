#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "bnnswarm/config.hpp"
#include "bnnswarm/consensus.hpp"
#include "bnnswarm/grid.hpp"
#include "bnnswarm/lidar.hpp"

namespace bnnswarm::experiment {

struct DataSplit {
  lidar::LidarDataset train;
  lidar::LidarDataset holdout;
};

// Seeded random split; `fraction` of the points go to the holdout set.
DataSplit split_holdout(const lidar::LidarDataset& data, double fraction, std::uint64_t seed);

struct TrainedNode {
  std::uint32_t id = 0;
  nn::BnnModel model;
  consensus::LossBreakdown last;
  std::uint32_t updates = 0;
};

struct TrainResult {
  std::vector<TrainedNode> nodes;
  std::uint32_t rounds = 0;
  std::uint64_t messages = 0;  // simulated transport only
};

// The model every node starts from.
nn::BnnModel initial_model(const ExperimentConfig& config);

// One node per training set, coordinated by the peer protocol over the
// configured transport.
TrainResult train_swarm(const ExperimentConfig& config, const std::vector<lidar::LidarDataset>& train_sets);

// Centralised training on one data set with the same per-node budget
// (max_round rounds of iters_per_round steps). Targets track the node's own
// parameters and the duals stay zero.
TrainResult train_single(const ExperimentConfig& config, const lidar::LidarDataset& train);

struct UncertaintyGrids {
  GridField mean;
  GridField std;
};

// MC predictive mean and std at every cell centre of `region`. Inputs are
// normalised against `input_bounds`.
UncertaintyGrids uncertainty_grid(const nn::BnnModel& model, const Rect& region, int nx, int ny, int mc_passes,
                                  std::uint64_t seed, const Rect& input_bounds);

// Spearman correlation over cells. Throws ArgumentError on a shape
// mismatch or a constant grid.
double correlation_report(const GridField& std_grid, const GridField& density_grid);

// Fraction of holdout points whose MC mean lands on the right side of 0.5.
double holdout_accuracy(const nn::BnnModel& model, const lidar::LidarDataset& holdout, const Rect& input_bounds,
                        int mc_passes, std::uint64_t seed);

// 1 for cells within `radius` of any pose.
GridField visited_mask(const Rect& region, int nx, int ny, const std::vector<Vec2>& poses, double radius);

// 1 for cells inside one of `regions`, at least `margin` away from the outer walls.
GridField evaluation_mask(const Rect& bounds, int nx, int ny, const std::vector<Rect>& regions, double margin);

enum class Mode { single, swarm };

struct Prepared {
  lidar::Scenario scenario;
  std::vector<DataSplit> splits;  // one per agent
};

Prepared prepare(const ExperimentConfig& config);

// Timing of the phases of one run, kept apart from the report so that the
// report stays reproducible.
struct Timing {
  double generate_s = 0.0;
  double train_s = 0.0;
  double evaluate_s = 0.0;
};

// Evaluates trained nodes, writes grids, params and report.json into
// `out_dir`, and returns the report.
nlohmann::json evaluate_run(const ExperimentConfig& config, const Prepared& prepared, Mode mode,
                            const TrainResult& trained, const std::string& out_dir, double* seconds = nullptr);

// prepare + train + evaluate for one mode.
nlohmann::json run_experiment(const ExperimentConfig& config, Mode mode, const std::string& out_dir,
                              Timing* timing = nullptr);

// Both modes on the same scenario into out_dir/single and out_dir/swarm,
// plus a top-level report.json with the comparison and a timing.json.
nlohmann::json compare(const ExperimentConfig& config, const std::string& out_dir);

// Comparison block of two run reports.
nlohmann::json comparison(const nlohmann::json& single, const nlohmann::json& swarm);

// Reads training.json and params_{node}.bin written by a training run.
TrainResult load_training(const ExperimentConfig& config, const std::string& dir, Mode* mode = nullptr);

void write_json(const nlohmann::json& j, const std::string& path);
nlohmann::json read_json(const std::string& path);

std::string params_path(const std::string& dir, std::uint32_t node);
std::string to_string(Mode mode);

}  // namespace bnnswarm::experiment
