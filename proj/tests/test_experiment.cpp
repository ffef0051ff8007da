#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "bnnswarm/experiment.hpp"
#include "bnnswarm/stats.hpp"

using namespace bnnswarm;
namespace fs = std::filesystem;

namespace {

ExperimentConfig small_config() {
  ExperimentConfig c;
  c.agents = 2;
  c.scenario.beams = 24;
  c.scenario.free_per_beam = 2;
  c.model.architecture.hidden = {16, 16};
  c.protocol.max_round = 3;
  c.optimizer.iters_per_round = 10;
  c.evaluation.nx = 16;
  c.evaluation.ny = 16;
  c.evaluation.mc_passes = 4;
  return c;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

Rect room(const ExperimentConfig& c) { return Rect{{0, 0}, {c.scenario.width, c.scenario.height}}; }

}  // namespace

TEST_CASE("holdout split is a seeded partition") {
  lidar::LidarDataset d;
  for (int i = 0; i < 100; ++i) d.points.push_back({{double(i), 0.0}, std::uint8_t(i % 2)});
  const auto s = experiment::split_holdout(d, 0.1, 3);
  CHECK(s.holdout.size() == 10);
  CHECK(s.train.size() == 90);
  const auto s2 = experiment::split_holdout(d, 0.1, 3);
  CHECK(s2.holdout.points.front().position == s.holdout.points.front().position);
  CHECK(experiment::split_holdout(d, 0.0, 3).holdout.empty());
}

TEST_CASE("a deterministic model has zero predictive spread") {
  const auto c = small_config();
  auto model = experiment::initial_model(c);
  model.set_all_rho(-1e4);
  const auto g = experiment::uncertainty_grid(model, room(c), 8, 8, 6, 1, room(c));
  for (double v : g.std.values) CHECK(v == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("wider posteriors give larger spread") {
  const auto c = small_config();
  auto narrow = experiment::initial_model(c);
  auto wide = narrow;
  narrow.set_all_rho(-6.0);
  wide.set_all_rho(0.0);
  const auto a = experiment::uncertainty_grid(narrow, room(c), 8, 8, 16, 1, room(c));
  const auto b = experiment::uncertainty_grid(wide, room(c), 8, 8, 16, 1, room(c));
  CHECK(stats::median(b.std.values) > stats::median(a.std.values));
}

// Only mu moves in single-agent training (Loss_rho has no data term by
// default); the spread drops because the trained logits saturate.
TEST_CASE("an untrained wide posterior is more uncertain than the trained model") {
  auto c = small_config();
  c.model.architecture.rho_init = 0.0;
  const auto prepared = experiment::prepare(c);
  const auto untrained = experiment::initial_model(c);
  const auto trained = experiment::train_single(c, prepared.splits[0].train).nodes.at(0).model;
  const auto before = experiment::uncertainty_grid(untrained, room(c), 12, 12, 16, 2, room(c));
  const auto after = experiment::uncertainty_grid(trained, room(c), 12, 12, 16, 2, room(c));
  CHECK(stats::median(before.std.values) > stats::median(after.std.values));
}

TEST_CASE("evaluation mask excludes wall margins") {
  const Rect bounds{{0, 0}, {4, 4}};
  const auto m = experiment::evaluation_mask(bounds, 4, 4, {bounds}, 1.0);
  CHECK(m.at(0, 0) == 0.0);
  CHECK(m.at(1, 1) == 1.0);
  CHECK(m.at(2, 2) == 1.0);
  CHECK(m.at(3, 2) == 0.0);
  const auto v = experiment::visited_mask(bounds, 4, 4, {{0.5, 0.5}}, 1.1);
  CHECK(v.at(0, 0) == 1.0);
  CHECK(v.at(1, 0) == 1.0);
  CHECK(v.at(1, 1) == 0.0);
}

TEST_CASE("small compare run is complete and reproducible") {
  const auto c = small_config();
  const auto base = fs::temp_directory_path() / "bnnswarm_test_experiment";
  fs::remove_all(base);
  const auto r1 = experiment::compare(c, (base / "a").string());
  const auto r2 = experiment::compare(c, (base / "b").string());
  CHECK(r1 == r2);
  CHECK(slurp(base / "a" / "report.json") == slurp(base / "b" / "report.json"));
  CHECK(slurp(base / "a" / "swarm" / "uncertainty_mean.csv") == slurp(base / "b" / "swarm" / "uncertainty_mean.csv"));
  for (const char* f : {"single/report.json", "single/map_0.csv", "swarm/map_1.pgm", "swarm/params_1.bin", "timing.json"})
    CHECK_MESSAGE(fs::exists(base / "a" / f), f);
  CHECK(r1.at("swarm").at("nodes").size() == 2);
  CHECK(r1.at("swarm").at("rounds") == 3);

  // Evaluating the stored parameters reproduces the swarm report.
  experiment::Mode mode{};
  const auto trained = experiment::load_training(c, (base / "a" / "swarm").string(), &mode);
  CHECK(mode == experiment::Mode::swarm);
  const auto again = experiment::evaluate_run(c, experiment::prepare(c), mode, trained, (base / "c").string());
  CHECK(again.at("iou") == r1.at("swarm").at("iou"));
  CHECK(again.at("mean_uncertainty") == r1.at("swarm").at("mean_uncertainty"));
  fs::remove_all(base);
}
