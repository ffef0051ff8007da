#include <doctest.h>

#include "bnnswarm/config.hpp"
#include "bnnswarm/errors.hpp"

using namespace bnnswarm;

TEST_CASE("config survives a JSON round trip") {
  ExperimentConfig c;
  c.agents = 2;
  c.model.architecture.hidden = {8, 4};
  c.model.architecture.sine_omega = 12.5;
  c.optimizer.adam.rho_uses_pred_loss = true;
  c.protocol.topology = "ring";
  c.protocol.transport = TransportKind::udp;
  c.protocol.sim.jitter = 0.3;
  c.evaluation.kde_mode = "per_agent";
  c.scenario.trajectory.inset = 1.75;
  const auto j = to_json(c);
  CHECK(to_json(config_from_json(j)) == j);
}

TEST_CASE("partial JSON keeps defaults") {
  const auto c = config_from_json(nlohmann::json{{"agents", 2}, {"evaluation", {{"nx", 32}}}});
  CHECK(c.agents == 2);
  CHECK(c.evaluation.nx == 32);
  CHECK(c.evaluation.ny == ExperimentConfig{}.evaluation.ny);
}

TEST_CASE("unknown keys and bad types are rejected") {
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"agnets", 2}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"model", {{"hiden", {8}}}}}), ConfigError);
  CHECK_THROWS_AS(config_from_json(nlohmann::json{{"agents", "four"}}), ConfigError);
  CHECK_THROWS_AS(load_config("/nonexistent/config.json"), Error);
}

TEST_CASE("validation") {
  auto bad = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    CHECK_THROWS_AS(c.validate(), ConfigError);
  };
  ExperimentConfig{}.validate();
  bad([](ExperimentConfig& c) { c.agents = 0; });
  bad([](ExperimentConfig& c) { c.agents = 5; });
  bad([](ExperimentConfig& c) { c.evaluation.mc_passes = 1; });
  bad([](ExperimentConfig& c) { c.evaluation.holdout_fraction = 1.0; });
  bad([](ExperimentConfig& c) { c.evaluation.kde_mode = "mixed"; });
  bad([](ExperimentConfig& c) { c.protocol.topology = "star"; });
  bad([](ExperimentConfig& c) { c.protocol.sim.drop_probability = 1.0; });
  bad([](ExperimentConfig& c) { c.optimizer.weights.growth = 0.5; });
  bad([](ExperimentConfig& c) { c.scenario.max_range = 0.0; });
  CHECK_THROWS_AS(parse_transport("tcp"), ConfigError);
  CHECK(parse_transport("udp") == TransportKind::udp);
}

TEST_CASE("seed override touches every seed") {
  ExperimentConfig a, b;
  a.override_seed(5);
  b.override_seed(6);
  CHECK(a.scenario.seed != b.scenario.seed);
  CHECK(a.model.init_seed != b.model.init_seed);
  CHECK(a.model.noise_seed != b.model.noise_seed);
  CHECK(a.protocol.sim.seed != b.protocol.sim.seed);
  CHECK(a.evaluation.seed != b.evaluation.seed);
  ExperimentConfig a2;
  a2.override_seed(5);
  CHECK(to_json(a) == to_json(a2));
}
