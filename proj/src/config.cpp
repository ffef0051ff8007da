#include "bnnswarm/config.hpp"

#include <fstream>
#include <set>

#include "bnnswarm/errors.hpp"
#include "bnnswarm/seed.hpp"

namespace bnnswarm {

using nlohmann::json;

TransportKind parse_transport(const std::string& name) {
  if (name == "simulated") return TransportKind::simulated;
  if (name == "udp") return TransportKind::udp;
  throw ConfigError("experiment_cli", "unknown transport '" + name + "' (expected simulated|udp)");
}

std::string to_string(TransportKind kind) { return kind == TransportKind::udp ? "udp" : "simulated"; }

namespace {

json adam_json(const consensus::AdamConfig& a) {
  return {{"step_size", a.step_size}, {"beta1", a.beta1}, {"beta2", a.beta2}, {"epsilon", a.epsilon}};
}

void check_keys(const json& j, const std::string& section, std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError("experiment_cli", "section '" + section + "' must be an object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [key, value] : j.items())
    if (!ok.contains(key)) throw ConfigError("experiment_cli", "unknown key '" + section + "." + key + "'");
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

consensus::AdamConfig adam_from(const json& j, const std::string& section, consensus::AdamConfig a) {
  check_keys(j, section, {"step_size", "beta1", "beta2", "epsilon"});
  read(j, "step_size", a.step_size);
  read(j, "beta1", a.beta1);
  read(j, "beta2", a.beta2);
  read(j, "epsilon", a.epsilon);
  return a;
}

}  // namespace

json to_json(const ExperimentConfig& c) {
  const auto& s = c.scenario;
  const auto& a = c.model.architecture;
  const auto& o = c.optimizer;
  const auto& p = c.protocol;
  const auto& e = c.evaluation;
  return json{
      {"agents", c.agents},
      {"scenario",
       {{"seed", s.seed},
        {"width", s.width},
        {"height", s.height},
        {"min_obstacles", s.min_obstacles},
        {"max_obstacles", s.max_obstacles},
        {"min_box", s.min_box},
        {"max_box", s.max_box},
        {"clearance", s.clearance},
        {"beams", s.beams},
        {"max_range", s.max_range},
        {"free_per_beam", s.free_per_beam},
        {"trajectory",
         {{"regions_x", s.trajectory.regions_x},
          {"regions_y", s.trajectory.regions_y},
          {"inset", s.trajectory.inset},
          {"scan_spacing", s.trajectory.scan_spacing},
          {"max_overlap", s.trajectory.max_overlap},
          {"visit_cell", s.trajectory.visit_cell}}}}},
      {"model",
       {{"input_dim", a.input_dim},
        {"hidden", a.hidden},
        {"output_dim", a.output_dim},
        {"first_activation", std::string(nn::to_string(a.first_activation))},
        {"hidden_activation", std::string(nn::to_string(a.hidden_activation))},
        {"sine_omega", a.sine_omega},
        {"bayesian", a.bayesian},
        {"rho_init", a.rho_init},
        {"init_seed", c.model.init_seed},
        {"noise_seed", c.model.noise_seed}}},
      {"optimizer",
       {{"mu", adam_json(o.adam.mu)},
        {"rho", adam_json(o.adam.rho)},
        {"rho_uses_pred_loss", o.adam.rho_uses_pred_loss},
        {"w_mu", o.weights.w_mu},
        {"w_rho", o.weights.w_rho},
        {"growth", o.weights.growth},
        {"iters_per_round", o.iters_per_round},
        {"full_batch_limit", o.full_batch_limit},
        {"minibatch_size", o.minibatch_size}}},
      {"protocol",
       {{"topology", p.topology},
        {"max_round", p.max_round},
        {"transport", to_string(p.transport)},
        {"sim",
         {{"seed", p.sim.seed},
          {"base_delay", p.sim.base_delay},
          {"jitter", p.sim.jitter},
          {"reorder_probability", p.sim.reorder_probability},
          {"reorder_delay", p.sim.reorder_delay},
          {"drop_probability", p.sim.drop_probability}}},
        {"udp_base_port", p.udp_base_port},
        {"udp_timeout_ms", p.udp_timeout_ms}}},
      {"evaluation",
       {{"nx", e.nx},
        {"ny", e.ny},
        {"mc_passes", e.mc_passes},
        {"seed", e.seed},
        {"holdout_fraction", e.holdout_fraction},
        {"wall_margin", e.wall_margin},
        {"kde_mode", e.kde_mode}}}};
}

ExperimentConfig config_from_json(const json& j) {
  ExperimentConfig c;
  try {
    check_keys(j, "", {"agents", "scenario", "model", "optimizer", "protocol", "evaluation"});
    read(j, "agents", c.agents);
    if (j.contains("scenario")) {
      const auto& s = j.at("scenario");
      check_keys(s, "scenario",
                 {"seed", "width", "height", "min_obstacles", "max_obstacles", "min_box", "max_box", "clearance",
                  "beams", "max_range", "free_per_beam", "trajectory"});
      auto& sc = c.scenario;
      read(s, "seed", sc.seed);
      read(s, "width", sc.width);
      read(s, "height", sc.height);
      read(s, "min_obstacles", sc.min_obstacles);
      read(s, "max_obstacles", sc.max_obstacles);
      read(s, "min_box", sc.min_box);
      read(s, "max_box", sc.max_box);
      read(s, "clearance", sc.clearance);
      read(s, "beams", sc.beams);
      read(s, "max_range", sc.max_range);
      read(s, "free_per_beam", sc.free_per_beam);
      if (s.contains("trajectory")) {
        const auto& t = s.at("trajectory");
        check_keys(t, "scenario.trajectory",
                   {"regions_x", "regions_y", "inset", "scan_spacing", "max_overlap", "visit_cell"});
        read(t, "regions_x", sc.trajectory.regions_x);
        read(t, "regions_y", sc.trajectory.regions_y);
        read(t, "inset", sc.trajectory.inset);
        read(t, "scan_spacing", sc.trajectory.scan_spacing);
        read(t, "max_overlap", sc.trajectory.max_overlap);
        read(t, "visit_cell", sc.trajectory.visit_cell);
      }
    }
    if (j.contains("model")) {
      const auto& m = j.at("model");
      check_keys(m, "model",
                 {"input_dim", "hidden", "output_dim", "first_activation", "hidden_activation", "sine_omega",
                  "bayesian", "rho_init", "init_seed", "noise_seed"});
      auto& a = c.model.architecture;
      read(m, "input_dim", a.input_dim);
      read(m, "hidden", a.hidden);
      read(m, "output_dim", a.output_dim);
      if (m.contains("first_activation")) a.first_activation = nn::parse_activation(m.at("first_activation").get<std::string>());
      if (m.contains("hidden_activation"))
        a.hidden_activation = nn::parse_activation(m.at("hidden_activation").get<std::string>());
      read(m, "sine_omega", a.sine_omega);
      read(m, "bayesian", a.bayesian);
      read(m, "rho_init", a.rho_init);
      read(m, "init_seed", c.model.init_seed);
      read(m, "noise_seed", c.model.noise_seed);
    }
    if (j.contains("optimizer")) {
      const auto& o = j.at("optimizer");
      check_keys(o, "optimizer",
                 {"mu", "rho", "rho_uses_pred_loss", "w_mu", "w_rho", "growth", "iters_per_round", "full_batch_limit",
                  "minibatch_size"});
      auto& oc = c.optimizer;
      if (o.contains("mu")) oc.adam.mu = adam_from(o.at("mu"), "optimizer.mu", oc.adam.mu);
      if (o.contains("rho")) oc.adam.rho = adam_from(o.at("rho"), "optimizer.rho", oc.adam.rho);
      read(o, "rho_uses_pred_loss", oc.adam.rho_uses_pred_loss);
      read(o, "w_mu", oc.weights.w_mu);
      read(o, "w_rho", oc.weights.w_rho);
      read(o, "growth", oc.weights.growth);
      read(o, "iters_per_round", oc.iters_per_round);
      read(o, "full_batch_limit", oc.full_batch_limit);
      read(o, "minibatch_size", oc.minibatch_size);
    }
    if (j.contains("protocol")) {
      const auto& p = j.at("protocol");
      check_keys(p, "protocol", {"topology", "max_round", "transport", "sim", "udp_base_port", "udp_timeout_ms"});
      auto& pc = c.protocol;
      read(p, "topology", pc.topology);
      read(p, "max_round", pc.max_round);
      if (p.contains("transport")) pc.transport = parse_transport(p.at("transport").get<std::string>());
      if (p.contains("sim")) {
        const auto& s = p.at("sim");
        check_keys(s, "protocol.sim",
                   {"seed", "base_delay", "jitter", "reorder_probability", "reorder_delay", "drop_probability"});
        read(s, "seed", pc.sim.seed);
        read(s, "base_delay", pc.sim.base_delay);
        read(s, "jitter", pc.sim.jitter);
        read(s, "reorder_probability", pc.sim.reorder_probability);
        read(s, "reorder_delay", pc.sim.reorder_delay);
        read(s, "drop_probability", pc.sim.drop_probability);
      }
      read(p, "udp_base_port", pc.udp_base_port);
      read(p, "udp_timeout_ms", pc.udp_timeout_ms);
    }
    if (j.contains("evaluation")) {
      const auto& e = j.at("evaluation");
      check_keys(e, "evaluation", {"nx", "ny", "mc_passes", "seed", "holdout_fraction", "wall_margin", "kde_mode"});
      auto& ec = c.evaluation;
      read(e, "nx", ec.nx);
      read(e, "ny", ec.ny);
      read(e, "mc_passes", ec.mc_passes);
      read(e, "seed", ec.seed);
      read(e, "holdout_fraction", ec.holdout_fraction);
      read(e, "wall_margin", ec.wall_margin);
      read(e, "kde_mode", ec.kde_mode);
    }
  } catch (const json::exception& e) {
    throw ConfigError("experiment_cli", std::string("bad config value: ") + e.what());
  }
  c.validate();
  return c;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open config");
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("experiment_cli", path + ": " + e.what());
  }
  return config_from_json(j);
}

void ExperimentConfig::validate() const {
  auto fail = [](const std::string& what) { throw ConfigError("experiment_cli", what); };
  if (agents < 1) fail("agents must be >= 1");
  if (scenario.trajectory.regions_x * scenario.trajectory.regions_y < agents) fail("more agents than regions");
  if (scenario.beams < 1) fail("scenario.beams must be >= 1");
  if (!(scenario.max_range > 0.0)) fail("scenario.max_range must be positive");
  if (scenario.free_per_beam < 0) fail("scenario.free_per_beam must be >= 0");
  if (evaluation.mc_passes < 2) fail("evaluation.mc_passes must be >= 2");
  if (evaluation.nx < 2 || evaluation.ny < 2) fail("evaluation grid needs at least 2 cells per axis");
  if (!(evaluation.holdout_fraction >= 0.0 && evaluation.holdout_fraction < 1.0))
    fail("evaluation.holdout_fraction must be in [0, 1)");
  if (evaluation.kde_mode != "pooled" && evaluation.kde_mode != "per_agent")
    fail("evaluation.kde_mode must be pooled or per_agent");
  if (optimizer.iters_per_round < 1) fail("optimizer.iters_per_round must be >= 1");
  if (optimizer.weights.w_mu < 0.0 || optimizer.weights.w_rho < 0.0) fail("penalty weights must be non-negative");
  if (optimizer.weights.growth < 1.0) fail("optimizer.growth must be >= 1");
  if (protocol.topology != "full" && protocol.topology != "ring") fail("protocol.topology must be full or ring");
  if (protocol.sim.drop_probability < 0.0 || protocol.sim.drop_probability >= 1.0)
    fail("protocol.sim.drop_probability must be in [0, 1)");
}

void ExperimentConfig::override_seed(std::uint64_t seed) {
  scenario.seed = mix_seed(seed, 1);
  model.init_seed = mix_seed(seed, 2);
  model.noise_seed = mix_seed(seed, 3);
  protocol.sim.seed = mix_seed(seed, 4);
  evaluation.seed = mix_seed(seed, 5);
}

}  // namespace bnnswarm
