// Command-line driver: scenario generation, training, evaluation and the
// single-agent versus swarm comparison.

#include <chrono>
#include <ctime>
#include <filesystem>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "bnnswarm/config.hpp"
#include "bnnswarm/errors.hpp"
#include "bnnswarm/experiment.hpp"
#include "bnnswarm/kernels.hpp"
#include "bnnswarm/lidar.hpp"

namespace fs = std::filesystem;
using namespace bnnswarm;
using nlohmann::json;

namespace {

struct Options {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> transport;
};

using Clock = std::chrono::steady_clock;

double elapsed(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string timestamped_dir(const std::string& verb) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  localtime_r(&now, &tm);
  std::ostringstream s;
  s << "runs/" << verb << "-" << std::put_time(&tm, "%Y%m%d-%H%M%S");
  return s.str();
}

ExperimentConfig resolve_config(const Options& opt, const std::string& fallback_dir = {}) {
  ExperimentConfig config;
  if (!opt.config_path.empty()) {
    config = load_config(opt.config_path);
  } else if (!fallback_dir.empty() && fs::exists(fs::path(fallback_dir) / "config.json")) {
    config = load_config((fs::path(fallback_dir) / "config.json").string());
  }
  if (opt.seed) config.override_seed(*opt.seed);
  if (opt.transport) config.protocol.transport = parse_transport(*opt.transport);
  config.validate();
  return config;
}

std::string prepare_out(const Options& opt, const std::string& verb) {
  const std::string dir = opt.out.empty() ? timestamped_dir(verb) : opt.out;
  fs::create_directories(dir);
  return dir;
}

json environment_json(const lidar::Scenario& sc) {
  auto rect = [](const Rect& r) { return json::array({r.min.x, r.min.y, r.max.x, r.max.y}); };
  json boxes = json::array();
  for (const auto& b : sc.env.boxes) boxes.push_back(rect(b));
  json agents = json::array();
  for (const auto& a : sc.agents) {
    json way = json::array();
    for (const auto& w : a.trajectory.waypoints) way.push_back({w.x, w.y});
    agents.push_back({{"region", rect(a.trajectory.region)},
                      {"waypoints", way},
                      {"scans", a.scans.size()},
                      {"points", a.dataset.size()}});
  }
  return {{"bounds", rect(sc.env.bounds)}, {"boxes", boxes}, {"agents", agents}};
}

void write_generated(const ExperimentConfig& config, const experiment::Prepared& prepared, const std::string& dir) {
  fs::create_directories(dir);
  const auto& sc = prepared.scenario;
  for (std::size_t a = 0; a < sc.agents.size(); ++a) {
    const auto stem = (fs::path(dir) / ("dataset_" + std::to_string(a))).string();
    lidar::write_dataset_csv(sc.agents[a].dataset, stem + ".csv");
    lidar::write_dataset_bin(sc.agents[a].dataset, stem + ".bin");
  }
  const auto& ev = config.evaluation;
  render_grid(lidar::rasterize_obstacles(sc.env, sc.env.bounds, ev.nx, ev.ny),
              (fs::path(dir) / "ground_truth").string());
  experiment::write_json(environment_json(sc), (fs::path(dir) / "environment.json").string());
}

void print_report(const json& r) {
  std::cout << r.at("mode").get<std::string>() << ": holdout_accuracy=" << r.at("holdout_accuracy")
            << " iou=" << r.at("iou") << " mean_uncertainty=" << r.at("mean_uncertainty")
            << " spearman=" << r.at("spearman") << '\n';
}

int cmd_generate(const Options& opt) {
  const auto config = resolve_config(opt);
  const auto dir = prepare_out(opt, "generate");
  const auto t0 = Clock::now();
  const auto prepared = experiment::prepare(config);
  write_generated(config, prepared, dir);
  experiment::write_json(to_json(config), (fs::path(dir) / "config.json").string());
  experiment::write_json({{"generate_s", elapsed(t0)}}, (fs::path(dir) / "timing.json").string());
  std::size_t total = 0;
  for (const auto& a : prepared.scenario.agents) total += a.dataset.size();
  std::cout << "generated " << prepared.scenario.agents.size() << " agents, " << prepared.scenario.env.boxes.size()
            << " obstacles, " << total << " points -> " << dir << '\n';
  return 0;
}

int cmd_train(const Options& opt) {
  const auto config = resolve_config(opt);
  const auto dir = prepare_out(opt, "train");
  experiment::write_json(to_json(config), (fs::path(dir) / "config.json").string());
  const auto mode = config.agents > 1 ? experiment::Mode::swarm : experiment::Mode::single;
  experiment::Timing t;
  const auto report = experiment::run_experiment(config, mode, dir, &t);
  experiment::write_json({{"generate_s", t.generate_s}, {"train_s", t.train_s}, {"evaluate_s", t.evaluate_s},
                          {"threads", kernels::max_threads()}},
                         (fs::path(dir) / "timing.json").string());
  print_report(report);
  std::cout << "wrote " << dir << '\n';
  return 0;
}

int cmd_evaluate(const Options& opt) {
  if (opt.out.empty()) throw ConfigError("experiment_cli", "evaluate needs --out <run directory with training.json>");
  const auto config = resolve_config(opt, opt.out);
  const auto t0 = Clock::now();
  const auto prepared = experiment::prepare(config);
  experiment::Mode mode{};
  const auto trained = experiment::load_training(config, opt.out, &mode);
  double eval_s = 0.0;
  const auto report = experiment::evaluate_run(config, prepared, mode, trained, opt.out, &eval_s);
  experiment::write_json({{"total_s", elapsed(t0)}, {"evaluate_s", eval_s}, {"threads", kernels::max_threads()}},
                         (fs::path(opt.out) / "timing.json").string());
  print_report(report);
  return 0;
}

int run_compare(const ExperimentConfig& config, const std::string& dir) {
  experiment::write_json(to_json(config), (fs::path(dir) / "config.json").string());
  const auto summary = experiment::compare(config, dir);
  print_report(summary.at("single"));
  print_report(summary.at("swarm"));
  std::cout << "comparison: " << summary.at("comparison").dump() << '\n' << "wrote " << dir << '\n';
  return 0;
}

int cmd_compare(const Options& opt) {
  const auto config = resolve_config(opt);
  return run_compare(config, prepare_out(opt, "compare"));
}

int cmd_all(const Options& opt) {
  const auto config = resolve_config(opt);
  const auto dir = prepare_out(opt, "all");
  write_generated(config, experiment::prepare(config), (fs::path(dir) / "data").string());
  return run_compare(config, dir);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Decentralised Bayesian neural network mapping testbed"};
  app.require_subcommand(1);
  Options opt;
  app.add_option("--config", opt.config_path, "JSON experiment config (defaults are used when omitted)")
      ->check(CLI::ExistingFile);
  app.add_option("--out", opt.out, "output directory (default: runs/<verb>-<timestamp>)");
  app.add_option("--seed", opt.seed, "derive every seed from this value");
  app.add_option("--transport", opt.transport, "simulated or udp")->check(CLI::IsMember({"simulated", "udp"}));

  struct Verb {
    const char* name;
    const char* help;
    int (*run)(const Options&);
  };
  const Verb verbs[] = {
      {"generate", "generate the scenario and write the per-agent datasets", cmd_generate},
      {"train", "train (swarm when agents > 1) and evaluate", cmd_train},
      {"evaluate", "re-evaluate the trained parameters in --out", cmd_evaluate},
      {"compare", "train and evaluate single agent and swarm on one scenario", cmd_compare},
      {"all", "generate, then compare", cmd_all},
  };
  int (*chosen)(const Options&) = nullptr;
  for (const auto& v : verbs) {
    auto* sub = app.add_subcommand(v.name, v.help);
    sub->fallthrough();
    sub->callback([&chosen, run = v.run] { chosen = run; });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    return chosen(opt);
  } catch (const Error& e) {
    std::cerr << "error [" << e.module() << "]: " << e.message() << '\n';
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
}
