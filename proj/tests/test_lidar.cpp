#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "bnnswarm/errors.hpp"
#include "bnnswarm/kde.hpp"
#include "bnnswarm/lidar.hpp"
#include "support/oracles.hpp"

using namespace bnnswarm;
using namespace bnnswarm::lidar;

namespace {

Environment wall_room() {
  Environment env;
  env.bounds = Rect{{-10, -10}, {10, 10}};
  env.segments.push_back({{2, -5}, {2, 5}});
  return env;
}

std::filesystem::path temp_file(const std::string& name) {
  return std::filesystem::temp_directory_path() / ("bnnswarm_test_" + name);
}

}  // namespace

TEST_CASE("ray hits a vertical wall") {
  const auto hit = cast_ray(wall_room(), {0, 0}, 0.0, 10.0);
  REQUIRE(hit);
  CHECK(hit->point.x == doctest::Approx(2.0));
  CHECK(hit->point.y == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(hit->range == doctest::Approx(2.0));
}

TEST_CASE("ray pointing away misses within range") {
  CHECK_FALSE(cast_ray(wall_room(), {0, 0}, std::numbers::pi, 5.0));
  // With more range the room wall at x = -10 is hit.
  const auto wall = cast_ray(wall_room(), {0, 0}, std::numbers::pi, 20.0);
  REQUIRE(wall);
  CHECK(wall->range == doctest::Approx(10.0));
}

TEST_CASE("origin inside an obstacle is rejected") {
  Environment env;
  env.bounds = Rect{{0, 0}, {10, 10}};
  env.boxes.push_back(Rect{{4, 4}, {6, 6}});
  CHECK_THROWS_AS(cast_ray(env, {5, 5}, 0.0, 5.0), ArgumentError);
}

TEST_CASE("ray casting agrees with brute-force edge intersection") {
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    Environment env;
    env.bounds = Rect{{0, 0}, {20, 20}};
    const Vec2 lo{4 + 8 * u(rng), 4 + 8 * u(rng)};
    env.boxes.push_back(Rect{lo, {lo.x + 1 + 3 * u(rng), lo.y + 1 + 3 * u(rng)}});
    env.segments.push_back({{1 + 3 * u(rng), 15 + 3 * u(rng)}, {15 + 3 * u(rng), 16 + 3 * u(rng)}});
    std::vector<std::pair<Vec2, Vec2>> segs{{env.segments[0].a, env.segments[0].b}};
    for (int r = 0; r < 100; ++r) {
      Vec2 o;
      do {
        o = {20 * u(rng), 20 * u(rng)};
      } while (env.inside_obstacle(o) || env.distance_to_boundary(o) < 1e-3);
      const double angle = 2 * std::numbers::pi * u(rng);
      const auto got = cast_ray(env, o, angle, 12.0);
      const auto want = oracle::brute_force_ray(env.bounds, env.boxes, segs, o, angle, 12.0);
      REQUIRE(got.has_value() == want.has_value());
      if (got) CHECK(std::abs(got->range - *want) < 1e-9);
    }
  }
}

TEST_CASE("scan invariants") {
  const auto sc = generate_scenario({}, 1);
  const auto& scan = sc.agents[0].scans[0];
  CHECK(scan.beams.size() == 64);
  for (const auto& b : scan.beams) {
    CHECK(b.range <= 5.0 + 1e-12);
    if (b.hit) {
      CHECK(norm(*b.hit - scan.origin) == doctest::Approx(b.range).epsilon(1e-12));
      CHECK(sc.env.distance_to_boundary(*b.hit) < 1e-6);
    } else {
      CHECK(b.range == 5.0);
    }
  }
}

TEST_CASE("dataset labels are sound") {
  ScenarioConfig cfg;
  const auto sc = generate_scenario(cfg, 4);
  for (const auto& agent : sc.agents) {
    REQUIRE_FALSE(agent.dataset.empty());
    for (const auto& p : agent.dataset.points) {
      const auto& origin = agent.scans[p.scan].origin;
      if (p.label == 1) {
        CHECK(sc.env.distance_to_boundary(p.position) < 1e-6);
      } else {
        // Line of sight: re-casting toward the point must not stop short of it.
        const Vec2 d = p.position - origin;
        const double dist = norm(d);
        const auto hit = cast_ray(sc.env, origin, std::atan2(d.y, d.x), dist);
        CHECK_FALSE(hit.has_value());
      }
    }
  }
}

TEST_CASE("free points fall strictly inside the sampling range") {
  Environment env;
  env.bounds = Rect{{0, 0}, {10, 10}};
  const auto scan = simulate_scan(env, {5, 5}, 8, 3.0);
  const auto data = build_dataset(std::vector<LidarScan>{scan}, 20, 3);
  for (const auto& p : data.points) {
    CHECK(p.label == 0);
    const double r = norm(p.position - Vec2{5, 5});
    CHECK(r > 0.02 * 3.0);
    CHECK(r < 0.98 * 3.0);
  }
}

TEST_CASE("generation is deterministic") {
  ScenarioConfig cfg;
  cfg.seed = 99;
  const auto a = generate_scenario(cfg, 4);
  const auto b = generate_scenario(cfg, 4);
  CHECK(a.env.boxes == b.env.boxes);
  for (std::size_t k = 0; k < a.agents.size(); ++k) {
    const auto& pa = a.agents[k].dataset.points;
    const auto& pb = b.agents[k].dataset.points;
    REQUIRE(pa.size() == pb.size());
    for (std::size_t i = 0; i < pa.size(); ++i) {
      CHECK(pa[i].position == pb[i].position);
      CHECK(pa[i].label == pb[i].label);
    }
  }
}

TEST_CASE("default environment shape") {
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    ScenarioConfig cfg;
    cfg.seed = seed;
    const auto env = generate_environment(cfg);
    CHECK(env.boxes.size() >= 4);
    CHECK(env.boxes.size() <= 8);
    CHECK(env.bounds.width() == 20.0);
    CHECK_NOTHROW(env.validate());
  }
}

TEST_CASE("agent trajectories stay in their regions and barely overlap") {
  ScenarioConfig cfg;
  const auto env = generate_environment(cfg);
  const auto traj = agent_partition(env, 4, cfg.trajectory);
  REQUIRE(traj.size() == 4);
  for (const auto& t : traj) {
    for (const auto& p : t.poses) {
      CHECK(t.region.contains(p));
      CHECK_FALSE(env.inside_obstacle(p));
    }
    CHECK(t.poses.size() == 96);  // 24 m loop, 0.25 m spacing
  }
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = i + 1; j < 4; ++j) CHECK(visit_overlap(traj[i], traj[j], env.bounds, 0.5) <= 0.2);
  CHECK_THROWS_AS(agent_partition(env, 5, cfg.trajectory), ConfigError);
}

TEST_CASE("single-agent data is a strict subset of the swarm's coverage") {
  const auto sc = generate_scenario({}, 4);
  std::vector<Vec2> single, swarm;
  for (const auto& p : sc.agents[0].dataset.points) single.push_back(p.position);
  for (const auto& p : sc.pooled().points) swarm.push_back(p.position);
  const auto ds = kde::density_grid(kde::fit_kde(single), sc.env.bounds, 40, 40);
  const auto dw = kde::density_grid(kde::fit_kde(swarm), sc.env.bounds, 40, 40);
  // Compare expected point counts per square metre, not normalised densities.
  const double threshold = 1.0;
  std::size_t single_cells = 0, swarm_cells = 0, outside = 0;
  for (std::size_t k = 0; k < ds.size(); ++k) {
    const bool s = ds.values[k] * single.size() > threshold;
    const bool w = dw.values[k] * swarm.size() > threshold;
    single_cells += s;
    swarm_cells += w;
    outside += s && !w;
  }
  CHECK(outside == 0);
  CHECK(single_cells < swarm_cells);
}

TEST_CASE("obstacle rasterisation") {
  Environment env;
  env.bounds = Rect{{0, 0}, {4, 4}};
  env.boxes.push_back(Rect{{1, 1}, {3, 3}});
  const auto g = rasterize_obstacles(env, env.bounds, 4, 4);
  CHECK(g.values == std::vector<double>{0, 0, 0, 0, 0, 1, 1, 0, 0, 1, 1, 0, 0, 0, 0, 0});
}

TEST_CASE("normalisation maps bounds to [-1, 1]") {
  const Rect b{{0, 0}, {20, 10}};
  CHECK(normalize({0, 0}, b) == std::vector<double>{-1.0, -1.0});
  CHECK(normalize({20, 10}, b) == std::vector<double>{1.0, 1.0});
  CHECK(normalize({10, 5}, b) == std::vector<double>{0.0, 0.0});
}

TEST_CASE("dataset files round-trip") {
  const auto sc = generate_scenario({}, 1);
  const auto& data = sc.agents[0].dataset;
  const auto csv = temp_file("data.csv").string();
  const auto bin = temp_file("data.bin").string();
  write_dataset_csv(data, csv);
  write_dataset_bin(data, bin);
  for (const auto& back : {read_dataset_csv(csv), read_dataset_bin(bin)}) {
    REQUIRE(back.size() == data.size());
    for (std::size_t i = 0; i < data.size(); i += 97) {
      CHECK(back.points[i].position == data.points[i].position);
      CHECK(back.points[i].label == data.points[i].label);
      CHECK(back.points[i].scan == data.points[i].scan);
    }
  }
  CHECK_THROWS_AS(read_dataset_csv(temp_file("missing.csv").string()), IoError);
}
