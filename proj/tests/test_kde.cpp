#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "bnnswarm/errors.hpp"
#include "bnnswarm/kde.hpp"
#include "support/oracles.hpp"

using namespace bnnswarm;
using namespace bnnswarm::kde;

namespace {

std::vector<Vec2> gaussian_cloud(std::size_t n, std::uint64_t seed, double sx = 1.0, double sy = 1.0, double rho = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::vector<Vec2> pts;
  for (std::size_t i = 0; i < n; ++i) {
    const double a = g(rng), b = g(rng);
    pts.push_back({sx * a, sy * (rho * a + std::sqrt(1 - rho * rho) * b)});
  }
  return pts;
}

}  // namespace

TEST_CASE("Scott factor for n = 100") {
  const auto m = fit_kde(gaussian_cloud(100, 1));
  CHECK(m.bandwidth_factor == doctest::Approx(std::pow(100.0, -1.0 / 6.0)));
  CHECK(m.bandwidth_factor == doctest::Approx(0.4642).epsilon(1e-4));
}

TEST_CASE("isotropic data gives a near-isotropic root") {
  const auto m = fit_kde(gaussian_cloud(20000, 2));
  const auto& L = m.covariance_root;
  CHECK(L(0, 0) > 0.0);
  CHECK(L(1, 1) > 0.0);
  CHECK(L(1, 1) / L(0, 0) == doctest::Approx(1.0).epsilon(0.05));
  CHECK(std::abs(L(1, 0)) < 0.05 * L(0, 0));
}

TEST_CASE("degenerate inputs") {
  std::vector<Vec2> line;
  for (int i = 0; i < 10; ++i) line.push_back({double(i), 2.0 * i});
  CHECK_THROWS_AS(fit_kde(line), DegenerateDataError);
  CHECK_THROWS_AS(fit_kde(std::vector<Vec2>{{0, 0}, {1, 1}}), DegenerateDataError);
  const auto fallback = fit_kde_diagonal(line);
  CHECK(evaluate_density(fallback, {3, 6}) > 0.0);
}

TEST_CASE("unit bandwidth hook at the sample") {
  const std::vector<Vec2> one{{1.5, -2.0}};
  const auto m = kde_with_bandwidth(one, Eigen::Matrix2d::Identity());
  CHECK(evaluate_density(m, {1.5, -2.0}) == doctest::Approx(1.0 / (2.0 * std::numbers::pi)).epsilon(1e-15));
}

TEST_CASE("far tail vanishes") {
  const auto pts = gaussian_cloud(200, 3);
  const auto m = fit_kde(pts);
  CHECK(evaluate_density(m, {1000.0, 1000.0}) < 1e-12);
}

TEST_CASE("matches the literal estimator") {
  std::mt19937_64 rng(7);
  for (int inst = 0; inst < 5; ++inst) {
    const auto pts = gaussian_cloud(300, 100 + inst, 1.0 + inst, 0.5, 0.6);
    const auto m = fit_kde(pts);
    const auto H = oracle::scott_bandwidth_sqrt(pts);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int q = 0; q < 20; ++q) {
      const Vec2 x{u(rng), u(rng)};
      const double ref = oracle::naive_kde(pts, x, H);
      CHECK(std::abs(evaluate_density(m, x) - ref) <= 1e-12 * ref);
    }
  }
}

TEST_CASE("invariances") {
  auto pts = gaussian_cloud(150, 9, 2.0, 1.0, 0.3);
  const auto m = fit_kde(pts);
  const Vec2 q{0.4, -0.3};
  const double base = evaluate_density(m, q);
  CHECK(base >= 0.0);

  auto perm = pts;
  std::mt19937_64 rng(1);
  std::shuffle(perm.begin(), perm.end(), rng);
  CHECK(evaluate_density(fit_kde(perm), q) == doctest::Approx(base).epsilon(1e-12));

  const Vec2 shift{3.25, -7.5};
  auto moved = pts;
  for (auto& p : moved) p = p + shift;
  CHECK(std::abs(evaluate_density(fit_kde(moved), q + shift) - base) <= 1e-12 * std::max(base, 1.0));
}

TEST_CASE("grid mass and locality") {
  const auto pts = gaussian_cloud(400, 11);
  const auto m = fit_kde(pts);
  const Rect region{{-8, -8}, {8, 8}};
  const auto g = density_grid(m, region, 160, 160);
  double mass = 0.0;
  for (double v : g.values) mass += v;
  CHECK(mass * g.cell_area() == doctest::Approx(1.0).epsilon(0.01));

  std::vector<Vec2> corner;
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(0.0, 2.0);
  for (int i = 0; i < 100; ++i) corner.push_back({u(rng), u(rng)});
  const auto gc = density_grid(fit_kde(corner), Rect{{0, 0}, {10, 10}}, 20, 20);
  const auto best = std::max_element(gc.values.begin(), gc.values.end()) - gc.values.begin();
  CHECK(best % 20 < 10);
  CHECK(best / 20 < 10);
  CHECK_THROWS_AS(density_grid(m, region, 1, 5), ArgumentError);
}

TEST_CASE("uniform samples give a flat interior") {
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(0.0, 10.0);
  std::vector<Vec2> pts;
  for (int i = 0; i < 5000; ++i) pts.push_back({u(rng), u(rng)});
  const auto g = density_grid(fit_kde(pts), Rect{{0, 0}, {10, 10}}, 20, 20);
  double s = 0, s2 = 0;
  int n = 0;
  for (int j = 4; j < 16; ++j)
    for (int i = 4; i < 16; ++i) {
      s += g.at(i, j);
      s2 += g.at(i, j) * g.at(i, j);
      ++n;
    }
  const double mean = s / n;
  const double cv = std::sqrt(s2 / n - mean * mean) / mean;
  CHECK(cv < 0.5);
}
