#include <doctest.h>

#include <random>

#include "bnnswarm/kernels.hpp"
#include "bnnswarm/seed.hpp"

using namespace bnnswarm;

TEST_CASE("density kernels agree bit for bit") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> g;
  std::vector<Vec2> pts(700), queries(1500);
  for (auto& p : pts) p = {g(rng), 2 * g(rng)};
  for (auto& q : queries) q = {3 * g(rng), 3 * g(rng)};
  const auto m = kde::fit_kde(pts);
  std::vector<double> a(queries.size()), b(queries.size());
  kernels::density_serial(m, queries, a);
  kernels::density_omp(m, queries, b);
  CHECK(a == b);
}

TEST_CASE("MC kernels agree bit for bit across chunk boundaries") {
  nn::Architecture arch;
  arch.hidden = {16, 16};
  arch.rho_init = -2.0;
  const auto model = nn::BnnModel::build(arch, 3);
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-1, 1);
  Eigen::MatrixXd x(2, kernels::kMcChunk * 3 + 17);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = u(rng);
  const auto s = kernels::mc_predict_serial(model, x, 8, 99);
  const auto o = kernels::mc_predict_omp(model, x, 8, 99);
  CHECK(s.mean == o.mean);
  CHECK(s.std == o.std);
}

TEST_CASE("MC kernel matches per-point evaluation with the pass noise") {
  nn::Architecture arch;
  arch.hidden = {8};
  arch.rho_init = -1.0;
  const auto model = nn::BnnModel::build(arch, 4);
  Eigen::MatrixXd x(2, 3);
  x << 0.1, -0.5, 0.9, 0.3, 0.2, -0.8;
  const int passes = 5;
  const auto field = kernels::mc_predict_serial(model, x, passes, 7);
  for (Eigen::Index c = 0; c < 3; ++c) {
    std::vector<double> ys;
    for (int p = 0; p < passes; ++p) {
      const auto eps = kernels::mc_pass_noise(model, 7, p);
      ys.push_back(nn::forward_sample(model, std::vector<double>{x(0, c), x(1, c)}, eps)[0]);
    }
    double mean = 0;
    for (double y : ys) mean += y;
    mean /= passes;
    double var = 0;
    for (double y : ys) var += (y - mean) * (y - mean);
    CHECK(field.mean[c] == doctest::Approx(mean).epsilon(1e-12));
    CHECK(field.std[c] == doctest::Approx(std::sqrt(var / passes)).epsilon(1e-9));
  }
}

TEST_CASE("seed mixing separates streams") {
  CHECK(mix_seed(1, 0) != mix_seed(1, 1));
  CHECK(mix_seed(1, 0) != mix_seed(2, 0));
  static_assert(mix_seed(5, 5) == mix_seed(5, 5));
}
