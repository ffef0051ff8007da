#include <benchmark/benchmark.h>

#include <random>

#include "bnnswarm/kernels.hpp"

using namespace bnnswarm;

namespace {

kde::DensityModel density_model(std::size_t n) {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  std::vector<Vec2> pts(n);
  for (auto& p : pts) p = {10 + 3 * g(rng), 10 + 2 * g(rng)};
  return kde::fit_kde(pts);
}

std::vector<Vec2> grid_queries(int side) {
  return cell_centers(Rect{{0, 0}, {20, 20}}, side, side);
}

Eigen::MatrixXd grid_inputs(int side) {
  const auto c = cell_centers(Rect{{-1, -1}, {1, 1}}, side, side);
  Eigen::MatrixXd x(2, static_cast<Eigen::Index>(c.size()));
  for (std::size_t i = 0; i < c.size(); ++i) {
    x(0, static_cast<Eigen::Index>(i)) = c[i].x;
    x(1, static_cast<Eigen::Index>(i)) = c[i].y;
  }
  return x;
}

template <auto Kernel>
void BM_density(benchmark::State& state) {
  const auto model = density_model(static_cast<std::size_t>(state.range(0)));
  const auto q = grid_queries(128);
  std::vector<double> out(q.size());
  for (auto _ : state) {
    Kernel(model, q, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(q.size()) * state.range(0));
}

template <auto Kernel>
void BM_mc_predict(benchmark::State& state) {
  nn::Architecture arch;
  const auto model = nn::BnnModel::build(arch, 3);
  const auto x = grid_inputs(static_cast<int>(state.range(0)));
  for (auto _ : state) benchmark::DoNotOptimize(Kernel(model, x, 8, 5));
  state.SetItemsProcessed(state.iterations() * x.cols() * 8);
}

}  // namespace

BENCHMARK(BM_density<kernels::density_serial>)->Name("density/serial")->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_density<kernels::density_omp>)->Name("density/omp")->Arg(1000)->Arg(10000)->Unit(benchmark::kMillisecond)->UseRealTime();
BENCHMARK(BM_mc_predict<kernels::mc_predict_serial>)->Name("mc_predict/serial")->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_mc_predict<kernels::mc_predict_omp>)->Name("mc_predict/omp")->Arg(64)->Arg(128)->Unit(benchmark::kMillisecond)->UseRealTime();

BENCHMARK_MAIN();
