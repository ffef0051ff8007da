#include "bnnswarm/kernels.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

#include "bnnswarm/errors.hpp"
#include "bnnswarm/seed.hpp"

namespace bnnswarm::kernels {

namespace {

inline double density_at(const kde::DensityModel& m, Vec2 q) {
  const double l00 = m.covariance_root(0, 0);
  const double l10 = m.covariance_root(1, 0);
  const double l11 = m.covariance_root(1, 1);
  const double wx = q.x / l00;
  const double wy = (q.y - l10 * wx) / l11;
  double sum = 0.0;
  for (const auto& z : m.whitened) {
    const double dx = wx - z.x;
    const double dy = wy - z.y;
    sum += std::exp(-0.5 * (dx * dx + dy * dy));
  }
  return sum * m.normalization;
}

void check_sizes(std::span<const Vec2> queries, std::span<double> out) {
  if (queries.size() != out.size()) throw ArgumentError("kde_uncertainty", "query and output sizes differ");
}

// Welford accumulation of one chunk of columns over all passes.
void mc_chunk(const nn::BnnModel& model, const Eigen::MatrixXd& inputs, Eigen::Index begin, Eigen::Index count,
              const std::vector<std::vector<double>>& noise, double* mean, double* std) {
  const Eigen::MatrixXd block = inputs.middleCols(begin, count);
  std::vector<double> m2(static_cast<std::size_t>(count), 0.0);
  std::fill(mean + begin, mean + begin + count, 0.0);
  for (std::size_t p = 0; p < noise.size(); ++p) {
    const Eigen::MatrixXd y = nn::apply_output_transform(model, nn::forward_batch(model, block, noise[p]));
    for (Eigen::Index c = 0; c < count; ++c) {
      const double v = y(0, c);
      double& mu = mean[begin + c];
      const double delta = v - mu;
      mu += delta / static_cast<double>(p + 1);
      m2[static_cast<std::size_t>(c)] += delta * (v - mu);
    }
  }
  const auto passes = static_cast<double>(noise.size());
  for (Eigen::Index c = 0; c < count; ++c)
    std[begin + c] = std::sqrt(std::max(0.0, m2[static_cast<std::size_t>(c)] / passes));
}

std::vector<std::vector<double>> all_pass_noise(const nn::BnnModel& model, std::uint64_t seed, int passes) {
  if (passes < 1) throw ArgumentError("experiment_cli", "Monte-Carlo prediction needs at least one pass");
  if (model.output_dim() != 1) throw ShapeError("Monte-Carlo grid expects a single-output model");
  std::vector<std::vector<double>> noise;
  noise.reserve(static_cast<std::size_t>(passes));
  for (int p = 0; p < passes; ++p) noise.push_back(mc_pass_noise(model, seed, p));
  return noise;
}

}  // namespace

void density_serial(const kde::DensityModel& model, std::span<const Vec2> queries, std::span<double> out) {
  check_sizes(queries, out);
  for (std::size_t k = 0; k < queries.size(); ++k) out[k] = density_at(model, queries[k]);
}

void density_omp(const kde::DensityModel& model, std::span<const Vec2> queries, std::span<double> out) {
  check_sizes(queries, out);
  const auto n = static_cast<std::int64_t>(queries.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t k = 0; k < n; ++k) out[static_cast<std::size_t>(k)] = density_at(model, queries[static_cast<std::size_t>(k)]);
}

std::vector<double> mc_pass_noise(const nn::BnnModel& model, std::uint64_t seed, int pass) {
  nn::NoiseSource noise(mix_seed(seed, static_cast<std::uint64_t>(pass)));
  return noise.draw(model.rho_count());
}

McField mc_predict_serial(const nn::BnnModel& model, const Eigen::MatrixXd& inputs, int passes, std::uint64_t seed) {
  const auto noise = all_pass_noise(model, seed, passes);
  McField out{std::vector<double>(static_cast<std::size_t>(inputs.cols())),
              std::vector<double>(static_cast<std::size_t>(inputs.cols()))};
  for (Eigen::Index begin = 0; begin < inputs.cols(); begin += kMcChunk)
    mc_chunk(model, inputs, begin, std::min(kMcChunk, inputs.cols() - begin), noise, out.mean.data(), out.std.data());
  return out;
}

McField mc_predict_omp(const nn::BnnModel& model, const Eigen::MatrixXd& inputs, int passes, std::uint64_t seed) {
  const auto noise = all_pass_noise(model, seed, passes);
  McField out{std::vector<double>(static_cast<std::size_t>(inputs.cols())),
              std::vector<double>(static_cast<std::size_t>(inputs.cols()))};
  const Eigen::Index chunks = (inputs.cols() + kMcChunk - 1) / kMcChunk;
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index c = 0; c < chunks; ++c) {
    const Eigen::Index begin = c * kMcChunk;
    mc_chunk(model, inputs, begin, std::min(kMcChunk, inputs.cols() - begin), noise, out.mean.data(), out.std.data());
  }
  return out;
}

int max_threads() { return omp_get_max_threads(); }

}  // namespace bnnswarm::kernels
