#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bnnswarm/bayesian_nn.hpp"
#include "bnnswarm/geometry.hpp"
#include "bnnswarm/kde.hpp"

// Data-parallel kernels. Each has a serial reference with the same
// per-element arithmetic; the OpenMP variant must match it bit for bit.
namespace bnnswarm::kernels {

void density_serial(const kde::DensityModel& model, std::span<const Vec2> queries, std::span<double> out);
void density_omp(const kde::DensityModel& model, std::span<const Vec2> queries, std::span<double> out);

struct McField {
  std::vector<double> mean;
  std::vector<double> std;  // population std over passes
};

inline constexpr Eigen::Index kMcChunk = 256;

// Monte-Carlo prediction for many inputs (columns of `inputs`). Pass p
// draws one weight sample from NoiseSource(mix_seed(seed, p)) shared by all
// inputs; output_transform is applied before the statistics.
McField mc_predict_serial(const nn::BnnModel& model, const Eigen::MatrixXd& inputs, int passes, std::uint64_t seed);
McField mc_predict_omp(const nn::BnnModel& model, const Eigen::MatrixXd& inputs, int passes, std::uint64_t seed);

// The noise used by pass p of mc_predict_*.
std::vector<double> mc_pass_noise(const nn::BnnModel& model, std::uint64_t seed, int pass);

int max_threads();

}  // namespace bnnswarm::kernels
