#pragma once

#include <span>
#include <vector>

#include <Eigen/Dense>

#include "bnnswarm/geometry.hpp"
#include "bnnswarm/grid.hpp"

namespace bnnswarm::kde {

// Bivariate Gaussian KDE
//   f(x) = 1 / (n |H|) * sum_i K(H^-1 (x - x_i)),  K = standard normal,
// with H H^T = bandwidth_factor^2 * Sigma. covariance_root is the lower
// Cholesky factor of H H^T, so |H| = det(covariance_root).
struct DensityModel {
  std::vector<Vec2> samples;
  double bandwidth_factor = 1.0;
  Eigen::Matrix2d covariance_root = Eigen::Matrix2d::Identity();
  double normalization = 0.0;  // 1 / (n * 2 pi * |H|)

  // samples mapped through covariance_root^-1, cached at fit time.
  std::vector<Vec2> whitened;
};

// Scott's rule: bandwidth_factor = n^(-1/6), Sigma = unbiased sample
// covariance. Throws DegenerateDataError for n < 3 or singular Sigma.
DensityModel fit_kde(std::span<const Vec2> points);

// Fallback for degenerate data: diagonal bandwidth from per-axis variances
// (unit variance where an axis has none).
DensityModel fit_kde_diagonal(std::span<const Vec2> points);

// Fixed bandwidth matrix H (any nonsingular 2x2); no minimum sample count.
DensityModel kde_with_bandwidth(std::span<const Vec2> points, const Eigen::Matrix2d& bandwidth);

Eigen::Matrix2d sample_covariance(std::span<const Vec2> points);

double evaluate_density(const DensityModel& model, Vec2 query);

// Density at every cell centre, row-major. Uses the OpenMP kernel.
GridField density_grid(const DensityModel& model, const Rect& region, int nx, int ny);

}  // namespace bnnswarm::kde
