#include "bnnswarm/kde.hpp"

#include <cmath>
#include <numbers>

#include "bnnswarm/errors.hpp"
#include "bnnswarm/kernels.hpp"

namespace bnnswarm::kde {

namespace {

DensityModel from_root(std::span<const Vec2> points, const Eigen::Matrix2d& root, double factor) {
  DensityModel m;
  m.samples.assign(points.begin(), points.end());
  m.bandwidth_factor = factor;
  m.covariance_root = root;
  const double det = root(0, 0) * root(1, 1);
  if (!(root(0, 0) > 0.0) || !(root(1, 1) > 0.0) || !std::isfinite(det))
    throw DegenerateDataError("bandwidth root must have a positive diagonal");
  m.normalization = 1.0 / (static_cast<double>(points.size()) * 2.0 * std::numbers::pi * det);
  m.whitened.reserve(points.size());
  for (const auto& p : points) {
    const double wx = p.x / root(0, 0);
    const double wy = (p.y - root(1, 0) * wx) / root(1, 1);
    m.whitened.push_back({wx, wy});
  }
  return m;
}

}  // namespace

Eigen::Matrix2d sample_covariance(std::span<const Vec2> points) {
  const auto n = static_cast<double>(points.size());
  Vec2 mean{};
  for (const auto& p : points) mean = mean + p;
  mean = mean * (1.0 / n);
  Eigen::Matrix2d c = Eigen::Matrix2d::Zero();
  for (const auto& p : points) {
    const Vec2 d = p - mean;
    c(0, 0) += d.x * d.x;
    c(0, 1) += d.x * d.y;
    c(1, 1) += d.y * d.y;
  }
  c(1, 0) = c(0, 1);
  return c / (n - 1.0);
}

DensityModel fit_kde(std::span<const Vec2> points) {
  if (points.size() < 3) throw DegenerateDataError("KDE needs at least 3 samples");
  const Eigen::Matrix2d cov = sample_covariance(points);
  const double trace = cov.trace();
  if (!(trace > 0.0) || cov.determinant() <= 1e-12 * trace * trace)
    throw DegenerateDataError("sample covariance is singular (collinear or repeated points)");
  const double factor = std::pow(static_cast<double>(points.size()), -1.0 / 6.0);
  const Eigen::LLT<Eigen::Matrix2d> llt(cov * factor * factor);
  if (llt.info() != Eigen::Success) throw DegenerateDataError("covariance is not positive definite");
  return from_root(points, llt.matrixL(), factor);
}

DensityModel fit_kde_diagonal(std::span<const Vec2> points) {
  if (points.empty()) throw DegenerateDataError("KDE needs at least one sample");
  const double factor = std::pow(static_cast<double>(points.size()), -1.0 / 6.0);
  Eigen::Matrix2d root = Eigen::Matrix2d::Identity();
  if (points.size() >= 2) {
    const Eigen::Matrix2d cov = sample_covariance(points);
    for (int k = 0; k < 2; ++k) root(k, k) = cov(k, k) > 0.0 ? std::sqrt(cov(k, k)) : 1.0;
  }
  return from_root(points, root * factor, factor);
}

DensityModel kde_with_bandwidth(std::span<const Vec2> points, const Eigen::Matrix2d& bandwidth) {
  if (points.empty()) throw DegenerateDataError("KDE needs at least one sample");
  const Eigen::LLT<Eigen::Matrix2d> llt(bandwidth * bandwidth.transpose());
  if (llt.info() != Eigen::Success) throw DegenerateDataError("bandwidth matrix is singular");
  return from_root(points, llt.matrixL(), 1.0);
}

double evaluate_density(const DensityModel& model, Vec2 query) {
  double out = 0.0;
  kernels::density_serial(model, std::span<const Vec2>(&query, 1), std::span<double>(&out, 1));
  return out;
}

GridField density_grid(const DensityModel& model, const Rect& region, int nx, int ny) {
  if (nx < 2 || ny < 2) throw ArgumentError("kde_uncertainty", "density grid needs at least 2 cells per axis");
  GridField g(region, nx, ny);
  const auto centers = cell_centers(region, nx, ny);
  kernels::density_omp(model, centers, g.values);
  return g;
}

}  // namespace bnnswarm::kde
