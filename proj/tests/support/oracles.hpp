#pragma once

// Independent reference computations the unit and acceptance tests compare
// the library against. None of these call into the code under test except
// to read plain data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <tuple>
#include <vector>

#include <Eigen/Dense>

#include "bnnswarm/geometry.hpp"
#include "bnnswarm/protocol.hpp"

namespace oracle {

// Central difference of f at x along coordinate i.
inline double central_difference(const std::function<double(const std::vector<double>&)>& f, std::vector<double> x,
                                 std::size_t i, double h = 1e-5) {
  const double x0 = x[i];
  x[i] = x0 + h;
  const double fp = f(x);
  x[i] = x0 - h;
  const double fm = f(x);
  return (fp - fm) / (2.0 * h);
}

// |a - b| / max(|a|, |b|); zero when both are below `floor`.
inline double relative_error(double a, double b, double floor = 1e-8) {
  const double scale = std::max(std::abs(a), std::abs(b));
  if (scale < floor) return 0.0;
  return std::abs(a - b) / scale;
}

// Textbook Adam on a plain vector, one call per step.
struct ReferenceAdam {
  double lr, b1, b2, eps;
  std::vector<double> m, v;
  int t = 0;

  ReferenceAdam(double lr_, double b1_, double b2_, double eps_, std::size_t n)
      : lr(lr_), b1(b1_), b2(b2_), eps(eps_), m(n, 0.0), v(n, 0.0) {}

  void step(std::vector<double>& x, const std::vector<double>& g) {
    ++t;
    for (std::size_t i = 0; i < x.size(); ++i) {
      m[i] = b1 * m[i] + (1 - b1) * g[i];
      v[i] = b2 * v[i] + (1 - b2) * g[i] * g[i];
      const double mh = m[i] / (1 - std::pow(b1, t));
      const double vh = v[i] / (1 - std::pow(b2, t));
      x[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
  }
};

// KL(N(0, s^2) || N(0, r^2)) by composite Simpson quadrature of
// p(x) ln(p(x)/q(x)) over +-14 s.
inline double kl_by_quadrature(double s, double r, int intervals = 40000) {
  const double lo = -14.0 * s;
  const double hi = 14.0 * s;
  const double h = (hi - lo) / intervals;
  auto integrand = [&](double x) {
    const double log_p = -0.5 * std::log(2.0 * std::numbers::pi * s * s) - x * x / (2.0 * s * s);
    const double log_q = -0.5 * std::log(2.0 * std::numbers::pi * r * r) - x * x / (2.0 * r * r);
    return std::exp(log_p) * (log_p - log_q);
  };
  double sum = integrand(lo) + integrand(hi);
  for (int k = 1; k < intervals; ++k) sum += (k % 2 ? 4.0 : 2.0) * integrand(lo + k * h);
  return sum * h / 3.0;
}

// Smallest t >= 0 where origin + t d meets segment [a, b]; +inf if none.
inline double ray_segment_t(bnnswarm::Vec2 o, bnnswarm::Vec2 d, bnnswarm::Vec2 a, bnnswarm::Vec2 b) {
  // Solve o + t d = a + u (b - a) by Cramer's rule.
  const double ex = b.x - a.x, ey = b.y - a.y;
  const double det = d.x * (-ey) - d.y * (-ex);
  if (std::abs(det) < 1e-15) return std::numeric_limits<double>::infinity();
  const double rx = a.x - o.x, ry = a.y - o.y;
  const double t = (rx * (-ey) - ry * (-ex)) / det;
  const double u = (d.x * ry - d.y * rx) / det;
  if (t < 0.0 || u < -1e-12 || u > 1.0 + 1e-12) return std::numeric_limits<double>::infinity();
  return t;
}

// Nearest hit of a ray against every edge of every box plus the given
// segments and the four walls of `bounds`.
inline std::optional<double> brute_force_ray(const bnnswarm::Rect& bounds, const std::vector<bnnswarm::Rect>& boxes,
                                             const std::vector<std::pair<bnnswarm::Vec2, bnnswarm::Vec2>>& segments,
                                             bnnswarm::Vec2 origin, double angle, double max_range) {
  using bnnswarm::Vec2;
  const Vec2 d{std::cos(angle), std::sin(angle)};
  std::vector<std::pair<Vec2, Vec2>> edges = segments;
  auto add_rect = [&](const bnnswarm::Rect& r) {
    const Vec2 c0 = r.min, c1{r.max.x, r.min.y}, c2 = r.max, c3{r.min.x, r.max.y};
    edges.insert(edges.end(), {{c0, c1}, {c1, c2}, {c2, c3}, {c3, c0}});
  };
  add_rect(bounds);
  for (const auto& b : boxes) add_rect(b);
  double best = std::numeric_limits<double>::infinity();
  for (const auto& [a, b] : edges) best = std::min(best, ray_segment_t(origin, d, a, b));
  if (best <= max_range) return best;
  return std::nullopt;
}

// Textbook estimator, one kernel per sample: f(x) = 1/(n |H|) sum K(H^-1 (x - x_i)) with H the
// symmetric square root of factor^2 * Sigma (Sigma unbiased).
inline double naive_kde(const std::vector<bnnswarm::Vec2>& pts, bnnswarm::Vec2 x, const Eigen::Matrix2d& H) {
  const Eigen::Matrix2d Hinv = H.inverse();
  const double detH = std::abs(H.determinant());
  double sum = 0.0;
  for (const auto& p : pts) {
    const Eigen::Vector2d z = Hinv * Eigen::Vector2d(x.x - p.x, x.y - p.y);
    sum += std::exp(-0.5 * z.squaredNorm()) / (2.0 * std::numbers::pi);
  }
  return sum / (static_cast<double>(pts.size()) * detH);
}

inline Eigen::Matrix2d scott_bandwidth_sqrt(const std::vector<bnnswarm::Vec2>& pts) {
  const double n = static_cast<double>(pts.size());
  double mx = 0, my = 0;
  for (const auto& p : pts) {
    mx += p.x;
    my += p.y;
  }
  mx /= n;
  my /= n;
  Eigen::Matrix2d S = Eigen::Matrix2d::Zero();
  for (const auto& p : pts) {
    const Eigen::Vector2d d(p.x - mx, p.y - my);
    S += d * d.transpose();
  }
  S /= (n - 1.0);
  const double f = std::pow(n, -1.0 / 6.0);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(f * f * S);
  return es.operatorSqrt();
}

// Exhaustive exploration of every delivery order of a set of PeerNodes over
// reliable per-link channels (any in-flight message may be delivered next).
struct InterleavingResult {
  std::uint64_t terminal_states = 0;
  std::uint64_t explored = 0;
  std::uint64_t violations = 0;  // wrong round, wrong update count or deadlock
};

struct InFlight {
  bnnswarm::protocol::NodeId to;
  bnnswarm::protocol::Message msg;
};

inline void explore(std::vector<bnnswarm::protocol::PeerNode> nodes, std::vector<InFlight> flight,
                    const std::vector<std::vector<bnnswarm::protocol::NodeId>>& adj, std::uint32_t max_round,
                    InterleavingResult& out) {
  ++out.explored;
  if (flight.empty()) {
    ++out.terminal_states;
    for (const auto& n : nodes)
      if (n.runtime().round != max_round || n.update_count() != max_round) {
        ++out.violations;
        break;
      }
    return;
  }
  for (std::size_t k = 0; k < flight.size(); ++k) {
    auto next_nodes = nodes;
    auto next_flight = flight;
    const InFlight f = next_flight[k];
    next_flight.erase(next_flight.begin() + static_cast<std::ptrdiff_t>(k));
    auto& node = next_nodes[f.to];
    for (const auto& m : node.deliver(f.msg))
      for (auto peer : adj[f.to]) next_flight.push_back({peer, m});
    explore(std::move(next_nodes), std::move(next_flight), adj, max_round, out);
  }
}

}  // namespace oracle
