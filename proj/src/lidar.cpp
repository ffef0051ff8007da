#include "bnnswarm/lidar.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <random>
#include <set>
#include <sstream>

#include "bnnswarm/errors.hpp"
#include "bnnswarm/param_vector.hpp"
#include "bnnswarm/seed.hpp"

namespace bnnswarm::lidar {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

double point_segment_distance(Vec2 p, Vec2 a, Vec2 b) {
  const Vec2 ab = b - a;
  const double len2 = dot(ab, ab);
  double t = len2 > 0.0 ? dot(p - a, ab) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  return norm(p - (a + ab * t));
}

// Ray o + t*d (|d| = 1) against segment [a, b]; returns t or +inf.
double ray_segment(Vec2 o, Vec2 d, Vec2 a, Vec2 b) {
  const Vec2 e = b - a;
  const double denom = cross(d, e);
  if (std::abs(denom) < 1e-14) return kInf;
  const Vec2 ao = a - o;
  const double t = cross(ao, e) / denom;
  const double s = cross(ao, d) / denom;
  if (t <= 1e-12 || s < 0.0 || s > 1.0) return kInf;
  return t;
}

// Slab test for a ray starting outside the box.
double ray_box(Vec2 o, Vec2 d, const Rect& box) {
  double t_enter = -kInf;
  double t_exit = kInf;
  const double oc[2] = {o.x, o.y};
  const double dc[2] = {d.x, d.y};
  const double lo[2] = {box.min.x, box.min.y};
  const double hi[2] = {box.max.x, box.max.y};
  for (int k = 0; k < 2; ++k) {
    if (std::abs(dc[k]) < 1e-15) {
      if (oc[k] < lo[k] || oc[k] > hi[k]) return kInf;
      continue;
    }
    double t1 = (lo[k] - oc[k]) / dc[k];
    double t2 = (hi[k] - oc[k]) / dc[k];
    if (t1 > t2) std::swap(t1, t2);
    t_enter = std::max(t_enter, t1);
    t_exit = std::min(t_exit, t2);
  }
  if (t_enter > t_exit || t_enter <= 1e-12) return kInf;
  return t_enter;
}

// Distance from an interior point to the bounds along d.
double ray_bounds(Vec2 o, Vec2 d, const Rect& bounds) {
  double t = kInf;
  if (d.x > 1e-15) t = std::min(t, (bounds.max.x - o.x) / d.x);
  if (d.x < -1e-15) t = std::min(t, (bounds.min.x - o.x) / d.x);
  if (d.y > 1e-15) t = std::min(t, (bounds.max.y - o.y) / d.y);
  if (d.y < -1e-15) t = std::min(t, (bounds.min.y - o.y) / d.y);
  return t;
}

}  // namespace

void Environment::validate() const {
  if (!(bounds.width() > 0.0) || !(bounds.height() > 0.0))
    throw ArgumentError("lidar_scenario", "environment bounds must have positive area");
  for (const auto& s : segments) {
    if (s.a == s.b) throw ArgumentError("lidar_scenario", "segment endpoints coincide");
    if (!bounds.contains(s.a) || !bounds.contains(s.b))
      throw ArgumentError("lidar_scenario", "segment leaves the environment bounds");
  }
  for (const auto& b : boxes) {
    if (!(b.width() > 0.0) || !(b.height() > 0.0)) throw ArgumentError("lidar_scenario", "box with no area");
    if (!bounds.contains(b)) throw ArgumentError("lidar_scenario", "box leaves the environment bounds");
  }
}

bool Environment::inside_obstacle(Vec2 p) const {
  for (const auto& b : boxes)
    if (b.contains_strictly(p)) return true;
  for (const auto& s : segments)
    if (point_segment_distance(p, s.a, s.b) < 1e-9) return true;
  return false;
}

double Environment::distance_to_boundary(Vec2 p) const {
  double d = std::min({std::abs(p.x - bounds.min.x), std::abs(p.x - bounds.max.x), std::abs(p.y - bounds.min.y),
                       std::abs(p.y - bounds.max.y)});
  for (const auto& s : segments) d = std::min(d, point_segment_distance(p, s.a, s.b));
  for (const auto& b : boxes) {
    const Vec2 c[4] = {b.min, {b.max.x, b.min.y}, b.max, {b.min.x, b.max.y}};
    for (int k = 0; k < 4; ++k) d = std::min(d, point_segment_distance(p, c[k], c[(k + 1) % 4]));
  }
  return d;
}

std::optional<RayHit> cast_ray(const Environment& env, Vec2 origin, double angle, double max_range) {
  if (!env.bounds.contains(origin)) throw ArgumentError("lidar_scenario", "ray origin outside the environment");
  if (env.inside_obstacle(origin)) throw ArgumentError("lidar_scenario", "ray origin inside an obstacle");
  if (!(max_range > 0.0)) throw ArgumentError("lidar_scenario", "max_range must be positive");
  const Vec2 d{std::cos(angle), std::sin(angle)};
  double t = ray_bounds(origin, d, env.bounds);
  for (const auto& s : env.segments) t = std::min(t, ray_segment(origin, d, s.a, s.b));
  for (const auto& b : env.boxes) t = std::min(t, ray_box(origin, d, b));
  if (!(t <= max_range)) return std::nullopt;
  return RayHit{origin + d * t, t};
}

LidarScan simulate_scan(const Environment& env, Vec2 pose, int beam_count, double max_range) {
  if (beam_count < 1) throw ArgumentError("lidar_scenario", "beam_count must be at least 1");
  LidarScan scan{pose, max_range, {}};
  scan.beams.reserve(static_cast<std::size_t>(beam_count));
  for (int k = 0; k < beam_count; ++k) {
    const double angle = 2.0 * std::numbers::pi * k / beam_count;
    const auto hit = cast_ray(env, pose, angle, max_range);
    if (hit)
      scan.beams.push_back({angle, hit->point, hit->range});
    else
      scan.beams.push_back({angle, std::nullopt, max_range});
  }
  return scan;
}

void LidarDataset::append(const LidarDataset& other) {
  points.insert(points.end(), other.points.begin(), other.points.end());
}

LidarDataset build_dataset(std::span<const LidarScan> scans, int free_per_beam, std::uint64_t seed,
                           std::uint32_t agent_id, std::uint32_t first_scan_index) {
  if (free_per_beam < 0) throw ArgumentError("lidar_scenario", "free_per_beam must be non-negative");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> frac(kFreeFractionMin, kFreeFractionMax);
  LidarDataset out;
  for (std::size_t s = 0; s < scans.size(); ++s) {
    const auto& scan = scans[s];
    const auto scan_index = static_cast<std::uint32_t>(first_scan_index + s);
    for (const auto& beam : scan.beams) {
      const Vec2 dir{std::cos(beam.angle), std::sin(beam.angle)};
      if (beam.hit) out.points.push_back({*beam.hit, 1, agent_id, scan_index});
      for (int k = 0; k < free_per_beam; ++k) {
        double t = frac(rng);
        while (t <= kFreeFractionMin) t = frac(rng);
        out.points.push_back({scan.origin + dir * (t * beam.range), 0, agent_id, scan_index});
      }
    }
  }
  return out;
}

Rect partition_region(const Rect& bounds, const TrajectorySpec& spec, int r) {
  const int cx = r % spec.regions_x;
  const int cy = r / spec.regions_x;
  const double w = bounds.width() / spec.regions_x;
  const double h = bounds.height() / spec.regions_y;
  return Rect{{bounds.min.x + cx * w, bounds.min.y + cy * h}, {bounds.min.x + (cx + 1) * w, bounds.min.y + (cy + 1) * h}};
}

namespace {

Trajectory loop_trajectory(const Rect& region, const TrajectorySpec& spec) {
  Trajectory t;
  t.region = region;
  const Rect loop{{region.min.x + spec.inset, region.min.y + spec.inset},
                  {region.max.x - spec.inset, region.max.y - spec.inset}};
  if (!(loop.width() > 0.0) || !(loop.height() > 0.0))
    throw ConfigError("lidar_scenario", "trajectory inset leaves no room for a loop");
  t.waypoints = {loop.min, {loop.max.x, loop.min.y}, loop.max, {loop.min.x, loop.max.y}};
  // Walk the closed loop placing a pose every scan_spacing metres.
  double carry = 0.0;
  for (std::size_t k = 0; k < t.waypoints.size(); ++k) {
    const Vec2 a = t.waypoints[k];
    const Vec2 b = t.waypoints[(k + 1) % t.waypoints.size()];
    const double len = norm(b - a);
    double s = carry;
    for (; s < len - 1e-9; s += spec.scan_spacing) t.poses.push_back(a + (b - a) * (s / len));
    carry = s - len;
  }
  return t;
}

std::set<std::pair<int, int>> visited_cells(const Trajectory& t, const Rect& bounds, double cell) {
  std::set<std::pair<int, int>> cells;
  for (const auto& p : t.poses)
    cells.insert({static_cast<int>(std::floor((p.x - bounds.min.x) / cell)),
                  static_cast<int>(std::floor((p.y - bounds.min.y) / cell))});
  return cells;
}

}  // namespace

double visit_overlap(const Trajectory& a, const Trajectory& b, const Rect& bounds, double cell) {
  const auto ca = visited_cells(a, bounds, cell);
  const auto cb = visited_cells(b, bounds, cell);
  if (ca.empty() || cb.empty()) return 0.0;
  std::size_t common = 0;
  for (const auto& c : ca) common += cb.count(c);
  return static_cast<double>(common) / static_cast<double>(std::min(ca.size(), cb.size()));
}

std::vector<Trajectory> agent_partition(const Environment& env, int n_agents, const TrajectorySpec& spec) {
  if (n_agents < 1) throw ConfigError("lidar_scenario", "need at least one agent");
  if (spec.regions_x < 1 || spec.regions_y < 1) throw ConfigError("lidar_scenario", "region grid must be non-empty");
  if (!(spec.scan_spacing > 0.0)) throw ConfigError("lidar_scenario", "scan spacing must be positive");
  const int regions = spec.regions_x * spec.regions_y;
  if (n_agents > regions)
    throw ConfigError("lidar_scenario", std::to_string(n_agents) + " agents but only " + std::to_string(regions) +
                                            " disjoint regions");
  std::vector<Trajectory> out;
  for (int a = 0; a < n_agents; ++a) {
    auto t = loop_trajectory(partition_region(env.bounds, spec, a), spec);
    for (const auto& p : t.poses)
      if (!env.bounds.contains(p) || env.inside_obstacle(p))
        throw ConfigError("lidar_scenario", "trajectory of agent " + std::to_string(a) + " crosses an obstacle");
    out.push_back(std::move(t));
  }
  for (std::size_t i = 0; i < out.size(); ++i)
    for (std::size_t j = i + 1; j < out.size(); ++j)
      if (visit_overlap(out[i], out[j], env.bounds, spec.visit_cell) > spec.max_overlap)
        throw ConfigError("lidar_scenario", "agent regions overlap more than the configured fraction");
  return out;
}

Environment generate_environment(const ScenarioConfig& config) {
  if (config.min_obstacles < 0 || config.max_obstacles < config.min_obstacles)
    throw ConfigError("lidar_scenario", "invalid obstacle count range");
  Environment env;
  env.bounds = Rect{{0.0, 0.0}, {config.width, config.height}};
  std::mt19937_64 rng(mix_seed(config.seed, 1));
  std::uniform_int_distribution<int> count_dist(config.min_obstacles, config.max_obstacles);
  const int count = count_dist(rng);
  const int regions = config.trajectory.regions_x * config.trajectory.regions_y;
  const double margin = config.trajectory.inset + config.clearance;
  for (int k = 0; k < count; ++k) {
    const Rect region = partition_region(env.bounds, config.trajectory, k % regions);
    const Rect room{{region.min.x + margin, region.min.y + margin}, {region.max.x - margin, region.max.y - margin}};
    for (int attempt = 0; attempt < 200; ++attempt) {
      std::uniform_real_distribution<double> size(config.min_box, config.max_box);
      const double w = std::min(size(rng), room.width());
      const double h = std::min(size(rng), room.height());
      if (!(w > 0.0) || !(h > 0.0)) break;
      std::uniform_real_distribution<double> px(room.min.x, room.max.x - w);
      std::uniform_real_distribution<double> py(room.min.y, room.max.y - h);
      const Vec2 lo{px(rng), py(rng)};
      const Rect box{lo, {lo.x + w, lo.y + h}};
      const bool clash = std::any_of(env.boxes.begin(), env.boxes.end(), [&](const Rect& b) { return b.overlaps(box, 0.5); });
      if (clash) continue;
      env.boxes.push_back(box);
      break;
    }
  }
  env.validate();
  return env;
}

LidarDataset Scenario::pooled() const {
  LidarDataset all;
  for (const auto& a : agents) all.append(a.dataset);
  return all;
}

Scenario generate_scenario(const ScenarioConfig& config, int n_agents) {
  Scenario sc;
  sc.env = generate_environment(config);
  const auto trajectories = agent_partition(sc.env, n_agents, config.trajectory);
  for (std::size_t a = 0; a < trajectories.size(); ++a) {
    AgentData agent;
    agent.trajectory = trajectories[a];
    for (const auto& pose : agent.trajectory.poses)
      agent.scans.push_back(simulate_scan(sc.env, pose, config.beams, config.max_range));
    agent.dataset = build_dataset(agent.scans, config.free_per_beam, mix_seed(config.seed, 100 + a),
                                  static_cast<std::uint32_t>(a));
    sc.agents.push_back(std::move(agent));
  }
  return sc;
}

GridField rasterize_obstacles(const Environment& env, const Rect& region, int nx, int ny) {
  GridField g(region, nx, ny);
  const double half = 0.5 * std::max(g.cell_width(), g.cell_height());
  for (std::size_t k = 0; k < g.size(); ++k) {
    const Vec2 c = g.cell_center(k);
    bool occ = std::any_of(env.boxes.begin(), env.boxes.end(), [&](const Rect& b) { return b.contains_strictly(c); });
    if (!occ)
      occ = std::any_of(env.segments.begin(), env.segments.end(),
                        [&](const Segment& s) { return point_segment_distance(c, s.a, s.b) <= half; });
    g.values[k] = occ ? 1.0 : 0.0;
  }
  return g;
}

std::vector<double> normalize(Vec2 p, const Rect& bounds) {
  return {2.0 * (p.x - bounds.min.x) / bounds.width() - 1.0, 2.0 * (p.y - bounds.min.y) / bounds.height() - 1.0};
}

nn::LabeledBatch to_batch(std::span<const LidarPoint> points, const Rect& bounds) {
  nn::LabeledBatch b;
  b.inputs.resize(2, static_cast<Eigen::Index>(points.size()));
  b.labels.resize(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto n = normalize(points[i].position, bounds);
    b.inputs(0, static_cast<Eigen::Index>(i)) = n[0];
    b.inputs(1, static_cast<Eigen::Index>(i)) = n[1];
    b.labels[i] = points[i].label;
  }
  return b;
}

nn::LabeledBatch to_batch(const LidarDataset& data, const Rect& bounds) { return to_batch(data.points, bounds); }

void write_dataset_csv(const LidarDataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError(path, "cannot open for writing");
  out << "x,y,label,agent_id,scan_index\n";
  char buf[128];
  for (const auto& p : data.points) {
    std::snprintf(buf, sizeof buf, "%.17g,%.17g,%u,%u,%u\n", p.position.x, p.position.y, unsigned(p.label),
                  unsigned(p.agent), unsigned(p.scan));
    out << buf;
  }
  if (!out) throw IoError(path, "write failed");
}

LidarDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError(path, "cannot open for reading");
  std::string line;
  std::getline(in, line);
  LidarDataset data;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    LidarPoint p;
    unsigned label = 0;
    unsigned agent = 0;
    unsigned scan = 0;
    if (std::sscanf(line.c_str(), "%lf,%lf,%u,%u,%u", &p.position.x, &p.position.y, &label, &agent, &scan) != 5)
      throw IoError(path, "malformed row: " + line);
    p.label = static_cast<std::uint8_t>(label);
    p.agent = agent;
    p.scan = scan;
    data.points.push_back(p);
  }
  return data;
}

void write_dataset_bin(const LidarDataset& data, const std::string& path) {
  std::vector<std::uint8_t> bytes;
  le::put_u32(bytes, static_cast<std::uint32_t>(data.size()));
  for (const auto& p : data.points) {
    le::put_f64(bytes, p.position.x);
    le::put_f64(bytes, p.position.y);
    bytes.push_back(p.label);
    le::put_u32(bytes, p.agent);
    le::put_u32(bytes, p.scan);
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError(path, "cannot open for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError(path, "write failed");
}

LidarDataset read_dataset_bin(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError(path, "cannot open for reading");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  constexpr std::size_t kRecord = 8 + 8 + 1 + 4 + 4;
  const std::uint32_t n = le::get_u32(bytes, 0);
  if (bytes.size() != 4 + std::size_t{n} * kRecord) throw IoError(path, "dataset cache has the wrong size");
  LidarDataset data;
  data.points.resize(n);
  std::size_t off = 4;
  for (auto& p : data.points) {
    p.position.x = le::get_f64(bytes, off);
    p.position.y = le::get_f64(bytes, off + 8);
    p.label = bytes[off + 16];
    p.agent = le::get_u32(bytes, off + 17);
    p.scan = le::get_u32(bytes, off + 21);
    off += kRecord;
  }
  return data;
}

}  // namespace bnnswarm::lidar
