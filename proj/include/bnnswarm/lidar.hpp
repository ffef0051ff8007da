#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "bnnswarm/bayesian_nn.hpp"
#include "bnnswarm/geometry.hpp"
#include "bnnswarm/grid.hpp"

namespace bnnswarm::lidar {

struct Segment {
  Vec2 a;
  Vec2 b;
};

// A bounded room (its walls are the bounds) with segment and box obstacles.
struct Environment {
  Rect bounds;
  std::vector<Segment> segments;
  std::vector<Rect> boxes;

  // Throws ArgumentError if an obstacle leaves the bounds or a segment is degenerate.
  void validate() const;
  // Strictly inside a box, or on a segment.
  bool inside_obstacle(Vec2 p) const;
  // Distance from `p` to the nearest obstacle edge or wall.
  double distance_to_boundary(Vec2 p) const;
};

struct RayHit {
  Vec2 point;
  double range;
};

// Nearest intersection with an obstacle or wall within max_range.
std::optional<RayHit> cast_ray(const Environment& env, Vec2 origin, double angle, double max_range);

struct Beam {
  double angle = 0.0;
  std::optional<Vec2> hit;
  double range = 0.0;  // distance to hit, or max_range on a miss
};

struct LidarScan {
  Vec2 origin;
  double max_range = 0.0;
  std::vector<Beam> beams;
};

// Beams at angles 2*pi*k/beam_count.
LidarScan simulate_scan(const Environment& env, Vec2 pose, int beam_count, double max_range);

struct LidarPoint {
  Vec2 position;
  std::uint8_t label = 0;  // 1 occupied, 0 free
  std::uint32_t agent = 0;
  std::uint32_t scan = 0;
};

struct LidarDataset {
  std::vector<LidarPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
  void append(const LidarDataset& other);
};

inline constexpr double kFreeFractionMin = 0.02;
inline constexpr double kFreeFractionMax = 0.98;

// One occupied point per hit plus `free_per_beam` free points at uniform
// fractions in (0.02, 0.98) of each ray (the full max_range ray on a miss).
LidarDataset build_dataset(std::span<const LidarScan> scans, int free_per_beam, std::uint64_t seed,
                           std::uint32_t agent_id = 0, std::uint32_t first_scan_index = 0);

struct TrajectorySpec {
  int regions_x = 2;
  int regions_y = 2;
  double inset = 2.0;         // loop distance from the region edges
  double scan_spacing = 0.25;  // metres of travel between scans
  double max_overlap = 0.2;
  double visit_cell = 0.5;     // cell size for overlap accounting
};

struct Trajectory {
  Rect region;
  std::vector<Vec2> waypoints;  // closed loop, first point repeated implicitly
  std::vector<Vec2> poses;
};

// Rectangular region r of the regions_x x regions_y partition (row-major,
// region 0 at bounds.min).
Rect partition_region(const Rect& bounds, const TrajectorySpec& spec, int r);

// One waypoint loop per agent in its own region.
std::vector<Trajectory> agent_partition(const Environment& env, int n_agents, const TrajectorySpec& spec);

// |A ∩ B| / min(|A|, |B|) over cells of size spec.visit_cell containing poses.
double visit_overlap(const Trajectory& a, const Trajectory& b, const Rect& bounds, double cell);

struct ScenarioConfig {
  std::uint64_t seed = 7;
  double width = 20.0;
  double height = 20.0;
  int min_obstacles = 4;
  int max_obstacles = 8;
  double min_box = 1.0;
  double max_box = 2.5;
  double clearance = 0.75;  // free margin between obstacles and the loops
  int beams = 64;
  double max_range = 5.0;
  int free_per_beam = 4;
  TrajectorySpec trajectory;
};

// Bounded room with seeded boxes placed inside each region's loop, so that
// every loop is collision-free.
Environment generate_environment(const ScenarioConfig& config);

struct AgentData {
  Trajectory trajectory;
  std::vector<LidarScan> scans;
  LidarDataset dataset;
};

struct Scenario {
  Environment env;
  std::vector<AgentData> agents;

  LidarDataset pooled() const;
};

Scenario generate_scenario(const ScenarioConfig& config, int n_agents);

// 1 where the cell centre lies inside an obstacle (box interior or within
// half a cell of a segment), else 0.
GridField rasterize_obstacles(const Environment& env, const Rect& region, int nx, int ny);

// Maps a point of `bounds` to [-1, 1]^2.
std::vector<double> normalize(Vec2 p, const Rect& bounds);
// Network inputs (2 x n, normalised) and labels.
nn::LabeledBatch to_batch(const LidarDataset& data, const Rect& bounds);
nn::LabeledBatch to_batch(std::span<const LidarPoint> points, const Rect& bounds);

// CSV columns: x,y,label,agent_id,scan_index
void write_dataset_csv(const LidarDataset& data, const std::string& path);
LidarDataset read_dataset_csv(const std::string& path);
// Binary cache: u32 count, then per point f64 x, f64 y, u8 label, u32 agent, u32 scan.
void write_dataset_bin(const LidarDataset& data, const std::string& path);
LidarDataset read_dataset_bin(const std::string& path);

}  // namespace bnnswarm::lidar
