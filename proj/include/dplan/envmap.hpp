#pragma once

// Time-indexed occupancy grids: geometry, Gaussian obstacle rasterization,
// random scenario generation, track-CSV ingestion, finite-difference
// gradients, disk inflation and binary IO.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dplan/dynamics.hpp"

namespace dplan {

/// Cell (cx, cy) covers [origin + c * cell_size, origin + (c + 1) * cell_size).
/// Continuous cell coordinates put cell centers on integers.
struct GridGeometry {
  Eigen::Vector2d origin = Eigen::Vector2d::Zero();
  double cell_size = 0.5;
  int cells_x = 1;
  int cells_y = 1;
  int steps = 100;  // N; the grid holds N + 1 time slices
  double dt = 0.1;

  int slices() const { return steps + 1; }
  std::size_t size() const {
    return static_cast<std::size_t>(cells_x) * cells_y * slices();
  }
  std::size_t index(int cx, int cy, int k) const {
    return (static_cast<std::size_t>(cx) * cells_y + cy) * slices() + k;
  }
  bool contains(int cx, int cy) const {
    return cx >= 0 && cy >= 0 && cx < cells_x && cy < cells_y;
  }
  Eigen::Vector2d cell_coord(const Eigen::Vector2d& world) const {
    return (world - origin) / cell_size - Eigen::Vector2d::Constant(0.5);
  }
  Eigen::Vector2d world_of(const Eigen::Vector2d& cell) const {
    return origin + (cell + Eigen::Vector2d::Constant(0.5)) * cell_size;
  }
  Eigen::Vector2d cell_center(int cx, int cy) const {
    return world_of(Eigen::Vector2d(cx, cy));
  }
  /// Containing cell, or nullopt outside the grid.
  std::optional<std::array<int, 2>> cell_of(const Eigen::Vector2d& world) const;
  Eigen::Vector2d extent_min() const { return origin; }
  Eigen::Vector2d extent_max() const {
    return origin + Eigen::Vector2d(cells_x, cells_y) * cell_size;
  }
  void validate() const;

  bool operator==(const GridGeometry& o) const {
    return origin == o.origin && cell_size == o.cell_size && cells_x == o.cells_x &&
           cells_y == o.cells_y && steps == o.steps && dt == o.dt;
  }
};

/// P_occ values, x-major, y-middle, t-minor.
struct OccupancyGrid {
  GridGeometry geometry;
  std::vector<double> values;

  OccupancyGrid() = default;
  explicit OccupancyGrid(const GridGeometry& g) : geometry(g), values(g.size(), 0.0) {}

  double at(int cx, int cy, int k) const { return values[geometry.index(cx, cy, k)]; }
  double& at(int cx, int cy, int k) { return values[geometry.index(cx, cy, k)]; }

  /// Nearest-cell (containing cell) lookup; 1 outside the grid.
  double lookup(const Eigen::Vector2d& world, int k) const;
  /// Bilinear interpolation between cell centers, out-of-grid cells count
  /// as 1. `gradient` receives d value / d world position.
  double bilinear(const Eigen::Vector2d& world, int k,
                  Eigen::Vector2d* gradient = nullptr) const;
};

struct ObstaclePose {
  double x = 0.0;
  double y = 0.0;
  double heading = 0.0;
  double speed = 0.0;
  bool present = true;
};

struct ObstacleSpec {
  int id = 0;
  double length = 4.0;
  double width = 2.0;
  std::vector<ObstaclePose> trajectory;  // one pose per grid time slice
  double sigma = 5.0;                    // base std-dev [m]
  double skew = 4.0;                     // along-track variance multiplier when moving
  double skew_shift = 0.5;               // forward mean shift in units of sigma

  /// Stationary obstacle with sigma = length + 1.
  static ObstacleSpec stationary(int id, double x, double y, double heading, double length,
                                 double width, int slices);
};

/// Speeds at or below this are treated as stationary (no skew).
inline constexpr double kStationarySpeed = 1e-6;

/// Pre-combination Gaussian cell masses of one obstacle (values may sum to
/// ~1 per slice). Slices where the obstacle is absent or its mean lies
/// outside the grid are zero.
OccupancyGrid obstacle_mass_grid(const ObstacleSpec& obstacle, const GridGeometry& geom);

/// Complement-product combination of all obstacles; order-invariant.
OccupancyGrid rasterize(const std::vector<ObstacleSpec>& obstacles, const GridGeometry& geom);

struct EnvGenConfig {
  int obstacles_min = 0;
  int obstacles_max = 6;
  double distance_min = 10.0;
  double distance_max = 70.0;
  double goal_heading_spread = 0.7853981633974483;  // +/- around the start heading
  double start_speed_min = 1.0;
  double start_speed_max = 3.0;
  double start_position_jitter = 1.0;
  double obstacle_sigma_min = 0.3;
  double obstacle_sigma_max = 1.0;
  double obstacle_length_min = 1.0;
  double obstacle_length_max = 5.0;
  double obstacle_lateral_max = 3.0;
  double moving_probability = 0.5;
  double obstacle_speed_min = 0.5;
  double obstacle_speed_max = 2.0;
  double cell_size = 0.5;
  double margin = 5.0;
  double endpoint_max_occupancy = 0.01;
  int max_attempts = 1000;
  TimeGrid time;
};

struct Environment {
  GridGeometry geometry;
  std::vector<ObstacleSpec> obstacles;
  OccupancyGrid grid;
  State start = State::Zero();
  State goal = State::Zero();
  std::uint64_t seed = 0;
};

/// Grid covering the given points and all obstacle +/-5 sigma envelopes,
/// plus a margin.
GridGeometry fit_geometry(const std::vector<Eigen::Vector2d>& points,
                          const std::vector<ObstacleSpec>& obstacles, double cell_size,
                          double margin, const TimeGrid& time);

Environment generate_random_env(const EnvGenConfig& config, std::uint64_t seed);

struct TrackMeta {
  double frame_rate_hz = 25.0;
  Eigen::Vector2d utm_origin = Eigen::Vector2d::Zero();
};

struct IngestResult {
  OccupancyGrid grid;
  std::vector<ObstacleSpec> obstacles;
  bool empty_window = false;
  std::vector<std::string> warnings;
};

/// Sidecar path of a track CSV: "<dir>/<stem>.meta.json".
std::string sidecar_path(const std::string& csv_path);
TrackMeta read_track_meta(const std::string& json_path);

/// Tracks resampled to t_start + k * dt (k = 0..N), clipped at t_end.
/// Spatial and temporal extent of all rows of a track CSV.
struct TrackExtent {
  Eigen::Vector2d min = Eigen::Vector2d::Zero();
  Eigen::Vector2d max = Eigen::Vector2d::Zero();
  double t_first = 0.0;
  double t_last = 0.0;
  int tracks = 0;
};

TrackExtent scan_tracks(std::istream& csv, const TrackMeta& meta);
TrackExtent scan_tracks_csv(const std::string& path);

IngestResult ingest_tracks(std::istream& csv, const TrackMeta& meta, const GridGeometry& geom,
                           double t_start, double t_end);
IngestResult ingest_tracks_csv(const std::string& path, const GridGeometry& geom,
                               double t_start, double t_end);

/// Central differences in cell units, one-sided at the borders.
std::pair<OccupancyGrid, OccupancyGrid> occ_gradients(const OccupancyGrid& grid);

/// Per-cell maximum over the disk of cells whose centers lie within radius.
OccupancyGrid inflate(const OccupancyGrid& grid, double radius);

void write_grid_binary(std::ostream& os, const OccupancyGrid& grid);
OccupancyGrid read_grid_binary(std::istream& is);
void write_grid_binary(const std::string& path, const OccupancyGrid& grid);
OccupancyGrid read_grid_binary(const std::string& path);

}  // namespace dplan
