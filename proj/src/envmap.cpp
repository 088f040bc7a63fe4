#include "dplan/envmap.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <istream>
#include <limits>
#include <map>
#include <numbers>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include <json.hpp>

#include "dplan/rng.hpp"

namespace dplan {

std::optional<std::array<int, 2>> GridGeometry::cell_of(const Eigen::Vector2d& world) const {
  const Eigen::Vector2d u = (world - origin) / cell_size;
  if (!(u.x() >= 0.0) || !(u.y() >= 0.0)) return std::nullopt;
  const double fx = std::floor(u.x());
  const double fy = std::floor(u.y());
  if (fx >= cells_x || fy >= cells_y) return std::nullopt;
  return std::array<int, 2>{static_cast<int>(fx), static_cast<int>(fy)};
}

void GridGeometry::validate() const {
  if (!(cell_size > 0.0)) throw std::invalid_argument("cell_size must be positive");
  if (cells_x < 1 || cells_y < 1) throw std::invalid_argument("grid needs at least one cell");
  if (steps < 0 || !(dt > 0.0)) throw std::invalid_argument("invalid grid time axis");
  if (!origin.allFinite()) throw std::invalid_argument("grid origin not finite");
}

double OccupancyGrid::lookup(const Eigen::Vector2d& world, int k) const {
  const auto c = geometry.cell_of(world);
  if (!c) return 1.0;
  return at((*c)[0], (*c)[1], k);
}

double OccupancyGrid::bilinear(const Eigen::Vector2d& world, int k,
                               Eigen::Vector2d* gradient) const {
  const Eigen::Vector2d u = geometry.cell_coord(world);
  if (!u.allFinite()) {
    if (gradient) gradient->setZero();
    return 1.0;
  }
  const double x0 = std::floor(u.x());
  const double y0 = std::floor(u.y());
  const double fx = u.x() - x0;
  const double fy = u.y() - y0;
  auto value = [&](double cx, double cy) {
    if (cx < 0.0 || cy < 0.0 || cx >= geometry.cells_x || cy >= geometry.cells_y) return 1.0;
    return at(static_cast<int>(cx), static_cast<int>(cy), k);
  };
  const double v00 = value(x0, y0);
  const double v10 = value(x0 + 1, y0);
  const double v01 = value(x0, y0 + 1);
  const double v11 = value(x0 + 1, y0 + 1);
  if (gradient) {
    const double du = (1.0 - fy) * (v10 - v00) + fy * (v11 - v01);
    const double dv = (1.0 - fx) * (v01 - v00) + fx * (v11 - v10);
    *gradient = Eigen::Vector2d(du, dv) / geometry.cell_size;
  }
  return (1.0 - fx) * (1.0 - fy) * v00 + fx * (1.0 - fy) * v10 + (1.0 - fx) * fy * v01 +
         fx * fy * v11;
}

ObstacleSpec ObstacleSpec::stationary(int id, double x, double y, double heading,
                                      double length, double width, int slices) {
  ObstacleSpec o;
  o.id = id;
  o.length = length;
  o.width = width;
  o.sigma = length + 1.0;
  o.trajectory.assign(slices, ObstaclePose{x, y, heading, 0.0, true});
  return o;
}

namespace {

// 3-point Gauss-Legendre rule on [-1, 1].
constexpr std::array<double, 3> kGlNodes = {-0.7745966692414834, 0.0, 0.7745966692414834};
constexpr std::array<double, 3> kGlWeights = {5.0 / 9.0, 8.0 / 9.0, 5.0 / 9.0};

struct Footprint {
  Eigen::Vector2d mean;
  double c = 1.0, s = 0.0;  // along-track axis
  double sigma_along = 1.0;
  double sigma_cross = 1.0;
};

Footprint footprint(const ObstacleSpec& o, const ObstaclePose& pose) {
  Footprint f;
  f.mean = Eigen::Vector2d(pose.x, pose.y);
  f.sigma_along = o.sigma;
  f.sigma_cross = o.sigma;
  if (pose.speed > kStationarySpeed) {
    f.c = std::cos(pose.heading);
    f.s = std::sin(pose.heading);
    f.sigma_along = o.sigma * std::sqrt(o.skew);
    f.mean += o.skew_shift * o.sigma * Eigen::Vector2d(f.c, f.s);
  }
  return f;
}

double envelope_radius(const ObstacleSpec& o, const ObstaclePose& pose) {
  const double along = pose.speed > kStationarySpeed ? o.sigma * std::sqrt(o.skew) : o.sigma;
  const double shift = pose.speed > kStationarySpeed ? o.skew_shift * o.sigma : 0.0;
  return 5.0 * std::max(along, o.sigma) + shift;
}

// Visits (flat index, cell mass) over the +/-5 sigma box of every slice.
template <class Fn>
void for_each_cell_mass(const ObstacleSpec& o, const GridGeometry& g, Fn&& fn) {
  if (!(o.sigma > 0.0)) throw std::invalid_argument("obstacle sigma must be positive");
  const int slices = std::min<int>(g.slices(), static_cast<int>(o.trajectory.size()));
  const double half = 0.5 * g.cell_size;
  const Eigen::Vector2d lo = g.extent_min();
  const Eigen::Vector2d hi = g.extent_max();
  for (int k = 0; k < slices; ++k) {
    const ObstaclePose& pose = o.trajectory[k];
    if (!pose.present) continue;
    if (!(pose.x >= lo.x() && pose.x < hi.x() && pose.y >= lo.y() && pose.y < hi.y())) continue;
    const Footprint f = footprint(o, pose);
    const double reach = 5.0 * std::max(f.sigma_along, f.sigma_cross);
    const Eigen::Vector2d bmin = g.cell_coord(f.mean - Eigen::Vector2d::Constant(reach));
    const Eigen::Vector2d bmax = g.cell_coord(f.mean + Eigen::Vector2d::Constant(reach));
    const int x0 = std::max(0, static_cast<int>(std::floor(bmin.x())));
    const int y0 = std::max(0, static_cast<int>(std::floor(bmin.y())));
    const int x1 = std::min(g.cells_x - 1, static_cast<int>(std::ceil(bmax.x())));
    const int y1 = std::min(g.cells_y - 1, static_cast<int>(std::ceil(bmax.y())));
    const double ia = 1.0 / (f.sigma_along * f.sigma_along);
    const double ic = 1.0 / (f.sigma_cross * f.sigma_cross);
    const double norm = half * half / (2.0 * std::numbers::pi * f.sigma_along * f.sigma_cross);
    for (int cx = x0; cx <= x1; ++cx) {
      for (int cy = y0; cy <= y1; ++cy) {
        const Eigen::Vector2d center = g.cell_center(cx, cy);
        double mass = 0.0;
        for (int i = 0; i < 3; ++i) {
          const double dx = center.x() + half * kGlNodes[i] - f.mean.x();
          for (int j = 0; j < 3; ++j) {
            const double dy = center.y() + half * kGlNodes[j] - f.mean.y();
            const double a = f.c * dx + f.s * dy;
            const double b = -f.s * dx + f.c * dy;
            mass += kGlWeights[i] * kGlWeights[j] * std::exp(-0.5 * (a * a * ia + b * b * ic));
          }
        }
        fn(g.index(cx, cy, k), std::min(1.0, mass * norm));
      }
    }
  }
}

auto obstacle_key(const ObstacleSpec& o) {
  const ObstaclePose first = o.trajectory.empty() ? ObstaclePose{} : o.trajectory.front();
  return std::make_tuple(o.id, o.length, o.width, o.sigma, o.skew, o.skew_shift,
                         o.trajectory.size(), first.x, first.y, first.heading, first.speed);
}

}  // namespace

OccupancyGrid obstacle_mass_grid(const ObstacleSpec& obstacle, const GridGeometry& geom) {
  geom.validate();
  OccupancyGrid out(geom);
  for_each_cell_mass(obstacle, geom, [&](std::size_t i, double m) { out.values[i] = m; });
  return out;
}

OccupancyGrid rasterize(const std::vector<ObstacleSpec>& obstacles, const GridGeometry& geom) {
  geom.validate();
  std::vector<const ObstacleSpec*> order;
  order.reserve(obstacles.size());
  for (const auto& o : obstacles) order.push_back(&o);
  std::stable_sort(order.begin(), order.end(), [](const ObstacleSpec* a, const ObstacleSpec* b) {
    return obstacle_key(*a) < obstacle_key(*b);
  });

  std::vector<double> free(geom.size(), 1.0);
  for (const ObstacleSpec* o : order)
    for_each_cell_mass(*o, geom, [&](std::size_t i, double m) { free[i] *= 1.0 - m; });

  OccupancyGrid out(geom);
  for (std::size_t i = 0; i < free.size(); ++i) out.values[i] = 1.0 - free[i];
  return out;
}

GridGeometry fit_geometry(const std::vector<Eigen::Vector2d>& points,
                          const std::vector<ObstacleSpec>& obstacles, double cell_size,
                          double margin, const TimeGrid& time) {
  Eigen::Vector2d lo = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector2d hi = -lo;
  for (const auto& p : points) {
    lo = lo.cwiseMin(p);
    hi = hi.cwiseMax(p);
  }
  for (const auto& o : obstacles) {
    for (const auto& pose : o.trajectory) {
      if (!pose.present) continue;
      const Eigen::Vector2d c(pose.x, pose.y);
      const double r = envelope_radius(o, pose);
      lo = lo.cwiseMin(c - Eigen::Vector2d::Constant(r));
      hi = hi.cwiseMax(c + Eigen::Vector2d::Constant(r));
    }
  }
  if (!lo.allFinite() || !hi.allFinite()) throw std::invalid_argument("nothing to cover");
  GridGeometry g;
  g.cell_size = cell_size;
  g.origin = ((lo.array() - margin) / cell_size).floor() * cell_size;
  const Eigen::Vector2d span = hi + Eigen::Vector2d::Constant(margin) - g.origin;
  g.cells_x = std::max(1, static_cast<int>(std::ceil(span.x() / cell_size)));
  g.cells_y = std::max(1, static_cast<int>(std::ceil(span.y() / cell_size)));
  g.steps = time.steps;
  g.dt = time.dt;
  return g;
}

Environment generate_random_env(const EnvGenConfig& cfg, std::uint64_t seed) {
  if (cfg.obstacles_min < 0 || cfg.obstacles_max < cfg.obstacles_min ||
      cfg.distance_min <= 0.0 || cfg.distance_max < cfg.distance_min ||
      cfg.obstacle_sigma_min <= 0.0 || cfg.obstacle_sigma_max < cfg.obstacle_sigma_min)
    throw std::invalid_argument("invalid environment generator ranges");
  cfg.time.validate();

  Rng rng(seed);
  auto uni = [&rng](double a, double b) {
    return a == b ? a : std::uniform_real_distribution<double>(a, b)(rng);
  };
  constexpr double kPi = std::numbers::pi;
  const int slices = cfg.time.steps + 1;

  for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
    Environment env;
    env.seed = seed;
    const double heading = uni(-kPi, kPi);
    env.start << uni(-cfg.start_position_jitter, cfg.start_position_jitter),
        uni(-cfg.start_position_jitter, cfg.start_position_jitter), heading,
        uni(cfg.start_speed_min, cfg.start_speed_max), 0.0;
    const double distance = uni(cfg.distance_min, cfg.distance_max);
    const double direction =
        heading + uni(-cfg.goal_heading_spread, cfg.goal_heading_spread);
    const Eigen::Vector2d start_pos = env.start.head<2>();
    const Eigen::Vector2d axis(std::cos(direction), std::sin(direction));
    const Eigen::Vector2d goal_pos = start_pos + distance * axis;
    env.goal << goal_pos.x(), goal_pos.y(), wrap_angle(direction), 0.0, 0.0;

    const int count = std::uniform_int_distribution<int>(cfg.obstacles_min, cfg.obstacles_max)(rng);
    const Eigen::Vector2d normal(-axis.y(), axis.x());
    for (int i = 0; i < count; ++i) {
      ObstacleSpec o;
      o.id = i;
      o.length = uni(cfg.obstacle_length_min, cfg.obstacle_length_max);
      o.width = 0.5 * o.length;
      o.sigma = uni(cfg.obstacle_sigma_min, cfg.obstacle_sigma_max);
      const double frac = uni(0.2, 0.8);
      const Eigen::Vector2d meet = start_pos + frac * distance * axis +
                                   uni(-cfg.obstacle_lateral_max, cfg.obstacle_lateral_max) * normal;
      const bool moving = uni(0.0, 1.0) < cfg.moving_probability;
      const double ob_heading = uni(-kPi, kPi);
      const double speed = moving ? uni(cfg.obstacle_speed_min, cfg.obstacle_speed_max) : 0.0;
      const Eigen::Vector2d vel = speed * Eigen::Vector2d(std::cos(ob_heading), std::sin(ob_heading));
      // Moving obstacles pass the meeting point when the ego would, on a
      // constant-speed estimate.
      const double t_meet = frac * cfg.time.horizon();
      o.trajectory.resize(slices);
      for (int k = 0; k < slices; ++k) {
        const Eigen::Vector2d p = meet + (cfg.time.time(k) - t_meet) * vel;
        o.trajectory[k] = {p.x(), p.y(), ob_heading, speed, true};
      }
      env.obstacles.push_back(std::move(o));
    }

    env.geometry = fit_geometry({start_pos, goal_pos}, env.obstacles, cfg.cell_size, cfg.margin,
                                cfg.time);
    env.grid = rasterize(env.obstacles, env.geometry);
    if (env.grid.lookup(start_pos, 0) < cfg.endpoint_max_occupancy &&
        env.grid.lookup(goal_pos, cfg.time.steps) < cfg.endpoint_max_occupancy)
      return env;
  }
  throw std::runtime_error("environment generation failed");
}

std::string sidecar_path(const std::string& csv_path) {
  std::filesystem::path p(csv_path);
  return (p.parent_path() / (p.stem().string() + ".meta.json")).string();
}

TrackMeta read_track_meta(const std::string& json_path) {
  std::ifstream in(json_path);
  if (!in) throw std::runtime_error("cannot open track sidecar " + json_path);
  const nlohmann::json j = nlohmann::json::parse(in);
  TrackMeta m;
  m.frame_rate_hz = j.at("frame_rate_hz").get<double>();
  if (!(m.frame_rate_hz > 0.0)) throw std::invalid_argument("frame_rate_hz must be positive");
  if (j.contains("utm_origin")) {
    const auto& o = j.at("utm_origin");
    m.utm_origin = Eigen::Vector2d(o.at(0).get<double>(), o.at(1).get<double>());
  }
  return m;
}

namespace {

struct TrackRow {
  double frame;
  double x, y, heading_deg, width, length;
};

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    while (!cell.empty() && (cell.back() == '\r' || cell.back() == ' ')) cell.pop_back();
    while (!cell.empty() && cell.front() == ' ') cell.erase(cell.begin());
    out.push_back(cell);
  }
  return out;
}

}  // namespace

namespace {

std::map<int, std::vector<TrackRow>> read_track_rows(std::istream& csv) {
  std::string line;
  if (!std::getline(csv, line)) throw std::runtime_error("track CSV is empty");
  const std::vector<std::string> header = split_csv_line(line);
  const std::array<std::string, 7> required = {"trackId", "frame",  "xCenter", "yCenter",
                                               "heading", "width", "length"};
  std::array<std::size_t, 7> col{};
  for (std::size_t r = 0; r < required.size(); ++r) {
    const auto it = std::find(header.begin(), header.end(), required[r]);
    if (it == header.end()) throw std::runtime_error("missing column: " + required[r]);
    col[r] = static_cast<std::size_t>(it - header.begin());
  }

  std::map<int, std::vector<TrackRow>> tracks;
  while (std::getline(csv, line)) {
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> f = split_csv_line(line);
    auto num = [&](int r) {
      if (col[r] >= f.size()) throw std::runtime_error("short row in track CSV");
      return std::stod(f[col[r]]);
    };
    tracks[static_cast<int>(num(0))].push_back(
        {num(1), num(2), num(3), num(4), num(5), num(6)});
  }
  return tracks;
}

}  // namespace

TrackExtent scan_tracks(std::istream& csv, const TrackMeta& meta) {
  const auto tracks = read_track_rows(csv);
  if (tracks.empty()) throw std::runtime_error("track CSV has no rows");
  TrackExtent e;
  e.min = Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  e.max = -e.min;
  e.t_first = std::numeric_limits<double>::infinity();
  e.t_last = -e.t_first;
  for (const auto& [id, rows] : tracks) {
    for (const TrackRow& r : rows) {
      e.min = e.min.cwiseMin(Eigen::Vector2d(r.x, r.y));
      e.max = e.max.cwiseMax(Eigen::Vector2d(r.x, r.y));
      e.t_first = std::min(e.t_first, r.frame / meta.frame_rate_hz);
      e.t_last = std::max(e.t_last, r.frame / meta.frame_rate_hz);
    }
  }
  e.tracks = static_cast<int>(tracks.size());
  return e;
}

TrackExtent scan_tracks_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open track CSV " + path);
  return scan_tracks(in, read_track_meta(sidecar_path(path)));
}

IngestResult ingest_tracks(std::istream& csv, const TrackMeta& meta, const GridGeometry& geom,
                           double t_start, double t_end) {
  geom.validate();
  auto tracks = read_track_rows(csv);

  IngestResult result;
  const int slices = geom.slices();
  bool any_present = false;
  for (auto& [id, rows] : tracks) {
    std::sort(rows.begin(), rows.end(),
              [](const TrackRow& a, const TrackRow& b) { return a.frame < b.frame; });
    ObstacleSpec o;
    o.id = id;
    o.length = rows.front().length;
    o.width = rows.front().width;
    o.sigma = o.length + 1.0;
    o.trajectory.resize(slices);
    const double deg = std::numbers::pi / 180.0;
    for (int k = 0; k < slices; ++k) {
      ObstaclePose& pose = o.trajectory[k];
      pose.present = false;
      const double t = t_start + geom.dt * k;
      if (t > t_end + 1e-9) continue;
      const double tf_first = rows.front().frame / meta.frame_rate_hz;
      const double tf_last = rows.back().frame / meta.frame_rate_hz;
      if (t < tf_first - 1e-9 || t > tf_last + 1e-9) continue;
      if (rows.size() == 1) {
        pose = {rows[0].x, rows[0].y, rows[0].heading_deg * deg, 0.0, true};
        any_present = true;
        continue;
      }
      std::size_t b = 1;
      while (b + 1 < rows.size() && rows[b].frame / meta.frame_rate_hz <= t) ++b;
      const TrackRow& ra = rows[b - 1];
      const TrackRow& rb = rows[b];
      const double ta = ra.frame / meta.frame_rate_hz;
      const double tb = rb.frame / meta.frame_rate_hz;
      const double frac = std::clamp((t - ta) / (tb - ta), 0.0, 1.0);
      const double ha = ra.heading_deg * deg;
      const double hb = rb.heading_deg * deg;
      pose.x = ra.x + frac * (rb.x - ra.x);
      pose.y = ra.y + frac * (rb.y - ra.y);
      pose.heading = wrap_angle(ha + frac * wrap_angle(hb - ha));
      pose.speed = std::hypot(rb.x - ra.x, rb.y - ra.y) / (tb - ta);
      pose.present = true;
      any_present = true;
    }
    result.obstacles.push_back(std::move(o));
  }
  result.empty_window = !any_present;
  if (result.empty_window) {
    result.warnings.push_back("no track samples inside the window");
    result.grid = OccupancyGrid(geom);
  } else {
    result.grid = rasterize(result.obstacles, geom);
  }
  return result;
}

IngestResult ingest_tracks_csv(const std::string& path, const GridGeometry& geom,
                               double t_start, double t_end) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open track CSV " + path);
  return ingest_tracks(in, read_track_meta(sidecar_path(path)), geom, t_start, t_end);
}

std::pair<OccupancyGrid, OccupancyGrid> occ_gradients(const OccupancyGrid& grid) {
  const GridGeometry& g = grid.geometry;
  OccupancyGrid gx(g), gy(g);
  auto diff = [](double lo, double hi, double scale) { return (hi - lo) * scale; };
  for (int cx = 0; cx < g.cells_x; ++cx) {
    const int xl = std::max(0, cx - 1), xh = std::min(g.cells_x - 1, cx + 1);
    const double sx = xh - xl == 2 ? 0.5 : (xh > xl ? 1.0 : 0.0);
    for (int cy = 0; cy < g.cells_y; ++cy) {
      const int yl = std::max(0, cy - 1), yh = std::min(g.cells_y - 1, cy + 1);
      const double sy = yh - yl == 2 ? 0.5 : (yh > yl ? 1.0 : 0.0);
      for (int k = 0; k < g.slices(); ++k) {
        gx.at(cx, cy, k) = diff(grid.at(xl, cy, k), grid.at(xh, cy, k), sx);
        gy.at(cx, cy, k) = diff(grid.at(cx, yl, k), grid.at(cx, yh, k), sy);
      }
    }
  }
  return {std::move(gx), std::move(gy)};
}

OccupancyGrid inflate(const OccupancyGrid& grid, double radius) {
  if (!(radius >= 0.0)) throw std::invalid_argument("inflation radius must be >= 0");
  const GridGeometry& g = grid.geometry;
  const int reach = static_cast<int>(std::floor(radius / g.cell_size));
  std::vector<std::array<int, 2>> disk;
  for (int dx = -reach; dx <= reach; ++dx)
    for (int dy = -reach; dy <= reach; ++dy)
      if ((dx * dx + dy * dy) * g.cell_size * g.cell_size <= radius * radius + 1e-12)
        disk.push_back({dx, dy});
  if (disk.size() <= 1) return grid;

  OccupancyGrid out(g);
  for (int cx = 0; cx < g.cells_x; ++cx) {
    for (int cy = 0; cy < g.cells_y; ++cy) {
      double* dst = &out.values[g.index(cx, cy, 0)];
      for (const auto& d : disk) {
        const int nx = cx + d[0], ny = cy + d[1];
        if (!g.contains(nx, ny)) continue;
        const double* src = &grid.values[g.index(nx, ny, 0)];
        for (int k = 0; k < g.slices(); ++k) dst[k] = std::max(dst[k], src[k]);
      }
    }
  }
  return out;
}

namespace {

constexpr char kMagic[16] = {'D', 'P', 'G', 'R', 'I', 'D', '0', '1'};

template <class T>
void put(std::ostream& os, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  os.write(buf, sizeof(T));
}

template <class T>
T get(std::istream& is) {
  char buf[sizeof(T)];
  if (!is.read(buf, sizeof(T))) throw std::runtime_error("truncated grid file");
  T v;
  std::memcpy(&v, buf, sizeof(T));
  return v;
}

}  // namespace

void write_grid_binary(std::ostream& os, const OccupancyGrid& grid) {
  const GridGeometry& g = grid.geometry;
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(g.cells_x));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(g.cells_y));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(g.slices()));
  put<double>(os, g.origin.x());
  put<double>(os, g.origin.y());
  put<double>(os, g.cell_size);
  put<double>(os, g.dt);
  for (double v : grid.values) put<float>(os, static_cast<float>(v));
}

OccupancyGrid read_grid_binary(std::istream& is) {
  char magic[16];
  if (!is.read(magic, sizeof(magic)) || std::memcmp(magic, kMagic, sizeof(magic)) != 0)
    throw std::runtime_error("not a DPGRID01 grid file");
  GridGeometry g;
  g.cells_x = static_cast<int>(get<std::uint32_t>(is));
  g.cells_y = static_cast<int>(get<std::uint32_t>(is));
  const int slices = static_cast<int>(get<std::uint32_t>(is));
  g.steps = slices - 1;
  g.origin.x() = get<double>(is);
  g.origin.y() = get<double>(is);
  g.cell_size = get<double>(is);
  g.dt = get<double>(is);
  g.validate();
  OccupancyGrid grid(g);
  for (double& v : grid.values) v = get<float>(is);
  return grid;
}

void write_grid_binary(const std::string& path, const OccupancyGrid& grid) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  write_grid_binary(out, grid);
}

OccupancyGrid read_grid_binary(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return read_grid_binary(in);
}

}  // namespace dplan
