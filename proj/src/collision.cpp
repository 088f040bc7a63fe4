#include "dplan/collision.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <stdexcept>

namespace dplan {

namespace {

constexpr int kRatioBits = 30;

double quantize(double r) {
  if (r <= 0.0) return 0.0;
  int e = 0;
  const double m = std::frexp(r, &e);
  return std::ldexp(std::nearbyint(std::ldexp(m, kRatioBits)), e - kRatioBits);
}

}  // namespace

double EgoOccupancy::at(int cx, int cy, int k) const {
  const auto cell = static_cast<std::uint32_t>(cx * geometry.cells_y + cy);
  const auto& s = slices[k];
  const auto it = std::lower_bound(s.begin(), s.end(), cell,
                                   [](const EgoCell& c, std::uint32_t v) { return c.cell < v; });
  return it != s.end() && it->cell == cell ? it->p : 0.0;
}

double EgoOccupancy::total(int k) const {
  double t = 0.0;
  for (const auto& c : slices[k]) t += c.p;
  return t;
}

EgoOccupancy bin_ego(const std::vector<DensityRollout>& rollouts, const GridGeometry& geom) {
  if (rollouts.empty()) throw std::invalid_argument("bin_ego needs at least one rollout");
  const std::size_t steps = rollouts.front().states.size();
  for (const auto& r : rollouts)
    if (r.states.size() != steps || r.densities.size() != steps)
      throw std::invalid_argument("rollouts do not share a time grid");

  EgoOccupancy ego;
  ego.geometry = geom;
  ego.slices.resize(steps);
  ego.normalizer.assign(steps, 0.0);
  ego.empty.assign(steps, false);

  struct Hit {
    std::uint32_t cell;
    double rho;
  };
  std::vector<Hit> hits;
  hits.reserve(rollouts.size());
  for (std::size_t k = 0; k < steps; ++k) {
    hits.clear();
    double peak = 0.0;
    for (const auto& r : rollouts) {
      const auto c = geom.cell_of(r.states[k].head<2>());
      if (!c) continue;
      hits.push_back({static_cast<std::uint32_t>((*c)[0] * geom.cells_y + (*c)[1]),
                      r.densities[k]});
      peak = std::max(peak, r.densities[k]);
    }
    if (hits.empty() || !(peak > 0.0)) {
      ego.empty[k] = true;
      ego.warnings.push_back("empty timestep " + std::to_string(k));
      continue;
    }
    std::stable_sort(hits.begin(), hits.end(),
                     [](const Hit& a, const Hit& b) { return a.cell < b.cell; });
    auto& slice = ego.slices[k];
    for (std::size_t i = 0; i < hits.size();) {
      std::size_t j = i;
      double sum = 0.0;
      for (; j < hits.size() && hits[j].cell == hits[i].cell; ++j)
        sum += quantize(hits[j].rho / peak);
      slice.push_back({hits[i].cell, sum / static_cast<double>(j - i)});
      i = j;
    }
    double norm = 0.0;
    for (const auto& c : slice) norm += c.p;
    ego.normalizer[k] = norm;
    for (auto& c : slice) c.p /= norm;
  }
  return ego;
}

double CollisionProfile::max() const {
  double m = 0.0;
  for (double v : per_step) m = std::max(m, v);
  return m;
}

double CollisionProfile::sum() const {
  double s = 0.0;
  for (double v : per_step) s += v;
  return s;
}

CollisionProfile collision_probability(const EgoOccupancy& ego, const OccupancyGrid& env) {
  if (!(ego.geometry == env.geometry)) throw std::invalid_argument("grid geometry mismatch");
  const GridGeometry& g = env.geometry;
  if (static_cast<int>(ego.slices.size()) > g.slices())
    throw std::invalid_argument("ego occupancy has more time slices than the grid");
  CollisionProfile out;
  out.per_step.assign(ego.slices.size(), 0.0);
  for (std::size_t k = 0; k < ego.slices.size(); ++k) {
    if (ego.empty[k]) continue;
    double total = 0.0;
    for (const auto& c : ego.slices[k]) {
      const int cx = static_cast<int>(c.cell) / g.cells_y;
      const int cy = static_cast<int>(c.cell) % g.cells_y;
      total += c.p * env.at(cx, cy, static_cast<int>(k));
    }
    out.per_step[k] = std::clamp(total, 0.0, 1.0);
  }
  return out;
}

CollisionProfile collision_profile(const std::vector<DensityRollout>& rollouts,
                                   const OccupancyGrid& env) {
  CollisionProfile out = collision_probability(bin_ego(rollouts, env.geometry), env);
  out.weights.reserve(rollouts.size());
  for (const auto& r : rollouts) {
    std::vector<double> w(r.states.size());
    for (std::size_t k = 0; k < w.size(); ++k)
      w[k] = sample_coll_weight(r.states[k], static_cast<int>(k), env, r.densities[k]);
    out.weights.push_back(std::move(w));
  }
  return out;
}

double sample_coll_weight(const State& x, int k, const OccupancyGrid& env, double rho) {
  if (rho == 0.0) return 0.0;
  return env.lookup(x.head<2>(), k) * rho;
}

Eigen::Vector2d desired_position(const State& x, int k, const OccupancyGrid& env,
                                 const OccGradients& gradients, double beta) {
  const Eigen::Vector2d p = x.head<2>();
  const auto c = env.geometry.cell_of(p);
  if (!c) return p;
  const Eigen::Vector2d g(gradients.gx.at((*c)[0], (*c)[1], k),
                          gradients.gy.at((*c)[0], (*c)[1], k));
  return p - beta * env.geometry.cell_size * g;
}

void write_profile_csv(std::ostream& os, const CollisionProfile& profile, double dt) {
  os << "k,t,total_P_coll\n";
  for (std::size_t k = 0; k < profile.per_step.size(); ++k)
    os << k << ',' << std::setprecision(10) << dt * static_cast<double>(k) << ','
       << std::setprecision(17) << profile.per_step[k] << '\n';
}

}  // namespace dplan
