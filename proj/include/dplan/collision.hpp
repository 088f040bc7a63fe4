#pragma once

// Ego occupancy by density binning, per-timestep collision probability and
// the per-sample ingredients of the collision-risk surrogate.

#include <cstdint>
#include <iosfwd>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "dplan/density.hpp"
#include "dplan/envmap.hpp"

namespace dplan {

struct EgoCell {
  std::uint32_t cell = 0;  // cx * cells_y + cy
  double p = 0.0;
};

/// Sparse P_ego per time slice, cells sorted by index.
struct EgoOccupancy {
  GridGeometry geometry;
  std::vector<std::vector<EgoCell>> slices;
  std::vector<double> normalizer;  // sum of per-cell logits
  std::vector<bool> empty;
  std::vector<std::string> warnings;

  double at(int cx, int cy, int k) const;
  double total(int k) const;
};

/// Per slice: each in-grid sample's density is divided by the slice maximum
/// and rounded to 30 significant bits, which makes the result invariant to
/// a common scale factor; per-cell means are then normalized to sum to one.
EgoOccupancy bin_ego(const std::vector<DensityRollout>& rollouts, const GridGeometry& geom);

struct CollisionProfile {
  std::vector<double> per_step;              // sum over cells of P_occ * P_ego
  std::vector<std::vector<double>> weights;  // [sample][k] P_occ * rho

  double max() const;
  double sum() const;
};

/// Throws std::invalid_argument on a geometry mismatch.
CollisionProfile collision_probability(const EgoOccupancy& ego, const OccupancyGrid& env);

/// Adds per-sample P_coll weights to a profile.
CollisionProfile collision_profile(const std::vector<DensityRollout>& rollouts,
                                   const OccupancyGrid& env);

/// P_occ of the containing cell (1 outside the grid) times rho.
double sample_coll_weight(const State& x, int k, const OccupancyGrid& env, double rho);

struct OccGradients {
  OccupancyGrid gx;
  OccupancyGrid gy;

  static OccGradients of(const OccupancyGrid& grid) {
    auto g = occ_gradients(grid);
    return {std::move(g.first), std::move(g.second)};
  }
};

/// Position minus beta * G * cell_size, G at the sample's cell; a sample
/// outside the grid maps to itself.
Eigen::Vector2d desired_position(const State& x, int k, const OccupancyGrid& env,
                                 const OccGradients& gradients, double beta);

/// CSV with columns k,t,total_P_coll.
void write_profile_csv(std::ostream& os, const CollisionProfile& profile, double dt);

}  // namespace dplan
