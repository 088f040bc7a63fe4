#pragma once

// Comparison planners: random sampling, primitive search, receding-horizon
// MPC with optional tube inflation, and the full-horizon oracle.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dplan/optimizer.hpp"

namespace dplan {

/// Best of M sampled policies under the fully-active stage-1 cost.
PlanResult sampling_planner(const PlanningProblem& problem, const PlannerConfig& config,
                            int samples, std::uint64_t seed);

struct SearchConfig {
  double primitive_s = 1.0;
  int depth_cap = 10;
  int max_expansions = 20000;
  int heading_bins = 32;
  double speed_bin = 0.5;
};

struct SearchResult {
  PlanResult plan;
  std::vector<int> primitives;  // indices into search_primitives()
  int expansions = 0;
  bool exhausted = false;
  bool capped = false;
};

/// The 9 (omega, a) pairs of {lower, 0, upper}^2, omega-major.
std::vector<Input> search_primitives(const InputBox& box);

/// A* over held primitives. A node is a goal at the depth cap or when its
/// braking rest position is within goal_threshold; the remaining steps then
/// brake to rest.
SearchResult search_planner(const PlanningProblem& problem, const PlannerConfig& config,
                            const SearchConfig& search = {});

/// First-order solver settings shared by MPC and the oracle. The step size
/// decays geometrically from lr to lr_final.
struct SolverSettings {
  int iterations = 50;
  double lr = 0.1;
  double lr_final = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double grad_clip = 10.0;
  double tolerance = 1e-9;  // projected-gradient norm for early exit
};

struct MpcConfig {
  std::string name = "M0";
  int horizon = 10;
  double tube_radius = 0.0;
  bool warm_start = true;
  SolverSettings solver;
  TimeGrid time;
  InputBox box;
  CostWeights weights;

  /// M0 (radius 0), M1 (0.3 m), M2 (0.5 m), M3 (1.0 m).
  static MpcConfig variant(int index);
};

/// Environment as seen by one MPC variant: inflated grid and bounds
/// tightened by the tube radius on position.
struct MpcModel {
  OccupancyGrid grid;
  StateBounds bounds;
  State goal = State::Zero();
};

MpcModel prepare_mpc(const OccupancyGrid& env, const State& goal, const StateBounds& bounds,
                     double tube_radius);

struct MpcTerms {
  double J_I = 0.0;
  double J_G = 0.0;  // weighted goal distance (not squared)
  double J_C = 0.0;  // sum of squared point collision probabilities
  double J_B = 0.0;
  double total = 0.0;
};

/// Open-loop zero-order-hold rollout of `inputs` from x0; one state per
/// step boundary.
std::vector<State> zoh_rollout(const State& x0, const std::vector<Input>& inputs,
                               const TimeGrid& time);

/// Receding-horizon objective and, optionally, its gradient with respect to
/// the flattened inputs (omega_0, a_0, omega_1, ...). Occupancy slices past
/// the grid's last slice are clamped to it.
MpcTerms mpc_cost(const State& x0, int t_h, const std::vector<Input>& inputs,
                    const MpcModel& model, const TimeGrid& time, const CostWeights& w,
                    Eigen::VectorXd* grad = nullptr);

struct MpcSolution {
  std::vector<Input> inputs;
  MpcTerms cost;
  double residual = 0.0;  // projected-gradient norm at the last iterate
  int iterations = 0;
  bool capped = false;
};

/// Projected ADAM from `init`, keeping the best iterate.
MpcSolution solve_mpc(const State& x0, int t_h, std::vector<Input> init, const MpcModel& model,
                       const TimeGrid& time, const CostWeights& w, const InputBox& box,
                       const SolverSettings& solver);

/// One receding-horizon solve. `warm` is the previous solution; it is
/// shifted by one step and its last input repeated.
MpcSolution mpc_step(const State& current, int t_h, const MpcModel& model,
                     const MpcConfig& config, const std::vector<Input>* warm = nullptr);

struct OracleConfig {
  bool stage1_start = true;  // add a start from the density planner's first stage
  int random_starts = 2;
  SolverSettings solver{600, 0.05, 0.002};
  PlannerConfig planner;
};

/// Full-horizon (h = 0, H = N) solve from the true initial state.
PlanResult oracle_solve(const OccupancyGrid& env, const State& goal, const StateBounds& bounds,
                        const State& true_x0, const OracleConfig& config, std::uint64_t seed);

/// Policy with one knot per step matching a per-step input sequence.
PolicyParams knots_from_inputs(const std::vector<Input>& inputs, const State& start,
                               const TimeGrid& time);

}  // namespace dplan
