#pragma once

// Goal, input, state-bound and collision-risk cost terms over
// density-weighted rollouts, their adjoint seeds, and the staged total.

#include <vector>

#include <Eigen/Core>

#include "dplan/collision.hpp"
#include "dplan/density.hpp"
#include "dplan/envmap.hpp"

namespace dplan {

struct CostWeights {
  double alpha_goal = 1.0;
  double alpha_input = 0.01;
  double alpha_bounds = 100.0;
  double alpha_collision = 10.0;
  State q_goal = (State() << 1, 1, 0, 0, 0).finished();
  Input q_input = Input(1, 1);
  double q_bound = 1.0;
  double beta = 1.0;  // desired-position step, in cells
};

/// Staged activation of the bound and collision terms.
struct StageFlags {
  bool bounds = true;
  bool collision = true;

  static StageFlags all() { return {true, true}; }
  static StageFlags none() { return {false, false}; }
  bool operator==(const StageFlags&) const = default;
};

struct CostBreakdown {
  double J_G = 0.0;
  double J_I = 0.0;
  double J_B = 0.0;
  double J_C = 0.0;
  double total = 0.0;
  StageFlags flags;
  // Effective weights (zero for inactive terms).
  double alpha_goal = 0.0;
  double alpha_input = 0.0;
  double alpha_bounds = 0.0;
  double alpha_collision = 0.0;

  double recombine() const {
    return alpha_goal * J_G + alpha_input * J_I + alpha_bounds * J_B + alpha_collision * J_C;
  }
  CostBreakdown& operator+=(const CostBreakdown& o);
};

/// Everything the cost needs besides the rollouts.
struct CostContext {
  const OccupancyGrid* env = nullptr;
  const OccGradients* gradients = nullptr;
  State goal = State::Zero();
  StateBounds bounds = StateBounds::unbounded();
  CostWeights weights;
};

double goal_cost(const DensityRollout& rollout, const State& goal, const State& q_goal);
double input_cost(const std::vector<Input>& inputs, const Input& q_input);
double bounds_cost(const DensityRollout& rollout, const StateBounds& bounds, double q_bound);
double collision_cost(const DensityRollout& rollout, const OccupancyGrid& env,
                      const OccGradients& gradients, double beta);
double collision_cost(const std::vector<DensityRollout>& rollouts, const OccupancyGrid& env,
                      const OccGradients& gradients, double beta);

/// Terms of one rollout with its input sequence, weighted by the flags.
CostBreakdown rollout_cost(const DensityRollout& rollout, const std::vector<Input>& inputs,
                           const CostContext& ctx, const StageFlags& flags);

/// Sum of rollout_cost over samples (inputs[i] belongs to rollouts[i]).
CostBreakdown total_cost(const std::vector<DensityRollout>& rollouts,
                         const std::vector<std::vector<Input>>& inputs, const CostContext& ctx,
                         const StageFlags& flags);

/// d(weighted cost) / d(state, g) per output node and d / d input per step,
/// under the detachment rule for the collision term.
struct RolloutSeeds {
  std::vector<State> d_state;
  std::vector<double> d_g;
  std::vector<Input> d_input;

  void reset(std::size_t nodes);
  bool any_density() const;
};

/// Seeds of `alpha * term`; `seeds` is accumulated into.
void add_goal_seeds(const DensityRollout& r, const State& goal, const State& q_goal,
                    double alpha, RolloutSeeds& seeds);
void add_input_seeds(const std::vector<Input>& inputs, const Input& q_input, double alpha,
                     RolloutSeeds& seeds);
void add_bounds_seeds(const DensityRollout& r, const StateBounds& bounds, double q_bound,
                      double alpha, RolloutSeeds& seeds);
void add_collision_seeds(const DensityRollout& r, const OccupancyGrid& env,
                         const OccGradients& gradients, double beta, double alpha,
                         RolloutSeeds& seeds);

/// All seeds of rollout_cost with the given flags.
RolloutSeeds rollout_seeds(const DensityRollout& rollout, const std::vector<Input>& inputs,
                           const CostContext& ctx, const StageFlags& flags);

}  // namespace dplan
