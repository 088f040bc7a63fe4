#include "dplan/cost.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dplan {

namespace {

double weighted_sq(const State& d, const State& q) { return (q.array() * d.array().square()).sum(); }

double hinge_sq(const State& x, const StateBounds& b) {
  double s = 0.0;
  for (int i = 0; i < kStateDim; ++i) {
    const double lo = std::max(0.0, b.lower(i) - x(i));
    const double hi = std::max(0.0, x(i) - b.upper(i));
    s += lo * lo + hi * hi;
  }
  return s;
}

}  // namespace

CostBreakdown& CostBreakdown::operator+=(const CostBreakdown& o) {
  J_G += o.J_G;
  J_I += o.J_I;
  J_B += o.J_B;
  J_C += o.J_C;
  total += o.total;
  return *this;
}

double goal_cost(const DensityRollout& r, const State& goal, const State& q_goal) {
  return r.densities.back() * weighted_sq(r.states.back() - goal, q_goal);
}

double input_cost(const std::vector<Input>& inputs, const Input& q_input) {
  double s = 0.0;
  for (const auto& u : inputs) s += (q_input.array() * u.array().square()).sum();
  return s;
}

double bounds_cost(const DensityRollout& r, const StateBounds& bounds, double q_bound) {
  double s = 0.0;
  for (std::size_t k = 0; k < r.states.size(); ++k)
    s += r.densities[k] * q_bound * hinge_sq(r.states[k], bounds);
  return s;
}

double collision_cost(const DensityRollout& r, const OccupancyGrid& env,
                      const OccGradients& gradients, double beta) {
  double s = 0.0;
  for (std::size_t k = 0; k < r.states.size(); ++k) {
    const int kk = static_cast<int>(k);
    const double w = sample_coll_weight(r.states[k], kk, env, r.densities[k]);
    if (w == 0.0) continue;
    const Eigen::Vector2d d =
        r.states[k].head<2>() - desired_position(r.states[k], kk, env, gradients, beta);
    s += w * d.squaredNorm();
  }
  return s;
}

double collision_cost(const std::vector<DensityRollout>& rollouts, const OccupancyGrid& env,
                      const OccGradients& gradients, double beta) {
  double s = 0.0;
  for (const auto& r : rollouts) s += collision_cost(r, env, gradients, beta);
  return s;
}

CostBreakdown rollout_cost(const DensityRollout& r, const std::vector<Input>& inputs,
                           const CostContext& ctx, const StageFlags& flags) {
  const CostWeights& w = ctx.weights;
  CostBreakdown b;
  b.flags = flags;
  b.alpha_goal = w.alpha_goal;
  b.alpha_input = w.alpha_input;
  b.alpha_bounds = flags.bounds ? w.alpha_bounds : 0.0;
  b.alpha_collision = flags.collision ? w.alpha_collision : 0.0;
  b.J_G = goal_cost(r, ctx.goal, w.q_goal);
  b.J_I = input_cost(inputs, w.q_input);
  b.J_B = bounds_cost(r, ctx.bounds, w.q_bound);
  if (ctx.env && ctx.gradients)
    b.J_C = collision_cost(r, *ctx.env, *ctx.gradients, w.beta);
  b.total = b.recombine();
  return b;
}

CostBreakdown total_cost(const std::vector<DensityRollout>& rollouts,
                         const std::vector<std::vector<Input>>& inputs, const CostContext& ctx,
                         const StageFlags& flags) {
  if (inputs.size() != rollouts.size())
    throw std::invalid_argument("one input sequence per rollout required");
  CostBreakdown b;
  for (std::size_t i = 0; i < rollouts.size(); ++i) {
    const CostBreakdown term = rollout_cost(rollouts[i], inputs[i], ctx, flags);
    if (i == 0) {
      b = term;
    } else {
      b += term;
    }
  }
  b.total = b.recombine();
  return b;
}

void RolloutSeeds::reset(std::size_t nodes) {
  d_state.assign(nodes, State::Zero());
  d_g.assign(nodes, 0.0);
  d_input.assign(nodes > 0 ? nodes - 1 : 0, Input::Zero());
}

bool RolloutSeeds::any_density() const {
  return std::any_of(d_g.begin(), d_g.end(), [](double v) { return v != 0.0; });
}

void add_goal_seeds(const DensityRollout& r, const State& goal, const State& q_goal,
                    double alpha, RolloutSeeds& seeds) {
  if (alpha == 0.0) return;
  const std::size_t n = r.states.size() - 1;
  const State d = r.states[n] - goal;
  const double rho = r.densities[n];
  seeds.d_state[n] += alpha * 2.0 * rho * (q_goal.array() * d.array()).matrix();
  seeds.d_g[n] += alpha * rho * weighted_sq(d, q_goal);
}

void add_input_seeds(const std::vector<Input>& inputs, const Input& q_input, double alpha,
                     RolloutSeeds& seeds) {
  if (alpha == 0.0) return;
  for (std::size_t k = 0; k < inputs.size(); ++k)
    seeds.d_input[k] += alpha * 2.0 * (q_input.array() * inputs[k].array()).matrix();
}

void add_bounds_seeds(const DensityRollout& r, const StateBounds& bounds, double q_bound,
                      double alpha, RolloutSeeds& seeds) {
  if (alpha == 0.0) return;
  for (std::size_t k = 0; k < r.states.size(); ++k) {
    const State& x = r.states[k];
    const double rho = r.densities[k];
    double sq = 0.0;
    for (int i = 0; i < kStateDim; ++i) {
      const double lo = std::max(0.0, bounds.lower(i) - x(i));
      const double hi = std::max(0.0, x(i) - bounds.upper(i));
      sq += lo * lo + hi * hi;
      seeds.d_state[k](i) += alpha * rho * q_bound * 2.0 * (hi - lo);
    }
    seeds.d_g[k] += alpha * rho * q_bound * sq;
  }
}

void add_collision_seeds(const DensityRollout& r, const OccupancyGrid& env,
                         const OccGradients& gradients, double beta, double alpha,
                         RolloutSeeds& seeds) {
  if (alpha == 0.0) return;
  for (std::size_t k = 0; k < r.states.size(); ++k) {
    const int kk = static_cast<int>(k);
    const double w = sample_coll_weight(r.states[k], kk, env, r.densities[k]);
    if (w == 0.0) continue;
    const Eigen::Vector2d d =
        r.states[k].head<2>() - desired_position(r.states[k], kk, env, gradients, beta);
    seeds.d_state[k].head<2>() += alpha * 2.0 * w * d;
  }
}

RolloutSeeds rollout_seeds(const DensityRollout& r, const std::vector<Input>& inputs,
                           const CostContext& ctx, const StageFlags& flags) {
  const CostWeights& w = ctx.weights;
  RolloutSeeds s;
  s.reset(r.states.size());
  add_goal_seeds(r, ctx.goal, w.q_goal, w.alpha_goal, s);
  add_input_seeds(inputs, w.q_input, w.alpha_input, s);
  if (flags.bounds) add_bounds_seeds(r, ctx.bounds, w.q_bound, w.alpha_bounds, s);
  if (flags.collision && ctx.env && ctx.gradients)
    add_collision_seeds(r, *ctx.env, *ctx.gradients, w.beta, w.alpha_collision, s);
  return s;
}

}  // namespace dplan
