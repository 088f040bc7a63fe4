#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "dplan/cost.hpp"
#include "dplan/optimizer.hpp"
#include "test_support.hpp"

using namespace dplan;
using oracle::FrozenCollision;
using oracle::frozen_total;

namespace {

DensityRollout straight_rollout(int nodes, const State& x, double rho) {
  DensityRollout r;
  r.states.assign(nodes, x);
  r.densities.assign(nodes, rho);
  r.g_log.assign(nodes, std::log(rho));
  return r;
}

State pos(double x, double y) {
  State s = State::Zero();
  s(kPx) = x;
  s(kPy) = y;
  return s;
}

// A 40 m x 20 m map with two obstacles near the x axis.
struct Scene {
  GridGeometry geom;
  OccupancyGrid grid;
  PlannerConfig config;

  explicit Scene(int steps = 40, int substeps = 5) {
    config.time = TimeGrid{0.1, steps, substeps};
    geom.origin = Eigen::Vector2d(-5.0, -10.0);
    geom.cell_size = 0.5;
    geom.cells_x = 80;
    geom.cells_y = 40;
    geom.steps = steps;
    geom.dt = 0.1;
    std::vector<ObstacleSpec> obs = {
        ObstacleSpec::stationary(0, 6.0, 0.8, 0.0, 0.5, 0.5, geom.slices()),
        ObstacleSpec::stationary(1, 10.0, -1.0, 0.0, 1.0, 0.5, geom.slices())};
    obs[0].sigma = 1.0;
    obs[1].sigma = 1.5;
    grid = rasterize(obs, geom);
  }

  PlanningProblem problem(const State& start, double speed_max = 10.0) const {
    return PlanningProblem(grid, pos(12.0, 1.0), InitialDistribution::planner_default(start),
                           experiment_bounds(geom, speed_max));
  }
};

double relative_error(const Eigen::VectorXd& g, const Eigen::VectorXd& fd) {
  return (g - fd).norm() / std::max(fd.norm(), 1e-300);
}

}  // namespace

TEST(GoalCost, Examples) {
  const State goal = pos(1, 2);
  EXPECT_EQ(goal_cost(straight_rollout(3, goal, 1.0), goal, CostWeights{}.q_goal), 0.0);
  State x = pos(4, 6);
  x(kTheta) = 1.0;
  x(kV) = 3.0;
  EXPECT_DOUBLE_EQ(goal_cost(straight_rollout(3, x, 1.0), goal, CostWeights{}.q_goal), 25.0);
  EXPECT_DOUBLE_EQ(goal_cost(straight_rollout(3, x, 0.5), goal, CostWeights{}.q_goal), 12.5);
}

TEST(InputCost, Examples) {
  const Input q(1, 1);
  EXPECT_EQ(input_cost(std::vector<Input>(100, Input::Zero()), q), 0.0);
  EXPECT_DOUBLE_EQ(input_cost(std::vector<Input>(100, Input(1, 1)), q), 200.0);
  std::mt19937_64 rng(2);
  std::normal_distribution<double> n;
  std::vector<Input> u, u2;
  for (int i = 0; i < 20; ++i) {
    u.emplace_back(n(rng), n(rng));
    u2.push_back(2.0 * u.back());
  }
  EXPECT_NEAR(input_cost(u2, q), 4.0 * input_cost(u, q), 1e-12);
}

TEST(BoundsCost, Examples) {
  StateBounds b = StateBounds::unbounded();
  b.lower(kV) = 0.0;
  b.upper(kV) = 10.0;
  State x = State::Zero();
  x(kV) = 5.0;
  DensityRollout r = straight_rollout(4, x, 1.0);
  EXPECT_EQ(bounds_cost(r, b, 1.0), 0.0);
  r.states[2](kV) = 12.0;
  EXPECT_DOUBLE_EQ(bounds_cost(r, b, 1.0), 4.0);
  r.states[2](kV) = -2.0;
  r.densities[2] = 0.5;
  EXPECT_DOUBLE_EQ(bounds_cost(r, b, 3.0), 6.0);
}

TEST(CollisionCost, Examples) {
  GridGeometry g;
  g.cells_x = g.cells_y = 10;
  g.cell_size = 0.5;
  g.steps = 0;
  const OccupancyGrid empty(g);
  const OccGradients eg = OccGradients::of(empty);
  EXPECT_EQ(collision_cost(straight_rollout(1, pos(2.2, 2.2), 3.0), empty, eg, 1.0), 0.0);

  OccupancyGrid flat(g);
  std::fill(flat.values.begin(), flat.values.end(), 0.4);
  EXPECT_EQ(collision_cost(straight_rollout(1, pos(2.2, 2.2), 3.0), flat, OccGradients::of(flat), 1.0),
            0.0);

  // Ramp 0.1 per cell along x, P_occ 0.2 at the sample cell, rho 1.5.
  OccupancyGrid ramp(g);
  for (int cx = 0; cx < 10; ++cx)
    for (int cy = 0; cy < 10; ++cy) ramp.at(cx, cy, 0) = 0.1 * cx;
  const DensityRollout r = straight_rollout(1, pos(1.2, 2.2), 1.5);
  EXPECT_NEAR(collision_cost(r, ramp, OccGradients::of(ramp), 1.0), 0.3 * 0.0025, 1e-15);
}

TEST(TotalCost, WeightsAndRecombination) {
  Scene s;
  State start = pos(0, 0);
  start(kV) = 2.0;
  const PlanningProblem pr = s.problem(start, 1.5);
  auto ps = sample_params(3, s.config.box, 5, 10, start, s.config.time.horizon());
  const auto samples = sample_initial(pr.dist, 4, 7);
  const SampleEvaluation e = evaluate_samples(ps[0], samples, pr, s.config, false);
  const CostBreakdown& b = e.cost;
  EXPECT_NEAR(b.total, b.recombine(), 1e-12 * std::abs(b.total));
  EXPECT_GE(b.J_G, 0.0);
  EXPECT_GE(b.J_I, 0.0);
  EXPECT_GE(b.J_B, 0.0);
  EXPECT_GE(b.J_C, 0.0);

  PlannerConfig zero = s.config;
  zero.weights.alpha_goal = zero.weights.alpha_input = 0.0;
  zero.weights.alpha_bounds = zero.weights.alpha_collision = 0.0;
  EXPECT_EQ(total_cost(e.rollouts, e.inputs, pr.context(zero.weights), StageFlags::all()).total, 0.0);

  PlannerConfig goal_only = zero;
  goal_only.weights.alpha_goal = 1.0;
  const CostBreakdown g = total_cost(e.rollouts, e.inputs, pr.context(goal_only.weights),
                                     StageFlags::all());
  EXPECT_EQ(g.total, g.J_G);
}

TEST(TotalCost, StagingWithoutBoundsAndCollisionIgnoresTheMap) {
  Scene s;
  State start = pos(0, 0);
  start(kV) = 2.0;
  const PlanningProblem pr = s.problem(start);
  const OccupancyGrid other(s.geom);
  const PlanningProblem pr2(other, pr.goal, pr.dist, pr.bounds);
  auto ps = sample_params(5, s.config.box, 2, 10, start, s.config.time.horizon());
  for (const auto& p : ps) {
    const auto a = evaluate_reference(p, pr, s.config, StageFlags::none());
    const auto b = evaluate_reference(p, pr2, s.config, StageFlags::none());
    EXPECT_EQ(a.cost.total, b.cost.total);
  }
}

TEST(Seeds, DetachedCollisionHasNoDensitySeed) {
  Scene s;
  const PlanningProblem pr = s.problem(pos(0, 0));
  DensityRollout r = straight_rollout(s.config.time.steps + 1, pos(6.0, 0.3), 2.0);
  RolloutSeeds seeds;
  seeds.reset(r.states.size());
  add_collision_seeds(r, *pr.env, pr.gradients, 1.0, 10.0, seeds);
  EXPECT_FALSE(seeds.any_density());
  EXPECT_GT(seeds.d_state[3].head<2>().norm(), 0.0);
}

TEST(GradientContract, ReferenceStageMatchesFiniteDifferences) {
  Scene s;
  State start = pos(0, 0);
  start(kV) = 2.0;
  const PlanningProblem pr = s.problem(start, 2.5);
  auto ps = sample_params(6, s.config.box, 21, 10, start, s.config.time.horizon());
  const double h = 1e-4;
  int checked = 0;
  for (const auto& p : ps) {
    for (const StageFlags flags : {StageFlags::none(), StageFlags{true, false}, StageFlags::all()}) {
      const ReferenceEvaluation e = evaluate_reference(p, pr, s.config, flags);
      const Eigen::VectorXd g = reference_cost_gradient(e, pr, s.config, flags);
      const FrozenCollision jc({e.rollout}, pr, s.config.weights.beta);
      Eigen::VectorXd fd(g.size());
      for (Eigen::Index j = 0; j < g.size(); ++j) {
        double f[2];
        for (int sgn = 0; sgn < 2; ++sgn) {
          PolicyParams q = p;
          Eigen::VectorXd v = q.flat();
          v(j) += sgn == 0 ? h : -h;
          q.set_flat(v);
          const ReferenceEvaluation eq = evaluate_reference(q, pr, s.config, flags);
          f[sgn] = frozen_total({eq.rollout}, {eq.ref.inputs}, pr, s.config, flags, jc);
        }
        fd(j) = (f[0] - f[1]) / (2 * h);
      }
      EXPECT_LT(relative_error(g, fd), 2e-3);
      ++checked;
    }
  }
  EXPECT_EQ(checked, 18);
}

TEST(GradientContract, SampleStageMatchesFiniteDifferences) {
  Scene s;
  State start = pos(0, 0);
  start(kV) = 2.0;
  const PlanningProblem pr = s.problem(start, 2.5);
  auto ps = sample_params(3, s.config.box, 13, 10, start, s.config.time.horizon());
  const auto samples = sample_initial(pr.dist, 5, 3);
  const double h = 1e-4;
  for (const auto& p : ps) {
    const SampleEvaluation e = evaluate_samples(p, samples, pr, s.config, true);
    const Eigen::VectorXd g = sample_cost_gradient(e, pr, s.config);
    const FrozenCollision jc(e.rollouts, pr, s.config.weights.beta);
    Eigen::VectorXd fd(g.size());
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      double f[2];
      for (int sgn = 0; sgn < 2; ++sgn) {
        PolicyParams q = p;
        Eigen::VectorXd v = q.flat();
        v(j) += sgn == 0 ? h : -h;
        q.set_flat(v);
        const SampleEvaluation eq = evaluate_samples(q, samples, pr, s.config, false);
        f[sgn] = frozen_total(eq.rollouts, eq.inputs, pr, s.config, StageFlags::all(), jc);
      }
      fd(j) = (f[0] - f[1]) / (2 * h);
    }
    EXPECT_LT(relative_error(g, fd), 2e-3);
  }
}

TEST(GradientContract, SaturatedSamplesMatchFiniteDifferences) {
  // Large initial offsets drive both inputs into the tanh tails.
  Scene s;
  State start = pos(0, 0);
  start(kV) = 2.0;
  const PlanningProblem pr = s.problem(start, 2.5);
  const auto p = sample_params(1, s.config.box, 77, 10, start, s.config.time.horizon())[0];
  std::vector<InitialSample> samples = {{pos(1.5, -2.0), 1.0}, {pos(-1.0, 2.5), 0.5}};
  samples[0].x0(kTheta) = 1.2;
  samples[1].x0(kV) = 4.0;
  const SampleEvaluation e = evaluate_samples(p, samples, pr, s.config, true);
  const Eigen::VectorXd g = sample_cost_gradient(e, pr, s.config);
  const FrozenCollision jc(e.rollouts, pr, s.config.weights.beta);
  const double h = 1e-4;
  Eigen::VectorXd fd(g.size());
  for (Eigen::Index j = 0; j < g.size(); ++j) {
    double f[2];
    for (int sgn = 0; sgn < 2; ++sgn) {
      PolicyParams q = p;
      Eigen::VectorXd v = q.flat();
      v(j) += sgn == 0 ? h : -h;
      q.set_flat(v);
      const SampleEvaluation eq = evaluate_samples(q, samples, pr, s.config, false);
      f[sgn] = frozen_total(eq.rollouts, eq.inputs, pr, s.config, StageFlags::all(), jc);
    }
    fd(j) = (f[0] - f[1]) / (2 * h);
  }
  EXPECT_LT(relative_error(g, fd), 2e-3);
}

TEST(GradientContract, CollisionTermAloneMatchesFiniteDifferences) {
  Scene s;
  s.config.weights.alpha_goal = s.config.weights.alpha_input = s.config.weights.alpha_bounds = 0.0;
  State start = pos(0, 0.5);
  start(kV) = 1.5;
  const PlanningProblem pr = s.problem(start);
  PolicyParams p = sample_params(1, s.config.box, 4, 10, start, s.config.time.horizon())[0];
  p.knots.row(kOmega) *= 0.1;
  p.knots.row(kAccel).setConstant(0.2);
  const auto samples = sample_initial(pr.dist, 4, 8);
  const double h = 1e-4;
  for (bool stage2 : {false, true}) {
    Eigen::VectorXd g;
    std::vector<DensityRollout> base;
    if (stage2) {
      const SampleEvaluation e = evaluate_samples(p, samples, pr, s.config, true);
      g = sample_cost_gradient(e, pr, s.config);
      base = e.rollouts;
      EXPECT_GT(e.cost.J_C, 0.0);
    } else {
      const ReferenceEvaluation e = evaluate_reference(p, pr, s.config, StageFlags::all());
      g = reference_cost_gradient(e, pr, s.config, StageFlags::all());
      base = {e.rollout};
      EXPECT_GT(e.cost.J_C, 0.0);
    }
    const FrozenCollision jc(base, pr, s.config.weights.beta);
    Eigen::VectorXd fd(g.size());
    for (Eigen::Index j = 0; j < g.size(); ++j) {
      double f[2];
      for (int sgn = 0; sgn < 2; ++sgn) {
        PolicyParams q = p;
        Eigen::VectorXd v = q.flat();
        v(j) += sgn == 0 ? h : -h;
        q.set_flat(v);
        if (stage2) {
          f[sgn] = jc(evaluate_samples(q, samples, pr, s.config, false).rollouts);
        } else {
          f[sgn] = jc({evaluate_reference(q, pr, s.config, StageFlags::all()).rollout});
        }
      }
      fd(j) = s.config.weights.alpha_collision * (f[0] - f[1]) / (2 * h);
    }
    EXPECT_GT(g.norm(), 0.0);
    EXPECT_LT(relative_error(g, fd), 2e-3) << (stage2 ? "samples" : "reference");
  }
}
