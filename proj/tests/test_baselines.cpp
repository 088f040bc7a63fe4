#include <cmath>

#include <gtest/gtest.h>

#include "dplan/baselines.hpp"

using namespace dplan;

namespace {

State pos(double x, double y, double theta = 0.0, double v = 0.0) {
  State s = State::Zero();
  s << x, y, theta, v, 0.0;
  return s;
}

GridGeometry field() {
  GridGeometry g;
  g.origin = Eigen::Vector2d(-5.0, -10.0);
  g.cell_size = 0.5;
  g.cells_x = 60;
  g.cells_y = 40;
  return g;
}

PlannerConfig quick() {
  PlannerConfig c;
  c.multi_starts = 10;
  c.iters_init = 40;
  return c;
}

OccupancyGrid wall_grid() {
  const GridGeometry g = field();
  ObstacleSpec o = ObstacleSpec::stationary(0, 10.0, 0.0, 0.0, 1.0, 6.0, g.slices());
  o.sigma = 0.7;
  return rasterize({o}, g);
}

// Executes a receding-horizon controller with perfect measurements and
// returns the applied inputs.
std::vector<Input> run_mpc(const State& x0, const MpcModel& model, const MpcConfig& c) {
  std::vector<Input> applied, warm;
  State x = x0;
  for (int k = 0; k < c.time.steps; ++k) {
    const MpcSolution s = mpc_step(x, k, model, c, &warm);
    warm = s.inputs;
    applied.push_back(s.inputs.front());
    x = zoh_rollout(x, {s.inputs.front()}, c.time).back();
  }
  return applied;
}

}  // namespace

TEST(Sampling, SingleSampleIsReturned) {
  const OccupancyGrid grid(field());
  const State start = pos(0, 0, 0, 2);
  const PlanningProblem pr(grid, pos(20, 0), InitialDistribution::dirac(start),
                           experiment_bounds(grid.geometry));
  const PlannerConfig c = quick();
  const PlanResult r = sampling_planner(pr, c, 1, 7);
  const auto p = sample_params(1, c.box, substream_seed(7, "policy-sampling"), c.knot_count,
                               start, c.time.horizon())[0];
  EXPECT_EQ(r.policy.knots, p.knots);
  EXPECT_EQ(r.method, "sampling");
}

TEST(Sampling, DominatedByStageOne) {
  const OccupancyGrid grid = wall_grid();
  const State start = pos(0, 0, 0, 2);
  const PlanningProblem pr(grid, pos(20, 2), InitialDistribution::planner_default(start),
                           experiment_bounds(grid.geometry));
  const PlannerConfig c = quick();
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const PlanResult s = sampling_planner(pr, c, c.multi_starts, seed);
    const Stage1Result g = stage1_initialize(pr, c, seed);
    EXPECT_GE(s.cost.total, g.best_cost.total);
    EXPECT_EQ(s.cost.total, g.initial_best_total);
  }
}

TEST(Search, PrimitiveSet) {
  const auto p = search_primitives(InputBox{});
  ASSERT_EQ(p.size(), 9u);
  EXPECT_EQ(p[0], Input(-1, -3));
  EXPECT_EQ(p[4], Input(0, 0));
  EXPECT_EQ(p[8], Input(1, 3));
}

TEST(Search, GoalWithinOnePrimitive) {
  const OccupancyGrid grid(field());
  // Coasting 1 s at 2 m/s, then braking at 3 m/s^2, rests at 2 + 2/3 m.
  const PlanningProblem pr(grid, pos(2.0 + 2.0 / 3.0, 0), InitialDistribution::dirac(pos(0, 0, 0, 2)),
                           experiment_bounds(grid.geometry));
  const SearchResult r = search_planner(pr, quick());
  ASSERT_EQ(r.primitives.size(), 1u);
  EXPECT_EQ(r.primitives[0], 4);
  EXPECT_FALSE(r.capped);
  EXPECT_LT(r.plan.planned_goal_distance, 0.2);
  EXPECT_EQ(r.plan.status, PlanStatus::kOk);
  EXPECT_EQ(r.plan.policy.knot_count(), 101);
}

TEST(Search, DetoursAroundWall) {
  const OccupancyGrid grid = wall_grid();
  const PlanningProblem pr(grid, pos(20, 0), InitialDistribution::dirac(pos(0, 0, 0, 2)),
                           experiment_bounds(grid.geometry));
  double corridor_peak = 0.0;
  for (double x = 0.0; x <= 20.0; x += 0.25)
    corridor_peak = std::max(corridor_peak, grid.lookup(Eigen::Vector2d(x, 0.0), 0));
  ASSERT_GT(corridor_peak, 0.05);
  // Occupancy here is cell mass, so the surrogate needs a strong weight.
  PlannerConfig c = quick();
  c.weights.alpha_collision = 1e5;
  const SearchResult r = search_planner(pr, c);
  EXPECT_FALSE(r.capped);
  const ReferenceTrajectory ref = recover_reference(r.plan.policy, TimeGrid{});
  for (int k = 0; k <= 100; ++k)
    EXPECT_LT(grid.lookup(ref.states[k].head<2>(), k), corridor_peak) << "k=" << k;
}

TEST(Search, Deterministic) {
  const OccupancyGrid grid = wall_grid();
  const PlanningProblem pr(grid, pos(18, 4), InitialDistribution::dirac(pos(0, 0, 0, 1)),
                           experiment_bounds(grid.geometry));
  const SearchResult a = search_planner(pr, quick()), b = search_planner(pr, quick());
  EXPECT_EQ(a.primitives, b.primitives);
  EXPECT_EQ(a.plan.policy.knots, b.plan.policy.knots);
  EXPECT_EQ(a.expansions, b.expansions);
}

TEST(Search, ExpansionCapStillReturnsPlan) {
  const OccupancyGrid grid = wall_grid();
  const PlanningProblem pr(grid, pos(20, 0), InitialDistribution::dirac(pos(0, 0, 0, 2)),
                           experiment_bounds(grid.geometry));
  SearchConfig sc;
  sc.max_expansions = 3;
  const SearchResult r = search_planner(pr, quick(), sc);
  EXPECT_TRUE(r.capped);
  EXPECT_EQ(r.expansions, 3);
  EXPECT_EQ(r.plan.policy.knot_count(), 101);
}

TEST(KnotsFromInputs, ReproducesStepInputs) {
  const TimeGrid t;
  std::vector<Input> u;
  for (int k = 0; k < t.steps; ++k) u.emplace_back(std::sin(0.1 * k), 0.5);
  const PolicyParams p = knots_from_inputs(u, pos(0, 0), t);
  for (int k = 0; k < t.steps; ++k) EXPECT_LT((p.input_at(t.time(k)) - u[k]).norm(), 1e-12);
  EXPECT_THROW(knots_from_inputs({Input::Zero()}, pos(0, 0), t), std::invalid_argument);
}

TEST(MpcCost, GradientMatchesFiniteDifferences) {
  const OccupancyGrid grid = wall_grid();
  const MpcModel m = prepare_mpc(grid, pos(20, 1), experiment_bounds(grid.geometry), 0.0);
  const TimeGrid t;
  const CostWeights w;
  Rng rng(3);
  std::uniform_real_distribution<double> om(-1, 1), ac(-3, 3);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<Input> u;
    for (int j = 0; j < 20; ++j) u.emplace_back(om(rng), ac(rng));
    const State x0 = pos(6.0 + trial, -1.0 + 0.4 * trial, 0.2, 2.0);
    Eigen::VectorXd g;
    mpc_cost(x0, 5, u, m, t, w, &g);
    Eigen::VectorXd fd(g.size());
    const double h = 1e-6;
    for (Eigen::Index i = 0; i < g.size(); ++i) {
      auto up = u, dn = u;
      up[i / 2](i % 2) += h;
      dn[i / 2](i % 2) -= h;
      fd(i) = (mpc_cost(x0, 5, up, m, t, w).total - mpc_cost(x0, 5, dn, m, t, w).total) /
              (2 * h);
    }
    EXPECT_LT((g - fd).norm(), 1e-4 * std::max(1.0, fd.norm())) << "trial " << trial;
  }
}

TEST(MpcCost, TermsOnKnownRollout) {
  const OccupancyGrid grid(field());
  const MpcModel m = prepare_mpc(grid, pos(3, 4), StateBounds::unbounded(), 0.0);
  const std::vector<Input> u(10, Input(0.0, 0.0));
  const MpcTerms t = mpc_cost(pos(0, 0, 0, 0), 0, u, m, TimeGrid{}, CostWeights{});
  EXPECT_DOUBLE_EQ(t.J_G, 5.0);
  EXPECT_EQ(t.J_C, 0.0);
  EXPECT_EQ(t.J_I, 0.0);
  EXPECT_EQ(t.total, 5.0);
}

TEST(Mpc, AcceleratesTowardGoalAhead) {
  const OccupancyGrid grid(field());
  const MpcModel m = prepare_mpc(grid, pos(20, 0), experiment_bounds(grid.geometry), 0.0);
  MpcConfig c = MpcConfig::variant(0);
  c.horizon = 30;
  const MpcSolution s = mpc_step(pos(0, 0, 0, 0.5), 0, m, c);
  EXPECT_GT(s.inputs.front()(kAccel), 0.0);
  EXPECT_TRUE(s.capped);
  EXPECT_GT(s.residual, 0.0);
}

TEST(Mpc, ZeroOccupancyReducesToGoalAndInput) {
  const OccupancyGrid grid(field());
  const MpcModel m = prepare_mpc(grid, pos(15, 3), experiment_bounds(grid.geometry), 0.0);
  MpcConfig a = MpcConfig::variant(0), b = a;
  b.weights.alpha_collision = 0.0;
  const State x = pos(1, 0, 0.1, 2);
  const MpcSolution sa = mpc_step(x, 10, m, a), sb = mpc_step(x, 10, m, b);
  EXPECT_EQ(sa.inputs, sb.inputs);
  EXPECT_EQ(sa.cost.total, sb.cost.total);
}

TEST(Mpc, ZeroRadiusTubeEqualsM0) {
  const OccupancyGrid grid = wall_grid();
  const StateBounds bounds = experiment_bounds(grid.geometry);
  MpcConfig m0 = MpcConfig::variant(0), tube = MpcConfig::variant(2);
  tube.tube_radius = 0.0;
  const MpcModel a = prepare_mpc(grid, pos(20, 0), bounds, m0.tube_radius);
  const MpcModel b = prepare_mpc(grid, pos(20, 0), bounds, tube.tube_radius);
  EXPECT_EQ(a.grid.values, b.grid.values);
  const State x = pos(5, 0.5, 0, 2);
  const MpcSolution sa = mpc_step(x, 20, a, m0), sb = mpc_step(x, 20, b, tube);
  EXPECT_EQ(sa.inputs, sb.inputs);
}

TEST(Mpc, TubeGridsAreMonotoneInRadius) {
  const OccupancyGrid grid = wall_grid();
  const StateBounds bounds = experiment_bounds(grid.geometry);
  std::vector<MpcModel> models;
  for (int i = 0; i < 4; ++i)
    models.push_back(prepare_mpc(grid, pos(20, 0), bounds, MpcConfig::variant(i).tube_radius));
  for (int i = 1; i < 4; ++i) {
    for (std::size_t j = 0; j < grid.values.size(); ++j)
      ASSERT_LE(models[i - 1].grid.values[j], models[i].grid.values[j]);
    EXPECT_LE(models[i].bounds.upper(kPx), models[i - 1].bounds.upper(kPx));
    EXPECT_GE(models[i].bounds.lower(kPy), models[i - 1].bounds.lower(kPy));
  }
  EXPECT_EQ(models[3].bounds.upper(kPx), bounds.upper(kPx) - 1.0);
  EXPECT_EQ(MpcConfig::variant(1).name, "M1");
  EXPECT_THROW(MpcConfig::variant(4), std::invalid_argument);
}

TEST(Mpc, WarmStartShiftsPreviousSolution) {
  const OccupancyGrid grid(field());
  const MpcModel m = prepare_mpc(grid, pos(15, 0), experiment_bounds(grid.geometry), 0.0);
  MpcConfig c;
  c.horizon = 4;
  c.solver.iterations = 0;
  const std::vector<Input> warm{Input(0.1, 1), Input(0.2, 2), Input(0.3, 1), Input(0.4, 0)};
  const MpcSolution s = mpc_step(pos(0, 0, 0, 1), 0, m, c, &warm);
  const std::vector<Input> expected{warm[1], warm[2], warm[3], warm[3]};
  EXPECT_EQ(s.inputs, expected);
  c.warm_start = false;
  EXPECT_EQ(mpc_step(pos(0, 0, 0, 1), 0, m, c, &warm).inputs,
            std::vector<Input>(4, Input::Zero()));
  EXPECT_THROW(mpc_step(pos(0, 0), 101, m, c), std::out_of_range);
}

TEST(Mpc, BestIterateNeverWorseThanStart) {
  const OccupancyGrid grid = wall_grid();
  const MpcModel m = prepare_mpc(grid, pos(20, 0), experiment_bounds(grid.geometry), 0.0);
  const MpcConfig c;
  const State x = pos(7, 0, 0, 2);
  const std::vector<Input> zero(c.horizon, Input::Zero());
  const double start_cost = mpc_cost(x, 30, zero, m, c.time, c.weights).total;
  const MpcSolution s = mpc_step(x, 30, m, c);
  EXPECT_LE(s.cost.total, start_cost);
  EXPECT_EQ(s.cost.total, mpc_cost(x, 30, s.inputs, m, c.time, c.weights).total);
}

TEST(Oracle, FirstInputMatchesFullHorizonMpc) {
  const OccupancyGrid grid = wall_grid();
  const StateBounds bounds = experiment_bounds(grid.geometry);
  const State x0 = pos(0, 0.3, 0.05, 2);
  OracleConfig oc;
  oc.stage1_start = false;
  oc.random_starts = 0;
  oc.solver = SolverSettings{};
  const PlanResult o = oracle_solve(grid, pos(20, 0), bounds, x0, oc, 1);
  MpcConfig mc;
  mc.horizon = mc.time.steps;
  mc.solver = oc.solver;
  const MpcSolution s = mpc_step(x0, 0, prepare_mpc(grid, pos(20, 0), bounds, 0.0), mc);
  EXPECT_EQ(o.open_loop.front(), s.inputs.front());
  EXPECT_EQ(o.open_loop, s.inputs);
}

TEST(Oracle, BeatsMpcOnFixtures) {
  const OccupancyGrid grid = wall_grid();
  const StateBounds bounds = experiment_bounds(grid.geometry);
  OracleConfig oc;
  oc.planner = quick();
  const MpcConfig mc = MpcConfig::variant(0);
  for (const State& goal : {pos(20, 0), pos(18, 5)}) {
    const State x0 = pos(0, 0, 0, 2);
    const MpcModel model = prepare_mpc(grid, goal, bounds, 0.0);
    const PlanResult o = oracle_solve(grid, goal, bounds, x0, oc, 5);
    const std::vector<Input> m0 = run_mpc(x0, model, mc);
    const double m0_cost = mpc_cost(x0, 0, m0, model, mc.time, mc.weights).total;
    const double o_cost = mpc_cost(x0, 0, o.open_loop, model, mc.time, mc.weights).total;
    EXPECT_LE(o_cost, m0_cost);
    EXPECT_EQ(o.method, "O");
    EXPECT_EQ(o.status, PlanStatus::kOk);
  }
}

TEST(Oracle, EmptyMapGoalCostBelowBaselines) {
  const OccupancyGrid grid(field());
  const StateBounds bounds = experiment_bounds(grid.geometry);
  const State x0 = pos(0, 0, 0, 2), goal = pos(17, 4);
  OracleConfig oc;
  oc.planner = quick();
  const PlanResult o = oracle_solve(grid, goal, bounds, x0, oc, 2);
  const PlanningProblem pr(grid, goal, InitialDistribution::dirac(x0), bounds);
  const PlanResult s = sampling_planner(pr, oc.planner, 100, 2);
  const SearchResult se = search_planner(pr, oc.planner);
  EXPECT_LT(o.cost.J_G, s.cost.J_G);
  EXPECT_LT(o.cost.J_G, se.plan.cost.J_G);
  const MpcConfig mc = MpcConfig::variant(0);
  const MpcModel model = prepare_mpc(grid, goal, bounds, 0.0);
  const std::vector<Input> m0 = run_mpc(x0, model, mc);
  const State end = zoh_rollout(x0, m0, mc.time).back();
  EXPECT_LT(o.cost.J_G, (end - goal).head<2>().squaredNorm());
}

TEST(Oracle, Deterministic) {
  const OccupancyGrid grid = wall_grid();
  const StateBounds bounds = experiment_bounds(grid.geometry);
  OracleConfig oc;
  oc.planner = quick();
  oc.solver.iterations = 100;
  const PlanResult a = oracle_solve(grid, pos(20, 3), bounds, pos(0, 0, 0, 2), oc, 4);
  const PlanResult b = oracle_solve(grid, pos(20, 3), bounds, pos(0, 0, 0, 2), oc, 4);
  EXPECT_EQ(a.open_loop, b.open_loop);
}
