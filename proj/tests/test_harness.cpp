#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "dplan/harness.hpp"

using namespace dplan;

namespace {

PlannerConfig small_planner() {
  PlannerConfig c;
  c.multi_starts = 8;
  c.samples = 6;
  c.iters_init = 60;
  c.iters_local = 15;
  return c;
}

Environment open_env(const State& start, const State& goal,
                     const std::vector<ObstacleSpec>& obstacles = {}) {
  Environment env;
  env.geometry = fit_geometry({start.head<2>(), goal.head<2>()}, {}, 0.5, 5.0, TimeGrid{});
  env.obstacles = obstacles;
  env.grid = rasterize(obstacles, env.geometry);
  env.start = start;
  env.goal = goal;
  return env;
}

ExperimentConfig small_experiment() {
  ExperimentConfig c;
  c.planner = small_planner();
  c.seed = 11;
  c.mpc.solver.iterations = 10;
  return c;
}

// metrics.csv with the two timing columns removed.
std::string untimed_csv(const std::vector<RunRecord>& rows) {
  std::vector<RunRecord> copy = rows;
  for (auto& r : copy) r.offline_s = r.online_ms_per_step = 0.0;
  std::ostringstream os;
  write_metrics_csv(os, copy);
  return os.str();
}

RunRecord row(const std::string& method, int env, double jg, double ji, double jc,
              PlanStatus status = PlanStatus::kOk, double offline = 1.0, double online = 2.0) {
  RunRecord r;
  r.method = method;
  r.env_id = env;
  r.J_G = jg;
  r.J_I = ji;
  r.J_C = jc;
  r.status = status;
  r.offline_s = offline;
  r.online_ms_per_step = online;
  r.final_goal_distance = 1.0;
  return r;
}

MethodRunner stub(const std::string& name, std::vector<RunRecord> per_env) {
  return [name, per_env](const Scenario& sc, const std::vector<MeasurementMode>& modes,
                         const ExperimentConfig&) {
    std::vector<RunRecord> out;
    for (MeasurementMode m : modes) {
      RunRecord r = per_env.at(static_cast<std::size_t>(sc.id));
      r.method = name;
      r.env_id = sc.id;
      r.mode = m;
      out.push_back(r);
    }
    return out;
  };
}

std::vector<Environment> two_open_envs() {
  const State s = (State() << 0, 0, 0, 2, 0).finished();
  return {open_env(s, (State() << 15, 0, 0, 0, 0).finished()),
          open_env(s, (State() << 12, 4, 0, 0, 0).finished())};
}

void write_stationary_recording(const std::string& path, double x, double y) {
  std::ofstream out(path);
  out << "trackId,frame,xCenter,yCenter,heading,width,length\n";
  for (int f = 0; f <= 300; ++f) out << "4," << f << ',' << x << ',' << y << ",90,1.8,4.2\n";
  std::ofstream(sidecar_path(path)) << R"({"frame_rate_hz": 25.0, "utm_origin": [0.0, 0.0]})";
}

ExperimentConfig ind_experiment() {
  ExperimentConfig c = small_experiment();
  c.generator.distance_min = 3.0;
  c.generator.distance_max = 5.0;
  c.generator.margin = 8.0;
  return c;
}

}  // namespace

TEST(Measurement, StringRoundTrip) {
  for (auto m : {MeasurementMode::kPerfect, MeasurementMode::kBiased})
    EXPECT_EQ(measurement_from_string(to_string(m)), m);
  EXPECT_THROW(measurement_from_string("noisy"), std::invalid_argument);
}

TEST(SimulateExecution, DpFromMeanStateStaysNearPlannedGoal) {
  const State start = (State() << 0, 0, 0, 2, 0).finished();
  const Environment env = open_env(start, (State() << 18, 3, 0, 0, 0).finished());
  ExperimentConfig cfg = small_experiment();
  Scenario sc = make_scenario(0, env, cfg);
  sc.true_x0 = sc.belief.mean();
  const PlanResult plan =
      plan_density(PlanningProblem(sc.env.grid, sc.env.goal, sc.belief, sc.bounds), cfg.planner, 3);
  const ExecutionTrace tr = simulate_execution(plan, sc, MeasurementMode::kPerfect, cfg.planner);
  ASSERT_EQ(tr.states.size(), 101u);
  EXPECT_LE(tr.final_goal_distance, 2.0 * plan.planned_goal_distance + 1e-9);
  EXPECT_EQ(tr.status, PlanStatus::kOk);
}

TEST(SimulateExecution, ZeroBiasBiasedModeEqualsPerfect) {
  const Environment env = two_open_envs()[0];
  ExperimentConfig cfg = small_experiment();
  Scenario sc = make_scenario(0, env, cfg);
  sc.true_x0(kBias) = 0.0;
  const PlanResult plan = sampling_planner(
      PlanningProblem(sc.env.grid, sc.env.goal, sc.belief, sc.bounds), cfg.planner, 10, 5);
  const auto a = simulate_execution(plan, sc, MeasurementMode::kPerfect, cfg.planner);
  const auto b = simulate_execution(plan, sc, MeasurementMode::kBiased, cfg.planner);
  EXPECT_EQ(a.states, b.states);
  EXPECT_EQ(a.inputs, b.inputs);
  EXPECT_EQ(a.J_C, b.J_C);

  const auto m = simulate_mpc(cfg.mpc, sc, MeasurementMode::kPerfect, cfg.planner);
  const auto n = simulate_mpc(cfg.mpc, sc, MeasurementMode::kBiased, cfg.planner);
  EXPECT_EQ(m.states, n.states);
  EXPECT_EQ(m.inputs, n.inputs);
}

TEST(SimulateExecution, BiasChangesTrackingOutcome) {
  const Environment env = two_open_envs()[0];
  ExperimentConfig cfg = small_experiment();
  Scenario sc = make_scenario(0, env, cfg);
  sc.true_x0(kBias) = 0.1;
  const PlanResult plan = sampling_planner(
      PlanningProblem(sc.env.grid, sc.env.goal, sc.belief, sc.bounds), cfg.planner, 10, 5);
  const auto a = simulate_execution(plan, sc, MeasurementMode::kPerfect, cfg.planner);
  const auto b = simulate_execution(plan, sc, MeasurementMode::kBiased, cfg.planner);
  EXPECT_NE(a.states.back(), b.states.back());
}

TEST(SimulateExecution, StepTimesPositiveAndTimestampsMonotone) {
  const Environment env = two_open_envs()[1];
  ExperimentConfig cfg = small_experiment();
  const Scenario sc = make_scenario(0, env, cfg);
  const PlanResult plan = sampling_planner(
      PlanningProblem(sc.env.grid, sc.env.goal, sc.belief, sc.bounds), cfg.planner, 10, 5);
  for (const ExecutionTrace& tr :
       {simulate_execution(plan, sc, MeasurementMode::kBiased, cfg.planner),
        simulate_mpc(cfg.mpc, sc, MeasurementMode::kBiased, cfg.planner)}) {
    ASSERT_EQ(tr.step_ms.size(), 100u);
    ASSERT_EQ(tr.timestamps.size(), 100u);
    for (std::size_t k = 0; k < tr.step_ms.size(); ++k) {
      EXPECT_GT(tr.step_ms[k], 0.0);
      if (k > 0) EXPECT_GE(tr.timestamps[k], tr.timestamps[k - 1]);
    }
    EXPECT_GT(tr.online_ms_per_step(), 0.0);
  }
}

TEST(SimulateExecution, OpenLoopPlanReplaysInputs) {
  const Environment env = two_open_envs()[0];
  ExperimentConfig cfg = small_experiment();
  const Scenario sc = make_scenario(0, env, cfg);
  PlanResult plan;
  plan.method = "O";
  plan.open_loop.assign(100, Input(0.1, 0.5));
  const auto tr = simulate_execution(plan, sc, MeasurementMode::kBiased, cfg.planner);
  EXPECT_EQ(tr.states, zoh_rollout(sc.true_x0, plan.open_loop, cfg.planner.time));
  EXPECT_EQ(tr.inputs, plan.open_loop);
}

TEST(SimulateExecution, CollisionRuleMarksFailure) {
  const State start = (State() << 0, 0, 0, 2, 0).finished();
  const Environment env = open_env(start, (State() << 15, 0, 0, 0, 0).finished());
  ExperimentConfig cfg = small_experiment();
  const Scenario sc = make_scenario(0, env, cfg);
  PlanResult plan;
  plan.open_loop.assign(100, Input(0.0, 0.0));
  FailureRule strict;
  strict.collision_limit = -1.0;
  EXPECT_EQ(simulate_execution(plan, sc, MeasurementMode::kPerfect, cfg.planner, strict).status,
            PlanStatus::kFailedCollision);
  FailureRule near;
  near.goal_limit = 0.01;
  EXPECT_EQ(simulate_execution(plan, sc, MeasurementMode::kPerfect, cfg.planner, near).status,
            PlanStatus::kFailedGoal);
}

TEST(Summary, SingleMethodHasZeroIncrements) {
  const auto s = compute_summary({row("A", 0, 3, 2, 1), row("A", 1, 7, 1, 0.5)});
  ASSERT_EQ(s.size(), 1u);
  EXPECT_EQ(s[0].CRI, 0.0);
  EXPECT_EQ(s[0].GCI, 0.0);
  EXPECT_EQ(s[0].ICI, 0.0);
  EXPECT_EQ(s[0].failure_rate, 0.0);
}

TEST(Summary, MethodIdenticalToBestHasZeroIncrements) {
  const auto s = compute_summary({row("A", 0, 3, 2, 1), row("B", 0, 3, 2, 1), row("C", 0, 9, 9, 9),
                                  row("A", 1, 1, 1, 1), row("B", 1, 1, 1, 1), row("C", 1, 2, 2, 2)});
  for (const auto& m : s) {
    if (m.method == "C") continue;
    EXPECT_EQ(m.CRI, 0.0);
    EXPECT_EQ(m.GCI, 0.0);
    EXPECT_EQ(m.ICI, 0.0);
  }
}

TEST(Summary, StubIncrementsMatchHandComputedAverages) {
  // A: (J_G, J_I, J_C) = (2, 1, 0.5) env0, (4, 3, 1) env1.
  // B: (3, 0.5, 1.5) env0, failed env1, (1, 1, 1) env2.
  const std::vector<Environment> envs(3, two_open_envs()[0]);
  ExperimentConfig cfg = small_experiment();
  cfg.methods = {"A", "B"};
  cfg.modes = {MeasurementMode::kPerfect, MeasurementMode::kBiased};
  const auto report = evaluate_environments(
      envs, cfg,
      {{"A", stub("A", {row("", 0, 2, 1, 0.5, PlanStatus::kOk, 1.0, 2.0),
                        row("", 0, 4, 3, 1, PlanStatus::kOk, 3.0, 4.0),
                        row("", 0, 5, 5, 5, PlanStatus::kFailedCollision, 100.0, 100.0)})},
       {"B", stub("B", {row("", 0, 3, 0.5, 1.5, PlanStatus::kOk, 5.0, 6.0),
                        row("", 0, 0, 0, 0, PlanStatus::kTimeout, 100.0, 100.0),
                        row("", 0, 1, 1, 1, PlanStatus::kOk, 7.0, 8.0)})}});
  ASSERT_EQ(report.rows.size(), 12u);
  for (MeasurementMode m : cfg.modes) {
    const auto& a = report.find("A", m);
    EXPECT_NEAR(a.failure_rate, 1.0 / 3.0, 1e-15);
    // env0 reference: (2, 0.5, 0.5); env1: A alone; env2: B alone.
    EXPECT_DOUBLE_EQ(a.GCI, 0.0);
    EXPECT_DOUBLE_EQ(a.ICI, (0.5 + 0.0) / 2.0);
    EXPECT_DOUBLE_EQ(a.CRI, 0.0);
    EXPECT_DOUBLE_EQ(a.offline_s, 2.0);
    EXPECT_DOUBLE_EQ(a.online_ms_per_step, 3.0);
    const auto& b = report.find("B", m);
    EXPECT_NEAR(b.failure_rate, 1.0 / 3.0, 1e-15);
    EXPECT_DOUBLE_EQ(b.GCI, (1.0 + 0.0) / 2.0);
    EXPECT_DOUBLE_EQ(b.ICI, 0.0);
    EXPECT_DOUBLE_EQ(b.CRI, (1.0 + 0.0) / 2.0);
    EXPECT_DOUBLE_EQ(b.offline_s, 6.0);
    EXPECT_DOUBLE_EQ(b.online_ms_per_step, 7.0);
  }
}

TEST(Summary, AllMethodsFailingExcludesEnvironmentFromIncrements) {
  const auto s = compute_summary({row("A", 0, 1, 1, 1), row("B", 0, 2, 2, 2),
                                  row("A", 1, 0, 0, 0, PlanStatus::kFailedGoal),
                                  row("B", 1, 0, 0, 0, PlanStatus::kFailedGoal)});
  for (const auto& m : s) {
    EXPECT_EQ(m.runs, 2);
    EXPECT_EQ(m.failures, 1);
    EXPECT_DOUBLE_EQ(m.GCI, m.method == "A" ? 0.0 : 1.0);
  }
}

TEST(Summary, SucceededOracleDefinesTheReference) {
  // O is worse than A on J_G yet still the reference where it succeeds.
  const auto s = compute_summary({row("O", 0, 5, 1, 1), row("A", 0, 2, 2, 2),
                                  row("O", 1, 0, 0, 0, PlanStatus::kFailedCollision),
                                  row("A", 1, 3, 3, 3), row("B", 1, 4, 4, 4)});
  for (const auto& m : s) {
    if (m.method == "O") {
      EXPECT_EQ(m.GCI, 0.0);
      EXPECT_EQ(m.CRI, 0.0);
      EXPECT_EQ(m.ICI, 0.0);
    }
    if (m.method == "A") {
      EXPECT_DOUBLE_EQ(m.GCI, 0.0);
      EXPECT_DOUBLE_EQ(m.ICI, 0.5);
      EXPECT_DOUBLE_EQ(m.CRI, 0.5);
    }
  }
}

TEST(Summary, OracleRunHasNoGoalCostIncrement) {
  const std::vector<Environment> envs = two_open_envs();
  ExperimentConfig cfg = small_experiment();
  cfg.methods = {"search", "M0", "O"};
  cfg.oracle.solver.iterations = 150;
  cfg.oracle.random_starts = 1;
  const auto report = evaluate_environments(envs, cfg);
  EXPECT_EQ(report.find("O", MeasurementMode::kPerfect).GCI, 0.0);
  for (const auto& s : report.summary) {
    EXPECT_GE(s.GCI, 0.0);
    EXPECT_GE(s.ICI, 0.0);
    EXPECT_GE(s.CRI, 0.0);
  }
}

TEST(Evaluate, UnknownMethodRejected) {
  ExperimentConfig cfg = small_experiment();
  cfg.methods = {"DP", "nope"};
  EXPECT_THROW(evaluate_environments(two_open_envs(), cfg), std::invalid_argument);
  EXPECT_THROW(builtin_runner("M4"), std::invalid_argument);
}

TEST(Evaluate, ReportDeterministicExceptTimingAndParallelEqualsSerial) {
  ExperimentConfig cfg = small_experiment();
  cfg.environments = 2;
  cfg.generator.distance_max = 25.0;
  cfg.generator.obstacles_max = 2;
  cfg.methods = {"DP", "sampling", "search", "M0"};
  cfg.sampling_count = 12;
  cfg.modes = {MeasurementMode::kPerfect, MeasurementMode::kBiased};
  const auto a = evaluate_suite(cfg);
  const auto b = evaluate_suite(cfg);
  cfg.workers = 2;
  const auto c = evaluate_suite(cfg);
  ASSERT_EQ(a.rows.size(), 16u);
  EXPECT_EQ(untimed_csv(a.rows), untimed_csv(b.rows));
  EXPECT_EQ(untimed_csv(a.rows), untimed_csv(c.rows));
}

TEST(Evaluate, WritesReportFiles) {
  const auto dir = std::filesystem::temp_directory_path() / "dplan_harness_report";
  std::filesystem::remove_all(dir);
  ExperimentConfig cfg = small_experiment();
  cfg.methods = {"A"};
  cfg.output_dir = dir.string();
  evaluate_environments({two_open_envs()[0]}, cfg, {{"A", stub("A", {row("", 0, 1, 1, 1)})}});
  std::ifstream csv(dir / "metrics.csv");
  std::string header;
  std::getline(csv, header);
  EXPECT_EQ(header,
            "method,env_id,mode,status,J_G,J_I,J_C,J_C_profile_max,J_C_profile_sum,"
            "final_goal_distance,offline_s,online_ms_per_step");
  EXPECT_TRUE(std::filesystem::exists(dir / "summary.json"));
  std::filesystem::remove_all(dir);
}

TEST(IndSuite, StationaryTrackMatchesObstacleSpecEnvironment) {
  const auto dir = std::filesystem::temp_directory_path() / "dplan_ind_equiv";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "rec00_tracks.csv").string();
  write_stationary_recording(path, 3.0, -2.0);
  ExperimentConfig cfg = ind_experiment();
  cfg.methods = {"search", "M0"};
  std::vector<std::string> warnings;
  const auto ind = ind_environments({path}, cfg, &warnings, 3);
  ASSERT_EQ(ind.size() + warnings.size(), 3u);
  ASSERT_FALSE(ind.empty());

  std::vector<Environment> direct;
  for (const auto& e : ind) {
    Environment d;
    d.geometry = e.geometry;
    d.obstacles = {ObstacleSpec::stationary(4, 3.0, -2.0, std::numbers::pi / 2, 4.2, 1.8,
                                            e.geometry.slices())};
    d.grid = rasterize(d.obstacles, d.geometry);
    d.start = e.start;
    d.goal = e.goal;
    ASSERT_EQ(d.grid.values, e.grid.values);
    direct.push_back(d);
  }
  const auto from_tracks = ind_suite({path}, cfg, 3);
  const auto from_specs = evaluate_environments(direct, cfg);
  EXPECT_EQ(untimed_csv(from_tracks.rows), untimed_csv(from_specs.rows));
  std::filesystem::remove_all(dir);
}

TEST(IndSuite, InadmissibleWindowsAreSkippedWithWarning) {
  const auto dir = std::filesystem::temp_directory_path() / "dplan_ind_skip";
  std::filesystem::create_directories(dir);
  const std::string path = (dir / "rec00_tracks.csv").string();
  write_stationary_recording(path, 0.0, 0.0);
  ExperimentConfig cfg = ind_experiment();
  cfg.generator.endpoint_max_occupancy = 0.0;  // P_occ < 0 is impossible
  cfg.generator.max_attempts = 20;
  const auto report = ind_suite({path}, cfg, 4);
  EXPECT_TRUE(report.rows.empty());
  ASSERT_EQ(report.warnings.size(), 4u);
  EXPECT_NE(report.warnings[0].find("skipped"), std::string::npos);
  std::filesystem::remove_all(dir);
}

TEST(IndSuite, ThreeRecordingsGiveThirtyEnvironments) {
  const auto dir = std::filesystem::temp_directory_path() / "dplan_ind_thirty";
  std::filesystem::create_directories(dir);
  std::vector<std::string> paths;
  for (int r = 0; r < 3; ++r) {
    paths.push_back((dir / ("rec0" + std::to_string(r) + "_tracks.csv")).string());
    write_stationary_recording(paths.back(), 2.0 * r, 1.0);
  }
  std::vector<std::string> warnings;
  const auto envs = ind_environments(paths, ind_experiment(), &warnings);
  EXPECT_EQ(envs.size() + warnings.size(), 30u);
  EXPECT_EQ(envs.size(), 30u);
  for (const auto& e : envs) {
    EXPECT_LT(e.grid.lookup(e.start.head<2>(), 0), 0.01);
    EXPECT_LT(e.grid.lookup(e.goal.head<2>(), e.geometry.steps), 0.01);
    const double d = (e.goal.head<2>() - e.start.head<2>()).norm();
    EXPECT_GE(d, 3.0);
    EXPECT_LE(d, 5.0);
  }
  std::filesystem::remove_all(dir);
}
