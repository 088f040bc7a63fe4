#include "dplan/harness.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "dplan/io.hpp"
#include "dplan/rng.hpp"

namespace dplan {

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
  return std::chrono::duration<double, std::milli>(b - a).count();
}

// Metrics and failure status of a realized trajectory.
void score(ExecutionTrace& tr, const Scenario& sc, const PlannerConfig& config,
           const FailureRule& rule) {
  DensityRollout r;
  r.states = tr.states;
  r.densities.assign(r.states.size(), 1.0);
  r.g_log.assign(r.states.size(), 0.0);
  const CostWeights& w = config.weights;
  tr.J_I = input_cost(tr.inputs, w.q_input);
  tr.J_C = collision_cost(r, sc.env.grid, sc.gradients, w.beta);
  tr.profile = collision_profile({r}, sc.env.grid);
  tr.final_goal_distance = (r.states.back().head<2>() - sc.env.goal.head<2>()).norm();
  tr.J_G = goal_cost(r, sc.env.goal, w.q_goal);
  if (tr.diverged) {
    tr.status = PlanStatus::kFailedGoal;
    tr.final_goal_distance = std::numeric_limits<double>::infinity();
  } else if (tr.J_C > rule.collision_limit) {
    tr.status = PlanStatus::kFailedCollision;
  } else if (!(tr.final_goal_distance <= rule.goal_limit)) {
    tr.status = PlanStatus::kFailedGoal;
  } else {
    tr.status = PlanStatus::kOk;
  }
}

void truncate_at_divergence(ExecutionTrace& tr) {
  for (std::size_t k = 0; k < tr.states.size(); ++k) {
    if (!tr.states[k].allFinite()) {
      tr.diverged = true;
      tr.states.resize(std::max<std::size_t>(k, 1));
      const std::size_t n = tr.states.size() - 1;
      tr.inputs.resize(std::min(tr.inputs.size(), n));
      tr.step_ms.resize(std::min(tr.step_ms.size(), n));
      tr.timestamps.resize(std::min(tr.timestamps.size(), n));
      return;
    }
  }
}

RunRecord record(const std::string& method, const Scenario& sc, MeasurementMode mode,
                 const ExecutionTrace& tr, double offline_s) {
  RunRecord r;
  r.method = method;
  r.env_id = sc.id;
  r.mode = mode;
  r.status = tr.status;
  r.J_G = tr.J_G;
  r.J_I = tr.J_I;
  r.J_C = tr.J_C;
  r.J_C_profile_max = tr.profile.max();
  r.J_C_profile_sum = tr.profile.sum();
  r.final_goal_distance = tr.final_goal_distance;
  r.offline_s = offline_s;
  r.online_ms_per_step = tr.online_ms_per_step();
  return r;
}

RunRecord failed_record(const std::string& method, const Scenario& sc, MeasurementMode mode,
                        PlanStatus status, double offline_s) {
  RunRecord r;
  r.method = method;
  r.env_id = sc.id;
  r.mode = mode;
  r.status = status;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  r.J_G = r.J_I = r.J_C = r.J_C_profile_max = r.J_C_profile_sum = nan;
  r.final_goal_distance = std::numeric_limits<double>::infinity();
  r.offline_s = offline_s;
  r.online_ms_per_step = nan;
  return r;
}

PlannerConfig planner_of(const ExperimentConfig& c) {
  PlannerConfig p = c.planner;
  p.budget_s = c.budget_s;
  return p;
}

PlanningProblem problem_of(const Scenario& sc) {
  return PlanningProblem(sc.env.grid, sc.env.goal, sc.belief, sc.bounds);
}

// Runner for methods that produce an offline plan and then execute it.
template <class Planner>
MethodRunner plan_runner(std::string name, Planner planner) {
  return [name, planner](const Scenario& sc, const std::vector<MeasurementMode>& modes,
                         const ExperimentConfig& config) {
    std::vector<RunRecord> out;
    const PlannerConfig pc = planner_of(config);
    const auto t0 = Clock::now();
    PlanResult plan;
    try {
      plan = planner(sc, config, pc);
    } catch (const std::runtime_error&) {
      const double s = ms_between(t0, Clock::now()) / 1000.0;
      for (MeasurementMode m : modes)
        out.push_back(failed_record(name, sc, m, PlanStatus::kFailedGoal, s));
      return out;
    }
    for (MeasurementMode m : modes) {
      const ExecutionTrace tr = simulate_execution(plan, sc, m, pc, config.failure);
      out.push_back(record(name, sc, m, tr, plan.offline_s));
    }
    return out;
  };
}

}  // namespace

std::string to_string(MeasurementMode m) {
  return m == MeasurementMode::kPerfect ? "perfect" : "biased";
}

MeasurementMode measurement_from_string(const std::string& s) {
  if (s == "perfect") return MeasurementMode::kPerfect;
  if (s == "biased") return MeasurementMode::kBiased;
  throw std::invalid_argument("unknown measurement mode: " + s);
}

double ExecutionTrace::online_ms_per_step() const {
  if (step_ms.empty()) return 0.0;
  double s = 0.0;
  for (double v : step_ms) s += v;
  return s / static_cast<double>(step_ms.size());
}

ExecutionTrace simulate_execution(const PlanResult& plan, const Scenario& sc, MeasurementMode mode,
                                  const PlannerConfig& config, const FailureRule& rule) {
  ExecutionTrace tr;
  tr.method = plan.method;
  const TimeGrid& time = config.time;
  const auto start = Clock::now();
  if (!plan.open_loop.empty()) {
    // Open-loop execution from the true state; measurements are unused.
    tr.states.push_back(sc.true_x0);
    State x = sc.true_x0;
    for (int k = 0; k < time.steps; ++k) {
      const auto a = Clock::now();
      const Input u = plan.open_loop.at(static_cast<std::size_t>(k));
      const auto b = Clock::now();
      x = zoh_rollout(x, {u}, time).back();
      tr.inputs.push_back(u);
      tr.states.push_back(x);
      tr.step_ms.push_back(ms_between(a, b));
      tr.timestamps.push_back(ms_between(start, Clock::now()) / 1000.0);
    }
  } else {
    const ReferenceTrajectory ref = recover_reference(plan.policy, time);
    State x0 = sc.true_x0;
    if (mode == MeasurementMode::kPerfect) x0(kBias) = 0.0;
    const Controller ctrl = config.controller();
    const DensityRollout r = propagate(x0, 1.0, ref, ctrl);
    tr.states = r.states;
    for (int k = 0; k < time.steps; ++k) {
      const auto a = Clock::now();
      const Input u = ctrl(tr.states[k], ref.states[k], ref.inputs[k]);
      const auto b = Clock::now();
      tr.inputs.push_back(u);
      tr.step_ms.push_back(ms_between(a, b));
      tr.timestamps.push_back(ms_between(start, Clock::now()) / 1000.0);
    }
  }
  truncate_at_divergence(tr);
  score(tr, sc, config, rule);
  if (plan.status == PlanStatus::kTimeout) tr.status = PlanStatus::kTimeout;
  return tr;
}

ExecutionTrace simulate_mpc(const MpcConfig& mpc, const Scenario& sc, MeasurementMode mode,
                            const PlannerConfig& config, const FailureRule& rule) {
  return simulate_mpc(mpc, prepare_mpc(sc.env.grid, sc.env.goal, sc.bounds, mpc.tube_radius), sc,
                      mode, config, rule);
}

ExecutionTrace simulate_mpc(const MpcConfig& mpc, const MpcModel& model, const Scenario& sc,
                            MeasurementMode mode, const PlannerConfig& config,
                            const FailureRule& rule) {
  ExecutionTrace tr;
  tr.method = mpc.name;
  const auto start = Clock::now();
  State x = sc.true_x0;
  tr.states.push_back(x);
  std::vector<Input> warm;
  for (int k = 0; k < mpc.time.steps; ++k) {
    State seen = x;
    if (mode == MeasurementMode::kPerfect) seen(kBias) = 0.0;
    const State measured = biased_measurement(seen);
    const auto a = Clock::now();
    const MpcSolution s = mpc_step(measured, k, model, mpc, &warm);
    const auto b = Clock::now();
    warm = s.inputs;
    const Input u = s.inputs.front();
    x = zoh_rollout(x, {u}, mpc.time).back();
    tr.inputs.push_back(u);
    tr.states.push_back(x);
    tr.step_ms.push_back(ms_between(a, b));
    tr.timestamps.push_back(ms_between(start, Clock::now()) / 1000.0);
    if (!x.allFinite()) break;
  }
  truncate_at_divergence(tr);
  score(tr, sc, config, rule);
  return tr;
}

const MethodSummary& MetricsReport::find(const std::string& method, MeasurementMode mode) const {
  for (const auto& s : summary)
    if (s.method == method && s.mode == mode) return s;
  throw std::out_of_range("no summary for " + method + "/" + to_string(mode));
}

std::vector<MethodSummary> compute_summary(const std::vector<RunRecord>& rows) {
  struct Ref {
    double jc = std::numeric_limits<double>::infinity();
    double jg = std::numeric_limits<double>::infinity();
    double ji = std::numeric_limits<double>::infinity();
    bool oracle = false;
  };
  std::map<std::pair<int, int>, Ref> refs;  // (mode, env)
  for (const RunRecord& r : rows) {
    if (r.failed()) continue;
    Ref& ref = refs[{static_cast<int>(r.mode), r.env_id}];
    if (ref.oracle) continue;
    if (r.method == "O") {
      ref = {r.J_C, r.J_G, r.J_I, true};
      continue;
    }
    ref.jc = std::min(ref.jc, r.J_C);
    ref.jg = std::min(ref.jg, r.J_G);
    ref.ji = std::min(ref.ji, r.J_I);
  }

  std::vector<MethodSummary> out;
  auto slot = [&](const RunRecord& r) -> MethodSummary& {
    for (auto& s : out)
      if (s.method == r.method && s.mode == r.mode) return s;
    out.push_back({});
    out.back().method = r.method;
    out.back().mode = r.mode;
    return out.back();
  };
  std::map<std::pair<std::string, int>, int> finite_distances;
  for (const RunRecord& r : rows) {
    MethodSummary& s = slot(r);
    ++s.runs;
    if (std::isfinite(r.final_goal_distance)) {
      s.final_goal_distance += r.final_goal_distance;
      ++finite_distances[{r.method, static_cast<int>(r.mode)}];
    }
    if (r.failed()) {
      ++s.failures;
      continue;
    }
    const Ref& ref = refs.at({static_cast<int>(r.mode), r.env_id});
    s.CRI += std::max(0.0, r.J_C - ref.jc);
    s.GCI += std::max(0.0, r.J_G - ref.jg);
    s.ICI += std::max(0.0, r.J_I - ref.ji);
    s.offline_s += r.offline_s;
    s.online_ms_per_step += r.online_ms_per_step;
  }
  for (auto& s : out) {
    const int ok = s.runs - s.failures;
    s.failure_rate = s.runs > 0 ? static_cast<double>(s.failures) / s.runs : 0.0;
    if (ok > 0) {
      s.CRI /= ok;
      s.GCI /= ok;
      s.ICI /= ok;
      s.offline_s /= ok;
      s.online_ms_per_step /= ok;
    }
    const int n = finite_distances[{s.method, static_cast<int>(s.mode)}];
    s.final_goal_distance =
        n > 0 ? s.final_goal_distance / n : std::numeric_limits<double>::infinity();
  }
  return out;
}

MethodRunner builtin_runner(const std::string& method) {
  if (method == "DP")
    return plan_runner("DP", [](const Scenario& sc, const ExperimentConfig& c,
                                const PlannerConfig& pc) {
      return plan_density(problem_of(sc), pc, substream_seed(c.seed, "plan", sc.id));
    });
  if (method == "sampling")
    return plan_runner("sampling", [](const Scenario& sc, const ExperimentConfig& c,
                                      const PlannerConfig& pc) {
      return sampling_planner(problem_of(sc), pc, c.sampling_count,
                              substream_seed(c.seed, "plan", sc.id));
    });
  if (method == "search")
    return plan_runner("search", [](const Scenario& sc, const ExperimentConfig& c,
                                    const PlannerConfig& pc) {
      return search_planner(problem_of(sc), pc, c.search).plan;
    });
  if (method == "O")
    return plan_runner("O", [](const Scenario& sc, const ExperimentConfig& c,
                               const PlannerConfig& pc) {
      OracleConfig oc = c.oracle;
      oc.planner = pc;
      return oracle_solve(sc.env.grid, sc.env.goal, sc.bounds, sc.true_x0, oc,
                          substream_seed(c.seed, "plan", sc.id));
    });
  if (method.size() == 2 && method[0] == 'M' && method[1] >= '0' && method[1] <= '3') {
    const int index = method[1] - '0';
    return [index](const Scenario& sc, const std::vector<MeasurementMode>& modes,
                   const ExperimentConfig& c) {
      MpcConfig mpc = c.mpc;
      const MpcConfig v = MpcConfig::variant(index);
      mpc.name = v.name;
      mpc.tube_radius = v.tube_radius;
      const PlannerConfig pc = planner_of(c);
      const MpcModel model = prepare_mpc(sc.env.grid, sc.env.goal, sc.bounds, mpc.tube_radius);
      std::vector<RunRecord> out;
      for (MeasurementMode m : modes)
        out.push_back(record(mpc.name, sc, m, simulate_mpc(mpc, model, sc, m, pc, c.failure), 0.0));
      return out;
    };
  }
  throw std::invalid_argument("unknown method: " + method);
}

Scenario make_scenario(int id, const Environment& env, const ExperimentConfig& config) {
  Scenario sc;
  sc.id = id;
  sc.env = env;
  sc.belief =
      InitialDistribution::planner_default(env.start, config.position_sigma, config.bias_half_width);
  Rng rng = make_rng(config.seed, "initial-state", static_cast<std::uint64_t>(id));
  sc.true_x0 = sc.belief.sample(rng);
  sc.bounds = experiment_bounds(env.geometry, config.planner.speed_max);
  sc.gradients = OccGradients::of(env.grid);
  return sc;
}

MetricsReport evaluate_environments(const std::vector<Environment>& envs,
                                    const ExperimentConfig& config,
                                    const std::map<std::string, MethodRunner>& extra) {
  if (envs.empty()) throw std::invalid_argument("at least one environment required");
  if (config.methods.empty()) throw std::invalid_argument("at least one method required");
  std::vector<MethodRunner> runners;
  for (const auto& m : config.methods) {
    const auto it = extra.find(m);
    runners.push_back(it != extra.end() ? it->second : builtin_runner(m));
  }

  std::vector<std::vector<RunRecord>> per_env(envs.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr error;
  std::mutex error_mutex;
  auto work = [&] {
    for (std::size_t i = next++; i < envs.size(); i = next++) {
      try {
        const Scenario sc = make_scenario(static_cast<int>(i), envs[i], config);
        for (const auto& run : runners) {
          auto rows = run(sc, config.modes, config);
          per_env[i].insert(per_env[i].end(), rows.begin(), rows.end());
        }
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    }
  };
  const int workers = std::max(1, std::min<int>(config.workers, static_cast<int>(envs.size())));
  if (workers == 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  if (error) std::rethrow_exception(error);

  MetricsReport report;
  for (auto& rows : per_env) report.rows.insert(report.rows.end(), rows.begin(), rows.end());
  report.summary = compute_summary(report.rows);
  if (!config.output_dir.empty()) write_report(report, config.output_dir);
  return report;
}

MetricsReport evaluate_suite(const ExperimentConfig& config,
                             const std::map<std::string, MethodRunner>& extra) {
  if (config.environments < 1) throw std::invalid_argument("at least one environment required");
  std::vector<Environment> envs;
  EnvGenConfig gen = config.generator;
  gen.time = config.planner.time;
  for (int i = 0; i < config.environments; ++i)
    envs.push_back(
        generate_random_env(gen, substream_seed(config.seed, "env", static_cast<std::uint64_t>(i))));
  return evaluate_environments(envs, config, extra);
}

std::vector<Environment> ind_environments(const std::vector<std::string>& csv_paths,
                                          const ExperimentConfig& config,
                                          std::vector<std::string>* warnings,
                                          int windows_per_recording) {
  const EnvGenConfig& gen = config.generator;
  const TimeGrid& time = config.planner.time;
  std::vector<Environment> envs;
  for (std::size_t r = 0; r < csv_paths.size(); ++r) {
    const TrackExtent ext = scan_tracks_csv(csv_paths[r]);
    const GridGeometry geom = fit_geometry({ext.min, ext.max}, {}, gen.cell_size, gen.margin, time);
    Rng window_rng = make_rng(config.seed, "ind-window", r);
    const double latest = std::max(ext.t_first, ext.t_last - time.horizon());
    std::uniform_real_distribution<double> start_time(ext.t_first, latest);
    for (int w = 0; w < windows_per_recording; ++w) {
      const double t0 = latest > ext.t_first ? start_time(window_rng) : ext.t_first;
      const IngestResult ing = ingest_tracks_csv(csv_paths[r], geom, t0, t0 + time.horizon());
      Rng rng = make_rng(config.seed, "ind-endpoints", r * 1000 + static_cast<std::uint64_t>(w));
      auto uni = [&rng](double a, double b) {
        return a == b ? a : std::uniform_real_distribution<double>(a, b)(rng);
      };
      bool found = false;
      Environment env;
      for (int attempt = 0; attempt < gen.max_attempts && !found; ++attempt) {
        const Eigen::Vector2d lo = geom.extent_min(), hi = geom.extent_max();
        const Eigen::Vector2d sp(uni(lo.x(), hi.x()), uni(lo.y(), hi.y()));
        const double heading = uni(-std::numbers::pi, std::numbers::pi);
        const double dir = heading + uni(-gen.goal_heading_spread, gen.goal_heading_spread);
        const Eigen::Vector2d gp =
            sp + uni(gen.distance_min, gen.distance_max) * Eigen::Vector2d(std::cos(dir), std::sin(dir));
        if (!geom.cell_of(gp)) continue;
        if (ing.grid.lookup(sp, 0) >= gen.endpoint_max_occupancy ||
            ing.grid.lookup(gp, time.steps) >= gen.endpoint_max_occupancy)
          continue;
        env.start << sp.x(), sp.y(), heading, uni(gen.start_speed_min, gen.start_speed_max), 0.0;
        env.goal << gp.x(), gp.y(), wrap_angle(dir), 0.0, 0.0;
        found = true;
      }
      if (!found) {
        if (warnings)
          warnings->push_back("recording " + std::to_string(r) + " window " + std::to_string(w) +
                              ": no admissible start/goal, skipped");
        continue;
      }
      env.geometry = geom;
      env.obstacles = ing.obstacles;
      env.grid = ing.grid;
      env.seed = substream_seed(config.seed, "ind-endpoints", r * 1000 + static_cast<std::uint64_t>(w));
      envs.push_back(std::move(env));
    }
  }
  return envs;
}

MetricsReport ind_suite(const std::vector<std::string>& csv_paths, const ExperimentConfig& config,
                        int windows_per_recording) {
  std::vector<std::string> warnings;
  const auto envs = ind_environments(csv_paths, config, &warnings, windows_per_recording);
  MetricsReport report;
  if (!envs.empty()) report = evaluate_environments(envs, config);
  report.warnings.insert(report.warnings.begin(), warnings.begin(), warnings.end());
  return report;
}

void write_metrics_csv(std::ostream& os, const std::vector<RunRecord>& rows) {
  os << "method,env_id,mode,status,J_G,J_I,J_C,J_C_profile_max,J_C_profile_sum,"
        "final_goal_distance,offline_s,online_ms_per_step\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (const RunRecord& r : rows) {
    os << r.method << ',' << r.env_id << ',' << to_string(r.mode) << ',' << to_string(r.status)
       << ',' << num(r.J_G) << ',' << num(r.J_I) << ',' << num(r.J_C) << ','
       << num(r.J_C_profile_max) << ',' << num(r.J_C_profile_sum) << ','
       << num(r.final_goal_distance) << ',' << num(r.offline_s) << ','
       << num(r.online_ms_per_step) << '\n';
  }
}

void write_report(const MetricsReport& report, const std::string& dir) {
  std::filesystem::create_directories(dir);
  std::ofstream csv(std::filesystem::path(dir) / "metrics.csv");
  if (!csv) throw std::runtime_error("cannot write metrics.csv in " + dir);
  write_metrics_csv(csv, report.rows);
  save_json((std::filesystem::path(dir) / "summary.json").string(), report_to_json(report));
}

}  // namespace dplan
