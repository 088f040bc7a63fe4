// dplan command-line interface.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dplan/io.hpp"

using namespace dplan;
namespace fs = std::filesystem;

namespace {

struct Common {
  std::string config;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string out = ".";
  std::string method;
  std::string measurement;
};

void add_common(CLI::App* app, Common& c) {
  app->add_option("--config", c.config, "Experiment config JSON")->check(CLI::ExistingFile);
  app->add_option_function<std::uint64_t>(
      "--seed", [&c](std::uint64_t s) { c.seed = s, c.seed_set = true; }, "Root seed");
  app->add_option("--out", c.out, "Output directory");
  app->add_option("--method", c.method, "Method name (comma list for evaluate)");
  app->add_option("--measurement", c.measurement, "perfect or biased")
      ->check(CLI::IsMember({"perfect", "biased"}));
}

std::vector<std::string> split(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  for (std::string item; std::getline(ss, item, ',');)
    if (!item.empty()) out.push_back(item);
  return out;
}

ExperimentConfig load_config(const Common& c) {
  ExperimentConfig cfg = c.config.empty() ? ExperimentConfig{} : load_experiment_config(c.config);
  if (c.seed_set) cfg.seed = c.seed;
  if (!c.method.empty()) cfg.methods = split(c.method);
  if (!c.measurement.empty()) cfg.modes = {measurement_from_string(c.measurement)};
  cfg.generator.time = cfg.planner.time;
  return cfg;
}

fs::path out_dir(const Common& c) {
  fs::create_directories(c.out);
  return fs::path(c.out);
}

void save_env_files(const fs::path& dir, const Environment& env) {
  save_environment((dir / "env.json").string(), env);
  write_grid_binary((dir / "grid.bin").string(), env.grid);
}

void print_summary(const MetricsReport& report) {
  std::printf("%-9s %-8s %5s %8s %12s %12s %12s %11s %11s\n", "method", "mode", "runs", "fail",
              "CRI", "GCI", "ICI", "offline_s", "online_ms");
  for (const auto& s : report.summary)
    std::printf("%-9s %-8s %5d %7.1f%% %12.5g %12.5g %12.5g %11.4g %11.4g\n", s.method.c_str(),
                to_string(s.mode).c_str(), s.runs, 100.0 * s.failure_rate, s.CRI, s.GCI, s.ICI,
                s.offline_s, s.online_ms_per_step);
  for (const auto& w : report.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
}

PlanResult run_planner(const std::string& method, const Scenario& sc, const ExperimentConfig& cfg) {
  PlannerConfig pc = cfg.planner;
  pc.budget_s = cfg.budget_s;
  const PlanningProblem problem(sc.env.grid, sc.env.goal, sc.belief, sc.bounds);
  const std::uint64_t seed = substream_seed(cfg.seed, "plan", static_cast<std::uint64_t>(sc.id));
  if (method == "DP") return plan_density(problem, pc, seed);
  if (method == "sampling") return sampling_planner(problem, pc, cfg.sampling_count, seed);
  if (method == "search") return search_planner(problem, pc, cfg.search).plan;
  if (method == "O") {
    OracleConfig oc = cfg.oracle;
    oc.planner = pc;
    return oracle_solve(sc.env.grid, sc.env.goal, sc.bounds, sc.true_x0, oc, seed);
  }
  throw std::invalid_argument("plan: unknown method " + method +
                              " (expected DP, sampling, search or O)");
}

Eigen::VectorXd parse_numbers(const std::string& s, int min_count, int max_count,
                              const char* what) {
  const auto parts = split(s);
  if (static_cast<int>(parts.size()) < min_count || static_cast<int>(parts.size()) > max_count)
    throw std::invalid_argument(std::string(what) + ": expected " + std::to_string(min_count) +
                                ".." + std::to_string(max_count) + " comma-separated numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(parts.size()));
  for (std::size_t i = 0; i < parts.size(); ++i) v(static_cast<Eigen::Index>(i)) = std::stod(parts[i]);
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Density-based motion planning under uncertainty"};
  app.require_subcommand(1);

  Common gen_c, plan_c, sim_c, eval_c, ingest_c, cmp_c;
  std::string plan_env, sim_env, sim_plan, eval_tracks, cmp_env, ingest_csv, ingest_start,
      ingest_goal;
  double t_start = 0.0, t_end = 0.0;
  int windows = 10;

  auto* gen = app.add_subcommand("gen-env", "Generate a random environment (env.json, grid.bin)");
  add_common(gen, gen_c);

  auto* plan = app.add_subcommand("plan", "Plan offline on an environment (plan.json)");
  add_common(plan, plan_c);
  plan->add_option("--env", plan_env, "Environment JSON")->required()->check(CLI::ExistingFile);

  auto* sim = app.add_subcommand("simulate", "Execute a plan or an MPC variant (trace.json/csv)");
  add_common(sim, sim_c);
  sim->add_option("--env", sim_env, "Environment JSON")->required()->check(CLI::ExistingFile);
  sim->add_option("--plan", sim_plan, "Plan JSON; otherwise --method M0..M3")
      ->check(CLI::ExistingFile);

  auto* eval = app.add_subcommand("evaluate", "Run the benchmark (metrics.csv, summary.json)");
  add_common(eval, eval_c);
  eval->add_option("--tracks", eval_tracks, "Comma list of track CSVs; evaluates their windows");
  eval->add_option("--windows", windows, "Windows per track recording")->check(CLI::PositiveNumber);

  auto* ingest = app.add_subcommand("ingest", "Build an environment from a track CSV window");
  add_common(ingest, ingest_c);
  ingest->add_option("--csv", ingest_csv, "Track CSV")->required()->check(CLI::ExistingFile);
  ingest->add_option("--t-start", t_start, "Window start [s]")->required();
  ingest->add_option("--t-end", t_end, "Window end [s]")->required();
  ingest->add_option("--start", ingest_start, "Start state x,y[,heading,speed]");
  ingest->add_option("--goal", ingest_goal, "Goal position x,y");

  auto* cmp = app.add_subcommand("compare", "Run all configured methods on one environment");
  add_common(cmp, cmp_c);
  cmp->add_option("--env", cmp_env, "Environment JSON")->required()->check(CLI::ExistingFile);

  CLI11_PARSE(app, argc, argv);

  try {
    if (gen->parsed()) {
      const ExperimentConfig cfg = load_config(gen_c);
      const Environment env = generate_random_env(cfg.generator, substream_seed(cfg.seed, "env"));
      const fs::path dir = out_dir(gen_c);
      save_env_files(dir, env);
      std::printf("environment: %zu obstacles, %dx%d cells, distance %.2f m -> %s\n",
                  env.obstacles.size(), env.geometry.cells_x, env.geometry.cells_y,
                  (env.goal.head<2>() - env.start.head<2>()).norm(), dir.string().c_str());
    } else if (plan->parsed()) {
      const ExperimentConfig cfg = load_config(plan_c);
      const std::string method = plan_c.method.empty() ? "DP" : plan_c.method;
      const Scenario sc = make_scenario(0, load_environment(plan_env), cfg);
      const PlanResult result = run_planner(method, sc, cfg);
      const fs::path dir = out_dir(plan_c);
      save_plan((dir / "plan.json").string(), result);
      std::ofstream history(dir / "history.csv");
      write_history_csv(history, result);
      std::printf("%s: status %s, planned goal distance %.3f m, offline %.3f s\n",
                  result.method.c_str(), to_string(result.status).c_str(),
                  result.planned_goal_distance, result.offline_s);
    } else if (sim->parsed()) {
      const ExperimentConfig cfg = load_config(sim_c);
      const Scenario sc = make_scenario(0, load_environment(sim_env), cfg);
      const MeasurementMode mode = cfg.modes.empty() ? MeasurementMode::kPerfect : cfg.modes[0];
      PlannerConfig pc = cfg.planner;
      ExecutionTrace trace;
      if (!sim_plan.empty()) {
        trace = simulate_execution(load_plan(sim_plan), sc, mode, pc, cfg.failure);
      } else {
        const std::string method = sim_c.method.empty() ? "M0" : sim_c.method;
        if (method.size() != 2 || method[0] != 'M' || method[1] < '0' || method[1] > '3')
          throw std::invalid_argument("simulate: give --plan or --method M0..M3");
        MpcConfig mpc = cfg.mpc;
        const MpcConfig v = MpcConfig::variant(method[1] - '0');
        mpc.name = v.name;
        mpc.tube_radius = v.tube_radius;
        trace = simulate_mpc(mpc, sc, mode, pc, cfg.failure);
      }
      const fs::path dir = out_dir(sim_c);
      save_json((dir / "trace.json").string(), json(trace));
      std::ofstream csv(dir / "trace.csv");
      write_trace_csv(csv, trace, pc.time.dt);
      std::printf("%s (%s): status %s, J_G %.4g, J_I %.4g, J_C %.4g, goal distance %.3f m, "
                  "online %.4g ms/step\n",
                  trace.method.c_str(), to_string(mode).c_str(), to_string(trace.status).c_str(),
                  trace.J_G, trace.J_I, trace.J_C, trace.final_goal_distance,
                  trace.online_ms_per_step());
    } else if (eval->parsed()) {
      ExperimentConfig cfg = load_config(eval_c);
      cfg.output_dir = out_dir(eval_c).string();
      const MetricsReport report =
          eval_tracks.empty() ? evaluate_suite(cfg) : ind_suite(split(eval_tracks), cfg, windows);
      if (report.rows.empty()) write_report(report, cfg.output_dir);
      print_summary(report);
    } else if (ingest->parsed()) {
      const ExperimentConfig cfg = load_config(ingest_c);
      const TrackExtent ext = scan_tracks_csv(ingest_csv);
      const GridGeometry geom = fit_geometry({ext.min, ext.max}, {}, cfg.generator.cell_size,
                                             cfg.generator.margin, cfg.planner.time);
      if (!(t_end > t_start)) throw std::invalid_argument("ingest: --t-end must exceed --t-start");
      const IngestResult ing = ingest_tracks_csv(ingest_csv, geom, t_start, t_end);
      for (const auto& w : ing.warnings) std::fprintf(stderr, "warning: %s\n", w.c_str());
      Environment env;
      env.geometry = geom;
      env.obstacles = ing.obstacles;
      env.grid = ing.grid;
      if (!ingest_start.empty()) {
        const Eigen::VectorXd s = parse_numbers(ingest_start, 2, 4, "--start");
        env.start.head(s.size()) = s;
      }
      if (!ingest_goal.empty()) env.goal.head<2>() = parse_numbers(ingest_goal, 2, 2, "--goal");
      const fs::path dir = out_dir(ingest_c);
      save_env_files(dir, env);
      std::printf("ingested %zu tracks into %dx%d cells -> %s\n", ing.obstacles.size(),
                  geom.cells_x, geom.cells_y, dir.string().c_str());
    } else if (cmp->parsed()) {
      ExperimentConfig cfg = load_config(cmp_c);
      if (cmp_c.measurement.empty())
        cfg.modes = {MeasurementMode::kPerfect, MeasurementMode::kBiased};
      cfg.output_dir = out_dir(cmp_c).string();
      const MetricsReport report = evaluate_environments({load_environment(cmp_env)}, cfg);
      std::printf("%-9s %-8s %-17s %12s %12s %12s %10s %11s\n", "method", "mode", "status", "J_G",
                  "J_I", "J_C", "goal_m", "online_ms");
      for (const auto& r : report.rows)
        std::printf("%-9s %-8s %-17s %12.5g %12.5g %12.5g %10.3f %11.4g\n", r.method.c_str(),
                    to_string(r.mode).c_str(), to_string(r.status).c_str(), r.J_G, r.J_I, r.J_C,
                    r.final_goal_distance, r.online_ms_per_step);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
