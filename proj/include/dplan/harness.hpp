#pragma once

// Experiment orchestration: closed-loop execution of plans and MPC
// controllers, failure accounting, per-environment increments and reports.

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include "dplan/baselines.hpp"

namespace dplan {

enum class MeasurementMode { kPerfect, kBiased };
std::string to_string(MeasurementMode m);
MeasurementMode measurement_from_string(const std::string& s);

struct FailureRule {
  double collision_limit = 10.0;
  double goal_limit = 4.5;
};

struct ExecutionTrace {
  std::string method;
  std::vector<State> states;
  std::vector<Input> inputs;
  std::vector<double> step_ms;     // online compute per step
  std::vector<double> timestamps;  // seconds since the run started, per step
  double J_G = 0.0;
  double J_I = 0.0;
  double J_C = 0.0;
  CollisionProfile profile;
  double final_goal_distance = 0.0;
  bool diverged = false;
  PlanStatus status = PlanStatus::kOk;

  double online_ms_per_step() const;
};

/// Everything a run needs about one environment.
struct Scenario {
  int id = 0;
  Environment env;
  State true_x0 = State::Zero();  // includes the true heading bias
  InitialDistribution belief;     // what the planners assume about x0
  StateBounds bounds;
  OccGradients gradients;
};

/// Tracks a reference with the tracking controller. Perfect mode zeroes the
/// heading bias seen by the controller; biased mode keeps the true bias.
ExecutionTrace simulate_execution(const PlanResult& plan, const Scenario& scenario,
                                  MeasurementMode mode, const PlannerConfig& config,
                                  const FailureRule& rule = {});

/// Receding-horizon execution; the controller sees the true state or its
/// biased measurement.
ExecutionTrace simulate_mpc(const MpcConfig& mpc, const Scenario& scenario, MeasurementMode mode,
                            const PlannerConfig& config, const FailureRule& rule = {});
ExecutionTrace simulate_mpc(const MpcConfig& mpc, const MpcModel& model, const Scenario& scenario,
                            MeasurementMode mode, const PlannerConfig& config,
                            const FailureRule& rule = {});

struct ExperimentConfig {
  int environments = 20;
  EnvGenConfig generator;
  std::vector<std::string> methods{"DP", "M0", "M1", "M2", "M3", "O"};
  std::vector<MeasurementMode> modes{MeasurementMode::kPerfect};
  std::uint64_t seed = 0;
  FailureRule failure;
  double budget_s = 300.0;
  std::string output_dir;
  int workers = 1;
  PlannerConfig planner;
  MpcConfig mpc;  // template for M0..M3; radius and name come from the variant
  OracleConfig oracle;
  SearchConfig search;
  int sampling_count = 100;
  double position_sigma = 0.3;
  double bias_half_width = 0.1;
};

struct RunRecord {
  std::string method;
  int env_id = 0;
  MeasurementMode mode = MeasurementMode::kPerfect;
  PlanStatus status = PlanStatus::kOk;
  double J_G = 0.0;
  double J_I = 0.0;
  double J_C = 0.0;
  double J_C_profile_max = 0.0;
  double J_C_profile_sum = 0.0;
  double final_goal_distance = 0.0;
  double offline_s = 0.0;
  double online_ms_per_step = 0.0;

  bool failed() const { return status != PlanStatus::kOk; }
};

struct MethodSummary {
  std::string method;
  MeasurementMode mode = MeasurementMode::kPerfect;
  int runs = 0;
  int failures = 0;
  double failure_rate = 0.0;
  double CRI = 0.0;
  double GCI = 0.0;
  double ICI = 0.0;
  double offline_s = 0.0;
  double online_ms_per_step = 0.0;
  double final_goal_distance = 0.0;
};

struct MetricsReport {
  std::vector<RunRecord> rows;
  std::vector<MethodSummary> summary;
  std::vector<std::string> warnings;

  const MethodSummary& find(const std::string& method, MeasurementMode mode) const;
};

/// Increments against the per-environment reference: the oracle's value when
/// "O" succeeded there, otherwise the minimum over non-failed methods.
/// Failed runs count toward failure rates only.
std::vector<MethodSummary> compute_summary(const std::vector<RunRecord>& rows);

/// A method entry point. Runs may be cached across modes by the caller.
using MethodRunner = std::function<std::vector<RunRecord>(
    const Scenario&, const std::vector<MeasurementMode>&, const ExperimentConfig&)>;

/// Built-in runners for DP, sampling, search, M0..M3 and O.
MethodRunner builtin_runner(const std::string& method);

Scenario make_scenario(int id, const Environment& env, const ExperimentConfig& config);

/// Runs every configured method on the given environments.
MetricsReport evaluate_environments(const std::vector<Environment>& envs,
                                    const ExperimentConfig& config,
                                    const std::map<std::string, MethodRunner>& extra = {});

/// Generated environments from the root seed.
MetricsReport evaluate_suite(const ExperimentConfig& config,
                             const std::map<std::string, MethodRunner>& extra = {});

/// Environments from track recordings: 10 windows per recording with
/// admissible start and goal; windows without one are skipped with a warning.
std::vector<Environment> ind_environments(const std::vector<std::string>& csv_paths,
                                          const ExperimentConfig& config,
                                          std::vector<std::string>* warnings = nullptr,
                                          int windows_per_recording = 10);
MetricsReport ind_suite(const std::vector<std::string>& csv_paths, const ExperimentConfig& config,
                        int windows_per_recording = 10);

void write_metrics_csv(std::ostream& os, const std::vector<RunRecord>& rows);
void write_report(const MetricsReport& report, const std::string& dir);

}  // namespace dplan
