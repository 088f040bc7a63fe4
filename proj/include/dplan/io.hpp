#pragma once

// JSON serialization for configs, environments, plans, traces and reports.
// Reading merges over the defaults: absent keys keep their default value,
// unknown keys are rejected. Non-finite numbers are written as the strings
// "inf", "-inf" and "nan".

#include <ostream>
#include <string>

#include <json.hpp>

#include "dplan/harness.hpp"

namespace dplan {

using nlohmann::json;

void to_json(json& j, const TimeGrid& v);
void from_json(const json& j, TimeGrid& v);
void to_json(json& j, const InputBox& v);
void from_json(const json& j, InputBox& v);
void to_json(json& j, const StateBounds& v);
void from_json(const json& j, StateBounds& v);
void to_json(json& j, const TrackingGains& v);
void from_json(const json& j, TrackingGains& v);
void to_json(json& j, const CostWeights& v);
void from_json(const json& j, CostWeights& v);
void to_json(json& j, const StageFlags& v);
void from_json(const json& j, StageFlags& v);
void to_json(json& j, const PlannerConfig& v);
void from_json(const json& j, PlannerConfig& v);

void to_json(json& j, const GridGeometry& v);
void from_json(const json& j, GridGeometry& v);
void to_json(json& j, const ObstaclePose& v);
void from_json(const json& j, ObstaclePose& v);
void to_json(json& j, const ObstacleSpec& v);
void from_json(const json& j, ObstacleSpec& v);
void to_json(json& j, const EnvGenConfig& v);
void from_json(const json& j, EnvGenConfig& v);
/// The grid is not stored; it is rasterized from the obstacles on load.
void to_json(json& j, const Environment& v);
void from_json(const json& j, Environment& v);

void to_json(json& j, const SearchConfig& v);
void from_json(const json& j, SearchConfig& v);
void to_json(json& j, const SolverSettings& v);
void from_json(const json& j, SolverSettings& v);
void to_json(json& j, const MpcConfig& v);
void from_json(const json& j, MpcConfig& v);
void to_json(json& j, const OracleConfig& v);
void from_json(const json& j, OracleConfig& v);
void to_json(json& j, const FailureRule& v);
void from_json(const json& j, FailureRule& v);
void to_json(json& j, const ExperimentConfig& v);
void from_json(const json& j, ExperimentConfig& v);

void to_json(json& j, const PolicyParams& v);
void from_json(const json& j, PolicyParams& v);
void to_json(json& j, const CostBreakdown& v);
void from_json(const json& j, CostBreakdown& v);
void to_json(json& j, const PlanResult& v);
void from_json(const json& j, PlanResult& v);

void to_json(json& j, const ExecutionTrace& v);
void to_json(json& j, const MethodSummary& v);
json report_to_json(const MetricsReport& report);

json load_json(const std::string& path);
void save_json(const std::string& path, const json& j);

Environment load_environment(const std::string& path);
void save_environment(const std::string& path, const Environment& env);
ExperimentConfig load_experiment_config(const std::string& path);
PlanResult load_plan(const std::string& path);
void save_plan(const std::string& path, const PlanResult& plan);

/// Columns: stage, iteration, J_G, J_I, J_B, J_C, total, best_total.
void write_history_csv(std::ostream& os, const PlanResult& plan);
/// Columns: k, t, p_x, p_y, theta, v, theta_bias, omega, a, step_ms.
void write_trace_csv(std::ostream& os, const ExecutionTrace& trace, double dt);

}  // namespace dplan
