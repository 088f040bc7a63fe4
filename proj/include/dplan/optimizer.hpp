#pragma once

// Two-stage planner: multi-start optimization of deterministic reference
// rollouts with staged cost activation, then refinement of the best
// reference on density-weighted samples. Both stages step with ADAM.

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "dplan/collision.hpp"
#include "dplan/cost.hpp"
#include "dplan/density.hpp"
#include "dplan/envmap.hpp"
#include "dplan/policy.hpp"

namespace dplan {

struct AdamState {
  double lr = 0.05;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  Eigen::VectorXd m;
  Eigen::VectorXd v;
  int t = 0;

  static AdamState make(Eigen::Index dim, double lr, double beta1 = 0.9, double beta2 = 0.999,
                        double eps = 1e-8);
};

/// Bias-corrected ADAM update. Throws "gradient overflow" on a non-finite
/// gradient.
Eigen::VectorXd adam_step(AdamState& state, const Eigen::VectorXd& params,
                          const Eigen::VectorXd& grad);

/// Componentwise clip to [-limit, limit].
Eigen::VectorXd clip_gradient(const Eigen::VectorXd& grad, double limit);

struct PlannerConfig {
  int multi_starts = 100;  // M
  int samples = 50;        // S
  int iters_init = 100;
  int iters_local = 100;
  double goal_threshold = 1.0;
  double lr_init = 0.05;
  double lr_local = 0.02;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double grad_clip = 10.0;
  double budget_s = 300.0;
  int knot_count = 10;
  TimeGrid time;
  InputBox box;
  TrackingGains gains;
  double saturation_margin = 0.2;
  double speed_max = 10.0;
  CostWeights weights;

  Controller controller() const { return Controller::for_box(box, gains, saturation_margin); }
};

/// Position inside the grid extent, speed in [0, speed_max], heading and
/// bias unbounded.
StateBounds experiment_bounds(const GridGeometry& geom, double speed_max = 10.0);

/// Shared planning inputs for one environment.
struct PlanningProblem {
  const OccupancyGrid* env = nullptr;
  OccGradients gradients;
  State goal = State::Zero();
  StateBounds bounds = StateBounds::unbounded();
  InitialDistribution dist;

  PlanningProblem(const OccupancyGrid& grid, const State& goal, const InitialDistribution& dist,
                  const StateBounds& bounds);
  CostContext context(const CostWeights& w) const;
};

/// Stage-1 evaluation: the reference itself with density one and its
/// reference inputs.
struct ReferenceEvaluation {
  ReferenceTrajectory ref;
  DensityRollout rollout;
  CostBreakdown cost;  // with the flags passed in
  double goal_distance = 0.0;
};

ReferenceEvaluation evaluate_reference(const PolicyParams& p, const PlanningProblem& problem,
                                       const PlannerConfig& config, const StageFlags& flags);
Eigen::VectorXd reference_cost_gradient(const ReferenceEvaluation& eval,
                                        const PlanningProblem& problem,
                                        const PlannerConfig& config, const StageFlags& flags);

/// Stage-2 evaluation: closed-loop samples with LE densities; J_I on the
/// applied inputs. Summed over samples.
struct SampleEvaluation {
  ReferenceTrajectory ref;
  std::vector<DensityRollout> rollouts;
  std::vector<std::vector<SampleStages>> tapes;
  std::vector<std::vector<Input>> inputs;
  CostBreakdown cost;
};

SampleEvaluation evaluate_samples(const PolicyParams& p, const std::vector<InitialSample>& samples,
                                  const PlanningProblem& problem, const PlannerConfig& config,
                                  bool record_tapes);
Eigen::VectorXd sample_cost_gradient(const SampleEvaluation& eval, const PlanningProblem& problem,
                                     const PlannerConfig& config);

/// Same cost through an arbitrary predictor backend (no applied inputs
/// available, so J_I uses the reference inputs).
CostBreakdown predicted_sample_cost(const DensityPredictor& predictor, const PolicyParams& p,
                                    const std::vector<InitialSample>& samples,
                                    const PlanningProblem& problem, const PlannerConfig& config);

/// Breakdown re-weighted with other flags.
CostBreakdown with_flags(CostBreakdown b, const CostWeights& w, const StageFlags& flags);

enum class PlanStatus { kOk, kFailedGoal, kFailedCollision, kTimeout };
std::string to_string(PlanStatus s);
PlanStatus plan_status_from_string(const std::string& s);

struct IterationRecord {
  int stage = 1;
  int iteration = 0;
  CostBreakdown cost;  // fully-active cost of the tracked iterate
  double best_total = 0.0;
};

struct PlanResult {
  std::string method = "DP";
  PolicyParams policy;
  CostBreakdown cost;
  std::vector<IterationRecord> history;
  double stage1_s = 0.0;
  double stage2_s = 0.0;
  double offline_s = 0.0;
  CollisionProfile initial_profile;  // profile at the stage-2 input
  CollisionProfile final_profile;
  PlanStatus status = PlanStatus::kOk;
  double planned_goal_distance = 0.0;
  // Zero-order-hold input per step; when set, the plan executes open loop.
  std::vector<Input> open_loop;
};

struct Stage1Result {
  PolicyParams best;
  CostBreakdown best_cost;
  std::vector<IterationRecord> history;  // best-so-far per iteration
  double initial_best_total = 0.0;       // best fully-active cost among the samples
  double seconds = 0.0;
  bool timed_out = false;
};

/// Multi-start stage. Throws "initialization failed" when every start
/// diverges.
Stage1Result stage1_initialize(const PlanningProblem& problem, const PlannerConfig& config,
                               std::uint64_t seed);
/// Stage 1 from externally supplied starting policies.
Stage1Result stage1_from(std::vector<PolicyParams> starts, const PlanningProblem& problem,
                         const PlannerConfig& config, double budget_s);

/// Density-weighted refinement. `predictor` null selects the exact LE
/// adjoint; other backends are differentiated by central differences.
PlanResult stage2_refine(const PolicyParams& p_star, const PlanningProblem& problem,
                         const PlannerConfig& config, std::uint64_t seed,
                         const DensityPredictor* predictor = nullptr);

/// Stage 1 followed by stage 2, with planning-time status.
PlanResult plan_density(const PlanningProblem& problem, const PlannerConfig& config,
                        std::uint64_t seed, const DensityPredictor* predictor = nullptr);

/// Reference states with density one and zero log-density.
DensityRollout unit_density_rollout(const ReferenceTrajectory& ref);

/// Failure rule on a unit-density rollout: J_C above the collision limit,
/// then final position farther than the goal limit.
PlanStatus rollout_status(const DensityRollout& rollout, const PlanningProblem& problem,
                          const PlannerConfig& config, double collision_limit = 10.0,
                          double goal_limit = 4.5);

/// Status of a planned nominal reference under the failure thresholds.
PlanStatus nominal_status(const ReferenceTrajectory& ref, const PlanningProblem& problem,
                          const PlannerConfig& config, double collision_limit = 10.0,
                          double goal_limit = 4.5);

}  // namespace dplan
