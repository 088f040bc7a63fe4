#include "dplan/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "dplan/rng.hpp"
#include "dplan/sensitivity.hpp"

namespace dplan {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

}  // namespace

DensityRollout unit_density_rollout(const ReferenceTrajectory& ref) {
  DensityRollout r;
  r.states = ref.states;
  r.densities.assign(ref.states.size(), 1.0);
  r.g_log.assign(ref.states.size(), 0.0);
  return r;
}

AdamState AdamState::make(Eigen::Index dim, double lr, double beta1, double beta2, double eps) {
  AdamState s;
  s.lr = lr;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.eps = eps;
  s.m = Eigen::VectorXd::Zero(dim);
  s.v = Eigen::VectorXd::Zero(dim);
  return s;
}

Eigen::VectorXd adam_step(AdamState& s, const Eigen::VectorXd& params,
                          const Eigen::VectorXd& grad) {
  if (!grad.allFinite()) throw std::runtime_error("gradient overflow");
  if (s.m.size() != params.size()) s.m = Eigen::VectorXd::Zero(params.size());
  if (s.v.size() != params.size()) s.v = Eigen::VectorXd::Zero(params.size());
  if (grad.size() != params.size()) throw std::invalid_argument("gradient size mismatch");
  ++s.t;
  s.m = s.beta1 * s.m + (1.0 - s.beta1) * grad;
  s.v = s.beta2 * s.v + (1.0 - s.beta2) * grad.cwiseAbs2();
  const double c1 = 1.0 - std::pow(s.beta1, s.t);
  const double c2 = 1.0 - std::pow(s.beta2, s.t);
  const Eigen::ArrayXd mhat = s.m.array() / c1;
  const Eigen::ArrayXd vhat = s.v.array() / c2;
  return params - (s.lr * mhat / (vhat.sqrt() + s.eps)).matrix();
}

Eigen::VectorXd clip_gradient(const Eigen::VectorXd& grad, double limit) {
  return grad.cwiseMax(-limit).cwiseMin(limit);
}

StateBounds experiment_bounds(const GridGeometry& geom, double speed_max) {
  StateBounds b = StateBounds::unbounded();
  b.lower(kPx) = geom.extent_min().x();
  b.lower(kPy) = geom.extent_min().y();
  b.upper(kPx) = geom.extent_max().x();
  b.upper(kPy) = geom.extent_max().y();
  b.lower(kV) = 0.0;
  b.upper(kV) = speed_max;
  return b;
}

PlanningProblem::PlanningProblem(const OccupancyGrid& grid, const State& goal_state,
                                 const InitialDistribution& distribution,
                                 const StateBounds& state_bounds)
    : env(&grid),
      gradients(OccGradients::of(grid)),
      goal(goal_state),
      bounds(state_bounds),
      dist(distribution) {}

CostContext PlanningProblem::context(const CostWeights& w) const {
  CostContext c;
  c.env = env;
  c.gradients = &gradients;
  c.goal = goal;
  c.bounds = bounds;
  c.weights = w;
  return c;
}

CostBreakdown with_flags(CostBreakdown b, const CostWeights& w, const StageFlags& flags) {
  b.flags = flags;
  b.alpha_goal = w.alpha_goal;
  b.alpha_input = w.alpha_input;
  b.alpha_bounds = flags.bounds ? w.alpha_bounds : 0.0;
  b.alpha_collision = flags.collision ? w.alpha_collision : 0.0;
  b.total = b.recombine();
  return b;
}

ReferenceEvaluation evaluate_reference(const PolicyParams& p, const PlanningProblem& problem,
                                       const PlannerConfig& config, const StageFlags& flags) {
  ReferenceEvaluation e;
  e.ref = recover_reference(p, config.time);
  e.rollout = unit_density_rollout(e.ref);
  e.cost = rollout_cost(e.rollout, e.ref.inputs, problem.context(config.weights), flags);
  e.goal_distance = (e.ref.states.back().head<2>() - problem.goal.head<2>()).norm();
  return e;
}

Eigen::VectorXd reference_cost_gradient(const ReferenceEvaluation& e,
                                        const PlanningProblem& problem,
                                        const PlannerConfig& config, const StageFlags& flags) {
  const RolloutSeeds seeds =
      rollout_seeds(e.rollout, e.ref.inputs, problem.context(config.weights), flags);
  ReferenceAdjoint adj(config.time);
  adj.nodes = seeds.d_state;
  adj.node_inputs = seeds.d_input;
  return reference_gradient(e.ref, adj);
}

SampleEvaluation evaluate_samples(const PolicyParams& p, const std::vector<InitialSample>& samples,
                                  const PlanningProblem& problem, const PlannerConfig& config,
                                  bool record_tapes) {
  SampleEvaluation e;
  e.ref = recover_reference(p, config.time);
  const Controller ctrl = config.controller();
  e.rollouts.reserve(samples.size());
  e.inputs.reserve(samples.size());
  std::vector<SampleStages> tape;
  for (const auto& s : samples) {
    e.rollouts.push_back(propagate(s.x0, s.rho0, e.ref, ctrl, &tape));
    e.inputs.push_back(applied_inputs(ctrl, e.ref, tape));
    if (record_tapes) e.tapes.push_back(tape);
  }
  e.cost = total_cost(e.rollouts, e.inputs, problem.context(config.weights), StageFlags::all());
  return e;
}

Eigen::VectorXd sample_cost_gradient(const SampleEvaluation& e, const PlanningProblem& problem,
                                     const PlannerConfig& config) {
  if (e.tapes.size() != e.rollouts.size())
    throw std::invalid_argument("sample evaluation has no tapes");
  const Controller ctrl = config.controller();
  const CostContext ctx = problem.context(config.weights);
  ReferenceAdjoint adj(config.time);
  for (std::size_t i = 0; i < e.rollouts.size(); ++i) {
    const RolloutSeeds seeds = rollout_seeds(e.rollouts[i], e.inputs[i], ctx, StageFlags::all());
    sample_adjoint(ctrl, e.ref, e.tapes[i], seeds, adj);
  }
  return reference_gradient(e.ref, adj);
}

CostBreakdown predicted_sample_cost(const DensityPredictor& predictor, const PolicyParams& p,
                                    const std::vector<InitialSample>& samples,
                                    const PlanningProblem& problem, const PlannerConfig& config) {
  const ReferenceTrajectory ref = recover_reference(p, config.time);
  const auto rollouts = predict_batch(predictor, samples, p, config.time);
  const std::vector<std::vector<Input>> inputs(rollouts.size(), ref.inputs);
  return total_cost(rollouts, inputs, problem.context(config.weights), StageFlags::all());
}

std::string to_string(PlanStatus s) {
  switch (s) {
    case PlanStatus::kOk: return "ok";
    case PlanStatus::kFailedGoal: return "failed_goal";
    case PlanStatus::kFailedCollision: return "failed_collision";
    case PlanStatus::kTimeout: return "timeout";
  }
  return "ok";
}

PlanStatus plan_status_from_string(const std::string& s) {
  if (s == "ok") return PlanStatus::kOk;
  if (s == "failed_goal") return PlanStatus::kFailedGoal;
  if (s == "failed_collision") return PlanStatus::kFailedCollision;
  if (s == "timeout") return PlanStatus::kTimeout;
  throw std::invalid_argument("unknown plan status: " + s);
}

PlanStatus rollout_status(const DensityRollout& r, const PlanningProblem& problem,
                          const PlannerConfig& config, double collision_limit,
                          double goal_limit) {
  const double jc = collision_cost(r, *problem.env, problem.gradients, config.weights.beta);
  if (jc > collision_limit) return PlanStatus::kFailedCollision;
  const double d = (r.states.back().head<2>() - problem.goal.head<2>()).norm();
  if (!(d <= goal_limit)) return PlanStatus::kFailedGoal;
  return PlanStatus::kOk;
}

PlanStatus nominal_status(const ReferenceTrajectory& ref, const PlanningProblem& problem,
                          const PlannerConfig& config, double collision_limit,
                          double goal_limit) {
  return rollout_status(unit_density_rollout(ref), problem, config, collision_limit, goal_limit);
}

Stage1Result stage1_from(std::vector<PolicyParams> starts, const PlanningProblem& problem,
                         const PlannerConfig& config, double budget_s) {
  if (starts.empty()) throw std::invalid_argument("stage 1 needs at least one start");
  const auto t0 = Clock::now();
  const CostWeights& w = config.weights;
  const std::size_t m = starts.size();

  struct Track {
    PolicyParams p;
    AdamState adam;
    StageFlags flags = StageFlags::none();
    bool alive = true;
    double best_total = std::numeric_limits<double>::infinity();
    PolicyParams best_p;
    CostBreakdown best_cost;
  };
  std::vector<Track> tracks(m);
  for (std::size_t i = 0; i < m; ++i) {
    tracks[i].p = std::move(starts[i]);
    tracks[i].adam =
        AdamState::make(tracks[i].p.dimension(), config.lr_init, config.beta1, config.beta2);
  }

  Stage1Result out;
  double global_best = std::numeric_limits<double>::infinity();
  int global_index = -1;
  for (int it = 0; it <= config.iters_init; ++it) {
    const bool last = it == config.iters_init;
    for (std::size_t i = 0; i < m; ++i) {
      Track& tr = tracks[i];
      if (!tr.alive) continue;
      ReferenceEvaluation e;
      try {
        e = evaluate_reference(tr.p, problem, config, tr.flags);
      } catch (const std::runtime_error&) {
        tr.alive = false;
        continue;
      }
      const CostBreakdown full = with_flags(e.cost, w, StageFlags::all());
      if (!std::isfinite(full.total)) {
        tr.alive = false;
        continue;
      }
      if (full.total < tr.best_total) {
        tr.best_total = full.total;
        tr.best_p = tr.p;
        tr.best_cost = full;
      }
      if (tr.best_total < global_best) {
        global_best = tr.best_total;
        global_index = static_cast<int>(i);
      }
      if (last) continue;
      if (e.goal_distance < config.goal_threshold) tr.flags.bounds = true;
      if (tr.flags.bounds && e.cost.J_B == 0.0) tr.flags.collision = true;
      const Eigen::VectorXd g =
          clip_gradient(reference_cost_gradient(e, problem, config, tr.flags), config.grad_clip);
      tr.p.set_flat(adam_step(tr.adam, tr.p.flat(), g));
      tr.p.clamp_to(config.box);
    }
    if (it == 0) out.initial_best_total = global_best;
    if (global_index >= 0) {
      IterationRecord rec;
      rec.stage = 1;
      rec.iteration = it;
      rec.cost = tracks[global_index].best_cost;
      rec.best_total = global_best;
      out.history.push_back(rec);
    }
    if (seconds_since(t0) > budget_s) {
      out.timed_out = true;
      break;
    }
  }
  if (global_index < 0) throw std::runtime_error("initialization failed");
  out.best = tracks[global_index].best_p;
  out.best_cost = tracks[global_index].best_cost;
  out.seconds = seconds_since(t0);
  return out;
}

Stage1Result stage1_initialize(const PlanningProblem& problem, const PlannerConfig& config,
                               std::uint64_t seed) {
  if (config.multi_starts < 1) throw std::invalid_argument("multi_starts must be >= 1");
  State start = problem.dist.mean();
  start(kBias) = 0.0;
  auto starts = sample_params(config.multi_starts, config.box,
                              substream_seed(seed, "policy-sampling"), config.knot_count, start,
                              config.time.horizon());
  return stage1_from(std::move(starts), problem, config, config.budget_s);
}

namespace {

Eigen::VectorXd finite_difference_gradient(const DensityPredictor& predictor,
                                           const PolicyParams& p,
                                           const std::vector<InitialSample>& samples,
                                           const PlanningProblem& problem,
                                           const PlannerConfig& config) {
  constexpr double kStep = 1e-4;
  const Eigen::VectorXd x = p.flat();
  Eigen::VectorXd g(x.size());
  PolicyParams q = p;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    Eigen::VectorXd xp = x, xm = x;
    xp(i) += kStep;
    xm(i) -= kStep;
    q.set_flat(xp);
    const double fp = predicted_sample_cost(predictor, q, samples, problem, config).total;
    q.set_flat(xm);
    const double fm = predicted_sample_cost(predictor, q, samples, problem, config).total;
    g(i) = (fp - fm) / (2.0 * kStep);
  }
  return g;
}

}  // namespace

PlanResult stage2_refine(const PolicyParams& p_star, const PlanningProblem& problem,
                         const PlannerConfig& config, std::uint64_t seed,
                         const DensityPredictor* predictor) {
  if (config.samples < 1) throw std::invalid_argument("samples must be >= 1");
  const auto t0 = Clock::now();
  const auto samples =
      sample_initial(problem.dist, config.samples, substream_seed(seed, "initial-state"));
  const bool exact =
      predictor == nullptr || dynamic_cast<const ExactLiouvillePredictor*>(predictor) != nullptr;

  PlanResult out;
  PolicyParams p = p_star;
  AdamState adam = AdamState::make(p.dimension(), config.lr_local, config.beta1, config.beta2);
  double best_total = std::numeric_limits<double>::infinity();
  PolicyParams best_p = p_star;

  for (int it = 0; it <= config.iters_local; ++it) {
    const bool last = it == config.iters_local;
    CostBreakdown cost;
    Eigen::VectorXd grad;
    if (exact) {
      const SampleEvaluation e = evaluate_samples(p, samples, problem, config, !last);
      cost = e.cost;
      if (it == 0) out.initial_profile = collision_profile(e.rollouts, *problem.env);
      if (!last) grad = sample_cost_gradient(e, problem, config);
    } else {
      cost = predicted_sample_cost(*predictor, p, samples, problem, config);
      if (it == 0)
        out.initial_profile =
            collision_profile(predict_batch(*predictor, samples, p, config.time), *problem.env);
      if (!last) grad = finite_difference_gradient(*predictor, p, samples, problem, config);
    }
    if (std::isfinite(cost.total) && cost.total < best_total) {
      best_total = cost.total;
      best_p = p;
      out.cost = cost;
    }
    out.history.push_back({2, it, cost, best_total});
    if (last) break;
    if (seconds_since(t0) > config.budget_s) {
      out.status = PlanStatus::kTimeout;
      break;
    }
    p.set_flat(adam_step(adam, p.flat(), clip_gradient(grad, config.grad_clip)));
    p.clamp_to(config.box);
  }

  out.policy = best_p;
  if (exact) {
    out.final_profile = collision_profile(
        evaluate_samples(best_p, samples, problem, config, false).rollouts, *problem.env);
  } else {
    out.final_profile = collision_profile(predict_batch(*predictor, samples, best_p, config.time),
                                          *problem.env);
  }
  const ReferenceTrajectory ref = recover_reference(best_p, config.time);
  out.planned_goal_distance = (ref.states.back().head<2>() - problem.goal.head<2>()).norm();
  if (out.status != PlanStatus::kTimeout) out.status = nominal_status(ref, problem, config);
  out.stage2_s = seconds_since(t0);
  out.offline_s = out.stage2_s;
  return out;
}

PlanResult plan_density(const PlanningProblem& problem, const PlannerConfig& config,
                        std::uint64_t seed, const DensityPredictor* predictor) {
  const auto t0 = Clock::now();
  const Stage1Result s1 = stage1_initialize(problem, config, seed);
  PlannerConfig rest = config;
  rest.budget_s = std::max(0.0, config.budget_s - s1.seconds);
  PlanResult out;
  if (s1.timed_out) {
    out.policy = s1.best;
    out.cost = s1.best_cost;
    out.status = PlanStatus::kTimeout;
  } else {
    out = stage2_refine(s1.best, problem, rest, seed, predictor);
  }
  out.history.insert(out.history.begin(), s1.history.begin(), s1.history.end());
  out.method = "DP";
  out.stage1_s = s1.seconds;
  out.offline_s = seconds_since(t0);
  if (out.offline_s > config.budget_s) out.status = PlanStatus::kTimeout;
  if (s1.timed_out) {
    const ReferenceTrajectory ref = recover_reference(out.policy, config.time);
    out.planned_goal_distance = (ref.states.back().head<2>() - problem.goal.head<2>()).norm();
  }
  return out;
}

}  // namespace dplan
