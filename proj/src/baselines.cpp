#include "dplan/baselines.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <stdexcept>
#include <tuple>
#include <unordered_map>

#include "dplan/rng.hpp"

namespace dplan {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

State mean_start(const PlanningProblem& problem) {
  State s = problem.dist.mean();
  s(kBias) = 0.0;
  return s;
}

void finish_plan(PlanResult& out, const PlanningProblem& problem, const PlannerConfig& config) {
  const ReferenceEvaluation e = evaluate_reference(out.policy, problem, config, StageFlags::all());
  out.cost = e.cost;
  out.planned_goal_distance = e.goal_distance;
  out.status = nominal_status(e.ref, problem, config);
}

State rk4_hold(const State& x, const Input& u, double h) {
  const State k1 = vehicle_field<double>(x, u);
  const State k2 = vehicle_field<double>(State(x + 0.5 * h * k1), u);
  const State k3 = vehicle_field<double>(State(x + 0.5 * h * k2), u);
  const State k4 = vehicle_field<double>(State(x + h * k3), u);
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

double hinge_sq(const State& x, const StateBounds& b, State* grad) {
  double s = 0.0;
  if (grad) grad->setZero();
  for (int i = 0; i < kStateDim; ++i) {
    const double lo = std::max(0.0, b.lower(i) - x(i));
    const double hi = std::max(0.0, x(i) - b.upper(i));
    s += lo * lo + hi * hi;
    if (grad) (*grad)(i) = 2.0 * (hi - lo);
  }
  return s;
}

Eigen::VectorXd flatten(const std::vector<Input>& u) {
  Eigen::VectorXd f(2 * static_cast<Eigen::Index>(u.size()));
  for (std::size_t j = 0; j < u.size(); ++j) f.segment<2>(2 * static_cast<Eigen::Index>(j)) = u[j];
  return f;
}

void unflatten(const Eigen::VectorXd& f, std::vector<Input>& u) {
  for (std::size_t j = 0; j < u.size(); ++j) u[j] = f.segment<2>(2 * static_cast<Eigen::Index>(j));
}

}  // namespace

// ---------------------------------------------------------------- sampling

PlanResult sampling_planner(const PlanningProblem& problem, const PlannerConfig& config,
                            int samples, std::uint64_t seed) {
  if (samples < 1) throw std::invalid_argument("samples must be >= 1");
  const auto t0 = Clock::now();
  const auto params = sample_params(samples, config.box, substream_seed(seed, "policy-sampling"),
                                    config.knot_count, mean_start(problem),
                                    config.time.horizon());
  PlanResult out;
  out.method = "sampling";
  double best = std::numeric_limits<double>::infinity();
  out.policy = params.front();
  for (const auto& p : params) {
    double total;
    try {
      total = evaluate_reference(p, problem, config, StageFlags::all()).cost.total;
    } catch (const std::runtime_error&) {
      continue;
    }
    if (std::isfinite(total) && total < best) {
      best = total;
      out.policy = p;
    }
  }
  finish_plan(out, problem, config);
  out.offline_s = out.stage1_s = seconds_since(t0);
  return out;
}

// ------------------------------------------------------------------ search

std::vector<Input> search_primitives(const InputBox& box) {
  std::vector<Input> prims;
  const double om[3] = {box.lower(kOmega), 0.0, box.upper(kOmega)};
  const double ac[3] = {box.lower(kAccel), 0.0, box.upper(kAccel)};
  for (double w : om)
    for (double a : ac) prims.emplace_back(w, a);
  return prims;
}

PolicyParams knots_from_inputs(const std::vector<Input>& inputs, const State& start,
                               const TimeGrid& time) {
  if (static_cast<int>(inputs.size()) != time.steps)
    throw std::invalid_argument("one input per step required");
  PolicyParams p(time.steps + 1, start, time.horizon());
  for (int k = 0; k < time.steps; ++k) p.knots.col(k) = inputs[k];
  p.knots.col(time.steps) = inputs.back();
  return p;
}

SearchResult search_planner(const PlanningProblem& problem, const PlannerConfig& config,
                            const SearchConfig& search) {
  const auto t0 = Clock::now();
  const TimeGrid& time = config.time;
  const CostWeights& w = config.weights;
  const int per_prim = std::max(1, static_cast<int>(std::lround(search.primitive_s / time.dt)));
  const int depth_cap = std::min(search.depth_cap, time.steps / per_prim);
  const double h = time.substep();
  const auto prims = search_primitives(config.box);
  const double a_max = std::max(std::abs(config.box.lower(kAccel)),
                                std::abs(config.box.upper(kAccel)));
  const double q_pos = std::min(w.q_goal(kPx), w.q_goal(kPy));
  const OccupancyGrid& env = *problem.env;

  struct Node {
    State x;
    int depth = 0;
    double g = 0.0;
    int parent = -1;
    int prim = -1;
  };
  std::vector<Node> nodes;
  nodes.push_back({mean_start(problem), 0, 0.0, -1, -1});

  auto goal_dist = [&](const State& x) { return (x.head<2>() - problem.goal.head<2>()).norm(); };
  auto terminal = [&](const State& x) {
    const State d = x - problem.goal;
    return w.alpha_goal * (w.q_goal.array() * d.array().square()).sum();
  };
  // Where braking at a_max brings the vehicle to rest.
  auto rest = [&](const State& x) {
    State r = x;
    const double stop = x(kV) * std::abs(x(kV)) / (2.0 * a_max);
    r(kPx) += stop * std::cos(x(kTheta));
    r(kPy) += stop * std::sin(x(kTheta));
    return r;
  };
  auto is_goal = [&](const Node& n) {
    return n.depth == depth_cap || goal_dist(rest(n.x)) < config.goal_threshold;
  };
  // Lower bound on the terminal goal term given the remaining time.
  auto heuristic = [&](const Node& n) {
    if (n.depth == depth_cap) return terminal(n.x);
    if (is_goal(n)) return terminal(rest(n.x));
    const double tr = (depth_cap - n.depth) * per_prim * time.dt;
    const double reach = std::abs(n.x(kV)) * tr + 0.5 * a_max * tr * tr;
    const double gap = std::max(0.0, goal_dist(n.x) - reach);
    return w.alpha_goal * q_pos * gap * gap;
  };
  auto key = [&](const Node& n) {
    const Eigen::Vector2d c = env.geometry.cell_coord(n.x.head<2>());
    const double th = wrap_angle(n.x(kTheta));
    const long hb = std::lround((th + std::numbers::pi) / (2.0 * std::numbers::pi) * search.heading_bins) %
                    search.heading_bins;
    const long vb = std::lround(n.x(kV) / search.speed_bin);
    return std::make_tuple(n.depth, static_cast<long>(std::floor(c.x())),
                           static_cast<long>(std::floor(c.y())), hb, vb);
  };
  struct KeyHash {
    std::size_t operator()(const std::tuple<int, long, long, long, long>& k) const {
      std::uint64_t s = 0;
      auto mix = [&](std::uint64_t v) { s = splitmix64(s ^ v); };
      mix(static_cast<std::uint64_t>(std::get<0>(k)));
      mix(static_cast<std::uint64_t>(std::get<1>(k)));
      mix(static_cast<std::uint64_t>(std::get<2>(k)));
      mix(static_cast<std::uint64_t>(std::get<3>(k)));
      mix(static_cast<std::uint64_t>(std::get<4>(k)));
      return static_cast<std::size_t>(s);
    }
  };
  std::unordered_map<std::tuple<int, long, long, long, long>, double, KeyHash> seen;

  using Entry = std::tuple<double, std::size_t>;  // (f, node index); index breaks ties
  std::priority_queue<Entry, std::vector<Entry>, std::greater<>> open;
  open.emplace(heuristic(nodes[0]), 0);
  seen[key(nodes[0])] = 0.0;

  SearchResult res;
  int found = -1;
  while (!open.empty()) {
    const auto [f, idx] = open.top();
    open.pop();
    if (is_goal(nodes[idx])) {
      found = static_cast<int>(idx);
      break;
    }
    if (res.expansions >= search.max_expansions) {
      res.capped = true;
      break;
    }
    ++res.expansions;
    const Node parent = nodes[idx];
    for (std::size_t pi = 0; pi < prims.size(); ++pi) {
      const Input& u = prims[pi];
      Node child{parent.x, parent.depth + 1, parent.g, static_cast<int>(idx), static_cast<int>(pi)};
      const int k0 = parent.depth * per_prim;
      bool finite = true;
      for (int s = 0; s < per_prim; ++s) {
        for (int j = 0; j < time.substeps; ++j) child.x = rk4_hold(child.x, u, h);
        if (!child.x.allFinite()) {
          finite = false;
          break;
        }
        const int k = k0 + s + 1;
        child.g += w.alpha_input * (w.q_input.array() * u.array().square()).sum();
        child.g += w.alpha_bounds * w.q_bound * hinge_sq(child.x, problem.bounds, nullptr);
        const double wc = sample_coll_weight(child.x, k, env, 1.0);
        if (wc != 0.0) {
          const Eigen::Vector2d d =
              child.x.head<2>() - desired_position(child.x, k, env, problem.gradients, w.beta);
          child.g += w.alpha_collision * wc * d.squaredNorm();
        }
      }
      if (!finite) continue;
      const auto kk = key(child);
      const auto it = seen.find(kk);
      if (it != seen.end() && it->second <= child.g) continue;
      seen[kk] = child.g;
      nodes.push_back(child);
      open.emplace(child.g + heuristic(child), nodes.size() - 1);
    }
  }
  res.exhausted = found < 0 && !res.capped;
  if (found < 0) {
    // Closest generated node, scored as if it were terminal.
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const double s = nodes[i].g + terminal(rest(nodes[i].x));
      if (s < best) {
        best = s;
        found = static_cast<int>(i);
      }
    }
  }

  for (int i = found; i > 0; i = nodes[i].parent) res.primitives.push_back(nodes[i].prim);
  std::reverse(res.primitives.begin(), res.primitives.end());

  // Held primitives, then braking to rest for the remaining steps.
  std::vector<Input> inputs;
  State x = nodes[0].x;
  for (int pi : res.primitives)
    for (int s = 0; s < per_prim; ++s) {
      inputs.push_back(prims[pi]);
      for (int j = 0; j < time.substeps; ++j) x = rk4_hold(x, prims[pi], h);
    }
  while (static_cast<int>(inputs.size()) < time.steps) {
    const double a = std::clamp(-x(kV) / time.dt, -a_max, a_max);
    const Input u(0.0, a);
    inputs.push_back(u);
    for (int j = 0; j < time.substeps; ++j) x = rk4_hold(x, u, h);
  }

  res.plan.method = "search";
  res.plan.policy = knots_from_inputs(inputs, nodes[0].x, time);
  res.plan.policy.clamp_to(config.box);
  finish_plan(res.plan, problem, config);
  if (res.exhausted) res.plan.status = PlanStatus::kFailedGoal;
  res.plan.offline_s = res.plan.stage1_s = seconds_since(t0);
  return res;
}

// --------------------------------------------------------------------- MPC

MpcConfig MpcConfig::variant(int index) {
  static const double radii[4] = {0.0, 0.3, 0.5, 1.0};
  if (index < 0 || index > 3) throw std::invalid_argument("MPC variant must be 0..3");
  MpcConfig c;
  c.name = "M" + std::to_string(index);
  c.tube_radius = radii[index];
  return c;
}

MpcModel prepare_mpc(const OccupancyGrid& env, const State& goal, const StateBounds& bounds,
                     double tube_radius) {
  if (!(tube_radius >= 0.0)) throw std::invalid_argument("tube radius must be >= 0");
  MpcModel m;
  m.grid = inflate(env, tube_radius);
  m.bounds = bounds;
  m.goal = goal;
  for (int i : {kPx, kPy}) {
    m.bounds.lower(i) += tube_radius;
    m.bounds.upper(i) -= tube_radius;
  }
  return m;
}

std::vector<State> zoh_rollout(const State& x0, const std::vector<Input>& inputs,
                               const TimeGrid& time) {
  std::vector<State> xs{x0};
  xs.reserve(inputs.size() + 1);
  State x = x0;
  const double h = time.substep();
  for (const Input& u : inputs) {
    for (int j = 0; j < time.substeps; ++j) x = rk4_hold(x, u, h);
    xs.push_back(x);
  }
  return xs;
}

MpcTerms mpc_cost(const State& x0, int t_h, const std::vector<Input>& inputs,
                    const MpcModel& model, const TimeGrid& time, const CostWeights& w,
                    Eigen::VectorXd* grad) {
  const int H = static_cast<int>(inputs.size());
  if (H < 1) throw std::invalid_argument("horizon must be >= 1");
  const double h = time.substep();
  const int last_slice = model.grid.geometry.slices() - 1;

  // Forward pass, recording RK4 stage states for the adjoint.
  std::vector<std::array<State, 4>> stages;
  if (grad) stages.reserve(static_cast<std::size_t>(H) * time.substeps);
  std::vector<State> xs{x0};
  State x = x0;
  for (const Input& u : inputs) {
    for (int j = 0; j < time.substeps; ++j) {
      const State k1 = vehicle_field<double>(x, u);
      const State s2 = x + 0.5 * h * k1;
      const State k2 = vehicle_field<double>(s2, u);
      const State s3 = x + 0.5 * h * k2;
      const State k3 = vehicle_field<double>(s3, u);
      const State s4 = x + h * k3;
      const State k4 = vehicle_field<double>(s4, u);
      if (grad) stages.push_back({x, s2, s3, s4});
      x = x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    xs.push_back(x);
  }

  MpcTerms t;
  std::vector<State> seed(H + 1, State::Zero());
  for (const Input& u : inputs) t.J_I += (w.q_input.array() * u.array().square()).sum();
  for (int j = 1; j <= H; ++j) {
    const int k = std::min(t_h + j, last_slice);
    Eigen::Vector2d gp;
    const double p = model.grid.bilinear(xs[j].head<2>(), k, &gp);
    t.J_C += p * p;
    State gb;
    t.J_B += w.q_bound * hinge_sq(xs[j], model.bounds, &gb);
    seed[j] += w.alpha_bounds * w.q_bound * gb;
    seed[j].head<2>() += w.alpha_collision * 2.0 * p * gp;
  }
  const State d = xs[H] - model.goal;
  t.J_G = std::sqrt((w.q_goal.array() * d.array().square()).sum());
  if (t.J_G > 0.0) seed[H] += w.alpha_goal * (w.q_goal.array() * d.array()).matrix() / t.J_G;
  t.total = w.alpha_input * t.J_I + w.alpha_goal * t.J_G + w.alpha_collision * t.J_C +
            w.alpha_bounds * t.J_B;
  if (!grad) return t;

  // Reverse pass through the held-input RK4 substeps.
  grad->setZero(2 * H);
  State lam = seed[H];
  auto fx_t = [](const State& s, const State& v) {
    return State(vehicle_state_jacobian(s).transpose() * v);
  };
  for (int j = H - 1; j >= 0; --j) {
    Input lu = Input::Zero();
    for (int s = time.substeps - 1; s >= 0; --s) {
      const auto& st = stages[static_cast<std::size_t>(j) * time.substeps + s];
      State dk1 = (h / 6.0) * lam, dk2 = (h / 3.0) * lam, dk3 = (h / 3.0) * lam;
      const State dk4 = (h / 6.0) * lam;
      State lx = lam;
      lu += Input(dk4(kTheta), dk4(kV));
      const State l4 = fx_t(st[3], dk4);
      lx += l4;
      dk3 += h * l4;
      lu += Input(dk3(kTheta), dk3(kV));
      const State l3 = fx_t(st[2], dk3);
      lx += l3;
      dk2 += 0.5 * h * l3;
      lu += Input(dk2(kTheta), dk2(kV));
      const State l2 = fx_t(st[1], dk2);
      lx += l2;
      dk1 += 0.5 * h * l2;
      lu += Input(dk1(kTheta), dk1(kV));
      lx += fx_t(st[0], dk1);
      lam = lx;
    }
    grad->segment<2>(2 * j) =
        lu + w.alpha_input * 2.0 * (w.q_input.array() * inputs[j].array()).matrix();
    lam += seed[j];
  }
  return t;
}

MpcSolution solve_mpc(const State& x0, int t_h, std::vector<Input> init, const MpcModel& model,
                       const TimeGrid& time, const CostWeights& w, const InputBox& box,
                       const SolverSettings& solver) {
  for (Input& u : init) u = box.clamp(u);
  MpcSolution best;
  best.cost.total = std::numeric_limits<double>::infinity();
  best.inputs = init;
  std::vector<Input> u = std::move(init);
  Eigen::VectorXd f = flatten(u);
  AdamState adam = AdamState::make(f.size(), solver.lr, solver.beta1, solver.beta2);
  const double decay =
      solver.iterations > 1 && solver.lr_final > 0.0 && solver.lr > 0.0
          ? std::pow(solver.lr_final / solver.lr, 1.0 / (solver.iterations - 1))
          : 1.0;
  Eigen::VectorXd g;
  best.capped = true;
  for (int it = 0; it <= solver.iterations; ++it) {
    const MpcTerms c = mpc_cost(x0, t_h, u, model, time, w, &g);
    // Gradient with components pushing out of the box removed.
    Eigen::VectorXd pg = g;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const int d = static_cast<int>(i % 2);
      if ((f(i) <= box.lower(d) && pg(i) > 0.0) || (f(i) >= box.upper(d) && pg(i) < 0.0))
        pg(i) = 0.0;
    }
    best.residual = pg.norm();
    best.iterations = it;
    if (std::isfinite(c.total) && c.total < best.cost.total) {
      best.cost = c;
      best.inputs = u;
    }
    if (it == solver.iterations) break;
    if (best.residual < solver.tolerance) {
      best.capped = false;
      break;
    }
    f = adam_step(adam, f, clip_gradient(g, solver.grad_clip));
    for (Eigen::Index i = 0; i < f.size(); ++i) {
      const int d = static_cast<int>(i % 2);
      f(i) = std::clamp(f(i), box.lower(d), box.upper(d));
    }
    unflatten(f, u);
    adam.lr *= decay;
  }
  return best;
}

MpcSolution mpc_step(const State& current, int t_h, const MpcModel& model,
                     const MpcConfig& config, const std::vector<Input>* warm) {
  if (config.horizon < 1) throw std::invalid_argument("horizon must be >= 1");
  if (t_h < 0 || t_h > config.time.steps) throw std::out_of_range("t_h outside the horizon");
  std::vector<Input> init(config.horizon, Input::Zero());
  if (config.warm_start && warm && !warm->empty()) {
    for (int j = 0; j < config.horizon; ++j) {
      const std::size_t src = std::min<std::size_t>(j + 1, warm->size() - 1);
      init[j] = (*warm)[src];
    }
  }
  return solve_mpc(current, t_h, std::move(init), model, config.time, config.weights,
                    config.box, config.solver);
}

// ------------------------------------------------------------------ oracle

PlanResult oracle_solve(const OccupancyGrid& env, const State& goal, const StateBounds& bounds,
                        const State& true_x0, const OracleConfig& config, std::uint64_t seed) {
  const auto t0 = Clock::now();
  const PlannerConfig& pc = config.planner;
  const TimeGrid& time = pc.time;
  const MpcModel model = prepare_mpc(env, goal, bounds, 0.0);
  const PlanningProblem problem(env, goal, InitialDistribution::dirac(true_x0), bounds);

  auto to_zoh = [&](const PolicyParams& p) {
    std::vector<Input> u(time.steps);
    for (int k = 0; k < time.steps; ++k) u[k] = p.input_at(time.time(k) + 0.5 * time.dt);
    return u;
  };
  std::vector<std::vector<Input>> starts{std::vector<Input>(time.steps, Input::Zero())};
  if (config.stage1_start) {
    PlannerConfig c = pc;
    c.budget_s = std::numeric_limits<double>::infinity();
    starts.push_back(to_zoh(stage1_initialize(problem, c, seed).best));
  }
  if (config.random_starts > 0) {
    for (const auto& p : sample_params(config.random_starts, pc.box,
                                       substream_seed(seed, "oracle-starts"), pc.knot_count,
                                       true_x0, time.horizon()))
      starts.push_back(to_zoh(p));
  }

  MpcSolution best;
  best.cost.total = std::numeric_limits<double>::infinity();
  for (auto& s : starts) {
    MpcSolution sol =
        solve_mpc(true_x0, 0, std::move(s), model, time, pc.weights, pc.box, config.solver);
    if (sol.cost.total < best.cost.total) best = std::move(sol);
  }

  PlanResult out;
  out.method = "O";
  out.open_loop = best.inputs;
  State start = true_x0;
  start(kBias) = 0.0;
  out.policy = knots_from_inputs(best.inputs, start, time);
  DensityRollout r;
  r.states = zoh_rollout(true_x0, best.inputs, time);
  r.densities.assign(r.states.size(), 1.0);
  r.g_log.assign(r.states.size(), 0.0);
  out.cost = rollout_cost(r, best.inputs, problem.context(pc.weights), StageFlags::all());
  out.planned_goal_distance = (r.states.back().head<2>() - goal.head<2>()).norm();
  out.status = rollout_status(r, problem, pc);
  out.offline_s = out.stage1_s = seconds_since(t0);
  return out;
}

}  // namespace dplan
