#include "dplan/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <set>
#include <stdexcept>

namespace dplan {

namespace {

json num(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double to_double(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto& s = j.get_ref<const std::string&>();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  }
  throw std::invalid_argument("expected a number, got " + j.dump());
}

template <class Derived>
json vec(const Eigen::MatrixBase<Derived>& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(num(v(i)));
  return a;
}

template <class Derived>
void read_vec(const json& j, Eigen::MatrixBase<Derived>& v) {
  if (!j.is_array() || static_cast<Eigen::Index>(j.size()) != v.size())
    throw std::invalid_argument("expected an array of " + std::to_string(v.size()) +
                                " numbers, got " + j.dump());
  for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = to_double(j[static_cast<std::size_t>(i)]);
}

// Reads optional keys over the current values and rejects unknown ones.
class Reader {
 public:
  Reader(const json& j, const char* what) : j_(j), what_(what) {
    if (!j.is_object()) throw std::invalid_argument(std::string(what) + ": expected an object");
  }
  ~Reader() noexcept(false) {
    if (std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_.items())
      if (!seen_.count(key))
        throw std::invalid_argument(std::string(what_) + ": unknown key \"" + key + "\"");
  }

  const json* find(const char* key) {
    seen_.insert(key);
    const auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }

  void operator()(const char* key, double& v) {
    if (const json* e = find(key)) v = to_double(*e);
  }
  void operator()(const char* key, State& v) {
    if (const json* e = find(key)) read_vec(*e, v);
  }
  void operator()(const char* key, Input& v) {
    if (const json* e = find(key)) read_vec(*e, v);
  }
  template <class T>
  void operator()(const char* key, T& v) {
    if (const json* e = find(key)) e->get_to(v);
  }

 private:
  const json& j_;
  const char* what_;
  std::set<std::string> seen_;
};

json flags_json(const StageFlags& f) { return {{"bounds", f.bounds}, {"collision", f.collision}}; }

}  // namespace

void to_json(json& j, const TimeGrid& v) {
  j = {{"dt", v.dt}, {"steps", v.steps}, {"substeps", v.substeps}};
}
void from_json(const json& j, TimeGrid& v) {
  Reader r(j, "time");
  r("dt", v.dt);
  r("steps", v.steps);
  r("substeps", v.substeps);
}

void to_json(json& j, const InputBox& v) { j = {{"lower", vec(v.lower)}, {"upper", vec(v.upper)}}; }
void from_json(const json& j, InputBox& v) {
  Reader r(j, "box");
  r("lower", v.lower);
  r("upper", v.upper);
}

void to_json(json& j, const StateBounds& v) {
  j = {{"lower", vec(v.lower)}, {"upper", vec(v.upper)}};
}
void from_json(const json& j, StateBounds& v) {
  Reader r(j, "bounds");
  r("lower", v.lower);
  r("upper", v.upper);
}

void to_json(json& j, const TrackingGains& v) {
  j = {{"k_theta", v.k_theta}, {"k_lat", v.k_lat}, {"k_v", v.k_v}, {"k_lon", v.k_lon}};
}
void from_json(const json& j, TrackingGains& v) {
  Reader r(j, "gains");
  r("k_theta", v.k_theta);
  r("k_lat", v.k_lat);
  r("k_v", v.k_v);
  r("k_lon", v.k_lon);
}

void to_json(json& j, const CostWeights& v) {
  j = {{"alpha_goal", v.alpha_goal},
       {"alpha_input", v.alpha_input},
       {"alpha_bounds", v.alpha_bounds},
       {"alpha_collision", v.alpha_collision},
       {"q_goal", vec(v.q_goal)},
       {"q_input", vec(v.q_input)},
       {"q_bound", v.q_bound},
       {"beta", v.beta}};
}
void from_json(const json& j, CostWeights& v) {
  Reader r(j, "weights");
  r("alpha_goal", v.alpha_goal);
  r("alpha_input", v.alpha_input);
  r("alpha_bounds", v.alpha_bounds);
  r("alpha_collision", v.alpha_collision);
  r("q_goal", v.q_goal);
  r("q_input", v.q_input);
  r("q_bound", v.q_bound);
  r("beta", v.beta);
}

void to_json(json& j, const StageFlags& v) { j = flags_json(v); }
void from_json(const json& j, StageFlags& v) {
  Reader r(j, "flags");
  r("bounds", v.bounds);
  r("collision", v.collision);
}

void to_json(json& j, const PlannerConfig& v) {
  j = {{"multi_starts", v.multi_starts},
       {"samples", v.samples},
       {"iters_init", v.iters_init},
       {"iters_local", v.iters_local},
       {"goal_threshold", v.goal_threshold},
       {"lr_init", v.lr_init},
       {"lr_local", v.lr_local},
       {"beta1", v.beta1},
       {"beta2", v.beta2},
       {"grad_clip", v.grad_clip},
       {"budget_s", v.budget_s},
       {"knot_count", v.knot_count},
       {"time", v.time},
       {"box", v.box},
       {"gains", v.gains},
       {"saturation_margin", v.saturation_margin},
       {"speed_max", v.speed_max},
       {"weights", v.weights}};
}
void from_json(const json& j, PlannerConfig& v) {
  Reader r(j, "planner");
  r("multi_starts", v.multi_starts);
  r("samples", v.samples);
  r("iters_init", v.iters_init);
  r("iters_local", v.iters_local);
  r("goal_threshold", v.goal_threshold);
  r("lr_init", v.lr_init);
  r("lr_local", v.lr_local);
  r("beta1", v.beta1);
  r("beta2", v.beta2);
  r("grad_clip", v.grad_clip);
  r("budget_s", v.budget_s);
  r("knot_count", v.knot_count);
  r("time", v.time);
  r("box", v.box);
  r("gains", v.gains);
  r("saturation_margin", v.saturation_margin);
  r("speed_max", v.speed_max);
  r("weights", v.weights);
}

void to_json(json& j, const GridGeometry& v) {
  j = {{"origin", vec(v.origin)}, {"cell_size", v.cell_size}, {"cells_x", v.cells_x},
       {"cells_y", v.cells_y},    {"steps", v.steps},         {"dt", v.dt}};
}
void from_json(const json& j, GridGeometry& v) {
  Reader r(j, "geometry");
  r("origin", v.origin);
  r("cell_size", v.cell_size);
  r("cells_x", v.cells_x);
  r("cells_y", v.cells_y);
  r("steps", v.steps);
  r("dt", v.dt);
}

void to_json(json& j, const ObstaclePose& v) {
  j = {{"x", v.x}, {"y", v.y}, {"heading", v.heading}, {"speed", v.speed}, {"present", v.present}};
}
void from_json(const json& j, ObstaclePose& v) {
  Reader r(j, "pose");
  r("x", v.x);
  r("y", v.y);
  r("heading", v.heading);
  r("speed", v.speed);
  r("present", v.present);
}

void to_json(json& j, const ObstacleSpec& v) {
  j = {{"id", v.id},       {"length", v.length}, {"width", v.width},
       {"sigma", v.sigma}, {"skew", v.skew},     {"skew_shift", v.skew_shift},
       {"trajectory", v.trajectory}};
}
void from_json(const json& j, ObstacleSpec& v) {
  Reader r(j, "obstacle");
  r("id", v.id);
  r("length", v.length);
  r("width", v.width);
  r("sigma", v.sigma);
  r("skew", v.skew);
  r("skew_shift", v.skew_shift);
  r("trajectory", v.trajectory);
}

void to_json(json& j, const EnvGenConfig& v) {
  j = {{"obstacles_min", v.obstacles_min},
       {"obstacles_max", v.obstacles_max},
       {"distance_min", v.distance_min},
       {"distance_max", v.distance_max},
       {"goal_heading_spread", v.goal_heading_spread},
       {"start_speed_min", v.start_speed_min},
       {"start_speed_max", v.start_speed_max},
       {"start_position_jitter", v.start_position_jitter},
       {"obstacle_sigma_min", v.obstacle_sigma_min},
       {"obstacle_sigma_max", v.obstacle_sigma_max},
       {"obstacle_length_min", v.obstacle_length_min},
       {"obstacle_length_max", v.obstacle_length_max},
       {"obstacle_lateral_max", v.obstacle_lateral_max},
       {"moving_probability", v.moving_probability},
       {"obstacle_speed_min", v.obstacle_speed_min},
       {"obstacle_speed_max", v.obstacle_speed_max},
       {"cell_size", v.cell_size},
       {"margin", v.margin},
       {"endpoint_max_occupancy", v.endpoint_max_occupancy},
       {"max_attempts", v.max_attempts},
       {"time", v.time}};
}
void from_json(const json& j, EnvGenConfig& v) {
  Reader r(j, "generator");
  r("obstacles_min", v.obstacles_min);
  r("obstacles_max", v.obstacles_max);
  r("distance_min", v.distance_min);
  r("distance_max", v.distance_max);
  r("goal_heading_spread", v.goal_heading_spread);
  r("start_speed_min", v.start_speed_min);
  r("start_speed_max", v.start_speed_max);
  r("start_position_jitter", v.start_position_jitter);
  r("obstacle_sigma_min", v.obstacle_sigma_min);
  r("obstacle_sigma_max", v.obstacle_sigma_max);
  r("obstacle_length_min", v.obstacle_length_min);
  r("obstacle_length_max", v.obstacle_length_max);
  r("obstacle_lateral_max", v.obstacle_lateral_max);
  r("moving_probability", v.moving_probability);
  r("obstacle_speed_min", v.obstacle_speed_min);
  r("obstacle_speed_max", v.obstacle_speed_max);
  r("cell_size", v.cell_size);
  r("margin", v.margin);
  r("endpoint_max_occupancy", v.endpoint_max_occupancy);
  r("max_attempts", v.max_attempts);
  r("time", v.time);
}

void to_json(json& j, const Environment& v) {
  j = {{"geometry", v.geometry}, {"obstacles", v.obstacles}, {"start", vec(v.start)},
       {"goal", vec(v.goal)},    {"seed", v.seed}};
}
void from_json(const json& j, Environment& v) {
  {
    Reader r(j, "environment");
    r("geometry", v.geometry);
    r("obstacles", v.obstacles);
    r("start", v.start);
    r("goal", v.goal);
    r("seed", v.seed);
  }
  v.geometry.validate();
  v.grid = rasterize(v.obstacles, v.geometry);
}

void to_json(json& j, const SearchConfig& v) {
  j = {{"primitive_s", v.primitive_s},
       {"depth_cap", v.depth_cap},
       {"max_expansions", v.max_expansions},
       {"heading_bins", v.heading_bins},
       {"speed_bin", v.speed_bin}};
}
void from_json(const json& j, SearchConfig& v) {
  Reader r(j, "search");
  r("primitive_s", v.primitive_s);
  r("depth_cap", v.depth_cap);
  r("max_expansions", v.max_expansions);
  r("heading_bins", v.heading_bins);
  r("speed_bin", v.speed_bin);
}

void to_json(json& j, const SolverSettings& v) {
  j = {{"iterations", v.iterations}, {"lr", v.lr},
       {"lr_final", v.lr_final},     {"beta1", v.beta1},
       {"beta2", v.beta2},           {"grad_clip", v.grad_clip},
       {"tolerance", v.tolerance}};
}
void from_json(const json& j, SolverSettings& v) {
  Reader r(j, "solver");
  r("iterations", v.iterations);
  r("lr", v.lr);
  r("lr_final", v.lr_final);
  r("beta1", v.beta1);
  r("beta2", v.beta2);
  r("grad_clip", v.grad_clip);
  r("tolerance", v.tolerance);
}

void to_json(json& j, const MpcConfig& v) {
  j = {{"name", v.name},     {"horizon", v.horizon}, {"tube_radius", v.tube_radius},
       {"warm_start", v.warm_start}, {"solver", v.solver}, {"time", v.time},
       {"box", v.box},       {"weights", v.weights}};
}
void from_json(const json& j, MpcConfig& v) {
  Reader r(j, "mpc");
  r("name", v.name);
  r("horizon", v.horizon);
  r("tube_radius", v.tube_radius);
  r("warm_start", v.warm_start);
  r("solver", v.solver);
  r("time", v.time);
  r("box", v.box);
  r("weights", v.weights);
}

void to_json(json& j, const OracleConfig& v) {
  j = {{"stage1_start", v.stage1_start},
       {"random_starts", v.random_starts},
       {"solver", v.solver},
       {"planner", v.planner}};
}
void from_json(const json& j, OracleConfig& v) {
  Reader r(j, "oracle");
  r("stage1_start", v.stage1_start);
  r("random_starts", v.random_starts);
  r("solver", v.solver);
  r("planner", v.planner);
}

void to_json(json& j, const FailureRule& v) {
  j = {{"collision_limit", num(v.collision_limit)}, {"goal_limit", num(v.goal_limit)}};
}
void from_json(const json& j, FailureRule& v) {
  Reader r(j, "failure");
  r("collision_limit", v.collision_limit);
  r("goal_limit", v.goal_limit);
}

void to_json(json& j, const ExperimentConfig& v) {
  json modes = json::array();
  for (MeasurementMode m : v.modes) modes.push_back(to_string(m));
  j = {{"environments", v.environments},
       {"generator", v.generator},
       {"methods", v.methods},
       {"modes", modes},
       {"seed", v.seed},
       {"failure", v.failure},
       {"budget_s", v.budget_s},
       {"output_dir", v.output_dir},
       {"workers", v.workers},
       {"planner", v.planner},
       {"mpc", v.mpc},
       {"oracle", v.oracle},
       {"search", v.search},
       {"sampling_count", v.sampling_count},
       {"position_sigma", v.position_sigma},
       {"bias_half_width", v.bias_half_width}};
}
void from_json(const json& j, ExperimentConfig& v) {
  Reader r(j, "experiment");
  r("environments", v.environments);
  r("generator", v.generator);
  r("methods", v.methods);
  if (const json* m = r.find("modes")) {
    v.modes.clear();
    for (const auto& s : *m) v.modes.push_back(measurement_from_string(s.get<std::string>()));
  }
  r("seed", v.seed);
  r("failure", v.failure);
  r("budget_s", v.budget_s);
  r("output_dir", v.output_dir);
  r("workers", v.workers);
  r("planner", v.planner);
  r("mpc", v.mpc);
  r("oracle", v.oracle);
  r("search", v.search);
  r("sampling_count", v.sampling_count);
  r("position_sigma", v.position_sigma);
  r("bias_half_width", v.bias_half_width);
}

void to_json(json& j, const PolicyParams& v) {
  json knots = json::array();
  for (Eigen::Index c = 0; c < v.knots.cols(); ++c) knots.push_back(vec(v.knots.col(c)));
  j = {{"knots", knots}, {"start_ref", vec(v.start_ref)}, {"horizon_s", v.horizon_s}};
}
void from_json(const json& j, PolicyParams& v) {
  Reader r(j, "policy");
  if (const json* k = r.find("knots")) {
    v.knots.resize(2, static_cast<Eigen::Index>(k->size()));
    for (std::size_t c = 0; c < k->size(); ++c) {
      Input col;
      read_vec((*k)[c], col);
      v.knots.col(static_cast<Eigen::Index>(c)) = col;
    }
  }
  r("start_ref", v.start_ref);
  r("horizon_s", v.horizon_s);
}

void to_json(json& j, const CostBreakdown& v) {
  j = {{"J_G", num(v.J_G)},
       {"J_I", num(v.J_I)},
       {"J_B", num(v.J_B)},
       {"J_C", num(v.J_C)},
       {"total", num(v.total)},
       {"flags", flags_json(v.flags)},
       {"alpha_goal", v.alpha_goal},
       {"alpha_input", v.alpha_input},
       {"alpha_bounds", v.alpha_bounds},
       {"alpha_collision", v.alpha_collision}};
}
void from_json(const json& j, CostBreakdown& v) {
  Reader r(j, "cost");
  r("J_G", v.J_G);
  r("J_I", v.J_I);
  r("J_B", v.J_B);
  r("J_C", v.J_C);
  r("total", v.total);
  r("flags", v.flags);
  r("alpha_goal", v.alpha_goal);
  r("alpha_input", v.alpha_input);
  r("alpha_bounds", v.alpha_bounds);
  r("alpha_collision", v.alpha_collision);
}

void to_json(json& j, const PlanResult& v) {
  json history = json::array();
  for (const auto& h : v.history)
    history.push_back({{"stage", h.stage},
                       {"iteration", h.iteration},
                       {"cost", h.cost},
                       {"best_total", num(h.best_total)}});
  json open_loop = json::array();
  for (const auto& u : v.open_loop) open_loop.push_back(vec(u));
  auto profile = [](const CollisionProfile& p) {
    json a = json::array();
    for (double x : p.per_step) a.push_back(num(x));
    return a;
  };
  j = {{"method", v.method},
       {"policy", v.policy},
       {"cost", v.cost},
       {"status", to_string(v.status)},
       {"planned_goal_distance", num(v.planned_goal_distance)},
       {"stage1_s", v.stage1_s},
       {"stage2_s", v.stage2_s},
       {"offline_s", v.offline_s},
       {"initial_profile", profile(v.initial_profile)},
       {"final_profile", profile(v.final_profile)},
       {"history", history},
       {"open_loop", open_loop}};
}
void from_json(const json& j, PlanResult& v) {
  Reader r(j, "plan");
  r("method", v.method);
  r("policy", v.policy);
  r("cost", v.cost);
  if (const json* s = r.find("status")) v.status = plan_status_from_string(s->get<std::string>());
  r("planned_goal_distance", v.planned_goal_distance);
  r("stage1_s", v.stage1_s);
  r("stage2_s", v.stage2_s);
  r("offline_s", v.offline_s);
  auto profile = [&](const char* key, CollisionProfile& p) {
    if (const json* a = r.find(key)) {
      p.per_step.clear();
      for (const auto& x : *a) p.per_step.push_back(to_double(x));
    }
  };
  profile("initial_profile", v.initial_profile);
  profile("final_profile", v.final_profile);
  if (const json* h = r.find("history")) {
    v.history.clear();
    for (const auto& e : *h) {
      IterationRecord rec;
      Reader hr(e, "history");
      hr("stage", rec.stage);
      hr("iteration", rec.iteration);
      hr("cost", rec.cost);
      hr("best_total", rec.best_total);
      v.history.push_back(rec);
    }
  }
  if (const json* o = r.find("open_loop")) {
    v.open_loop.clear();
    for (const auto& e : *o) {
      Input u;
      read_vec(e, u);
      v.open_loop.push_back(u);
    }
  }
}

void to_json(json& j, const ExecutionTrace& v) {
  json states = json::array();
  for (const auto& x : v.states) states.push_back(vec(x));
  json inputs = json::array();
  for (const auto& u : v.inputs) inputs.push_back(vec(u));
  json profile = json::array();
  for (double x : v.profile.per_step) profile.push_back(num(x));
  j = {{"method", v.method},
       {"status", to_string(v.status)},
       {"diverged", v.diverged},
       {"J_G", num(v.J_G)},
       {"J_I", num(v.J_I)},
       {"J_C", num(v.J_C)},
       {"final_goal_distance", num(v.final_goal_distance)},
       {"online_ms_per_step", num(v.online_ms_per_step())},
       {"states", states},
       {"inputs", inputs},
       {"step_ms", v.step_ms},
       {"timestamps", v.timestamps},
       {"collision_profile", profile}};
}

void to_json(json& j, const MethodSummary& v) {
  j = {{"method", v.method},
       {"mode", to_string(v.mode)},
       {"runs", v.runs},
       {"failures", v.failures},
       {"failure_rate", num(v.failure_rate)},
       {"CRI", num(v.CRI)},
       {"GCI", num(v.GCI)},
       {"ICI", num(v.ICI)},
       {"offline_s", num(v.offline_s)},
       {"online_ms_per_step", num(v.online_ms_per_step)},
       {"final_goal_distance", num(v.final_goal_distance)}};
}

json report_to_json(const MetricsReport& report) {
  return {{"methods", report.summary}, {"runs", report.rows.size()}, {"warnings", report.warnings}};
}

json load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  try {
    return json::parse(in);
  } catch (const json::parse_error& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
}

void save_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

Environment load_environment(const std::string& path) { return load_json(path).get<Environment>(); }
void save_environment(const std::string& path, const Environment& env) {
  save_json(path, json(env));
}
ExperimentConfig load_experiment_config(const std::string& path) {
  return load_json(path).get<ExperimentConfig>();
}
PlanResult load_plan(const std::string& path) { return load_json(path).get<PlanResult>(); }
void save_plan(const std::string& path, const PlanResult& plan) { save_json(path, json(plan)); }

void write_history_csv(std::ostream& os, const PlanResult& plan) {
  os << "stage,iteration,J_G,J_I,J_B,J_C,total,best_total\n";
  char buf[256];
  for (const auto& h : plan.history) {
    std::snprintf(buf, sizeof buf, "%d,%d,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", h.stage,
                  h.iteration, h.cost.J_G, h.cost.J_I, h.cost.J_B, h.cost.J_C, h.cost.total,
                  h.best_total);
    os << buf;
  }
}

void write_trace_csv(std::ostream& os, const ExecutionTrace& trace, double dt) {
  os << "k,t,p_x,p_y,theta,v,theta_bias,omega,a,step_ms\n";
  char buf[320];
  for (std::size_t k = 0; k < trace.states.size(); ++k) {
    const State& x = trace.states[k];
    const bool has_u = k < trace.inputs.size();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", k,
                  dt * static_cast<double>(k), x(kPx), x(kPy), x(kTheta), x(kV), x(kBias),
                  has_u ? trace.inputs[k](kOmega) : nan, has_u ? trace.inputs[k](kAccel) : nan,
                  k < trace.step_ms.size() ? trace.step_ms[k] : nan);
    os << buf;
  }
}

}  // namespace dplan
