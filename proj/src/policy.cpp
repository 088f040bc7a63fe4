#include "dplan/policy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "dplan/rng.hpp"

namespace dplan {

PolicyParams::PolicyParams(int knot_count, const State& start, double horizon)
    : knots(Eigen::Matrix<double, 2, Eigen::Dynamic>::Zero(2, knot_count)),
      start_ref(start),
      horizon_s(horizon) {
  start_ref(kBias) = 0.0;
}

KnotWeight PolicyParams::weight_at(double t) const {
  const int k = knot_count();
  const double spacing = horizon_s / (k - 1);
  const double u = std::clamp(t / spacing, 0.0, static_cast<double>(k - 1));
  const int index = std::min(static_cast<int>(std::floor(u)), k - 2);
  return {index, u - index};
}

Input PolicyParams::input_at(double t) const {
  const KnotWeight w = weight_at(t);
  return (1.0 - w.frac) * knots.col(w.index) + w.frac * knots.col(w.index + 1);
}

Eigen::VectorXd PolicyParams::flat() const {
  return Eigen::Map<const Eigen::VectorXd>(knots.data(), knots.size());
}

void PolicyParams::set_flat(const Eigen::VectorXd& values) {
  if (values.size() != knots.size())
    throw std::invalid_argument("policy parameter size mismatch");
  Eigen::Map<Eigen::VectorXd>(knots.data(), knots.size()) = values;
}

void PolicyParams::clamp_to(const InputBox& box) {
  for (int j = 0; j < knot_count(); ++j) knots.col(j) = box.clamp(knots.col(j));
}

void PolicyParams::validate() const {
  if (knot_count() < 2) throw std::invalid_argument("policy needs at least 2 knots");
  if (!(horizon_s > 0.0)) throw std::invalid_argument("policy horizon must be positive");
}

State ReferenceTrajectory::state_at(double t) const {
  const double h = grid.substep();
  const int n = grid.total_substeps();
  if (t < -1e-12 || t > grid.horizon() + 1e-9)
    throw std::out_of_range("policy horizon exceeded");
  int j = static_cast<int>(std::floor(t / h));
  j = std::clamp(j, 0, n - 1);
  const double tau = t - j * h;
  if (tau == 0.0) return substep_states[j];
  return rk4_open_loop_step(substep_states[j], j * h, tau,
                            [this](double s) { return policy.input_at(s); });
}

ReferenceTrajectory recover_reference(const PolicyParams& p, const TimeGrid& grid) {
  p.validate();
  grid.validate();
  if (std::abs(p.horizon_s - grid.horizon()) > 1e-9)
    throw std::invalid_argument("policy horizon does not match time grid");

  ReferenceTrajectory ref;
  ref.grid = grid;
  ref.policy = p;
  const int n = grid.total_substeps();
  const double h = grid.substep();
  ref.substep_states.resize(n + 1);
  ref.stages.resize(n);
  ref.states.reserve(grid.steps + 1);
  ref.inputs.reserve(grid.steps);

  auto input = [&p](double t) { return p.input_at(t); };
  State x = p.start_ref;
  ref.substep_states[0] = x;
  for (int j = 0; j < n; ++j) {
    x = rk4_open_loop_step(x, j * h, h, input, &ref.stages[j]);
    ref.substep_states[j + 1] = x;
  }
  for (int k = 0; k <= grid.steps; ++k) {
    ref.states.push_back(ref.substep_states[k * grid.substeps]);
    if (k < grid.steps) ref.inputs.push_back(ref.stages[k * grid.substeps].inputs[0]);
  }
  return ref;
}

std::vector<PolicyParams> sample_params(int count, const InputBox& box,
                                        std::uint64_t seed, int knot_count,
                                        const State& start_ref, double horizon_s) {
  if (count < 1) throw std::invalid_argument("sample count must be >= 1");
  Rng rng(seed);
  std::vector<PolicyParams> out;
  out.reserve(count);
  for (int i = 0; i < count; ++i) {
    PolicyParams p(knot_count, start_ref, horizon_s);
    for (int j = 0; j < knot_count; ++j) {
      for (int d = 0; d < kInputDim; ++d) {
        std::uniform_real_distribution<double> dist(box.lower(d), box.upper(d));
        p.knots(d, j) = box.lower(d) == box.upper(d) ? box.lower(d) : dist(rng);
      }
    }
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace dplan
