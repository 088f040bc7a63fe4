#include "dplan/closed_loop.hpp"

#include <stdexcept>

namespace dplan {

StateDerivative closed_loop_field(const State& x, double t,
                                  const ReferenceTrajectory& ref,
                                  const Controller& ctrl) {
  return closed_loop_rhs<double>(ctrl, x, ref.state_at(t), ref.input_at(t));
}

StateDerivative closed_loop_field(const State& x, double t, const PolicyParams& policy,
                                  const TimeGrid& grid, const Controller& ctrl) {
  return closed_loop_field(x, t, recover_reference(policy, grid), ctrl);
}

double divergence(const State& x, double t, const ReferenceTrajectory& ref,
                  const Controller& ctrl) {
  return closed_loop_divergence(ctrl, x, ref.state_at(t), ref.input_at(t));
}

double divergence(const State& x, double t, const PolicyParams& policy,
                  const TimeGrid& grid, const Controller& ctrl) {
  return divergence(x, t, recover_reference(policy, grid), ctrl);
}

void closed_loop_rk4_step(const Controller& ctrl, const RkStages& ref, double h,
                          State& x, double& g, SampleStages* record) {
  auto rhs = [&](const State& z, int i, double& neg_div) {
    neg_div = -closed_loop_divergence(ctrl, z, ref.states[i], ref.inputs[i]);
    return closed_loop_rhs<double>(ctrl, z, ref.states[i], ref.inputs[i]);
  };
  double q1, q2, q3, q4;
  const State z1 = x;
  const State k1 = rhs(z1, 0, q1);
  const State z2 = x + 0.5 * h * k1;
  const State k2 = rhs(z2, 1, q2);
  const State z3 = x + 0.5 * h * k2;
  const State k3 = rhs(z3, 2, q3);
  const State z4 = x + h * k3;
  const State k4 = rhs(z4, 3, q4);
  if (record) *record = {z1, z2, z3, z4};
  x += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
  g += (h / 6.0) * (q1 + 2.0 * q2 + 2.0 * q3 + q4);
}

StateTrajectory integrate(const State& x0, const ReferenceTrajectory& ref,
                          const Controller& ctrl) {
  const TimeGrid& grid = ref.grid;
  const double h = grid.substep();
  StateTrajectory out;
  out.reserve(grid.steps + 1);
  State x = x0;
  double g = 0.0;
  out.push_back(x);
  for (int j = 0; j < grid.total_substeps(); ++j) {
    closed_loop_rk4_step(ctrl, ref.stages[j], h, x, g);
    if (!x.allFinite()) throw std::runtime_error("integration diverged");
    if ((j + 1) % grid.substeps == 0) out.push_back(x);
  }
  return out;
}

StateTrajectory integrate(const State& x0, const PolicyParams& policy,
                          const TimeGrid& grid, const Controller& ctrl) {
  if (!x0.allFinite()) throw std::invalid_argument("initial state not finite");
  return integrate(x0, recover_reference(policy, grid), ctrl);
}

}  // namespace dplan
