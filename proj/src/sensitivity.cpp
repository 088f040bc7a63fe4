#include "dplan/sensitivity.hpp"

#include <stdexcept>

namespace dplan {

namespace {

using Vec6 = Eigen::Matrix<double, 6, 1>;

void add_input_to_knots(const PolicyParams& p, double t, const Input& d, Eigen::VectorXd& grad) {
  const KnotWeight w = p.weight_at(t);
  grad.segment<2>(2 * w.index) += (1.0 - w.frac) * d;
  grad.segment<2>(2 * (w.index + 1)) += w.frac * d;
}

}  // namespace

ReferenceAdjoint::ReferenceAdjoint(const TimeGrid& grid)
    : stage_states(grid.total_substeps(), {State::Zero(), State::Zero(), State::Zero(), State::Zero()}),
      stage_inputs(grid.total_substeps(), {Input::Zero(), Input::Zero(), Input::Zero(), Input::Zero()}),
      nodes(grid.steps + 1, State::Zero()),
      node_inputs(grid.steps, Input::Zero()) {}

Eigen::VectorXd reference_gradient(const ReferenceTrajectory& ref, const ReferenceAdjoint& adj) {
  const TimeGrid& grid = ref.grid;
  const PolicyParams& p = ref.policy;
  const double h = grid.substep();
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(p.dimension());

  for (int k = 0; k < grid.steps; ++k) add_input_to_knots(p, grid.time(k), adj.node_inputs[k], grad);

  State lambda = adj.nodes[grid.steps];
  for (int j = grid.total_substeps() - 1; j >= 0; --j) {
    const RkStages& st = ref.stages[j];
    const auto& eS = adj.stage_states[j];
    const auto& eU = adj.stage_inputs[j];
    const double t = j * h;
    const std::array<double, 4> times = {t, t + 0.5 * h, t + 0.5 * h, t + h};

    // mu_i = dJ/dk_i; B^T mu picks rows (theta, v) of mu.
    State mu = (h / 6.0) * lambda;
    State lS4 = eS[3] + vehicle_state_jacobian(st.states[3]).transpose() * mu;
    Input dU4 = eU[3] + Input(mu(kTheta), mu(kV));

    mu = (h / 3.0) * lambda + h * lS4;
    State lS3 = eS[2] + vehicle_state_jacobian(st.states[2]).transpose() * mu;
    Input dU3 = eU[2] + Input(mu(kTheta), mu(kV));

    mu = (h / 3.0) * lambda + 0.5 * h * lS3;
    State lS2 = eS[1] + vehicle_state_jacobian(st.states[1]).transpose() * mu;
    Input dU2 = eU[1] + Input(mu(kTheta), mu(kV));

    mu = (h / 6.0) * lambda + 0.5 * h * lS2;
    State lS1 = eS[0] + vehicle_state_jacobian(st.states[0]).transpose() * mu;
    Input dU1 = eU[0] + Input(mu(kTheta), mu(kV));

    add_input_to_knots(p, times[0], dU1, grad);
    add_input_to_knots(p, times[1], dU2 + dU3, grad);
    add_input_to_knots(p, times[3], dU4, grad);

    lambda += lS1 + lS2 + lS3 + lS4;
    if (j % grid.substeps == 0) lambda += adj.nodes[j / grid.substeps];
  }
  return grad;
}

void sample_adjoint(const Controller& ctrl, const ReferenceTrajectory& ref,
                    const std::vector<SampleStages>& tape, const RolloutSeeds& seeds,
                    ReferenceAdjoint& into) {
  const TimeGrid& grid = ref.grid;
  if (static_cast<int>(tape.size()) != grid.total_substeps())
    throw std::invalid_argument("sample tape does not match the time grid");
  const double h = grid.substep();

  // Applied-input seeds at t_k: u_k = ctrl(x_k, ref stage 1, u_ref stage 1).
  std::vector<State> node_extra(grid.steps + 1, State::Zero());
  for (int k = 0; k < grid.steps && k < static_cast<int>(seeds.d_input.size()); ++k) {
    const Input& du = seeds.d_input[k];
    if (du.isZero(0.0)) continue;
    const int j = k * grid.substeps;
    const RkStages& st = ref.stages[j];
    const Eigen::Matrix<double, 2, 12> J = ctrl.jacobian(tape[j][0], st.states[0], st.inputs[0]);
    const Eigen::Matrix<double, 12, 1> d = J.transpose() * du;
    node_extra[k] += d.segment<5>(0);
    into.stage_states[j][0] += d.segment<5>(5);
    into.stage_inputs[j][0] += d.segment<2>(10);
  }

  Vec6 lambda;
  lambda << seeds.d_state[grid.steps] + node_extra[grid.steps], seeds.d_g[grid.steps];
  for (int j = grid.total_substeps() - 1; j >= 0; --j) {
    const RkStages& st = ref.stages[j];
    const SampleStages& z = tape[j];
    auto& rS = into.stage_states[j];
    auto& rU = into.stage_inputs[j];

    auto stage = [&](int i, const Vec6& mu) {
      const ClosedLoopJacobian J = closed_loop_jacobian(ctrl, z[i], st.states[i], st.inputs[i]);
      rS[i] += J.d_ref.transpose() * mu;
      rU[i] += J.d_ref_input.transpose() * mu;
      return State(J.d_state.transpose() * mu);
    };
    auto lift = [](const State& s) {
      Vec6 v;
      v << s, 0.0;
      return v;
    };

    const State lZ4 = stage(3, (h / 6.0) * lambda);
    const State lZ3 = stage(2, (h / 3.0) * lambda + h * lift(lZ4));
    const State lZ2 = stage(1, (h / 3.0) * lambda + 0.5 * h * lift(lZ3));
    const State lZ1 = stage(0, (h / 6.0) * lambda + 0.5 * h * lift(lZ2));

    lambda.head<5>() += lZ1 + lZ2 + lZ3 + lZ4;
    if (j % grid.substeps == 0) {
      const int k = j / grid.substeps;
      lambda.head<5>() += seeds.d_state[k] + node_extra[k];
      lambda(5) += seeds.d_g[k];
    }
  }
}

std::vector<Input> applied_inputs(const Controller& ctrl, const ReferenceTrajectory& ref,
                                  const std::vector<SampleStages>& tape) {
  const TimeGrid& grid = ref.grid;
  std::vector<Input> out;
  out.reserve(grid.steps);
  for (int k = 0; k < grid.steps; ++k) {
    const int j = k * grid.substeps;
    out.push_back(ctrl(tape[j][0], ref.stages[j].states[0], ref.stages[j].inputs[0]));
  }
  return out;
}

}  // namespace dplan
