#pragma once

// Reference-trajectory parameterization: K uniform knots of a piecewise
// linear (omega_ref, a_ref) profile, rolled out open loop from start_ref.

#include <array>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "dplan/dynamics.hpp"

namespace dplan {

/// Linear-interpolation weight of a time instant: the input there is
/// (1 - frac) * knot[index] + frac * knot[index + 1].
struct KnotWeight {
  int index = 0;
  double frac = 0.0;
};

struct PolicyParams {
  // 2 x K, column j = (omega_ref, a_ref) at t = j * horizon / (K - 1).
  Eigen::Matrix<double, 2, Eigen::Dynamic> knots;
  State start_ref = State::Zero();
  double horizon_s = 10.0;

  PolicyParams() = default;
  PolicyParams(int knot_count, const State& start, double horizon);

  int knot_count() const { return static_cast<int>(knots.cols()); }
  int dimension() const { return 2 * knot_count(); }

  KnotWeight weight_at(double t) const;
  Input input_at(double t) const;

  /// Column-major flattening (omega_0, a_0, omega_1, a_1, ...).
  Eigen::VectorXd flat() const;
  void set_flat(const Eigen::VectorXd& values);
  void clamp_to(const InputBox& box);
  void validate() const;
};

/// RK4 stage values of one substep: states S1..S4 and the inputs at the
/// stage times t, t + h/2, t + h/2, t + h.
struct RkStages {
  std::array<State, 4> states;
  std::array<Input, 4> inputs;
};

struct ReferenceTrajectory {
  TimeGrid grid;
  PolicyParams policy;
  std::vector<State> states;           // t_0 .. t_N
  std::vector<Input> inputs;           // t_0 .. t_{N-1}
  std::vector<State> substep_states;   // every substep, N * substeps + 1
  std::vector<RkStages> stages;        // N * substeps

  /// Reference state at arbitrary t in [0, horizon]: a partial RK4 step
  /// from the preceding substep node (exact on the substep grid).
  State state_at(double t) const;
  Input input_at(double t) const { return policy.input_at(t); }
};

/// One RK4 step of the open-loop car under a time-varying input.
template <class InputFn>
State rk4_open_loop_step(const State& x, double t, double h, const InputFn& input,
                         RkStages* record = nullptr) {
  const Input u1 = input(t);
  const Input u2 = input(t + 0.5 * h);
  const Input u4 = input(t + h);
  const State s1 = x;
  const State k1 = vehicle_field<double>(s1, u1);
  const State s2 = x + 0.5 * h * k1;
  const State k2 = vehicle_field<double>(s2, u2);
  const State s3 = x + 0.5 * h * k2;
  const State k3 = vehicle_field<double>(s3, u2);
  const State s4 = x + h * k3;
  const State k4 = vehicle_field<double>(s4, u4);
  if (record) {
    record->states = {s1, s2, s3, s4};
    record->inputs = {u1, u2, u2, u4};
  }
  return x + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

/// Interpolates the knots to the grid and rolls the car out open loop.
ReferenceTrajectory recover_reference(const PolicyParams& p, const TimeGrid& grid);

/// M i.i.d. policies with knots uniform in the box.
std::vector<PolicyParams> sample_params(int count, const InputBox& box,
                                        std::uint64_t seed, int knot_count = 10,
                                        const State& start_ref = State::Zero(),
                                        double horizon_s = 10.0);

}  // namespace dplan
