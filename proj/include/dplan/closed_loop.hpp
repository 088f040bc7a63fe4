#pragma once

// The closed-loop system f_p(x) = f(x, pi(x_hat; p)) as an autonomous
// field over the policy horizon, and its fixed-step RK4 flow.

#include <array>
#include <vector>

#include "dplan/dynamics.hpp"
#include "dplan/policy.hpp"

namespace dplan {

using StateTrajectory = std::vector<State>;

/// Closed-loop field at (x, t); the reference is evaluated at t.
StateDerivative closed_loop_field(const State& x, double t,
                                  const ReferenceTrajectory& ref,
                                  const Controller& ctrl);
StateDerivative closed_loop_field(const State& x, double t, const PolicyParams& policy,
                                  const TimeGrid& grid, const Controller& ctrl);

/// Trace of the closed-loop Jacobian at (x, t).
double divergence(const State& x, double t, const ReferenceTrajectory& ref,
                  const Controller& ctrl);
double divergence(const State& x, double t, const PolicyParams& policy,
                  const TimeGrid& grid, const Controller& ctrl);

/// Per-substep stage states of a closed-loop rollout (for adjoint sweeps).
using SampleStages = std::array<State, 4>;

/// One RK4 step of the augmented state (x, g), g' = -div, driven by the
/// recorded reference stages of the same substep.
void closed_loop_rk4_step(const Controller& ctrl, const RkStages& ref, double h,
                          State& x, double& g, SampleStages* record = nullptr);

/// Closed-loop rollout sampled at t_0..t_N. Throws "integration diverged"
/// on a non-finite state.
StateTrajectory integrate(const State& x0, const ReferenceTrajectory& ref,
                          const Controller& ctrl);
StateTrajectory integrate(const State& x0, const PolicyParams& policy,
                          const TimeGrid& grid, const Controller& ctrl);

}  // namespace dplan
