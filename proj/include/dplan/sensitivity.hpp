#pragma once

// Discrete adjoint of the fixed-step RK4 schemes: closed-loop samples feed
// adjoints into the reference stage values, the reference sweep maps them
// onto the policy knots.

#include <array>
#include <vector>

#include <Eigen/Core>

#include "dplan/closed_loop.hpp"
#include "dplan/cost.hpp"
#include "dplan/policy.hpp"

namespace dplan {

/// Adjoint accumulators over a reference trajectory.
struct ReferenceAdjoint {
  std::vector<std::array<State, 4>> stage_states;  // per substep
  std::vector<std::array<Input, 4>> stage_inputs;  // per substep
  std::vector<State> nodes;                        // output nodes t_0..t_N
  std::vector<Input> node_inputs;                  // reference inputs at t_0..t_{N-1}

  explicit ReferenceAdjoint(const TimeGrid& grid);
};

/// Gradient w.r.t. the flattened knots (PolicyParams::flat order).
Eigen::VectorXd reference_gradient(const ReferenceTrajectory& ref, const ReferenceAdjoint& adj);

/// Backward sweep of one closed-loop sample recorded in `tape`. The seeds
/// act on the output nodes (state, g) and on the applied inputs at t_k.
void sample_adjoint(const Controller& ctrl, const ReferenceTrajectory& ref,
                    const std::vector<SampleStages>& tape, const RolloutSeeds& seeds,
                    ReferenceAdjoint& into);

/// Applied (saturated) controller inputs at t_0..t_{N-1} of a recorded sample.
std::vector<Input> applied_inputs(const Controller& ctrl, const ReferenceTrajectory& ref,
                                  const std::vector<SampleStages>& tape);

}  // namespace dplan
