#pragma once

// Oracles shared by the unit tests and the acceptance runner.

#include <cmath>

#include <Eigen/Dense>

#include "dplan/closed_loop.hpp"
#include "dplan/collision.hpp"
#include "dplan/cost.hpp"
#include "dplan/density.hpp"
#include "dplan/optimizer.hpp"
#include "dplan/policy.hpp"

namespace dplan::oracle {

/// log |det dPhi(x0, t_N) / dx0| of the exact flow. Phi is approximated in
/// long double on a reference with `refine` times more substeps; the
/// determinant is chained over output steps (det of a product is the
/// product of dets), each factor by central differences with `step`.
inline double log_flow_jacobian_det(const State& x0, const PolicyParams& policy,
                                    const TimeGrid& grid, const Controller& ctrl,
                                    int refine = 8, double step = 1e-6) {
  using L = long double;
  using LState = StateT<L>;
  const TimeGrid fine{grid.dt, grid.steps, grid.substeps * refine};
  const ReferenceTrajectory ref = recover_reference(policy, fine);
  const L h = fine.substep();
  auto advance = [&](LState x, int k) {
    for (int j = k * fine.substeps; j < (k + 1) * fine.substeps; ++j) {
      const RkStages& st = ref.stages[j];
      auto f = [&](const LState& z, int i) {
        const LState r = st.states[i].cast<L>();
        const InputT<L> u = st.inputs[i].cast<L>();
        return closed_loop_rhs<L>(ctrl, z, r, u);
      };
      const LState k1 = f(x, 0);
      const LState k2 = f(x + 0.5L * h * k1, 1);
      const LState k3 = f(x + 0.5L * h * k2, 2);
      const LState k4 = f(x + h * k3, 3);
      x += (h / 6.0L) * (k1 + 2.0L * k2 + 2.0L * k3 + k4);
    }
    return x;
  };
  LState x = x0.cast<L>();
  L sum = 0.0L;
  for (int k = 0; k < fine.steps; ++k) {
    Eigen::Matrix<L, kStateDim, kStateDim> J;
    for (int i = 0; i < kStateDim; ++i) {
      LState xp = x, xm = x;
      xp(i) += step;
      xm(i) -= step;
      J.col(i) = (advance(xp, k) - advance(xm, k)) / (2.0L * step);
    }
    sum += std::log(std::abs(J.partialPivLu().determinant()));
    x = advance(x, k);
  }
  return static_cast<double>(sum);
}

/// Probability mass of N(mean, diag(s^2)) restricted to [lo, hi].
inline double gaussian_box_mass(double mean, double s, double lo, double hi) {
  const double r = 1.0 / (s * std::sqrt(2.0));
  return 0.5 * (std::erf((hi - mean) * r) - std::erf((lo - mean) * r));
}

// Collision term with weights and desired positions frozen at `base`.
struct FrozenCollision {
  std::vector<std::vector<double>> w;
  std::vector<std::vector<Eigen::Vector2d>> des;

  FrozenCollision(const std::vector<DensityRollout>& base, const PlanningProblem& pr,
                  double beta) {
    for (const auto& r : base) {
      std::vector<double> wi;
      std::vector<Eigen::Vector2d> di;
      for (std::size_t k = 0; k < r.states.size(); ++k) {
        const int kk = static_cast<int>(k);
        wi.push_back(sample_coll_weight(r.states[k], kk, *pr.env, r.densities[k]));
        di.push_back(desired_position(r.states[k], kk, *pr.env, pr.gradients, beta));
      }
      w.push_back(wi);
      des.push_back(di);
    }
  }

  double operator()(const std::vector<DensityRollout>& rs) const {
    double s = 0.0;
    for (std::size_t i = 0; i < rs.size(); ++i)
      for (std::size_t k = 0; k < rs[i].states.size(); ++k)
        s += w[i][k] * (rs[i].states[k].head<2>() - des[i][k]).squaredNorm();
    return s;
  }
};

inline double frozen_total(const std::vector<DensityRollout>& rs, const std::vector<std::vector<Input>>& us,
                    const PlanningProblem& pr, const PlannerConfig& cfg, const StageFlags& flags,
                    const FrozenCollision& jc) {
  const CostWeights& w = cfg.weights;
  CostBreakdown b = total_cost(rs, us, pr.context(w), flags);
  return w.alpha_goal * b.J_G + w.alpha_input * b.J_I + (flags.bounds ? w.alpha_bounds * b.J_B : 0.0) +
         (flags.collision ? w.alpha_collision * jc(rs) : 0.0);
}

}  // namespace dplan::oracle
