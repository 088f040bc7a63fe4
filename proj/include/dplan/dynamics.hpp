#pragma once

// Kinematic car with a constant heading-measurement bias, the smooth
// tracking controller that closes the loop around a reference, and the
// analytic divergence / Jacobians of the resulting closed-loop field.

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>
#include <type_traits>

#include <Eigen/Core>

namespace dplan {

inline constexpr int kStateDim = 5;
inline constexpr int kInputDim = 2;

// State layout: (p_x, p_y, theta, v, theta_bias).
enum StateIndex : int { kPx = 0, kPy = 1, kTheta = 2, kV = 3, kBias = 4 };
// Input layout: (omega, a).
enum InputIndex : int { kOmega = 0, kAccel = 1 };

template <typename Scalar>
using StateT = Eigen::Matrix<Scalar, kStateDim, 1>;
template <typename Scalar>
using InputT = Eigen::Matrix<Scalar, kInputDim, 1>;

using State = StateT<double>;
using Input = InputT<double>;
using StateDerivative = State;

/// Output time grid t_k = k * dt, k = 0..steps, integrated with `substeps`
/// RK4 steps per output interval.
struct TimeGrid {
  double dt = 0.1;
  int steps = 100;
  int substeps = 5;

  double horizon() const { return dt * steps; }
  double substep() const { return dt / substeps; }
  int total_substeps() const { return steps * substeps; }
  double time(int k) const { return dt * k; }

  void validate() const {
    if (!(dt > 0.0) || steps < 1 || substeps < 1)
      throw std::invalid_argument("invalid time grid");
  }
};

struct InputBox {
  Input lower = Input(-1.0, -3.0);
  Input upper = Input(1.0, 3.0);

  Input center() const { return 0.5 * (lower + upper); }
  Input half_width() const { return 0.5 * (upper - lower); }
  bool contains(const Input& u) const {
    return (u.array() >= lower.array()).all() &&
           (u.array() <= upper.array()).all();
  }
  Input clamp(const Input& u) const { return u.cwiseMax(lower).cwiseMin(upper); }
};

/// Componentwise state bounds; +/-infinity marks an unbounded component.
struct StateBounds {
  State lower;
  State upper;

  static StateBounds unbounded() {
    const double inf = std::numeric_limits<double>::infinity();
    return {State::Constant(-inf), State::Constant(inf)};
  }
};

namespace detail {

inline double value_of(double x) { return x; }
template <typename T>
auto value_of(const T& x) -> decltype(x.value()) {
  return x.value();
}

}  // namespace detail

/// Maps an angle to (-pi, pi]. The shift is computed on the value only, so
/// derivatives of AD scalars pass through with slope 1.
template <typename Scalar>
Scalar wrap_angle(const Scalar& angle) {
  constexpr double kPi = std::numbers::pi;
  const double a = detail::value_of(angle);
  double shift = -2.0 * kPi * std::floor((a + kPi) / (2.0 * kPi));
  if (a + shift <= -kPi) shift += 2.0 * kPi;
  return angle + Scalar(shift);
}

/// Kinematic car: (v cos(theta), v sin(theta), omega, a, 0).
template <typename Scalar>
StateT<Scalar> vehicle_field(const StateT<Scalar>& x, const InputT<Scalar>& u) {
  using std::cos;
  using std::sin;
  StateT<Scalar> dx;
  dx(kPx) = x(kV) * cos(x(kTheta));
  dx(kPy) = x(kV) * sin(x(kTheta));
  dx(kTheta) = u(kOmega);
  dx(kV) = u(kAccel);
  dx(kBias) = Scalar(0.0);
  return dx;
}

/// Measured state (p_x, p_y, theta + theta_bias, v, 0); heading wrapped.
State biased_measurement(const State& x);

/// C2 saturation onto [lower - margin, upper + margin]: identity on
/// [lower, upper], tanh tails outside. margin == 0 degenerates to clamping.
struct SoftSaturation {
  double lower = -1.0;
  double upper = 1.0;
  double margin = 0.2;

  template <typename Scalar>
  Scalar operator()(const Scalar& u) const {
    using std::tanh;
    const double uv = detail::value_of(u);
    if (uv > upper) {
      if (margin <= 0.0) return Scalar(upper);
      return Scalar(upper) + margin * tanh((u - Scalar(upper)) / margin);
    }
    if (uv < lower) {
      if (margin <= 0.0) return Scalar(lower);
      return Scalar(lower) + margin * tanh((u - Scalar(lower)) / margin);
    }
    return u;
  }

  double derivative(double u) const;
  double second_derivative(double u) const;
};

struct TrackingGains {
  double k_theta = 3.0;
  double k_lat = 1.0;
  double k_v = 2.0;
  double k_lon = 1.0;

  static TrackingGains zero() { return {0.0, 0.0, 0.0, 0.0}; }
};

/// Tracking controller plus input saturation. Errors are expressed in the
/// reference frame; positions and speed are measured exactly, the heading
/// through the bias.
struct Controller {
  TrackingGains gains;
  SoftSaturation omega_sat{-1.0, 1.0, 0.2};
  SoftSaturation accel_sat{-3.0, 3.0, 0.6};

  static Controller for_box(const InputBox& box, const TrackingGains& gains = {},
                            double margin_fraction = 0.2);

  /// Unsaturated feedback law evaluated on the true state x (the bias
  /// enters through theta + theta_bias).
  template <typename Scalar>
  InputT<Scalar> raw(const StateT<Scalar>& x, const StateT<Scalar>& ref,
                     const InputT<Scalar>& ref_input) const {
    using std::cos;
    using std::sin;
    const Scalar dx = ref(kPx) - x(kPx);
    const Scalar dy = ref(kPy) - x(kPy);
    const Scalar c = cos(ref(kTheta));
    const Scalar s = sin(ref(kTheta));
    const Scalar e_lon = c * dx + s * dy;
    const Scalar e_lat = -s * dx + c * dy;
    const Scalar e_theta = wrap_angle<Scalar>(ref(kTheta) - x(kTheta) - x(kBias));
    InputT<Scalar> u;
    u(kOmega) = ref_input(kOmega) + gains.k_theta * e_theta +
                gains.k_lat * e_lat * x(kV);
    u(kAccel) = ref_input(kAccel) + gains.k_v * (ref(kV) - x(kV)) +
                gains.k_lon * e_lon;
    return u;
  }

  template <typename Scalar>
  InputT<Scalar> operator()(const StateT<Scalar>& x, const StateT<Scalar>& ref,
                            const InputT<Scalar>& ref_input) const {
    const InputT<Scalar> r = raw(x, ref, ref_input);
    return InputT<Scalar>(omega_sat(r(kOmega)), accel_sat(r(kAccel)));
  }

  /// d input / d (x, ref, ref_input): 2 x 12, columns x(5) | ref(5) | u_ref(2).
  Eigen::Matrix<double, 2, 12> jacobian(const State& x, const State& ref,
                                        const Input& ref_input) const;
};

/// Right-hand side of the closed loop, x' = f(x, pi(x_hat; ref, u_ref)).
template <typename Scalar>
StateT<Scalar> closed_loop_rhs(const Controller& ctrl, const StateT<Scalar>& x,
                               const StateT<Scalar>& ref,
                               const InputT<Scalar>& ref_input) {
  return vehicle_field<Scalar>(x, ctrl(x, ref, ref_input));
}

/// Trace of d closed_loop_rhs / dx. Only the heading row (through the
/// heading error) and the speed row (through speed feedback) contribute.
double closed_loop_divergence(const Controller& ctrl, const State& x,
                              const State& ref, const Input& ref_input);

/// Jacobians of the augmented closed-loop field F = (x', -div) (6 rows).
struct ClosedLoopJacobian {
  Eigen::Matrix<double, 6, 5> d_state;
  Eigen::Matrix<double, 6, 5> d_ref;
  Eigen::Matrix<double, 6, 2> d_ref_input;
};

ClosedLoopJacobian closed_loop_jacobian(const Controller& ctrl, const State& x,
                                        const State& ref, const Input& ref_input);

/// d vehicle_field / dx (the input Jacobian is the identity on rows 2, 3).
Eigen::Matrix<double, 5, 5> vehicle_state_jacobian(const State& x);

inline bool all_finite(const State& x) { return x.allFinite(); }

}  // namespace dplan
