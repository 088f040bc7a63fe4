#include "dplan/dynamics.hpp"

namespace dplan {

State biased_measurement(const State& x) {
  State m = x;
  m(kTheta) = wrap_angle(x(kTheta) + x(kBias));
  m(kBias) = 0.0;
  return m;
}

double SoftSaturation::derivative(double u) const {
  if (u <= upper && u >= lower) return 1.0;
  if (margin <= 0.0) return 0.0;
  const double edge = u > upper ? upper : lower;
  const double th = std::tanh((u - edge) / margin);
  return 1.0 - th * th;
}

double SoftSaturation::second_derivative(double u) const {
  if (u <= upper && u >= lower) return 0.0;
  if (margin <= 0.0) return 0.0;
  const double edge = u > upper ? upper : lower;
  const double th = std::tanh((u - edge) / margin);
  return -2.0 / margin * th * (1.0 - th * th);
}

Controller Controller::for_box(const InputBox& box, const TrackingGains& gains,
                               double margin_fraction) {
  Controller c;
  c.gains = gains;
  const Input half = box.half_width();
  c.omega_sat = {box.lower(kOmega), box.upper(kOmega), margin_fraction * half(kOmega)};
  c.accel_sat = {box.lower(kAccel), box.upper(kAccel), margin_fraction * half(kAccel)};
  return c;
}

namespace {

// Partial derivatives of the raw feedback law; columns x(5) | ref(5) | u_ref(2).
struct RawPartials {
  Input raw;
  Eigen::Matrix<double, 1, 12> d_omega = Eigen::Matrix<double, 1, 12>::Zero();
  Eigen::Matrix<double, 1, 12> d_accel = Eigen::Matrix<double, 1, 12>::Zero();
};

RawPartials raw_partials(const Controller& ctrl, const State& x, const State& ref,
                         const Input& ref_input) {
  const TrackingGains& k = ctrl.gains;
  const double dx = ref(kPx) - x(kPx);
  const double dy = ref(kPy) - x(kPy);
  const double c = std::cos(ref(kTheta));
  const double s = std::sin(ref(kTheta));
  const double e_lon = c * dx + s * dy;
  const double e_lat = -s * dx + c * dy;
  const double v = x(kV);

  RawPartials p;
  p.raw = ctrl.raw(x, ref, ref_input);

  auto& dw = p.d_omega;
  dw(kPx) = k.k_lat * v * s;
  dw(kPy) = -k.k_lat * v * c;
  dw(kTheta) = -k.k_theta;
  dw(kV) = k.k_lat * e_lat;
  dw(kBias) = -k.k_theta;
  dw(5 + kPx) = -k.k_lat * v * s;
  dw(5 + kPy) = k.k_lat * v * c;
  dw(5 + kTheta) = k.k_theta - k.k_lat * v * e_lon;
  dw(10 + kOmega) = 1.0;

  auto& da = p.d_accel;
  da(kPx) = -k.k_lon * c;
  da(kPy) = -k.k_lon * s;
  da(kV) = -k.k_v;
  da(5 + kPx) = k.k_lon * c;
  da(5 + kPy) = k.k_lon * s;
  da(5 + kTheta) = k.k_lon * e_lat;
  da(5 + kV) = k.k_v;
  da(10 + kAccel) = 1.0;
  return p;
}

}  // namespace

Eigen::Matrix<double, 2, 12> Controller::jacobian(const State& x, const State& ref,
                                                  const Input& ref_input) const {
  const RawPartials p = raw_partials(*this, x, ref, ref_input);
  Eigen::Matrix<double, 2, 12> J;
  J.row(kOmega) = omega_sat.derivative(p.raw(kOmega)) * p.d_omega;
  J.row(kAccel) = accel_sat.derivative(p.raw(kAccel)) * p.d_accel;
  return J;
}

double closed_loop_divergence(const Controller& ctrl, const State& x,
                              const State& ref, const Input& ref_input) {
  const Input r = ctrl.raw(x, ref, ref_input);
  return -ctrl.gains.k_theta * ctrl.omega_sat.derivative(r(kOmega)) -
         ctrl.gains.k_v * ctrl.accel_sat.derivative(r(kAccel));
}

Eigen::Matrix<double, 5, 5> vehicle_state_jacobian(const State& x) {
  Eigen::Matrix<double, 5, 5> A = Eigen::Matrix<double, 5, 5>::Zero();
  const double c = std::cos(x(kTheta));
  const double s = std::sin(x(kTheta));
  A(kPx, kTheta) = -x(kV) * s;
  A(kPx, kV) = c;
  A(kPy, kTheta) = x(kV) * c;
  A(kPy, kV) = s;
  return A;
}

ClosedLoopJacobian closed_loop_jacobian(const Controller& ctrl, const State& x,
                                        const State& ref, const Input& ref_input) {
  const RawPartials p = raw_partials(ctrl, x, ref, ref_input);
  const double sw1 = ctrl.omega_sat.derivative(p.raw(kOmega));
  const double sa1 = ctrl.accel_sat.derivative(p.raw(kAccel));
  const double sw2 = ctrl.omega_sat.second_derivative(p.raw(kOmega));
  const double sa2 = ctrl.accel_sat.second_derivative(p.raw(kAccel));

  Eigen::Matrix<double, 6, 12> J = Eigen::Matrix<double, 6, 12>::Zero();
  J.block<5, 5>(0, 0) = vehicle_state_jacobian(x);
  J.row(kTheta) = sw1 * p.d_omega;
  J.row(kV) = sa1 * p.d_accel;
  // -div = k_theta * S_w'(omega_raw) + k_v * S_a'(a_raw)
  J.row(5) = ctrl.gains.k_theta * sw2 * p.d_omega + ctrl.gains.k_v * sa2 * p.d_accel;

  ClosedLoopJacobian out;
  out.d_state = J.block<6, 5>(0, 0);
  out.d_ref = J.block<6, 5>(0, 5);
  out.d_ref_input = J.block<6, 2>(0, 10);
  return out;
}

}  // namespace dplan
