// Copyright 2026 The telesim Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Dynamic locomotion retargeting: the human DCM drives the robot DCM through
// a CoP feedforward force, a haptic feedback force closes the loop on the
// pilot, and an LQR on [x_w, x_w_dot, xi_R] tracks the human DCM.

#ifndef TELESIM_LOCOMOTION_HPP_
#define TELESIM_LOCOMOTION_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "telesim/riccati.hpp"
#include "telesim/rom.hpp"

namespace telesim {

template <typename Scalar>
struct RetargetConfigT {
  Scalar k_spring{400};
  Scalar k_fb{2.5};
  bool spring_enabled{true};
  Matrix3<Scalar> lqr_q{Vector3<Scalar>(0, 0, 300).asDiagonal()};
  Scalar lqr_r{1};
  Scalar effort_saturation{40};

  void validate() const {
    if (!(k_spring >= 0)) throw ParameterError("k_spring must be >= 0");
    if (!(k_fb > 0)) throw ParameterError("k_fb must be > 0");
    if (!(lqr_r > 0)) throw ParameterError("lqr_r must be > 0");
    if (!(effort_saturation > 0)) throw ParameterError("effort_saturation must be > 0");
    if (!(lqr_q - lqr_q.transpose()).isZero(Scalar(1e-12))) {
      throw ParameterError("lqr_q must be symmetric");
    }
    Eigen::SelfAdjointEigenSolver<Matrix3<Scalar>> es(lqr_q);
    if (es.eigenvalues().minCoeff() < -Scalar(1e-12)) {
      throw ParameterError("lqr_q must be positive semidefinite");
    }
  }
};

template <typename Scalar>
struct ForceExchangeT {
  Scalar f_r{0};
  Scalar f_hmi{0};
  Scalar f_s{0};
  Scalar f_ext{0};
  Scalar f_ext_scaled{0};
};

/// Gain over the controller states [x_w, x_w_dot, xi_R]; u = -k . (z - z_ref).
template <typename Scalar>
struct LqrGainT {
  Vector3<Scalar> k{Vector3<Scalar>::Zero()};
  Matrix3<Scalar> P{Matrix3<Scalar>::Zero()};
  Scalar residual{0};
  /// Eigenvalues of A - B k on the subsystem the weights make detectable.
  Eigen::Matrix<std::complex<Scalar>, Eigen::Dynamic, 1> closed_loop_poles;

  /// Positive DCM gain in the form tau_W = -K (xi_H - xi_R) + F_R.
  Scalar dcm_gain() const { return -k(2); }
};

template <typename Scalar>
struct WheelCommandT {
  Scalar effort{0};
  Scalar effort_torque{0};
  bool saturated{false};
};

template <typename Scalar>
struct SpringResultT {
  Scalar f_r{0};
  Scalar f_hmi{0};
  Scalar f_s{0};
};

using RetargetConfig = RetargetConfigT<double>;
using ForceExchange = ForceExchangeT<double>;
using LqrGain = LqrGainT<double>;
using WheelCommand = WheelCommandT<double>;
using SpringResult = SpringResultT<double>;

/// F_R = (gamma_R / h_H) p_H.
template <typename Scalar>
Scalar feedforward_force(Scalar cop, const HumanParamsT<Scalar>& human,
                         const RobotParamsT<Scalar>& robot) {
  return robot.gamma() / human.h_com * cop;
}

/// F_HMI = gamma_H ((theta_R - theta_H) + (theta_dot_R / w°_R - theta_dot_H / w_H))
///         + gamma_H / (alpha^2 gamma_R) F_ext.
template <typename Scalar>
Scalar haptic_feedback(const CartPoleStateT<Scalar>& robot_state,
                       const AipStateT<Scalar>& human_state, Scalar f_ext,
                       const HumanParamsT<Scalar>& human,
                       const RobotParamsT<Scalar>& robot) {
  const Scalar gh = human.gamma();
  const Scalar a2 = robot.alpha() * robot.alpha();
  return gh * ((robot_state.theta - human_state.theta) +
               (robot_state.theta_dot / robot.omega_circ() -
                human_state.theta_dot / human.omega())) +
         gh / (a2 * robot.gamma()) * f_ext;
}

/// Virtual spring F_s = -K_s x_H added to both sides of the similarity
/// constraint. Identity when the spring is disabled.
template <typename Scalar>
SpringResultT<Scalar> apply_spring(Scalar f_r, Scalar f_hmi, Scalar com_disp,
                                   const RetargetConfigT<Scalar>& cfg,
                                   const HumanParamsT<Scalar>& human,
                                   const RobotParamsT<Scalar>& robot) {
  if (!cfg.spring_enabled) return {f_r, f_hmi, 0};
  const Scalar f_s = -cfg.k_spring * com_disp;
  return {f_r - robot.gamma() / human.gamma() * f_s, f_hmi + f_s, f_s};
}

/// LHS - RHS of the normalized DCM-rate similarity constraint:
/// [theta_R + theta_dot_R/w° - F_R/gamma_R + F_ext/(alpha^2 gamma_R)]
///   - [theta_H + theta_dot_H/w_H - p_H/h_H + F_HMI/gamma_H].
template <typename Scalar>
Scalar similarity_residual(const CartPoleStateT<Scalar>& robot_state,
                           const AipStateT<Scalar>& human_state, Scalar cop,
                           Scalar f_r, Scalar f_hmi, Scalar f_ext,
                           const HumanParamsT<Scalar>& human,
                           const RobotParamsT<Scalar>& robot) {
  const Scalar gr = robot.gamma();
  const Scalar a2 = robot.alpha() * robot.alpha();
  const Scalar lhs = robot_state.theta + robot_state.theta_dot / robot.omega_circ() -
                     f_r / gr + f_ext / (a2 * gr);
  const Scalar rhs = human_state.theta + human_state.theta_dot / human.omega() -
                     cop / human.h_com + f_hmi / human.gamma();
  return lhs - rhs;
}

/// Controller model over z = [x_w, x_w_dot, xi_R]. Obtained from the
/// linearized cart-pole in modal coordinates (x, x_dot, xi, zeta) with
/// zeta = theta - theta_dot/w° truncated, so theta -> xi/2 in the x_ddot row.
template <typename Scalar>
std::pair<Matrix3<Scalar>, Vector3<Scalar>> lqr_model(const RobotParamsT<Scalar>& p) {
  const Scalar wc = p.omega_circ();
  Matrix3<Scalar> a = Matrix3<Scalar>::Zero();
  a(0, 1) = 1;
  a(1, 2) = -(p.m_body / p.m_base) * p.g / 2;
  a(2, 2) = wc;
  const Vector3<Scalar> b(0, 1 / p.m_base, -1 / (wc * p.m_base * p.h_com));
  return {a, b};
}

enum class RiccatiMethod { kEigenvector, kIterative };

/// LQR synthesis. Integrator states with zero weight that nothing weighted
/// depends on (x_w when q_x = 0, then x_w_dot when q_v = 0 as well) are
/// unobservable marginal modes; the CARE is solved on the remaining
/// subsystem and their gains are exactly zero.
template <typename Scalar>
LqrGainT<Scalar> synthesize_lqr(const RobotParamsT<Scalar>& robot,
                                const RetargetConfigT<Scalar>& cfg,
                                RiccatiMethod method = RiccatiMethod::kIterative) {
  robot.validate();
  cfg.validate();
  const auto [a, b] = lqr_model(robot);
  const Matrix3<Scalar>& q = cfg.lqr_q;
  auto zero_row = [&](int i) {
    return q.row(i).cwiseAbs().maxCoeff() == Scalar(0);
  };
  int first = 0;
  if (zero_row(0)) {
    first = 1;
    if (zero_row(1)) first = 2;
  }
  const int n = 3 - first;
  const MatrixX<Scalar> A = a.bottomRightCorner(n, n);
  const MatrixX<Scalar> B = b.tail(n);
  const MatrixX<Scalar> Q = q.bottomRightCorner(n, n);
  MatrixX<Scalar> R(1, 1);
  R(0, 0) = cfg.lqr_r;

  CareSolution<Scalar> sol;
  try {
    sol = method == RiccatiMethod::kEigenvector ? solve_care_eigen(A, B, Q, R)
                                                : solve_care_iterative(A, B, Q, R);
  } catch (const SynthesisError& e) {
    throw;
  } catch (const Error& e) {
    throw SynthesisError(std::string("lqr synthesis failed: ") + e.what(), NAN);
  }
  if (!(sol.residual < Scalar(1e-8)) || !sol.P.allFinite()) {
    throw SynthesisError("lqr synthesis: Riccati residual too large", sol.residual);
  }
  LqrGainT<Scalar> gain;
  gain.P.bottomRightCorner(n, n) = sol.P;
  gain.k.tail(n) = sol.K.transpose();
  gain.residual = sol.residual;
  const MatrixX<Scalar> acl = A - B * sol.K;
  gain.closed_loop_poles = Eigen::EigenSolver<MatrixX<Scalar>>(acl).eigenvalues();
  for (Eigen::Index i = 0; i < gain.closed_loop_poles.size(); ++i) {
    if (!(gain.closed_loop_poles(i).real() < 0)) {
      throw SynthesisError("lqr synthesis: closed loop not stable", sol.residual);
    }
  }
  return gain;
}

/// tau_W = -k . [x_w, x_w_dot, xi_R - xi_H] + F_R, clamped to +-saturation.
/// With default weights only the DCM term is active, which is
/// -K_LQR (xi_H - xi_R) + F_R with K_LQR = gain.dcm_gain() > 0.
template <typename Scalar>
WheelCommandT<Scalar> wheel_effort(const LqrGainT<Scalar>& gain, Scalar xi_H,
                                   Scalar xi_R, Scalar f_r,
                                   const CartPoleStateT<Scalar>& robot_state,
                                   Scalar saturation, Scalar wheel_radius = 0) {
  const Vector3<Scalar> err(robot_state.x_w, robot_state.x_w_dot, xi_R - xi_H);
  const Scalar raw = -gain.k.dot(err) + f_r;
  WheelCommandT<Scalar> cmd;
  cmd.effort = std::clamp(raw, -saturation, saturation);
  cmd.saturated = cmd.effort != raw;
  cmd.effort_torque = cmd.effort * wheel_radius;
  return cmd;
}

/// Integrated-velocity baseline: x_dot_des = int g theta_H dt, x_des = int
/// x_dot_des dt, both by the trapezoid rule on a uniform grid.
template <typename Scalar>
std::pair<std::vector<Scalar>, std::vector<Scalar>> legacy_velocity_reference(
    const std::vector<Scalar>& theta_h, Scalar dt, Scalar g) {
  if (!(dt > 0)) throw ParameterError("legacy_velocity_reference: dt must be > 0");
  std::vector<Scalar> v(theta_h.size(), 0);
  std::vector<Scalar> x(theta_h.size(), 0);
  for (std::size_t k = 1; k < theta_h.size(); ++k) {
    v[k] = v[k - 1] + g * (theta_h[k - 1] + theta_h[k]) / 2 * dt;
    x[k] = x[k - 1] + (v[k - 1] + v[k]) / 2 * dt;
  }
  return {v, x};
}

}  // namespace telesim

#endif  // TELESIM_LOCOMOTION_HPP_
