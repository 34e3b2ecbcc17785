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

// Reduced-order models: the robot cart-pole and the human actuated inverted
// pendulum (AIP), their linearizations, and divergent-component-of-motion
// (DCM) helpers.

#ifndef TELESIM_ROM_HPP_
#define TELESIM_ROM_HPP_

#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "telesim/errors.hpp"

namespace telesim {

template <typename Scalar>
using Vector2 = Eigen::Matrix<Scalar, 2, 1>;
template <typename Scalar>
using Vector3 = Eigen::Matrix<Scalar, 3, 1>;
template <typename Scalar>
using Vector4 = Eigen::Matrix<Scalar, 4, 1>;
template <typename Scalar>
using Matrix3 = Eigen::Matrix<Scalar, 3, 3>;
template <typename Scalar>
using Matrix4 = Eigen::Matrix<Scalar, 4, 4>;

/// Robot cart-pole constants. `m_body` is the pendulum (body) mass m, `m_base`
/// the cart (wheel base) mass M. Derived quantities are always recomputed.
template <typename Scalar>
struct RobotParamsT {
  Scalar m_body{12.6};
  Scalar m_base{1.61};
  Scalar h_com{0.37};
  Scalar g{9.81};
  Scalar wheel_radius{0.05};

  Scalar omega() const { return std::sqrt(g / h_com); }
  Scalar alpha() const { return std::sqrt(m_body / m_base); }
  /// Effective divergence rate of the pitch subsystem, alpha * omega.
  Scalar omega_circ() const { return alpha() * omega(); }
  Scalar gamma() const { return m_body * omega() * omega() * h_com; }

  void validate() const {
    if (!(m_body > 0) || !(m_base > 0) || !(h_com > 0) || !(g > 0) ||
        !(wheel_radius > 0)) {
      throw ParameterError("robot parameters must be positive");
    }
  }
};

template <typename Scalar>
struct HumanParamsT {
  Scalar m_body{52.0};
  Scalar h_com{1.10};
  Scalar h_ankle{0.0};
  Scalar g{9.81};

  Scalar h_tilde() const { return h_com - h_ankle; }
  Scalar omega() const { return std::sqrt(g / h_com); }
  Scalar gamma() const { return m_body * omega() * omega() * h_com; }

  void validate() const {
    if (!(m_body > 0) || !(h_com > 0) || !(g > 0)) {
      throw ParameterError("human parameters must be positive");
    }
    if (!(h_ankle >= 0) || !(h_ankle < h_com)) {
      throw ParameterError("human ankle height must satisfy 0 <= h_ankle < h_com");
    }
  }
};

/// Reference robot and pilot profile: the defaults above.
template <typename Scalar = double>
RobotParamsT<Scalar> satyrr_robot() {
  return {};
}
template <typename Scalar = double>
HumanParamsT<Scalar> satyrr_pilot() {
  return {};
}

template <typename Scalar>
struct CartPoleStateT {
  Scalar x_w{0};
  Scalar x_w_dot{0};
  Scalar theta{0};
  Scalar theta_dot{0};

  Vector4<Scalar> vector() const { return {x_w, x_w_dot, theta, theta_dot}; }
  static CartPoleStateT from_vector(const Vector4<Scalar>& v) {
    return {v(0), v(1), v(2), v(3)};
  }
  bool finite() const { return vector().allFinite(); }
  /// Outside the upright half-plane the linearized model is meaningless.
  bool linear_regime_violated() const {
    return !(std::abs(theta) < std::numbers::pi_v<Scalar> / 2);
  }
};

template <typename Scalar>
struct AipStateT {
  Scalar theta{0};
  Scalar theta_dot{0};

  Vector2<Scalar> vector() const { return {theta, theta_dot}; }
  static AipStateT from_vector(const Vector2<Scalar>& v) { return {v(0), v(1)}; }
  bool finite() const { return vector().allFinite(); }
};

template <typename Scalar>
struct SupportPolygonT {
  Scalar p_min{-0.05};
  Scalar p_max{0.15};

  void validate() const {
    if (!(p_min < 0) || !(p_max > 0)) {
      throw ParameterError("support polygon must satisfy p_min < 0 < p_max");
    }
  }
  Scalar clamp(Scalar p) const { return std::min(std::max(p, p_min), p_max); }
};

/// Pilot effort. `cop` is measured from the ankle, positive forward.
template <typename Scalar>
struct HumanCommandT {
  Scalar cop{0};
  Scalar com_disp{0};

  /// Ankle torque in the pitch direction. A CoP ahead of the ankle produces a
  /// restoring (negative pitch) torque of magnitude cop * m * g.
  Scalar ankle_torque(const HumanParamsT<Scalar>& human) const {
    return -cop * human.m_body * human.g;
  }
};

using RobotParams = RobotParamsT<double>;
using HumanParams = HumanParamsT<double>;
using CartPoleState = CartPoleStateT<double>;
using AipState = AipStateT<double>;
using SupportPolygon = SupportPolygonT<double>;
using HumanCommand = HumanCommandT<double>;

/// Dimensionless pendular DCM, theta + theta_dot / omega_eff.
template <typename Scalar>
Scalar dcm(Scalar theta, Scalar theta_dot, Scalar omega_eff) {
  if (!std::isfinite(theta) || !std::isfinite(theta_dot) ||
      !std::isfinite(omega_eff)) {
    throw InvalidStateError("dcm: non-finite input");
  }
  if (!(omega_eff > 0)) throw ParameterError("dcm: omega_eff must be positive");
  return theta + theta_dot / omega_eff;
}

template <typename Scalar>
Scalar human_dcm(const AipStateT<Scalar>& s, const HumanParamsT<Scalar>& p) {
  return dcm(s.theta, s.theta_dot, p.omega());
}

template <typename Scalar>
Scalar robot_dcm(const CartPoleStateT<Scalar>& s, const RobotParamsT<Scalar>& p) {
  return dcm(s.theta, s.theta_dot, p.omega_circ());
}

/// AIP state rate. `tau` is the ankle torque, `f_hmi` the horizontal haptic
/// force at the CoM. The linearized form uses h_com in place of h_tilde.
template <typename Scalar>
AipStateT<Scalar> aip_derivative(const AipStateT<Scalar>& s,
                                 const HumanParamsT<Scalar>& p, Scalar tau,
                                 Scalar f_hmi, bool linearized) {
  const Scalar ht = p.h_tilde();
  if (!(ht > 0)) throw ParameterError("aip_derivative: h_tilde must be positive");
  if (linearized) {
    const Scalar h = p.h_com;
    const Scalar w2 = p.omega() * p.omega();
    return {s.theta_dot,
            w2 * s.theta + tau / (p.m_body * h * h) + f_hmi / (p.m_body * h)};
  }
  return {s.theta_dot, p.g * std::sin(s.theta) / ht +
                           tau / (p.m_body * ht * ht) +
                           std::cos(s.theta) * f_hmi / (p.m_body * ht)};
}

/// Cart-pole state rate. `u` is the horizontal force on the cart, `f_ext` a
/// horizontal force applied at the body CoM.
///
/// linearized: the reduced-order model verbatim,
///   x_ddot     = -(m/M) g theta + u/M
///   theta_ddot = (m g)/(M h) theta - u/(M h) + f_ext/(m h).
/// nonlinear: the textbook point-mass cart-pole (Lagrangian, energy
/// conserving). Its own small-angle limit has (M+m) g/(M h) in the
/// theta_ddot row, so the two forms differ at first order in that entry.
template <typename Scalar>
CartPoleStateT<Scalar> cartpole_derivative(const CartPoleStateT<Scalar>& s,
                                           const RobotParamsT<Scalar>& p,
                                           Scalar u, Scalar f_ext,
                                           bool linearized) {
  const Scalar m = p.m_body;
  const Scalar M = p.m_base;
  const Scalar h = p.h_com;
  const Scalar g = p.g;
  if (linearized) {
    return {s.x_w_dot, -(m / M) * g * s.theta + u / M, s.theta_dot,
            (m * g) / (M * h) * s.theta - u / (M * h) + f_ext / (m * h)};
  }
  const Scalar st = std::sin(s.theta);
  const Scalar ct = std::cos(s.theta);
  // [M+m, m h c; m h c, m h^2] [x_ddot; theta_ddot] = rhs
  const Scalar r1 = u + f_ext + m * h * st * s.theta_dot * s.theta_dot;
  const Scalar r2 = f_ext * h * ct + m * g * h * st;
  const Scalar det = m * h * h * (M + m * st * st);
  const Scalar x_ddot = (m * h * h * r1 - m * h * ct * r2) / det;
  const Scalar theta_ddot = ((M + m) * r2 - m * h * ct * r1) / det;
  return {s.x_w_dot, x_ddot, s.theta_dot, theta_ddot};
}

/// Total mechanical energy of the nonlinear cart-pole (potential datum at the
/// wheel axle).
template <typename Scalar>
Scalar cartpole_energy(const CartPoleStateT<Scalar>& s,
                       const RobotParamsT<Scalar>& p) {
  const Scalar m = p.m_body;
  const Scalar h = p.h_com;
  const Scalar ct = std::cos(s.theta);
  return Scalar(0.5) * (p.m_base + m) * s.x_w_dot * s.x_w_dot +
         m * h * ct * s.x_w_dot * s.theta_dot +
         Scalar(0.5) * m * h * h * s.theta_dot * s.theta_dot + m * p.g * h * ct;
}

/// State matrix of the linearized cart-pole over [x_w, x_w_dot, theta,
/// theta_dot].
template <typename Scalar>
Matrix4<Scalar> cartpole_state_matrix(const RobotParamsT<Scalar>& p) {
  const Scalar m = p.m_body;
  const Scalar M = p.m_base;
  Matrix4<Scalar> a = Matrix4<Scalar>::Zero();
  a(0, 1) = 1;
  a(1, 2) = -(m / M) * p.g;
  a(2, 3) = 1;
  a(3, 2) = (m * p.g) / (M * p.h_com);
  return a;
}

template <typename Scalar>
Vector4<Scalar> cartpole_input_vector(const RobotParamsT<Scalar>& p) {
  return {0, 1 / p.m_base, 0, -1 / (p.m_base * p.h_com)};
}

template <typename Scalar>
Vector4<Scalar> cartpole_disturbance_vector(const RobotParamsT<Scalar>& p) {
  return {0, 0, 0, 1 / (p.m_body * p.h_com)};
}

enum class Agent { kHuman, kRobot };

/// Human: xi_dot = w_H xi - (w_H / h_H) p_H, with `effort` the CoP [m].
template <typename Scalar>
Scalar human_dcm_rate(Scalar xi, Scalar cop, const HumanParamsT<Scalar>& p) {
  const Scalar w = p.omega();
  return w * xi - (w / p.h_com) * cop;
}

/// Robot: xi_dot = w° xi - F_R / (w° M h_R), with `effort` the cart force [N].
template <typename Scalar>
Scalar robot_dcm_rate(Scalar xi, Scalar f_r, const RobotParamsT<Scalar>& p) {
  const Scalar wc = p.omega_circ();
  return wc * xi - f_r / (wc * p.m_base * p.h_com);
}

template <typename Scalar>
Scalar dcm_rate(Agent kind, Scalar xi, Scalar effort,
                const HumanParamsT<Scalar>& human,
                const RobotParamsT<Scalar>& robot) {
  return kind == Agent::kHuman ? human_dcm_rate(xi, effort, human)
                               : robot_dcm_rate(xi, effort, robot);
}

/// Closed-interval support test p_min/h <= xi_H <= p_max/h.
template <typename Scalar>
bool dcm_within_support(const AipStateT<Scalar>& s, const HumanParamsT<Scalar>& p,
                        const SupportPolygonT<Scalar>& poly) {
  poly.validate();
  const Scalar xi = human_dcm(s, p);
  return poly.p_min / p.h_com <= xi && xi <= poly.p_max / p.h_com;
}

}  // namespace telesim

#endif  // TELESIM_ROM_HPP_
