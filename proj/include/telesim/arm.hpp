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

// 4-DoF arm kinematics and human-to-robot arm retargeting.
//
// Conventions. Each arm is computed in a chain frame with x forward, y to the
// arm's outside-right and z down the hanging arm, so the zero pose points the
// upper arm straight down. The shoulder is
//   R = Ry(q0) Rx(q1) Rz(q2)      (flexion, abduction, internal rotation)
// and the elbow rotates by q3 about the upper-arm y axis (positive bends the
// forearm forward). The chain frame maps to the torso frame (x forward, y
// left, z up) by diag(1, -1, -1) for the right arm and by its sagittal mirror
// diag(1, 1, -1) for the left arm. Rotations (ArmFrames) stay in the chain
// frame, so both sides share one IK.

#ifndef TELESIM_ARM_HPP_
#define TELESIM_ARM_HPP_

#include <algorithm>
#include <cmath>
#include <numbers>

#include <Eigen/Dense>

#include "telesim/errors.hpp"
#include "telesim/rom.hpp"

namespace telesim {

enum class Side { kLeft = 0, kRight = 1 };

template <typename Scalar>
using Matrix34 = Eigen::Matrix<Scalar, 3, 4>;

template <typename Scalar>
struct ArmFramesT {
  Vector3<Scalar> r_z{Vector3<Scalar>::UnitZ()};
  Vector3<Scalar> r_y{Vector3<Scalar>::UnitY()};
  Side side{Side::kRight};

  Vector3<Scalar> r_x() const { return r_y.cross(r_z); }
  Matrix3<Scalar> rotation() const {
    Matrix3<Scalar> r;
    r << r_x(), r_y, r_z;
    return r;
  }
};

template <typename Scalar>
struct ArmJointsT {
  Vector4<Scalar> q{Vector4<Scalar>::Zero()};
  Side side{Side::kRight};
};

/// `shoulder_offset` is the right shoulder in the torso frame; the left
/// shoulder is its mirror image (y negated).
template <typename Scalar>
struct ArmGeometryT {
  Scalar l_upper{0.25};
  Scalar l_fore{0.25};
  Vector3<Scalar> shoulder_offset{0, -0.17, 0.50};

  void validate() const {
    if (!(l_upper > 0) || !(l_fore > 0)) {
      throw ParameterError("arm link lengths must be positive");
    }
  }
};

template <typename Scalar>
struct JointLimitsT {
  Scalar shoulder{2.8};
  Scalar elbow_min{0};
  Scalar elbow_max{2.6};

  /// Returns true if any joint was clamped.
  bool clamp(Vector4<Scalar>& q) const {
    Vector4<Scalar> c = q;
    for (int i = 0; i < 3; ++i) c(i) = std::clamp(q(i), -shoulder, shoulder);
    c(3) = std::clamp(q(3), elbow_min, elbow_max);
    const bool changed = (c.array() != q.array()).any();
    q = c;
    return changed;
  }
};

template <typename Scalar>
struct PdGainsT {
  Vector4<Scalar> kp{Vector4<Scalar>::Constant(20)};
  Vector4<Scalar> kd{Vector4<Scalar>::Constant(0.5)};
};

template <typename Scalar>
struct PdCommandT {
  Vector4<Scalar> q_des{Vector4<Scalar>::Zero()};
  Vector4<Scalar> qd_des{Vector4<Scalar>::Zero()};
  Vector4<Scalar> kp{Vector4<Scalar>::Zero()};
  Vector4<Scalar> kd{Vector4<Scalar>::Zero()};
  Vector4<Scalar> tau_ff{Vector4<Scalar>::Zero()};
};

template <typename Scalar>
struct ArmFkT {
  Vector3<Scalar> elbow_pos;
  Vector3<Scalar> hand_pos;
  ArmFramesT<Scalar> frames;
};

using ArmFrames = ArmFramesT<double>;
using ArmJoints = ArmJointsT<double>;
using ArmGeometry = ArmGeometryT<double>;
using JointLimits = JointLimitsT<double>;
using PdGains = PdGainsT<double>;
using PdCommand = PdCommandT<double>;
using ArmFk = ArmFkT<double>;

template <typename Scalar>
Matrix3<Scalar> rot_x(Scalar a) {
  return Eigen::AngleAxis<Scalar>(a, Vector3<Scalar>::UnitX()).toRotationMatrix();
}
template <typename Scalar>
Matrix3<Scalar> rot_y(Scalar a) {
  return Eigen::AngleAxis<Scalar>(a, Vector3<Scalar>::UnitY()).toRotationMatrix();
}
template <typename Scalar>
Matrix3<Scalar> rot_z(Scalar a) {
  return Eigen::AngleAxis<Scalar>(a, Vector3<Scalar>::UnitZ()).toRotationMatrix();
}

template <typename Scalar>
Matrix3<Scalar> shoulder_rotation(Scalar q0, Scalar q1, Scalar q2) {
  return rot_y(q0) * rot_x(q1) * rot_z(q2);
}

/// Chain-to-torso map for one side.
template <typename Scalar>
Matrix3<Scalar> chain_to_torso(Side side) {
  return Vector3<Scalar>(1, side == Side::kRight ? -1 : 1, -1).asDiagonal();
}

template <typename Scalar>
Vector3<Scalar> shoulder_position(const ArmGeometryT<Scalar>& geom, Side side) {
  Vector3<Scalar> s = geom.shoulder_offset;
  if (side == Side::kLeft) s.y() = -s.y();
  return s;
}

template <typename Scalar>
ArmFkT<Scalar> arm_fk(const ArmJointsT<Scalar>& joints, const ArmGeometryT<Scalar>& geom) {
  const Vector4<Scalar>& q = joints.q;
  const Matrix3<Scalar> r = shoulder_rotation(q(0), q(1), q(2));
  const Vector3<Scalar> elbow = geom.l_upper * r.col(2);
  const Vector3<Scalar> hand = elbow + geom.l_fore * (r * rot_y(q(3))).col(2);
  const Matrix3<Scalar> t = chain_to_torso<Scalar>(joints.side);
  const Vector3<Scalar> s = shoulder_position(geom, joints.side);
  ArmFkT<Scalar> out;
  out.elbow_pos = s + t * elbow;
  out.hand_pos = s + t * hand;
  out.frames.r_z = r.col(2);
  out.frames.r_y = r.col(1);
  out.frames.side = joints.side;
  return out;
}

/// Hand position Jacobian in the torso frame (3x4, hand velocity = J q_dot).
template <typename Scalar>
Matrix34<Scalar> contact_jacobian(const ArmJointsT<Scalar>& joints,
                                  const ArmGeometryT<Scalar>& geom) {
  const Vector4<Scalar>& q = joints.q;
  const Matrix3<Scalar> ry0 = rot_y(q(0));
  const Matrix3<Scalar> ryx = ry0 * rot_x(q(1));
  const Matrix3<Scalar> r = ryx * rot_z(q(2));
  const Vector3<Scalar> elbow = geom.l_upper * r.col(2);
  const Vector3<Scalar> hand = elbow + geom.l_fore * (r * rot_y(q(3))).col(2);
  Matrix34<Scalar> j;
  j.col(0) = Vector3<Scalar>::UnitY().cross(hand);
  j.col(1) = ry0.col(0).cross(hand);
  j.col(2) = ryx.col(2).cross(hand);
  j.col(3) = r.col(1).cross(hand - elbow);
  return chain_to_torso<Scalar>(joints.side) * j;
}

/// Gram-Schmidt step: keeps r_z, projects r_y onto the plane orthogonal to it.
template <typename Scalar>
ArmFramesT<Scalar> project_elbow_axis(const Vector3<Scalar>& r_z_h,
                                      const Vector3<Scalar>& r_y_h,
                                      Side side = Side::kRight) {
  if (!r_z_h.allFinite() || !r_y_h.allFinite()) {
    throw DegenerateFrameError("project_elbow_axis: non-finite axis");
  }
  const Vector3<Scalar> perp = r_y_h - r_y_h.dot(r_z_h) * r_z_h;
  // |perp| = sin(angle between the unit axes)
  if (!(perp.norm() > std::sin(Scalar(1e-6)))) {
    throw DegenerateFrameError("project_elbow_axis: elbow axis parallel to upper arm");
  }
  return {r_z_h, perp.normalized(), side};
}

template <typename Scalar>
struct SphericalIkT {
  Vector3<Scalar> q;
  bool singular{false};
};

namespace detail {

template <typename Scalar>
Scalar unwrap_near(Scalar angle, Scalar reference) {
  const Scalar two_pi = 2 * std::numbers::pi_v<Scalar>;
  return angle - two_pi * std::round((angle - reference) / two_pi);
}

}  // namespace detail

/// Decomposes R = [r_x r_y r_z] into Ry(q0) Rx(q1) Rz(q2). Without a previous
/// solution the principal branch q1 in [-pi/2, pi/2] is returned; with one,
/// the branch and 2*pi offsets closest to it. At q1 = +-pi/2 (within 1e-6)
/// q2 is held at its previous value and the singular flag is set.
template <typename Scalar>
SphericalIkT<Scalar> spherical_ik(const ArmFramesT<Scalar>& frames,
                                  const Vector3<Scalar>* previous = nullptr) {
  const Matrix3<Scalar> r = frames.rotation();
  const Scalar cb = std::hypot(r(1, 0), r(1, 1));
  const Scalar b = std::atan2(-r(1, 2), cb);
  SphericalIkT<Scalar> out;
  if (cb < std::sin(Scalar(1e-6))) {
    out.singular = true;
    const Scalar c = previous ? (*previous)(2) : Scalar(0);
    Scalar a;
    if (b > 0) {
      a = std::atan2(r(0, 1), r(0, 0)) + c;  // a - c
    } else {
      a = std::atan2(-r(0, 1), r(0, 0)) - c;  // a + c
    }
    if (previous) a = detail::unwrap_near(a, (*previous)(0));
    out.q = {a, b, c};
    return out;
  }
  const Scalar a = std::atan2(r(0, 2), r(2, 2));
  const Scalar c = std::atan2(r(1, 0), r(1, 1));
  Vector3<Scalar> first(a, b, c);
  if (!previous) {
    out.q = first;
    return out;
  }
  const Scalar pi = std::numbers::pi_v<Scalar>;
  Vector3<Scalar> second(a + pi, pi - b, c + pi);
  for (int i = 0; i < 3; ++i) {
    first(i) = detail::unwrap_near(first(i), (*previous)(i));
    second(i) = detail::unwrap_near(second(i), (*previous)(i));
  }
  out.q = (first - *previous).squaredNorm() <= (second - *previous).squaredNorm()
              ? first
              : second;
  return out;
}

enum class ArmMapping { kInverseKinematics, kJointToJoint };

template <typename Scalar>
struct RetargetResultT {
  ArmJointsT<Scalar> joints;
  bool clamped{false};
  bool singular{false};
  bool degenerate{false};
};

/// Per-arm retargeting session. Owns the IK continuity cache and the
/// hold-previous solution for degenerate frames.
template <typename Scalar>
class ArmRetargeterT {
 public:
  ArmRetargeterT() = default;
  ArmRetargeterT(JointLimitsT<Scalar> limits, ArmMapping mapping)
      : limits_(limits), mapping_(mapping) {}

  RetargetResultT<Scalar> retarget(const ArmJointsT<Scalar>& human_q,
                                   const ArmGeometryT<Scalar>& human_geom) {
    RetargetResultT<Scalar> out;
    out.joints.side = human_q.side;
    if (mapping_ == ArmMapping::kJointToJoint) {
      out.joints.q = human_q.q;
    } else {
      const ArmFkT<Scalar> fk = arm_fk(human_q, human_geom);
      try {
        const ArmFramesT<Scalar> frames =
            project_elbow_axis(fk.frames.r_z, fk.frames.r_y, human_q.side);
        const SphericalIkT<Scalar> ik =
            spherical_ik(frames, has_previous_ ? &previous_ : nullptr);
        out.singular = ik.singular;
        out.joints.q.template head<3>() = ik.q;
        previous_ = ik.q;
        has_previous_ = true;
      } catch (const DegenerateFrameError&) {
        out.degenerate = true;
        out.joints.q.template head<3>() =
            has_previous_ ? previous_ : Vector3<Scalar>::Zero();
      }
      out.joints.q(3) = human_q.q(3);
    }
    out.clamped = limits_.clamp(out.joints.q);
    return out;
  }

  bool has_previous() const { return has_previous_; }
  const Vector3<Scalar>& previous() const { return previous_; }
  void reset() { has_previous_ = false; previous_.setZero(); }

 private:
  JointLimitsT<Scalar> limits_{};
  ArmMapping mapping_{ArmMapping::kInverseKinematics};
  Vector3<Scalar> previous_{Vector3<Scalar>::Zero()};
  bool has_previous_{false};
};

using ArmRetargeter = ArmRetargeterT<double>;
using RetargetResult = RetargetResultT<double>;

/// Stateless single-shot retargeting (principal IK branch).
template <typename Scalar>
RetargetResultT<Scalar> retarget_arm(const ArmJointsT<Scalar>& human_q,
                                     const ArmGeometryT<Scalar>& human_geom,
                                     const JointLimitsT<Scalar>& limits = {}) {
  ArmRetargeterT<Scalar> r(limits, ArmMapping::kInverseKinematics);
  return r.retarget(human_q, human_geom);
}

template <typename Scalar>
PdCommandT<Scalar> pd_command(const ArmJointsT<Scalar>& q_des,
                              const PdGainsT<Scalar>& gains) {
  if ((gains.kp.array() < 0).any() || (gains.kd.array() < 0).any()) {
    throw ParameterError("pd gains must be non-negative");
  }
  PdCommandT<Scalar> cmd;
  cmd.q_des = q_des.q;
  cmd.kp = gains.kp;
  cmd.kd = gains.kd;
  return cmd;
}

/// Restoring PD law tau = -Kp (q - q_des) - Kd (q_dot - q_dot_des) + tau_ff.
template <typename Scalar>
Vector4<Scalar> pd_torque(const PdCommandT<Scalar>& cmd, const Vector4<Scalar>& q,
                          const Vector4<Scalar>& qd) {
  return -(cmd.kp.array() * (q - cmd.q_des).array()).matrix() -
         (cmd.kd.array() * (qd - cmd.qd_des).array()).matrix() + cmd.tau_ff;
}

/// The driver law in its literal written sign, Kp (q - q_des) + Kd (q_dot -
/// q_dot_des) + tau_ff. Not stabilizing; kept for comparison.
template <typename Scalar>
Vector4<Scalar> pd_torque_literal(const PdCommandT<Scalar>& cmd,
                                  const Vector4<Scalar>& q,
                                  const Vector4<Scalar>& qd) {
  return (cmd.kp.array() * (q - cmd.q_des).array()).matrix() +
         (cmd.kd.array() * (qd - cmd.qd_des).array()).matrix() + cmd.tau_ff;
}

}  // namespace telesim

#endif  // TELESIM_ARM_HPP_
