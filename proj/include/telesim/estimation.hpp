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

// Planar contact force estimation from arm motor torques.

#ifndef TELESIM_ESTIMATION_HPP_
#define TELESIM_ESTIMATION_HPP_

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <optional>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "telesim/arm.hpp"

namespace telesim {

/// Motor-space to joint-space map, diag(-1, 1, 1, -2).
template <typename Scalar>
Vector4<Scalar> gear_map() {
  return {-1, 1, 1, -2};
}

template <typename Scalar>
struct MotorTorquesT {
  Vector4<Scalar> tau_m{Vector4<Scalar>::Zero()};
  Side side{Side::kRight};
};

template <typename Scalar>
struct ContactEstimateT {
  Scalar f_ext_hat{0};
  Scalar f_ext_scaled{0};
  /// Indexed by Side.
  std::array<Scalar, 2> per_arm{0, 0};
  bool held{false};
};

using MotorTorques = MotorTorquesT<double>;
using ContactEstimate = ContactEstimateT<double>;

/// Moore-Penrose pseudoinverse by SVD; singular values below
/// tol * sigma_max are treated as zero.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Derived::ColsAtCompileTime,
              Derived::RowsAtCompileTime>
pseudo_inverse(const Eigen::MatrixBase<Derived>& m,
               typename Derived::Scalar tol = 1e-12) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<Eigen::Matrix<Scalar, Derived::RowsAtCompileTime,
                                 Derived::ColsAtCompileTime>>
      svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const Scalar cutoff = tol * (s.size() ? s(0) : Scalar(0));
  Eigen::Matrix<Scalar, Derived::ColsAtCompileTime, Derived::RowsAtCompileTime> out =
      Eigen::Matrix<Scalar, Derived::ColsAtCompileTime,
                    Derived::RowsAtCompileTime>::Zero(m.cols(), m.rows());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s(i) > cutoff) {
      out += svd.matrixV().col(i) * (1 / s(i)) * svd.matrixU().col(i).transpose();
    }
  }
  return out;
}

template <typename Derived>
typename Derived::Scalar condition_number(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  Eigen::JacobiSVD<Eigen::Matrix<Scalar, Derived::RowsAtCompileTime,
                                 Derived::ColsAtCompileTime>>
      svd(m);
  const auto& s = svd.singularValues();
  const Scalar lo = s(s.size() - 1);
  return lo > 0 ? s(0) / lo : std::numeric_limits<Scalar>::infinity();
}

/// Joint torques as seen by the estimator: G tau_m for the right arm and
/// -G tau_m for the (mirrored) left arm.
template <typename Scalar>
Vector4<Scalar> joint_torques(const MotorTorquesT<Scalar>& m) {
  const Vector4<Scalar> j = (gear_map<Scalar>().array() * m.tau_m.array()).matrix();
  return m.side == Side::kRight ? j : Vector4<Scalar>(-j);
}

/// Inverse of joint_torques: the motor torques that produce `tau_j`.
template <typename Scalar>
MotorTorquesT<Scalar> motor_torques_from_joint(const Vector4<Scalar>& tau_j, Side side) {
  Vector4<Scalar> m = (tau_j.array() / gear_map<Scalar>().array()).matrix();
  if (side == Side::kLeft) m = -m;
  return {m, side};
}

template <typename Scalar>
struct EstimatorConfigT {
  Scalar k_fb{2.5};
  Scalar max_condition{1e6};
  /// First-order low-pass cutoff [Hz]; <= 0 disables the filter.
  Scalar lowpass_hz{0};
};

using EstimatorConfig = EstimatorConfigT<double>;

/// Tip force from joint torques through the statics relation tau = J^T F,
/// F = (J^T)^+ tau. Returns nullopt when cond(J) exceeds `max_condition`.
template <typename Scalar>
std::optional<Vector3<Scalar>> tip_force(const ArmJointsT<Scalar>& q,
                                         const ArmGeometryT<Scalar>& geom,
                                         const Vector4<Scalar>& tau_j,
                                         Scalar max_condition) {
  const Matrix34<Scalar> j = contact_jacobian(q, geom);
  if (!(condition_number(j) <= max_condition)) return std::nullopt;
  const Eigen::Matrix<Scalar, 3, 4> jt_pinv = pseudo_inverse(j.transpose().eval());
  return jt_pinv * tau_j;
}

/// Sum of the x (sagittal) components of the two hand forces. `pitch` rotates
/// the torso-frame forces into the ground frame before selection; pass 0 to
/// select in the torso frame.
template <typename Scalar>
std::optional<ContactEstimateT<Scalar>> estimate_external_force(
    const MotorTorquesT<Scalar>& tau_r, const MotorTorquesT<Scalar>& tau_l,
    const ArmJointsT<Scalar>& q_r, const ArmJointsT<Scalar>& q_l,
    const ArmGeometryT<Scalar>& geom, const EstimatorConfigT<Scalar>& cfg,
    Scalar pitch = 0) {
  const auto fr = tip_force(q_r, geom, joint_torques(tau_r), cfg.max_condition);
  const auto fl = tip_force(q_l, geom, joint_torques(tau_l), cfg.max_condition);
  if (!fr || !fl) return std::nullopt;
  const Matrix3<Scalar> world = rot_y(pitch);
  ContactEstimateT<Scalar> out;
  out.per_arm[static_cast<int>(Side::kRight)] = (world * *fr).x();
  out.per_arm[static_cast<int>(Side::kLeft)] = (world * *fl).x();
  out.f_ext_hat = out.per_arm[0] + out.per_arm[1];
  out.f_ext_scaled = cfg.k_fb * out.f_ext_hat;
  return out;
}

/// Per-session estimator: holds the previous estimate through ill-conditioned
/// poses and optionally low-passes the raw estimate.
template <typename Scalar>
class ContactEstimatorT {
 public:
  ContactEstimatorT() = default;
  explicit ContactEstimatorT(EstimatorConfigT<Scalar> cfg) : cfg_(cfg) {}

  ContactEstimateT<Scalar> update(const MotorTorquesT<Scalar>& tau_r,
                                  const MotorTorquesT<Scalar>& tau_l,
                                  const ArmJointsT<Scalar>& q_r,
                                  const ArmJointsT<Scalar>& q_l,
                                  const ArmGeometryT<Scalar>& geom, Scalar dt,
                                  Scalar pitch = 0) {
    auto est = estimate_external_force(tau_r, tau_l, q_r, q_l, geom, cfg_, pitch);
    if (!est) {
      ContactEstimateT<Scalar> held = last_;
      held.held = true;
      return held;
    }
    if (cfg_.lowpass_hz > 0 && primed_) {
      const Scalar tau = 1 / (2 * std::numbers::pi_v<Scalar> * cfg_.lowpass_hz);
      const Scalar a = dt / (tau + dt);
      est->f_ext_hat = last_.f_ext_hat + a * (est->f_ext_hat - last_.f_ext_hat);
      for (int i = 0; i < 2; ++i) {
        est->per_arm[i] = last_.per_arm[i] + a * (est->per_arm[i] - last_.per_arm[i]);
      }
      est->f_ext_scaled = cfg_.k_fb * est->f_ext_hat;
    }
    primed_ = true;
    last_ = *est;
    return last_;
  }

  const ContactEstimateT<Scalar>& last() const { return last_; }
  const EstimatorConfigT<Scalar>& config() const { return cfg_; }

 private:
  EstimatorConfigT<Scalar> cfg_{};
  ContactEstimateT<Scalar> last_{};
  bool primed_{false};
};

using ContactEstimator = ContactEstimatorT<double>;

}  // namespace telesim

#endif  // TELESIM_ESTIMATION_HPP_
