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

// Headless stand-in for the live pilot: a scripted lean/CoP/arm trace and a
// balance controller that plays it on the human pendulum.

#ifndef TELESIM_PILOT_HPP_
#define TELESIM_PILOT_HPP_

#include <istream>
#include <string>
#include <vector>

#include "telesim/arm.hpp"
#include "telesim/config.hpp"
#include "telesim/rom.hpp"

namespace telesim {

/// One pilot input sample. `com_disp` is only used when the config asks for
/// scripted CoM displacement.
struct PilotInput {
  double lean{0};
  double cop{0};
  double com_disp{0};
  ArmJoints left{Eigen::Vector4d::Zero(), Side::kLeft};
  ArmJoints right{Eigen::Vector4d::Zero(), Side::kRight};

  bool finite() const;
};

bool operator==(const PilotInput& a, const PilotInput& b);

/// CSV columns: t,theta_H,cop,com_disp,l_q0..l_q3,r_q0..r_q3. Linear
/// interpolation between rows, held constant outside the covered range.
class PilotScript {
 public:
  struct Row {
    double t;
    PilotInput input;
  };

  PilotScript() = default;
  explicit PilotScript(std::vector<Row> rows);

  static PilotScript parse(std::istream& in, const std::string& name = "<script>");
  static PilotScript load(const std::string& path);
  /// All-zero input with arms at `arms` (a single row).
  static PilotScript constant(const PilotInput& input);

  PilotInput sample(double t) const;
  const std::vector<Row>& rows() const { return rows_; }
  bool empty() const { return rows_.empty(); }
  double end_time() const { return rows_.empty() ? 0 : rows_.back().t; }

  std::string to_csv() const;

 private:
  std::vector<Row> rows_;
};

/// Arm pose used by the shipped scripts: forearm forward at shoulder height.
ArmJoints reach_pose(Side side);

/// Observations the pilot reacts to, besides its own body state.
struct PilotObservation {
  double t{0};
  double f_hmi{0};
  double robot_velocity{0};
  double box_velocity{0};
  bool box_present{false};
  double hand_x{0};
  double target_x{0};
  double target_velocity{0};
};

struct PilotDecision {
  double cop{0};
  double lean_ref{0};
  double lean_cap_hi{0};
  double lean_cap_lo{0};
  double correction{0};
  bool cop_clamped{false};
};

/// Computed-torque balance on the human pendulum:
///   p = h sin(theta) + h cos(theta) F / (m g) - (h^2 / g) theta_ddot_des
/// with theta_ddot_des = -kp (theta - theta_ref) - kd theta_dot, plus the
/// scripted CoP as feedforward, clamped to the support polygon. The lean
/// reference is capped where the steady-state CoP against the present haptic
/// force would leave `lean_margin` of the support polygon.
class PilotModel {
 public:
  PilotModel() = default;
  PilotModel(const PilotConfig& cfg, const HumanParams& human, bool linear_human);

  PilotDecision decide(const AipState& s, const PilotInput& in,
                       const PilotObservation& obs, double dt);
  void reset() { integral_ = 0; }
  double integral() const { return integral_; }

 private:
  PilotConfig cfg_{};
  HumanParams human_{};
  bool linear_{false};
  double integral_{0};
};

}  // namespace telesim

#endif  // TELESIM_PILOT_HPP_
