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

// Fixed-step closed-loop world: pilot pendulum, robot cart-pole, arms, box
// and hand-off target.

#ifndef TELESIM_SIM_HPP_
#define TELESIM_SIM_HPP_

#include <array>
#include <cstdint>
#include <string>

#include <Eigen/Dense>

#include "telesim/arm.hpp"
#include "telesim/config.hpp"
#include "telesim/estimation.hpp"
#include "telesim/locomotion.hpp"
#include "telesim/pilot.hpp"
#include "telesim/rom.hpp"

namespace telesim {

struct BoxState {
  double mass{8.5};
  /// x of the contact face.
  double position{0.5};
  double velocity{0};
  double mu_static{0.35};
  double mu_kinetic{0.30};
  bool in_contact{false};

  void validate() const;
  static BoxState from_config(const BoxConfig& c);
};

namespace flags {
inline constexpr std::uint32_t kEffortSaturated = 1u << 0;
inline constexpr std::uint32_t kIkSingular = 1u << 1;
inline constexpr std::uint32_t kDegenerateFrame = 1u << 2;
inline constexpr std::uint32_t kArmClamped = 1u << 3;
inline constexpr std::uint32_t kEstimateHeld = 1u << 4;
/// |theta_R| >= pi/2: outside the linear regime.
inline constexpr std::uint32_t kRobotFallen = 1u << 5;
inline constexpr std::uint32_t kHumanFallen = 1u << 6;
inline constexpr std::uint32_t kCopClamped = 1u << 7;
inline constexpr std::uint32_t kFallMask = kRobotFallen | kHumanFallen;
}  // namespace flags

struct ArmState {
  ArmJoints q;
  Eigen::Vector4d qd{Eigen::Vector4d::Zero()};
  PdCommand cmd;
  /// PD drive torque at the current state.
  Eigen::Vector4d tau{Eigen::Vector4d::Zero()};
};

/// Hand contact resolution result for one evaluation.
struct ContactForces {
  /// Normal push on the box per hand, indexed by Side; >= 0.
  std::array<double, 2> per_hand{0, 0};
  double total{0};
  /// Always -total: the reaction on the robot.
  double on_robot{0};
};

struct WorldState {
  double t{0};
  std::uint64_t step{0};
  AipState human;
  CartPoleState robot;
  BoxState box;
  bool box_present{false};
  /// Indexed by Side.
  std::array<ArmState, 2> arms;
  ForceExchange forces;
  std::uint32_t flags{0};

  double target_x{0};
  double target_v{0};
  double target_z{0};
  bool target_present{false};

  // Per-step outputs, evaluated at the start of the step that produced this
  // state.
  double xi_h{0};
  double xi_r{0};
  double cop{0};
  double com_disp{0};
  double lean_ref{0};
  double wheel_effort{0};
  double residual{0};
  double f_contact{0};
  double box_accel{0};
  double f_ext_hat{0};
  std::array<Eigen::Vector3d, 2> hand_world{Eigen::Vector3d::Zero(),
                                            Eigen::Vector3d::Zero()};
};

/// Hand position in the ground frame: wheel axle at (x_w, 0, r_w), torso
/// pitched by theta about y.
Eigen::Vector3d hand_world_position(const CartPoleState& robot, const ArmJoints& q,
                                    const ArmGeometry& geom, double wheel_radius);
/// x-velocity of the hand in the ground frame.
double hand_world_velocity_x(const CartPoleState& robot, const ArmJoints& q,
                             const Eigen::Vector4d& qd, const ArmGeometry& geom);

/// Penalty contact of both hands against the box face: unilateral
/// spring-damper along x, zero when separated.
ContactForces contact_forces(const CartPoleState& robot,
                             const std::array<ArmState, 2>& arms, const BoxState& box,
                             const ArmGeometry& geom, double wheel_radius,
                             const ContactConfig& contact);

/// Box acceleration under drive force `f` with Coulomb friction. A box at rest
/// stays exactly at rest while |f| <= mu_s m g.
double box_acceleration(const BoxState& box, double f, double g);

struct BoxContactResult {
  double f_ext_on_robot{0};
  BoxState box;
  ContactForces forces;
};

/// Contact forces at the given state, then the box advanced by dt under
/// them (constant acceleration, stopping at zero velocity).
BoxContactResult resolve_box_contact(const CartPoleState& robot,
                                     const std::array<ArmState, 2>& arms,
                                     const BoxState& box, double dt,
                                     const ArmGeometry& geom, double wheel_radius,
                                     const ContactConfig& contact, double g);

/// Runtime toggles that may change mid-session.
struct Toggles {
  bool spring{true};
  bool haptics{true};
};

class Simulator {
 public:
  explicit Simulator(ScenarioConfig cfg);

  /// Equilibrium initial state for the scenario; arms at `arms`.
  void reset(const PilotInput& initial);
  /// One fixed step under the given pilot input. Throws SimulationDiverged.
  const WorldState& step(const PilotInput& input);

  const WorldState& world() const { return world_; }
  const ScenarioConfig& config() const { return cfg_; }
  const LqrGain& gain() const { return gain_; }
  Toggles toggles() const { return toggles_; }
  void set_toggles(const Toggles& t);

 private:
  ScenarioConfig cfg_;
  LqrGain gain_;
  Toggles toggles_;
  PilotModel pilot_;
  std::array<ArmRetargeter, 2> retargeters_;
  ContactEstimator estimator_;
  WorldState world_;
};

/// Checks every state field; throws SimulationDiverged naming the first
/// non-finite one.
void check_finite(const WorldState& w);

}  // namespace telesim

#endif  // TELESIM_SIM_HPP_
