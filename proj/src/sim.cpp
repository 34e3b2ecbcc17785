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

#include "telesim/sim.hpp"

#include <cmath>
#include <numbers>

#include "telesim/errors.hpp"
#include "telesim/integrators.hpp"

namespace telesim {

namespace {

constexpr int kSides[2] = {static_cast<int>(Side::kLeft), static_cast<int>(Side::kRight)};

// Packed integration state.
constexpr int kHuman = 0;
constexpr int kRobot = 2;
constexpr int kArm = 6;  // + 8 * side: q(4), qd(4)
constexpr int kBox = 22;
constexpr int kStateSize = 24;
using StateVector = Eigen::Matrix<double, kStateSize, 1>;

StateVector pack(const WorldState& w) {
  StateVector x;
  x.segment<2>(kHuman) = w.human.vector();
  x.segment<4>(kRobot) = w.robot.vector();
  for (int s : kSides) {
    x.segment<4>(kArm + 8 * s) = w.arms[s].q.q;
    x.segment<4>(kArm + 8 * s + 4) = w.arms[s].qd;
  }
  x(kBox) = w.box.position;
  x(kBox + 1) = w.box.velocity;
  return x;
}

void unpack(const StateVector& x, WorldState& w) {
  w.human = AipState::from_vector(x.segment<2>(kHuman));
  w.robot = CartPoleState::from_vector(x.segment<4>(kRobot));
  for (int s : kSides) {
    w.arms[s].q.q = x.segment<4>(kArm + 8 * s);
    w.arms[s].qd = x.segment<4>(kArm + 8 * s + 4);
  }
  w.box.position = x(kBox);
  w.box.velocity = x(kBox + 1);
}

double sgn(double v) { return v > 0 ? 1.0 : (v < 0 ? -1.0 : 0.0); }

}  // namespace

void BoxState::validate() const {
  if (!(mass > 0)) throw InvalidStateError("box mass must be > 0");
  if (!(mu_kinetic >= 0) || !(mu_kinetic <= mu_static)) {
    throw InvalidStateError("box friction must satisfy 0 <= mu_kinetic <= mu_static");
  }
}

BoxState BoxState::from_config(const BoxConfig& c) {
  BoxState b;
  b.mass = c.mass;
  b.position = c.position;
  b.mu_static = c.mu_static;
  b.mu_kinetic = c.mu_kinetic;
  return b;
}

Eigen::Vector3d hand_world_position(const CartPoleState& robot, const ArmJoints& q,
                                    const ArmGeometry& geom, double wheel_radius) {
  const Eigen::Vector3d p = rot_y(robot.theta) * arm_fk(q, geom).hand_pos;
  return {robot.x_w + p.x(), p.y(), wheel_radius + p.z()};
}

double hand_world_velocity_x(const CartPoleState& robot, const ArmJoints& q,
                             const Eigen::Vector4d& qd, const ArmGeometry& geom) {
  const Eigen::Vector3d p = arm_fk(q, geom).hand_pos;
  const double s = std::sin(robot.theta);
  const double c = std::cos(robot.theta);
  const Eigen::Vector3d v_t = contact_jacobian(q, geom) * qd;
  // d/dtheta of (Ry p).x is -s p_x + c p_z
  return robot.x_w_dot + robot.theta_dot * (-s * p.x() + c * p.z()) +
         (c * v_t.x() + s * v_t.z());
}

ContactForces contact_forces(const CartPoleState& robot,
                             const std::array<ArmState, 2>& arms, const BoxState& box,
                             const ArmGeometry& geom, double wheel_radius,
                             const ContactConfig& contact) {
  ContactForces out;
  for (int s : kSides) {
    const double x = hand_world_position(robot, arms[s].q, geom, wheel_radius).x();
    const double depth = x - box.position;
    if (!(depth > 0)) continue;
    const double v = hand_world_velocity_x(robot, arms[s].q, arms[s].qd, geom);
    out.per_hand[s] =
        std::max(0.0, contact.stiffness * depth + contact.damping * (v - box.velocity));
    out.total += out.per_hand[s];
  }
  out.on_robot = -out.total;
  return out;
}

double box_acceleration(const BoxState& box, double f, double g) {
  const double static_limit = box.mu_static * box.mass * g;
  if (box.velocity == 0 && std::abs(f) <= static_limit) return 0;
  const double dir = box.velocity != 0 ? sgn(box.velocity) : sgn(f);
  return (f - dir * box.mu_kinetic * box.mass * g) / box.mass;
}

BoxContactResult resolve_box_contact(const CartPoleState& robot,
                                     const std::array<ArmState, 2>& arms,
                                     const BoxState& box, double dt,
                                     const ArmGeometry& geom, double wheel_radius,
                                     const ContactConfig& contact, double g) {
  BoxContactResult out;
  out.forces = contact_forces(robot, arms, box, geom, wheel_radius, contact);
  out.f_ext_on_robot = out.forces.on_robot;
  out.box = box;
  out.box.in_contact = out.forces.total > 0;
  const double a = box_acceleration(box, out.forces.total, g);
  if (a == 0 && box.velocity == 0) return out;
  const double dir = box.velocity != 0 ? sgn(box.velocity) : sgn(a);
  double v1 = box.velocity + a * dt;
  double tau = dt;
  if (sgn(v1) == -dir && a != 0) {
    // Kinetic friction brings the box to rest inside the step.
    tau = -box.velocity / a;
    v1 = 0;
  }
  out.box.position = box.position + box.velocity * tau + 0.5 * a * tau * tau;
  out.box.velocity = v1;
  return out;
}

void check_finite(const WorldState& w) {
  auto check = [&](double v, const char* name) {
    if (!std::isfinite(v)) throw SimulationDiverged(name, w.t);
  };
  check(w.human.theta, "human.theta");
  check(w.human.theta_dot, "human.theta_dot");
  check(w.robot.x_w, "robot.x_w");
  check(w.robot.x_w_dot, "robot.x_w_dot");
  check(w.robot.theta, "robot.theta");
  check(w.robot.theta_dot, "robot.theta_dot");
  for (int s : kSides) {
    const std::string side = s == static_cast<int>(Side::kLeft) ? "left" : "right";
    for (int i = 0; i < 4; ++i) {
      if (!std::isfinite(w.arms[s].q.q(i))) {
        throw SimulationDiverged("arms." + side + ".q" + std::to_string(i), w.t);
      }
      if (!std::isfinite(w.arms[s].qd(i))) {
        throw SimulationDiverged("arms." + side + ".qd" + std::to_string(i), w.t);
      }
    }
  }
  check(w.box.position, "box.position");
  check(w.box.velocity, "box.velocity");
  check(w.forces.f_r, "forces.f_r");
  check(w.forces.f_hmi, "forces.f_hmi");
  check(w.forces.f_ext, "forces.f_ext");
  check(w.forces.f_ext_scaled, "forces.f_ext_scaled");
  check(w.wheel_effort, "wheel_effort");
}

Simulator::Simulator(ScenarioConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
  gain_ = synthesize_lqr(cfg_.robot, cfg_.retarget);
  toggles_.spring = cfg_.retarget.spring_enabled;
  toggles_.haptics = cfg_.haptics_enabled;
  pilot_ = PilotModel(cfg_.pilot, cfg_.human, cfg_.human_model == PlantModel::kLinear);
  for (auto& r : retargeters_) r = ArmRetargeter(cfg_.arms.limits, cfg_.arms.mapping);
  estimator_ = ContactEstimator(cfg_.estimator);
  reset(PilotInput{});
}

void Simulator::set_toggles(const Toggles& t) {
  toggles_ = t;
  cfg_.retarget.spring_enabled = t.spring;
  cfg_.haptics_enabled = t.haptics;
}

void Simulator::reset(const PilotInput& initial) {
  if (!initial.finite()) throw InvalidStateError("initial pilot input must be finite");
  pilot_.reset();
  for (auto& r : retargeters_) r.reset();
  estimator_ = ContactEstimator(cfg_.estimator);
  world_ = WorldState{};
  world_.human.theta = initial.lean;
  world_.robot.x_w = cfg_.robot_x0;
  world_.box_present = cfg_.kind == ScenarioKind::kBoxPush;
  world_.box = BoxState::from_config(cfg_.box);
  world_.target_present = cfg_.kind == ScenarioKind::kHandOff;
  world_.target_x = cfg_.target.x0;
  world_.target_z = cfg_.target.z;
  world_.target_v = cfg_.target.start_time <= 0 ? cfg_.target.speed : 0;
  const ArmJoints* src[2] = {&initial.left, &initial.right};
  for (int s : kSides) {
    ArmJoints h = *src[s];
    h.side = static_cast<Side>(s);
    const RetargetResult r = retargeters_[s].retarget(h, cfg_.arms.human);
    world_.arms[s].q = r.joints;
    world_.arms[s].qd.setZero();
    world_.arms[s].cmd = pd_command(r.joints, cfg_.arms.gains);
    world_.arms[s].tau.setZero();
    world_.hand_world[s] = hand_world_position(world_.robot, world_.arms[s].q,
                                               cfg_.arms.robot, cfg_.robot.wheel_radius);
  }
  world_.xi_h = human_dcm(world_.human, cfg_.human);
  world_.xi_r = robot_dcm(world_.robot, cfg_.robot);
  world_.lean_ref = initial.lean;
}

const WorldState& Simulator::step(const PilotInput& input) {
  if (!input.finite()) throw InvalidStateError("pilot input must be finite");
  const ScenarioConfig& c = cfg_;
  const HumanParams& hp = c.human;
  const RobotParams& rp = c.robot;
  const bool lin_h = c.human_model == PlantModel::kLinear;
  const bool lin_r = c.robot_model == PlantModel::kLinear;
  const double dt = c.dt;
  WorldState& w = world_;
  std::uint32_t fl = 0;

  // (1) divergent components
  const double xi_h = human_dcm(w.human, hp);
  const double xi_r = robot_dcm(w.robot, rp);

  // (2) haptic channel, with last step's scaled estimate
  const double f_scaled = w.forces.f_ext_scaled;
  const double f_dyn = haptic_feedback(w.robot, w.human, f_scaled, hp, rp);
  const double com_disp = c.pilot.com_disp_from_script
                              ? input.com_disp
                              : hp.h_com * (lin_h ? w.human.theta : std::sin(w.human.theta));
  const SpringResult pre = apply_spring(0.0, f_dyn, com_disp, c.retarget, hp, rp);
  const double f_hmi_applied = toggles_.haptics ? pre.f_hmi : 0.0;

  // (3) pilot picks the CoP
  PilotObservation obs;
  obs.t = w.t;
  obs.f_hmi = f_hmi_applied;
  obs.robot_velocity = w.robot.x_w_dot;
  obs.box_present = w.box_present;
  obs.box_velocity = w.box.velocity;
  if (w.target_present) {
    const auto& hr = w.hand_world[static_cast<int>(Side::kRight)];
    const auto& hl = w.hand_world[static_cast<int>(Side::kLeft)];
    obs.hand_x = std::max(hr.x(), hl.x());
    obs.target_x = w.target_x;
    obs.target_velocity = w.target_v;
  }
  const PilotDecision pd = pilot_.decide(w.human, input, obs, dt);
  if (pd.cop_clamped) fl |= flags::kCopClamped;
  const double cop = pd.cop;
  const HumanCommand hcmd{cop, com_disp};
  const double tau_h = hcmd.ankle_torque(hp);

  // (4) feedforward, spring, wheel effort
  const SpringResult sr =
      apply_spring(feedforward_force(cop, hp, rp), f_dyn, com_disp, c.retarget, hp, rp);
  const WheelCommand wc = wheel_effort(gain_, xi_h, xi_r, sr.f_r, w.robot,
                                       c.retarget.effort_saturation, rp.wheel_radius);
  if (wc.saturated) fl |= flags::kEffortSaturated;
  const double residual =
      similarity_residual(w.robot, w.human, cop, sr.f_r, sr.f_hmi, f_scaled, hp, rp);

  // (5) arm retargeting and PD commands
  const ArmJoints* src[2] = {&input.left, &input.right};
  for (int s : kSides) {
    ArmJoints h = *src[s];
    h.side = static_cast<Side>(s);
    const RetargetResult r = retargeters_[s].retarget(h, c.arms.human);
    if (r.singular) fl |= flags::kIkSingular;
    if (r.degenerate) fl |= flags::kDegenerateFrame;
    if (r.clamped) fl |= flags::kArmClamped;
    w.arms[s].cmd = pd_command(r.joints, c.arms.gains);
  }

  // (6, 7) contact-coupled integration; controls held over the step
  const bool box_static = w.box_present && w.box.velocity == 0 &&
                          std::abs(contact_forces(w.robot, w.arms, w.box, c.arms.robot,
                                                  rp.wheel_radius, c.contact)
                                       .total) <= w.box.mu_static * w.box.mass * rp.g;
  const double box_dir0 = sgn(w.box.velocity);
  WorldState scratch = w;
  auto rate = [&](const StateVector& x) {
    unpack(x, scratch);
    StateVector dx = StateVector::Zero();
    ContactForces cf;
    if (scratch.box_present) {
      cf = contact_forces(scratch.robot, scratch.arms, scratch.box, c.arms.robot,
                          rp.wheel_radius, c.contact);
    }
    dx.segment<2>(kHuman) =
        aip_derivative(scratch.human, hp, tau_h, f_hmi_applied, lin_h).vector();
    dx.segment<4>(kRobot) =
        cartpole_derivative(scratch.robot, rp, wc.effort, cf.on_robot, lin_r).vector();
    const Eigen::Matrix3d rt = rot_y(scratch.robot.theta).transpose();
    for (int s : kSides) {
      const ArmState& a = scratch.arms[s];
      Eigen::Vector4d tau = pd_torque(a.cmd, a.q.q, a.qd);
      if (cf.per_hand[s] > 0) {
        const Eigen::Vector3d f_torso = rt * Eigen::Vector3d(-cf.per_hand[s], 0, 0);
        tau += contact_jacobian(a.q, c.arms.robot).transpose() * f_torso;
      }
      dx.segment<4>(kArm + 8 * s) = a.qd;
      dx.segment<4>(kArm + 8 * s + 4) = tau / c.arms.joint_inertia;
    }
    if (scratch.box_present && !box_static) {
      const BoxState& b = scratch.box;
      const double dir = box_dir0 != 0 ? box_dir0 : sgn(cf.total);
      dx(kBox) = b.velocity;
      dx(kBox + 1) = (cf.total - dir * b.mu_kinetic * b.mass * rp.g) / b.mass;
    }
    return dx;
  };
  const double v_box0 = w.box.velocity;
  const StateVector x1 = rk4_step(pack(w), dt, rate);
  unpack(x1, w);
  if (w.box_present && !box_static) {
    const double dir = box_dir0 != 0 ? box_dir0 : sgn(w.box.velocity);
    if (sgn(w.box.velocity) != dir) w.box.velocity = 0;
  }
  w.t = static_cast<double>(w.step + 1) * dt;
  ++w.step;
  if (w.target_present) {
    const double tm = std::max(0.0, w.t - c.target.start_time);
    w.target_x = c.target.x0 + c.target.speed * tm;
    w.target_v = w.t >= c.target.start_time ? c.target.speed : 0.0;
  }

  // (8) estimator on the drive torques at the new state
  for (int s : kSides) {
    w.arms[s].tau = pd_torque(w.arms[s].cmd, w.arms[s].q.q, w.arms[s].qd);
    w.hand_world[s] =
        hand_world_position(w.robot, w.arms[s].q, c.arms.robot, rp.wheel_radius);
  }
  const int L = static_cast<int>(Side::kLeft);
  const int R = static_cast<int>(Side::kRight);
  // Quasi-static load torque seen at the joints is the negated drive torque.
  const MotorTorques m_r =
      motor_torques_from_joint(Eigen::Vector4d(-w.arms[R].tau), Side::kRight);
  const MotorTorques m_l =
      motor_torques_from_joint(Eigen::Vector4d(-w.arms[L].tau), Side::kLeft);
  const ContactEstimate est = estimator_.update(m_r, m_l, w.arms[R].q, w.arms[L].q,
                                                c.arms.robot, dt, w.robot.theta);
  if (est.held) fl |= flags::kEstimateHeld;

  ContactForces cf_end;
  if (w.box_present) {
    cf_end = contact_forces(w.robot, w.arms, w.box, c.arms.robot, rp.wheel_radius,
                            c.contact);
  }
  w.box.in_contact = cf_end.total > 0;
  w.f_contact = cf_end.total;
  w.box_accel = (w.box.velocity - v_box0) / dt;

  w.forces.f_r = sr.f_r;
  w.forces.f_hmi = f_hmi_applied;
  w.forces.f_s = sr.f_s;
  w.forces.f_ext = cf_end.on_robot;
  w.forces.f_ext_scaled = est.f_ext_scaled;
  w.f_ext_hat = est.f_ext_hat;
  w.xi_h = xi_h;
  w.xi_r = xi_r;
  w.cop = cop;
  w.com_disp = com_disp;
  w.lean_ref = pd.lean_ref;
  w.wheel_effort = wc.effort;
  w.residual = residual;
  if (w.robot.linear_regime_violated()) fl |= flags::kRobotFallen;
  if (!(std::abs(w.human.theta) < std::numbers::pi / 2)) fl |= flags::kHumanFallen;
  w.flags = fl;
  check_finite(w);
  return w;
}

}  // namespace telesim
