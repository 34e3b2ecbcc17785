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

#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include <gtest/gtest.h>

#include "telesim/errors.hpp"
#include "telesim/integrators.hpp"
#include "telesim/runner.hpp"
#include "telesim/sim.hpp"
#include "test_paths.hpp"

namespace telesim {
namespace {

std::array<ArmState, 2> arms_at(const PilotInput& in) {
  std::array<ArmState, 2> a;
  a[static_cast<int>(Side::kLeft)].q = in.left;
  a[static_cast<int>(Side::kRight)].q = in.right;
  return a;
}

PilotInput reach_input() {
  PilotInput in;
  in.left = reach_pose(Side::kLeft);
  in.right = reach_pose(Side::kRight);
  return in;
}

TEST(Sim, ZeroInputHoldsEquilibrium) {
  ScenarioConfig cfg = default_scenario(ScenarioKind::kFreeBalance);
  Simulator sim(cfg);
  sim.reset(PilotInput{});
  for (int k = 0; k < 5000; ++k) sim.step(PilotInput{});
  const WorldState& w = sim.world();
  EXPECT_NEAR(w.t, 10.0, 1e-9);
  EXPECT_EQ(w.step, 5000u);
  for (double v : {w.human.theta, w.human.theta_dot, w.robot.x_w, w.robot.x_w_dot,
                   w.robot.theta, w.robot.theta_dot}) {
    EXPECT_LT(std::abs(v), 1e-9);
  }
  for (const ArmState& a : w.arms) {
    EXPECT_LT(a.q.q.cwiseAbs().maxCoeff(), 1e-9);
    EXPECT_LT(a.qd.cwiseAbs().maxCoeff(), 1e-9);
  }
  EXPECT_EQ(w.flags & flags::kFallMask, 0u);
}

TEST(Sim, TimeAdvancesExactlyByDt) {
  ScenarioConfig cfg = default_scenario(ScenarioKind::kFreeBalance);
  cfg.dt = 0.004;
  Simulator sim(cfg);
  sim.reset(PilotInput{});
  for (int k = 1; k <= 100; ++k) {
    EXPECT_EQ(sim.step(PilotInput{}).t, k * 0.004);
  }
}

TEST(Sim, DeterministicTelemetry) {
  const ScenarioConfig cfg = load_scenario(scenario_path("box8.5.json"));
  const PilotScript script = PilotScript::load(scenario_path("push.csv"));
  ScenarioConfig shorter = cfg;
  shorter.duration = 4;
  std::ostringstream a, b;
  write_telemetry_csv(a, run_scenario(shorter, script).frames);
  write_telemetry_csv(b, run_scenario(shorter, script).frames);
  EXPECT_EQ(a.str(), b.str());
  EXPECT_GT(a.str().size(), 1000u);
}

double free_cartpole_energy_drift(double theta0, double dt) {
  const RobotParams p = satyrr_robot();
  const CartPoleState s{0.0, 0.2, theta0, -0.5};
  const double e0 = cartpole_energy(s, p);
  auto f = [&](const Vector4<double>& x) {
    return cartpole_derivative(CartPoleState::from_vector(x), p, 0.0, 0.0, false).vector();
  };
  Vector4<double> x = s.vector();
  const int n = static_cast<int>(std::lround(1.0 / dt));
  for (int k = 0; k < n; ++k) x = rk4_step(x, dt, f);
  return std::abs(cartpole_energy(CartPoleState::from_vector(x), p) - e0) / std::abs(e0);
}

// Large swing about the hanging position, with cart coupling.
TEST(Sim, FreeCartpoleEnergyConservedUnderRk4) {
  EXPECT_LT(free_cartpole_energy_drift(std::numbers::pi + 1.0, 0.002), 1e-6);
  EXPECT_LT(free_cartpole_energy_drift(std::numbers::pi + 0.3, 0.002), 1e-6);
}

// Released near upright the pole falls and whips through the bottom at
// ~25 rad/s within the second, so drift at dt=0.002 is ~1e-5. The drift is
// truncation: it must shrink at least 16x per halving of dt.
TEST(Sim, FallingCartpoleEnergyDriftIsTruncation) {
  const double e1 = free_cartpole_energy_drift(0.3, 0.002);
  const double e2 = free_cartpole_energy_drift(0.3, 0.001);
  EXPECT_GE(e1 / e2, 16.0);
  EXPECT_LT(e2, 1e-6);
}

// Closed-loop nonlinear cart-pole under continuous DCM feedback, integrated
// for 1 s at dt, dt/2 and a dt/8 reference.
Vector4<double> closed_loop_run(double dt) {
  const RobotParams p = satyrr_robot();
  const LqrGain g = synthesize_lqr(p, RetargetConfig{});
  auto f = [&](const Vector4<double>& x) {
    const CartPoleState s = CartPoleState::from_vector(x);
    const double u = wheel_effort(g, 0.05, robot_dcm(s, p), 0.0, s, 1e9).effort;
    return cartpole_derivative(s, p, u, 0.0, false).vector();
  };
  Vector4<double> x(0, 0, 0.1, 0);
  const int n = static_cast<int>(std::lround(1.0 / dt));
  for (int k = 0; k < n; ++k) x = rk4_step(x, dt, f);
  return x;
}

TEST(Sim, Rk4OrderOnNonlinearRun) {
  const double dt = 0.01;
  const Vector4<double> ref = closed_loop_run(dt / 8);
  const double e1 = (closed_loop_run(dt) - ref).norm();
  const double e2 = (closed_loop_run(dt / 2) - ref).norm();
  EXPECT_GT(e1, 0);
  EXPECT_GE(e1 / e2, 8.0) << "e(dt)=" << e1 << " e(dt/2)=" << e2;
}

TEST(Sim, StictionThresholdArithmetic) {
  BoxState box;
  box.mass = 8.5;
  const double g = 9.81;
  const double limit = 0.35 * 8.5 * g;  // 29.19 N
  EXPECT_LT(25.0, limit);
  EXPECT_EQ(box_acceleration(box, 25.0, g), 0.0);
  EXPECT_EQ(box_acceleration(box, limit, g), 0.0);
  EXPECT_NEAR(box_acceleration(box, 35.0, g), (35.0 - 0.30 * 8.5 * g) / 8.5, 1e-12);
  EXPECT_NEAR(box_acceleration(box, 35.0, g), 1.18, 0.01);
  box.velocity = 0.1;
  EXPECT_NEAR(box_acceleration(box, 0.0, g), -0.30 * g, 1e-12);
}

// Place the box face so that each hand penetrates by d; with the robot at
// rest the total push is 2 k d.
BoxState box_for_push(double total, const ScenarioConfig& cfg) {
  const PilotInput in = reach_input();
  const CartPoleState robot{};
  const double hand_x =
      hand_world_position(robot, in.right, cfg.arms.robot, cfg.robot.wheel_radius).x();
  BoxState b = BoxState::from_config(cfg.box);
  b.mass = 8.5;
  b.position = hand_x - total / (2 * cfg.contact.stiffness);
  return b;
}

TEST(Sim, ResolveBoxContactStictionAndBreak) {
  const ScenarioConfig cfg = default_scenario(ScenarioKind::kBoxPush);
  const auto arms = arms_at(reach_input());
  const double g = cfg.robot.g, dt = cfg.dt;

  const BoxState b25 = box_for_push(25.0, cfg);
  const auto r25 = resolve_box_contact(CartPoleState{}, arms, b25, dt, cfg.arms.robot,
                                       cfg.robot.wheel_radius, cfg.contact, g);
  EXPECT_NEAR(r25.forces.total, 25.0, 1e-9);
  EXPECT_EQ(r25.box.velocity, 0.0);
  EXPECT_EQ(r25.box.position, b25.position);
  EXPECT_EQ(r25.f_ext_on_robot, -r25.forces.total);

  const BoxState b35 = box_for_push(35.0, cfg);
  const auto r35 = resolve_box_contact(CartPoleState{}, arms, b35, dt, cfg.arms.robot,
                                       cfg.robot.wheel_radius, cfg.contact, g);
  const double a = (35.0 - 0.30 * 8.5 * g) / 8.5;
  EXPECT_NEAR(r35.box.velocity, a * dt, 1e-9);
  EXPECT_NEAR(r35.box.position - b35.position, 0.5 * a * dt * dt, 1e-12);
}

TEST(Sim, HandsBehindFaceNoContact) {
  const ScenarioConfig cfg = default_scenario(ScenarioKind::kBoxPush);
  BoxState b = BoxState::from_config(cfg.box);
  b.position = 2.0;
  const auto r = resolve_box_contact(CartPoleState{}, arms_at(reach_input()), b, cfg.dt,
                                     cfg.arms.robot, cfg.robot.wheel_radius, cfg.contact,
                                     cfg.robot.g);
  EXPECT_EQ(r.forces.total, 0.0);
  EXPECT_EQ(r.f_ext_on_robot, 0.0);
  EXPECT_EQ(r.box.position, 2.0);
  EXPECT_EQ(r.box.velocity, 0.0);
  EXPECT_FALSE(r.box.in_contact);
}

TEST(Sim, BoxStateValidation) {
  BoxState b;
  b.mass = 0;
  EXPECT_THROW(b.validate(), InvalidStateError);
  b.mass = 1;
  b.mu_kinetic = 0.5;
  b.mu_static = 0.4;
  EXPECT_THROW(b.validate(), InvalidStateError);
}

class PushRun : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    const ScenarioConfig cfg = load_scenario(scenario_path("box8.5.json"));
    run_ = new RunResult(run_scenario(cfg, PilotScript::load(scenario_path("push.csv"))));
  }
  static void TearDownTestSuite() { delete run_; }
  static RunResult* run_;
};
RunResult* PushRun::run_ = nullptr;

TEST_F(PushRun, ThirdLawEveryStep) {
  for (const TelemetryFrame& f : run_->frames) {
    ASSERT_EQ(f.f_ext, -f.f_contact) << "step " << f.step;
  }
}

TEST_F(PushRun, ContactIsUnilateral) {
  for (const TelemetryFrame& f : run_->frames) ASSERT_GE(f.f_contact, 0.0);
}

TEST_F(PushRun, ResidualStaysTiny) {
  for (const TelemetryFrame& f : run_->frames) ASSERT_LT(std::abs(f.residual), 1e-8);
}

TEST_F(PushRun, StictionHoldsBeforeBreak) {
  // Until the push first exceeds the static limit the box is exactly still.
  const double limit = 0.35 * 8.5 * 9.81;
  const double x0 = run_->frames.front().box_x;
  for (const TelemetryFrame& f : run_->frames) {
    if (f.f_contact > limit) break;
    ASSERT_EQ(f.box_v, 0.0) << "t=" << f.t;
    ASSERT_EQ(f.box_x, x0);
  }
  EXPECT_TRUE(run_->report.box->moved);
}

TEST(Sim, HeavyBoxNeverMoves) {
  const ScenarioConfig cfg = load_scenario(scenario_path("box20.json"));
  const RunResult r = run_scenario(cfg, PilotScript::load(scenario_path("weak_push.csv")));
  ASSERT_TRUE(r.report.box.has_value());
  EXPECT_FALSE(r.report.box->moved);
  double peak = 0;
  for (const TelemetryFrame& f : r.frames) {
    ASSERT_EQ(f.box_v, 0.0);
    peak = std::max(peak, f.f_contact);
  }
  EXPECT_LT(peak, 0.35 * 20 * 9.81);
  EXPECT_FALSE(r.report.diverged);
}

TEST(Sim, DcmTracksLeanStep) {
  const ScenarioConfig cfg = load_scenario(scenario_path("step.json"));
  const RunResult r = run_scenario(cfg, PilotScript::load(scenario_path("step.csv")));
  ASSERT_FALSE(r.report.diverged);
  for (const TelemetryFrame& f : r.frames) {
    EXPECT_EQ(f.flags & flags::kFallMask, 0u);
    if (f.t >= 4.0) ASSERT_LT(std::abs(f.xi_r - f.xi_h), 0.005) << "t=" << f.t;
  }
}

TEST(Sim, CheckFiniteNamesField) {
  WorldState w;
  w.t = 1.5;
  w.arms[static_cast<int>(Side::kLeft)].q.q(2) = std::nan("");
  try {
    check_finite(w);
    FAIL() << "expected SimulationDiverged";
  } catch (const SimulationDiverged& e) {
    EXPECT_EQ(e.field(), "arms.left.q2");
    EXPECT_EQ(e.time(), 1.5);
  }
  WorldState v;
  v.robot.theta = INFINITY;
  EXPECT_THROW(check_finite(v), SimulationDiverged);
}

// Non-finite pilot input is refused before it reaches the integrator.
TEST(Sim, NanInputRejectedStateUntouched) {
  Simulator sim(default_scenario(ScenarioKind::kFreeBalance));
  sim.reset(PilotInput{});
  sim.step(PilotInput{});
  const WorldState before = sim.world();
  PilotInput bad;
  bad.lean = std::nan("");
  EXPECT_THROW(sim.step(bad), InvalidStateError);
  bad = PilotInput{};
  bad.right.q(2) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(sim.step(bad), InvalidStateError);
  EXPECT_EQ(sim.world().t, before.t);
  EXPECT_EQ(sim.world().robot.vector(), before.robot.vector());
  EXPECT_EQ(sim.world().human.theta, before.human.theta);
}

TEST(Sim, HandWorldVelocityMatchesFiniteDifference) {
  const ScenarioConfig cfg = default_scenario(ScenarioKind::kBoxPush);
  const CartPoleState s{0.1, 0.3, 0.2, -0.4};
  const ArmJoints q{Eigen::Vector4d(1.1, 0.1, -0.2, 0.7), Side::kRight};
  const Eigen::Vector4d qd(0.2, -0.1, 0.3, 0.5);
  const double h = 1e-6;
  CartPoleState sp = s, sm = s;
  sp.x_w += h * s.x_w_dot;
  sp.theta += h * s.theta_dot;
  sm.x_w -= h * s.x_w_dot;
  sm.theta -= h * s.theta_dot;
  ArmJoints qp = q, qm = q;
  qp.q += h * qd;
  qm.q -= h * qd;
  const double fd = (hand_world_position(sp, qp, cfg.arms.robot, 0.05).x() -
                     hand_world_position(sm, qm, cfg.arms.robot, 0.05).x()) /
                    (2 * h);
  EXPECT_NEAR(hand_world_velocity_x(s, q, qd, cfg.arms.robot), fd, 1e-7);
}

}  // namespace
}  // namespace telesim
