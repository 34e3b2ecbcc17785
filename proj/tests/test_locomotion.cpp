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
#include <random>

#include <gtest/gtest.h>

#include "telesim/errors.hpp"
#include "telesim/locomotion.hpp"

namespace telesim {
namespace {

const RobotParams kRobot = satyrr_robot();
const HumanParams kHuman = satyrr_pilot();

// Applying the feedforward F_R and feedback F_HMI laws makes the robot and
// human normalized DCM equations coincide for any state and CoP. The oracle
// writes both sides out directly.
double direct_residual(const CartPoleState& r, const AipState& h, double cop, double f_r,
                       double f_hmi, double f_ext) {
  const double m = kRobot.m_body, M = kRobot.m_base, g = kRobot.g;
  const double wc = std::sqrt(m * g / (M * kRobot.h_com));
  const double robot_side = r.theta + r.theta_dot / wc - f_r / (m * g) + f_ext * M / (m * m * g);
  const double wh = std::sqrt(kHuman.g / kHuman.h_com);
  const double human_side = h.theta + h.theta_dot / wh - cop / kHuman.h_com +
                            f_hmi / (kHuman.m_body * kHuman.g);
  return robot_side - human_side;
}

TEST(Locomotion, SimilarityIdentityRandomDraws) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> ang(-0.4, 0.4), rate(-2, 2), cop(-0.05, 0.15),
      force(-60, 60), disp(-0.3, 0.3);
  RetargetConfig cfg;
  for (int i = 0; i < 1000; ++i) {
    const CartPoleState r{ang(rng), rate(rng), ang(rng), rate(rng)};
    const AipState h{ang(rng), rate(rng)};
    const double p = cop(rng), f_ext = force(rng);
    const double f_r = feedforward_force(p, kHuman, kRobot);
    const double f_hmi = haptic_feedback(r, h, f_ext, kHuman, kRobot);
    EXPECT_LT(std::abs(similarity_residual(r, h, p, f_r, f_hmi, f_ext, kHuman, kRobot)), 1e-10);
    EXPECT_LT(std::abs(direct_residual(r, h, p, f_r, f_hmi, f_ext)), 1e-10);
    cfg.spring_enabled = (i % 2) == 0;
    const SpringResult s = apply_spring(f_r, f_hmi, disp(rng), cfg, kHuman, kRobot);
    EXPECT_LT(std::abs(similarity_residual(r, h, p, s.f_r, s.f_hmi, f_ext, kHuman, kRobot)),
              1e-10);
  }
}

TEST(Locomotion, FeedforwardScale) {
  // F_R = gamma_R / h_H * p.
  EXPECT_NEAR(feedforward_force(0.1, kHuman, kRobot), 12.6 * 9.81 / 1.10 * 0.1, 1e-12);
}

TEST(Locomotion, SpringArithmetic) {
  RetargetConfig cfg;
  cfg.k_spring = 400;
  const SpringResult s = apply_spring(10.0, 5.0, 0.05, cfg, kHuman, kRobot);
  EXPECT_DOUBLE_EQ(s.f_s, -20.0);
  EXPECT_NEAR(s.f_hmi, 5.0 - 20.0, 1e-12);
  EXPECT_NEAR(s.f_r, 10.0 + 20.0 * (12.6 / 52.0), 1e-12);
  cfg.spring_enabled = false;
  const SpringResult off = apply_spring(10.0, 5.0, 0.05, cfg, kHuman, kRobot);
  EXPECT_EQ(off.f_r, 10.0);
  EXPECT_EQ(off.f_hmi, 5.0);
  EXPECT_EQ(off.f_s, 0.0);
}

TEST(Locomotion, HapticSignOnExternalPush) {
  // Matched poses, robot pushed backwards by -20 N: pilot feels a backward
  // force scaled by gamma_H / (alpha^2 gamma_R).
  const double f = haptic_feedback(CartPoleState{}, AipState{}, -20.0, kHuman, kRobot);
  EXPECT_NEAR(f, -20.0 * 52.0 * 1.61 / (12.6 * 12.6), 1e-9);
}

// With only the DCM error penalized the problem is scalar:
// 2 a P - b^2 P^2 / r + q = 0, P = r (a + sqrt(a^2 + b^2 q / r)) / b^2.
TEST(Locomotion, LqrMatchesScalarClosedForm) {
  RetargetConfig cfg;
  const LqrGain g = synthesize_lqr(kRobot, cfg);
  const double a = kRobot.omega_circ();
  const double b = -1 / (a * kRobot.m_base * kRobot.h_com);
  const double q = 300, r = 1;
  const double p = r * (a + std::sqrt(a * a + b * b * q / r)) / (b * b);
  EXPECT_NEAR(g.P(2, 2), p, 1e-6 * p);
  EXPECT_NEAR(g.k(2), b * p / r, 1e-6 * std::abs(b * p));
  EXPECT_EQ(g.k(0), 0);
  EXPECT_EQ(g.k(1), 0);
  EXPECT_NEAR(g.dcm_gain(), 248.0, 1.0);
  EXPECT_LT(g.residual, 1e-8);
}

TEST(Locomotion, RiccatiMethodsAgreeOnFullProblem) {
  RetargetConfig cfg;
  cfg.lqr_q = Vector3<double>(10, 5, 300).asDiagonal();
  const LqrGain a = synthesize_lqr(kRobot, cfg, RiccatiMethod::kEigenvector);
  const LqrGain b = synthesize_lqr(kRobot, cfg, RiccatiMethod::kIterative);
  EXPECT_LT((a.k - b.k).cwiseAbs().maxCoeff(), 1e-6);
  EXPECT_LT(a.residual, 1e-8);
  EXPECT_LT(b.residual, 1e-8);
  for (Eigen::Index i = 0; i < b.closed_loop_poles.size(); ++i) {
    EXPECT_LT(b.closed_loop_poles(i).real(), 0);
  }
  EXPECT_EQ(b.closed_loop_poles.size(), 3);
}

TEST(Locomotion, CareSolversOnTextbookDoubleIntegrator) {
  // x'' = u, Q = I, R = 1: P = [[sqrt3, 1], [1, sqrt3]].
  MatrixX<double> A(2, 2), B(2, 1), Q = MatrixX<double>::Identity(2, 2), R(1, 1);
  A << 0, 1, 0, 0;
  B << 0, 1;
  R << 1;
  for (const auto& sol : {solve_care_eigen(A, B, Q, R), solve_care_iterative(A, B, Q, R)}) {
    EXPECT_NEAR(sol.P(0, 0), std::sqrt(3.0), 1e-9);
    EXPECT_NEAR(sol.P(0, 1), 1.0, 1e-9);
    EXPECT_NEAR(sol.P(1, 1), std::sqrt(3.0), 1e-9);
    EXPECT_LT(sol.residual, 1e-10);
  }
}

TEST(Locomotion, CareRejectsUncontrollable) {
  // Unstable mode that the input cannot reach.
  MatrixX<double> A(2, 2), B(2, 1), Q = MatrixX<double>::Identity(2, 2), R(1, 1);
  A << 1, 0, 0, -1;
  B << 0, 1;
  R << 1;
  EXPECT_THROW(solve_care_eigen(A, B, Q, R), SynthesisError);
  R << -1;
  EXPECT_THROW(solve_care_iterative(A, B, Q, R), ParameterError);
}

TEST(Locomotion, SynthesisRejectsBadConfig) {
  RetargetConfig cfg;
  cfg.lqr_r = 0;
  EXPECT_THROW(synthesize_lqr(kRobot, cfg), ParameterError);
}

TEST(Locomotion, WheelEffortLawAndSaturation) {
  RetargetConfig cfg;
  const LqrGain g = synthesize_lqr(kRobot, cfg);
  const double K = g.dcm_gain();
  const WheelCommand c = wheel_effort(g, 0.01, 0.02, 3.0, CartPoleState{}, 40.0, 0.05);
  EXPECT_NEAR(c.effort, K * (0.02 - 0.01) + 3.0, 1e-9);
  EXPECT_FALSE(c.saturated);
  EXPECT_NEAR(c.effort_torque, c.effort * 0.05, 1e-12);
  const WheelCommand s = wheel_effort(g, 0.0, 1.0, 0.0, CartPoleState{}, 40.0);
  EXPECT_TRUE(s.saturated);
  EXPECT_EQ(s.effort, 40.0);
}

TEST(Locomotion, LegacyReferenceClosedForm) {
  const double dt = 0.002, theta = 0.02, g = 9.81;
  std::vector<double> th(5001, theta);
  const auto [v, x] = legacy_velocity_reference(th, dt, g);
  EXPECT_NEAR(v.back(), g * theta * 10.0, 1e-9);
  EXPECT_NEAR(x.back(), 0.5 * g * theta * 100.0, 1e-9);
  EXPECT_THROW(legacy_velocity_reference(th, 0.0, g), ParameterError);
}

}  // namespace
}  // namespace telesim
