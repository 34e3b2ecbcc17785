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

// Scenario configuration and its JSON form. All quantities are SI.

#ifndef TELESIM_CONFIG_HPP_
#define TELESIM_CONFIG_HPP_

#include <string>

#include <nlohmann/json.hpp>

#include "telesim/arm.hpp"
#include "telesim/estimation.hpp"
#include "telesim/locomotion.hpp"
#include "telesim/rom.hpp"

namespace telesim {

enum class ScenarioKind { kBoxPush, kHandOff, kFreeBalance };
enum class PlantModel { kNonlinear, kLinear };
enum class TrackingMode { kNone, kSpeed, kTarget };

std::string to_string(ScenarioKind kind);
std::string to_string(PlantModel model);
std::string to_string(TrackingMode mode);

struct BoxConfig {
  double mass{8.5};
  /// x of the face the robot pushes on.
  double position{0.5};
  double mu_static{0.35};
  double mu_kinetic{0.30};
};

struct TargetConfig {
  double x0{-0.5};
  double speed{0.4};
  double z{0.5};
  double start_time{0};
};

struct ContactConfig {
  double stiffness{5000};
  double damping{50};
};

struct ArmConfig {
  ArmGeometry robot;
  ArmGeometry human;
  JointLimits limits;
  PdGains gains;
  double joint_inertia{0.02};
  ArmMapping mapping{ArmMapping::kInverseKinematics};
};

/// Visual regulation the headless pilot adds on top of the scripted lean.
struct TrackingConfig {
  TrackingMode mode{TrackingMode::kNone};
  double start_time{0};
  double target_speed{0.2};
  double kp{0.5};
  double ki{0.3};
  double kx{0.3};
  double kv{0.25};
  double max_correction{0.2};
};

/// Headless pilot: a balance controller on the human pendulum that tracks the
/// commanded lean by choosing the CoP.
struct PilotConfig {
  double kp{25};
  double kd{10};
  SupportPolygon support;
  /// Fraction of the support polygon the pilot is willing to load in steady
  /// lean.
  double lean_margin{0.9};
  /// Use the script's com_disp column instead of h_H sin(theta_H).
  bool com_disp_from_script{false};
  TrackingConfig tracking;
};

struct ScenarioConfig {
  ScenarioKind kind{ScenarioKind::kFreeBalance};
  double dt{0.002};
  double duration{10};
  PlantModel robot_model{PlantModel::kNonlinear};
  PlantModel human_model{PlantModel::kNonlinear};
  HumanParams human;
  RobotParams robot;
  RetargetConfig retarget;
  bool haptics_enabled{true};
  EstimatorConfig estimator;
  BoxConfig box;
  TargetConfig target;
  ContactConfig contact;
  ArmConfig arms;
  PilotConfig pilot;
  double robot_x0{0};
  double accel_bound{1.5};
  double catch_radius{0.05};
  double catch_hold{0.2};

  void validate() const;
};

ScenarioConfig scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const ScenarioConfig& cfg);
ScenarioConfig load_scenario(const std::string& path);
/// Defaults for a scenario kind before any file overrides.
ScenarioConfig default_scenario(ScenarioKind kind);
ScenarioKind parse_scenario_kind(const std::string& s);

}  // namespace telesim

#endif  // TELESIM_CONFIG_HPP_
