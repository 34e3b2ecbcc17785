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

#include "telesim/config.hpp"

#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "telesim/errors.hpp"

namespace telesim {

using nlohmann::json;

std::string to_string(ScenarioKind kind) {
  switch (kind) {
    case ScenarioKind::kBoxPush: return "box_push";
    case ScenarioKind::kHandOff: return "hand_off";
    case ScenarioKind::kFreeBalance: return "free_balance";
  }
  return "free_balance";
}

std::string to_string(PlantModel model) {
  return model == PlantModel::kLinear ? "linear" : "nonlinear";
}

std::string to_string(TrackingMode mode) {
  switch (mode) {
    case TrackingMode::kSpeed: return "speed";
    case TrackingMode::kTarget: return "target";
    case TrackingMode::kNone: return "none";
  }
  return "none";
}

ScenarioKind parse_scenario_kind(const std::string& s) {
  if (s == "box_push") return ScenarioKind::kBoxPush;
  if (s == "hand_off") return ScenarioKind::kHandOff;
  if (s == "free_balance") return ScenarioKind::kFreeBalance;
  throw ConfigError("unknown scenario kind '" + s + "'");
}

namespace {

PlantModel parse_plant(const std::string& s) {
  if (s == "linear") return PlantModel::kLinear;
  if (s == "nonlinear") return PlantModel::kNonlinear;
  throw ConfigError("unknown plant model '" + s + "' (expected linear|nonlinear)");
}

TrackingMode parse_tracking(const std::string& s) {
  if (s == "none") return TrackingMode::kNone;
  if (s == "speed") return TrackingMode::kSpeed;
  if (s == "target") return TrackingMode::kTarget;
  throw ConfigError("unknown tracking mode '" + s + "'");
}

ArmMapping parse_mapping(const std::string& s) {
  if (s == "ik") return ArmMapping::kInverseKinematics;
  if (s == "joint") return ArmMapping::kJointToJoint;
  throw ConfigError("unknown arm mapping '" + s + "' (expected ik|joint)");
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<const char*> allowed) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw ConfigError(where + ": unknown key '" + key + "'");
  }
}

template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

void read_vec3(const json& j, const char* key, Eigen::Vector3d& out,
               const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 3) {
    throw ConfigError(where + "." + key + ": expected an array of 3 numbers");
  }
  for (int i = 0; i < 3; ++i) out(i) = v[i].get<double>();
}

// Scalar broadcasts to all four joints.
void read_vec4(const json& j, const char* key, Eigen::Vector4d& out,
               const std::string& where) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (v.is_number()) {
    out.setConstant(v.get<double>());
    return;
  }
  if (!v.is_array() || v.size() != 4) {
    throw ConfigError(where + "." + key + ": expected a number or 4 numbers");
  }
  for (int i = 0; i < 4; ++i) out(i) = v[i].get<double>();
}

void read_geometry(const json& j, ArmGeometry& g, const std::string& where) {
  check_keys(j, where, {"l_upper", "l_fore", "shoulder_offset"});
  read(j, "l_upper", g.l_upper, where);
  read(j, "l_fore", g.l_fore, where);
  read_vec3(j, "shoulder_offset", g.shoulder_offset, where);
}

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

}  // namespace

ScenarioConfig default_scenario(ScenarioKind kind) {
  ScenarioConfig cfg;
  cfg.kind = kind;
  if (kind == ScenarioKind::kHandOff) cfg.pilot.tracking.mode = TrackingMode::kTarget;
  if (kind == ScenarioKind::kBoxPush) cfg.pilot.tracking.mode = TrackingMode::kSpeed;
  return cfg;
}

void ScenarioConfig::validate() const {
  if (!(dt > 0) || !(dt <= 0.01)) throw ConfigError("scenario.dt must satisfy 0 < dt <= 0.01");
  if (!(duration > 0) || !std::isfinite(duration)) {
    throw ConfigError("scenario.duration must be > 0");
  }
  try {
    human.validate();
    robot.validate();
    retarget.validate();
    arms.robot.validate();
    arms.human.validate();
    pilot.support.validate();
  } catch (const ParameterError& e) {
    throw ConfigError(e.what());
  }
  if (!(box.mass > 0)) throw ConfigError("box.mass must be > 0");
  if (!(box.mu_kinetic >= 0) || !(box.mu_kinetic <= box.mu_static)) {
    throw ConfigError("box friction must satisfy 0 <= mu_kinetic <= mu_static");
  }
  if (!(contact.stiffness > 0) || !(contact.damping >= 0)) {
    throw ConfigError("contact stiffness must be > 0 and damping >= 0");
  }
  if (!(arms.joint_inertia > 0)) throw ConfigError("arms.joint_inertia must be > 0");
  if ((arms.gains.kp.array() < 0).any() || (arms.gains.kd.array() < 0).any()) {
    throw ConfigError("arm gains must be non-negative");
  }
  if (!(estimator.max_condition > 1)) throw ConfigError("estimator.max_condition must be > 1");
  if (!(pilot.lean_margin > 0) || !(pilot.lean_margin <= 1)) {
    throw ConfigError("pilot.lean_margin must be in (0, 1]");
  }
  if (!(pilot.kp > 0) || !(pilot.kd > 0)) throw ConfigError("pilot gains must be > 0");
  if (!(catch_radius > 0) || !(catch_hold >= 0)) {
    throw ConfigError("catch_radius must be > 0 and catch_hold >= 0");
  }
  if (!(accel_bound > 0)) throw ConfigError("accel_bound must be > 0");
}

ScenarioConfig scenario_from_json(const json& j) {
  check_keys(j, "config",
             {"scenario", "human", "robot", "retarget", "toggles", "estimator", "box",
              "target", "contact", "arms", "pilot"});
  ScenarioKind kind = ScenarioKind::kFreeBalance;
  if (j.contains("scenario") && j["scenario"].contains("kind")) {
    kind = parse_scenario_kind(j["scenario"]["kind"].get<std::string>());
  }
  ScenarioConfig cfg = default_scenario(kind);

  if (j.contains("scenario")) {
    const json& s = j["scenario"];
    const std::string w = "scenario";
    check_keys(s, w,
               {"kind", "dt", "duration", "robot_model", "human_model", "robot_x0",
                "accel_bound", "catch_radius", "catch_hold"});
    read(s, "dt", cfg.dt, w);
    read(s, "duration", cfg.duration, w);
    if (s.contains("robot_model")) cfg.robot_model = parse_plant(s["robot_model"]);
    if (s.contains("human_model")) cfg.human_model = parse_plant(s["human_model"]);
    read(s, "robot_x0", cfg.robot_x0, w);
    read(s, "accel_bound", cfg.accel_bound, w);
    read(s, "catch_radius", cfg.catch_radius, w);
    read(s, "catch_hold", cfg.catch_hold, w);
  }
  if (j.contains("human")) {
    const json& h = j["human"];
    check_keys(h, "human", {"m_body", "h_com", "h_ankle", "g"});
    read(h, "m_body", cfg.human.m_body, "human");
    read(h, "h_com", cfg.human.h_com, "human");
    read(h, "h_ankle", cfg.human.h_ankle, "human");
    read(h, "g", cfg.human.g, "human");
  }
  if (j.contains("robot")) {
    const json& r = j["robot"];
    check_keys(r, "robot", {"m_body", "m_base", "h_com", "g", "wheel_radius"});
    read(r, "m_body", cfg.robot.m_body, "robot");
    read(r, "m_base", cfg.robot.m_base, "robot");
    read(r, "h_com", cfg.robot.h_com, "robot");
    read(r, "g", cfg.robot.g, "robot");
    read(r, "wheel_radius", cfg.robot.wheel_radius, "robot");
  }
  if (j.contains("retarget")) {
    const json& r = j["retarget"];
    const std::string w = "retarget";
    check_keys(r, w, {"k_spring", "k_fb", "lqr_q", "lqr_r", "effort_saturation"});
    read(r, "k_spring", cfg.retarget.k_spring, w);
    read(r, "k_fb", cfg.retarget.k_fb, w);
    read(r, "lqr_r", cfg.retarget.lqr_r, w);
    read(r, "effort_saturation", cfg.retarget.effort_saturation, w);
    if (r.contains("lqr_q")) {
      Eigen::Vector3d d;
      read_vec3(r, "lqr_q", d, w);
      cfg.retarget.lqr_q = d.asDiagonal();
    }
  }
  cfg.estimator.k_fb = cfg.retarget.k_fb;
  if (j.contains("toggles")) {
    const json& t = j["toggles"];
    check_keys(t, "toggles", {"spring", "haptics"});
    read(t, "spring", cfg.retarget.spring_enabled, "toggles");
    read(t, "haptics", cfg.haptics_enabled, "toggles");
  }
  if (j.contains("estimator")) {
    const json& e = j["estimator"];
    check_keys(e, "estimator", {"max_condition", "lowpass_hz"});
    read(e, "max_condition", cfg.estimator.max_condition, "estimator");
    read(e, "lowpass_hz", cfg.estimator.lowpass_hz, "estimator");
  }
  if (j.contains("box")) {
    const json& b = j["box"];
    check_keys(b, "box", {"mass", "position", "mu_static", "mu_kinetic"});
    read(b, "mass", cfg.box.mass, "box");
    read(b, "position", cfg.box.position, "box");
    read(b, "mu_static", cfg.box.mu_static, "box");
    read(b, "mu_kinetic", cfg.box.mu_kinetic, "box");
  }
  if (j.contains("target")) {
    const json& t = j["target"];
    check_keys(t, "target", {"x0", "speed", "z", "start_time"});
    read(t, "x0", cfg.target.x0, "target");
    read(t, "speed", cfg.target.speed, "target");
    read(t, "z", cfg.target.z, "target");
    read(t, "start_time", cfg.target.start_time, "target");
  }
  if (j.contains("contact")) {
    const json& c = j["contact"];
    check_keys(c, "contact", {"stiffness", "damping"});
    read(c, "stiffness", cfg.contact.stiffness, "contact");
    read(c, "damping", cfg.contact.damping, "contact");
  }
  if (j.contains("arms")) {
    const json& a = j["arms"];
    const std::string w = "arms";
    check_keys(a, w, {"robot", "human", "limits", "kp", "kd", "joint_inertia", "mapping"});
    if (a.contains("robot")) read_geometry(a["robot"], cfg.arms.robot, "arms.robot");
    if (a.contains("human")) read_geometry(a["human"], cfg.arms.human, "arms.human");
    if (a.contains("limits")) {
      const json& l = a["limits"];
      check_keys(l, "arms.limits", {"shoulder", "elbow_min", "elbow_max"});
      read(l, "shoulder", cfg.arms.limits.shoulder, "arms.limits");
      read(l, "elbow_min", cfg.arms.limits.elbow_min, "arms.limits");
      read(l, "elbow_max", cfg.arms.limits.elbow_max, "arms.limits");
    }
    read_vec4(a, "kp", cfg.arms.gains.kp, w);
    read_vec4(a, "kd", cfg.arms.gains.kd, w);
    read(a, "joint_inertia", cfg.arms.joint_inertia, w);
    if (a.contains("mapping")) cfg.arms.mapping = parse_mapping(a["mapping"]);
  }
  if (j.contains("pilot")) {
    const json& p = j["pilot"];
    const std::string w = "pilot";
    check_keys(p, w, {"kp", "kd", "support", "lean_margin", "com_disp_from_script", "tracking"});
    read(p, "kp", cfg.pilot.kp, w);
    read(p, "kd", cfg.pilot.kd, w);
    read(p, "lean_margin", cfg.pilot.lean_margin, w);
    read(p, "com_disp_from_script", cfg.pilot.com_disp_from_script, w);
    if (p.contains("support")) {
      const json& s = p["support"];
      if (!s.is_array() || s.size() != 2) {
        throw ConfigError("pilot.support: expected [p_min, p_max]");
      }
      cfg.pilot.support.p_min = s[0].get<double>();
      cfg.pilot.support.p_max = s[1].get<double>();
    }
    if (p.contains("tracking")) {
      const json& t = p["tracking"];
      const std::string wt = "pilot.tracking";
      check_keys(t, wt,
                 {"mode", "start_time", "target_speed", "kp", "ki", "kx", "kv",
                  "max_correction"});
      TrackingConfig& tc = cfg.pilot.tracking;
      if (t.contains("mode")) tc.mode = parse_tracking(t["mode"]);
      read(t, "start_time", tc.start_time, wt);
      read(t, "target_speed", tc.target_speed, wt);
      read(t, "kp", tc.kp, wt);
      read(t, "ki", tc.ki, wt);
      read(t, "kx", tc.kx, wt);
      read(t, "kv", tc.kv, wt);
      read(t, "max_correction", tc.max_correction, wt);
    }
  }
  cfg.validate();
  return cfg;
}

json scenario_to_json(const ScenarioConfig& c) {
  json j;
  j["scenario"] = {{"kind", to_string(c.kind)},
                   {"dt", c.dt},
                   {"duration", c.duration},
                   {"robot_model", to_string(c.robot_model)},
                   {"human_model", to_string(c.human_model)},
                   {"robot_x0", c.robot_x0},
                   {"accel_bound", c.accel_bound},
                   {"catch_radius", c.catch_radius},
                   {"catch_hold", c.catch_hold}};
  j["human"] = {{"m_body", c.human.m_body},
                {"h_com", c.human.h_com},
                {"h_ankle", c.human.h_ankle},
                {"g", c.human.g}};
  j["robot"] = {{"m_body", c.robot.m_body},
                {"m_base", c.robot.m_base},
                {"h_com", c.robot.h_com},
                {"g", c.robot.g},
                {"wheel_radius", c.robot.wheel_radius}};
  j["retarget"] = {{"k_spring", c.retarget.k_spring},
                   {"k_fb", c.retarget.k_fb},
                   {"lqr_q", vec_json(c.retarget.lqr_q.diagonal())},
                   {"lqr_r", c.retarget.lqr_r},
                   {"effort_saturation", c.retarget.effort_saturation}};
  j["toggles"] = {{"spring", c.retarget.spring_enabled}, {"haptics", c.haptics_enabled}};
  j["estimator"] = {{"max_condition", c.estimator.max_condition},
                    {"lowpass_hz", c.estimator.lowpass_hz}};
  j["box"] = {{"mass", c.box.mass},
              {"position", c.box.position},
              {"mu_static", c.box.mu_static},
              {"mu_kinetic", c.box.mu_kinetic}};
  j["target"] = {{"x0", c.target.x0},
                 {"speed", c.target.speed},
                 {"z", c.target.z},
                 {"start_time", c.target.start_time}};
  j["contact"] = {{"stiffness", c.contact.stiffness}, {"damping", c.contact.damping}};
  auto geom = [](const ArmGeometry& g) {
    return json{{"l_upper", g.l_upper},
                {"l_fore", g.l_fore},
                {"shoulder_offset", vec_json(g.shoulder_offset)}};
  };
  j["arms"] = {{"robot", geom(c.arms.robot)},
               {"human", geom(c.arms.human)},
               {"limits",
                {{"shoulder", c.arms.limits.shoulder},
                 {"elbow_min", c.arms.limits.elbow_min},
                 {"elbow_max", c.arms.limits.elbow_max}}},
               {"kp", vec_json(c.arms.gains.kp)},
               {"kd", vec_json(c.arms.gains.kd)},
               {"joint_inertia", c.arms.joint_inertia},
               {"mapping", c.arms.mapping == ArmMapping::kJointToJoint ? "joint" : "ik"}};
  const TrackingConfig& t = c.pilot.tracking;
  j["pilot"] = {{"kp", c.pilot.kp},
                {"kd", c.pilot.kd},
                {"support", {c.pilot.support.p_min, c.pilot.support.p_max}},
                {"lean_margin", c.pilot.lean_margin},
                {"com_disp_from_script", c.pilot.com_disp_from_script},
                {"tracking",
                 {{"mode", to_string(t.mode)},
                  {"start_time", t.start_time},
                  {"target_speed", t.target_speed},
                  {"kp", t.kp},
                  {"ki", t.ki},
                  {"kx", t.kx},
                  {"kv", t.kv},
                  {"max_correction", t.max_correction}}}};
  return j;
}

ScenarioConfig load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
  try {
    return scenario_from_json(j);
  } catch (const json::exception& e) {
    throw ConfigError("config file '" + path + "': " + e.what());
  }
}

}  // namespace telesim
