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

#include "telesim/telemetry.hpp"

#include <cstdio>

#include "telesim/errors.hpp"

namespace telesim {

namespace {

// Column order is part of the file format.
#define TELESIM_DOUBLE_FIELDS(X) \
  X(t)                           \
  X(human_theta)                 \
  X(human_theta_dot)             \
  X(robot_x)                     \
  X(robot_x_dot)                 \
  X(robot_theta)                 \
  X(robot_theta_dot)             \
  X(xi_h)                        \
  X(xi_r)                        \
  X(lean_ref)                    \
  X(cop)                         \
  X(com_disp)                    \
  X(f_r)                         \
  X(f_hmi)                       \
  X(f_s)                         \
  X(f_ext)                       \
  X(f_ext_hat)                   \
  X(f_ext_scaled)                \
  X(wheel_effort)                \
  X(box_x)                       \
  X(box_v)                       \
  X(box_a)                       \
  X(f_contact)                   \
  X(target_x)                    \
  X(hand_r_x)                    \
  X(hand_r_z)                    \
  X(hand_l_x)                    \
  X(hand_l_z)

void put(std::string& out, double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  out += buf;
}

}  // namespace

TelemetryFrame make_frame(const WorldState& w, const Toggles& toggles) {
  TelemetryFrame f;
  const int L = static_cast<int>(Side::kLeft);
  const int R = static_cast<int>(Side::kRight);
  f.step = w.step;
  f.t = w.t;
  f.human_theta = w.human.theta;
  f.human_theta_dot = w.human.theta_dot;
  f.robot_x = w.robot.x_w;
  f.robot_x_dot = w.robot.x_w_dot;
  f.robot_theta = w.robot.theta;
  f.robot_theta_dot = w.robot.theta_dot;
  f.xi_h = w.xi_h;
  f.xi_r = w.xi_r;
  f.lean_ref = w.lean_ref;
  f.cop = w.cop;
  f.com_disp = w.com_disp;
  f.f_r = w.forces.f_r;
  f.f_hmi = w.forces.f_hmi;
  f.f_s = w.forces.f_s;
  f.f_ext = w.forces.f_ext;
  f.f_ext_hat = w.f_ext_hat;
  f.f_ext_scaled = w.forces.f_ext_scaled;
  f.wheel_effort = w.wheel_effort;
  f.box_x = w.box_present ? w.box.position : 0.0;
  f.box_v = w.box_present ? w.box.velocity : 0.0;
  f.box_a = w.box_present ? w.box_accel : 0.0;
  f.f_contact = w.f_contact;
  f.target_x = w.target_present ? w.target_x : 0.0;
  f.hand_r_x = w.hand_world[R].x();
  f.hand_r_z = w.hand_world[R].z();
  f.hand_l_x = w.hand_world[L].x();
  f.hand_l_z = w.hand_world[L].z();
  f.q_r = w.arms[R].q.q;
  f.q_l = w.arms[L].q.q;
  f.residual = w.residual;
  f.flags = w.flags;
  f.spring = toggles.spring;
  f.haptics = toggles.haptics;
  return f;
}

const std::string& telemetry_csv_header() {
  static const std::string header = [] {
    std::string h = "step";
#define X(name) h += "," #name;
    TELESIM_DOUBLE_FIELDS(X)
#undef X
    for (int i = 0; i < 4; ++i) h += ",q_r" + std::to_string(i);
    for (int i = 0; i < 4; ++i) h += ",q_l" + std::to_string(i);
    h += ",residual,flags,spring,haptics";
    return h;
  }();
  return header;
}

std::string telemetry_csv_row(const TelemetryFrame& f) {
  std::string out = std::to_string(f.step);
#define X(name)  \
  out += ',';    \
  put(out, f.name);
  TELESIM_DOUBLE_FIELDS(X)
#undef X
  for (int i = 0; i < 4; ++i) {
    out += ',';
    put(out, f.q_r(i));
  }
  for (int i = 0; i < 4; ++i) {
    out += ',';
    put(out, f.q_l(i));
  }
  out += ',';
  put(out, f.residual);
  out += ',' + std::to_string(f.flags);
  out += f.spring ? ",1" : ",0";
  out += f.haptics ? ",1" : ",0";
  return out;
}

void write_telemetry_csv(std::ostream& os, const std::vector<TelemetryFrame>& frames) {
  os << telemetry_csv_header() << '\n';
  for (const auto& f : frames) os << telemetry_csv_row(f) << '\n';
}

nlohmann::json frame_to_json(const TelemetryFrame& f) {
  nlohmann::json j;
  j["step"] = f.step;
#define X(name) j[#name] = f.name;
  TELESIM_DOUBLE_FIELDS(X)
#undef X
  j["q_r"] = {f.q_r(0), f.q_r(1), f.q_r(2), f.q_r(3)};
  j["q_l"] = {f.q_l(0), f.q_l(1), f.q_l(2), f.q_l(3)};
  j["residual"] = f.residual;
  j["flags"] = f.flags;
  j["spring"] = f.spring;
  j["haptics"] = f.haptics;
  return j;
}

TelemetryFrame frame_from_json(const nlohmann::json& j) {
  TelemetryFrame f;
  try {
    f.step = j.at("step").get<std::uint64_t>();
#define X(name) f.name = j.at(#name).get<double>();
    TELESIM_DOUBLE_FIELDS(X)
#undef X
    for (int i = 0; i < 4; ++i) {
      f.q_r(i) = j.at("q_r").at(i).get<double>();
      f.q_l(i) = j.at("q_l").at(i).get<double>();
    }
    f.residual = j.at("residual").get<double>();
    f.flags = j.at("flags").get<std::uint32_t>();
    f.spring = j.at("spring").get<bool>();
    f.haptics = j.at("haptics").get<bool>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("telemetry frame: ") + e.what());
  }
  return f;
}

}  // namespace telesim
