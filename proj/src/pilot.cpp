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

#include "telesim/pilot.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "telesim/errors.hpp"

namespace telesim {

namespace {

constexpr const char* kHeader =
    "t,theta_H,cop,com_disp,l_q0,l_q1,l_q2,l_q3,r_q0,r_q1,r_q2,r_q3";
constexpr int kColumns = 12;

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

PilotInput lerp(const PilotInput& a, const PilotInput& b, double w) {
  PilotInput out;
  out.lean = a.lean + w * (b.lean - a.lean);
  out.cop = a.cop + w * (b.cop - a.cop);
  out.com_disp = a.com_disp + w * (b.com_disp - a.com_disp);
  out.left.q = a.left.q + w * (b.left.q - a.left.q);
  out.right.q = a.right.q + w * (b.right.q - a.right.q);
  return out;
}

}  // namespace

bool PilotInput::finite() const {
  return std::isfinite(lean) && std::isfinite(cop) && std::isfinite(com_disp) &&
         left.q.allFinite() && right.q.allFinite();
}

bool operator==(const PilotInput& a, const PilotInput& b) {
  return a.lean == b.lean && a.cop == b.cop && a.com_disp == b.com_disp &&
         a.left.q == b.left.q && a.right.q == b.right.q;
}

PilotScript::PilotScript(std::vector<Row> rows) : rows_(std::move(rows)) {
  for (std::size_t i = 0; i < rows_.size(); ++i) {
    if (!std::isfinite(rows_[i].t) || !rows_[i].input.finite()) {
      throw ConfigError("pilot script row " + std::to_string(i) + ": non-finite value");
    }
    if (i > 0 && !(rows_[i].t > rows_[i - 1].t)) {
      throw ConfigError("pilot script row " + std::to_string(i) +
                        ": timestamps must be strictly increasing");
    }
    rows_[i].input.left.side = Side::kLeft;
    rows_[i].input.right.side = Side::kRight;
  }
}

PilotScript PilotScript::parse(std::istream& in, const std::string& name) {
  std::string line;
  std::size_t line_no = 0;
  bool header = false;
  std::vector<Row> rows;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty() || line[0] == '#') continue;
    if (!header) {
      std::string compact;
      for (char c : line) {
        if (c != ' ' && c != '\t') compact += c;
      }
      if (compact != kHeader) {
        throw ConfigError(name + ":" + std::to_string(line_no) +
                          ": expected header '" + kHeader + "'");
      }
      header = true;
      continue;
    }
    std::stringstream ss(line);
    std::string cell;
    double v[kColumns];
    int n = 0;
    while (std::getline(ss, cell, ',')) {
      if (n >= kColumns) {
        ++n;
        break;
      }
      cell = trim(cell);
      char* end = nullptr;
      v[n] = std::strtod(cell.c_str(), &end);
      if (cell.empty() || end != cell.c_str() + cell.size()) {
        throw ConfigError(name + ":" + std::to_string(line_no) + ": bad number '" +
                          cell + "'");
      }
      ++n;
    }
    if (n != kColumns) {
      throw ConfigError(name + ":" + std::to_string(line_no) + ": expected " +
                        std::to_string(kColumns) + " columns");
    }
    Row r;
    r.t = v[0];
    r.input.lean = v[1];
    r.input.cop = v[2];
    r.input.com_disp = v[3];
    r.input.left.q = Eigen::Vector4d(v[4], v[5], v[6], v[7]);
    r.input.right.q = Eigen::Vector4d(v[8], v[9], v[10], v[11]);
    rows.push_back(r);
  }
  if (!header) throw ConfigError(name + ": empty pilot script");
  if (rows.empty()) throw ConfigError(name + ": pilot script has no rows");
  try {
    return PilotScript(std::move(rows));
  } catch (const ConfigError& e) {
    throw ConfigError(name + ": " + e.what());
  }
}

PilotScript PilotScript::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open pilot script '" + path + "'");
  return parse(in, path);
}

PilotScript PilotScript::constant(const PilotInput& input) {
  return PilotScript({Row{0, input}});
}

PilotInput PilotScript::sample(double t) const {
  if (rows_.empty()) return PilotInput{};
  if (t <= rows_.front().t) return rows_.front().input;
  if (t >= rows_.back().t) return rows_.back().input;
  const auto it = std::upper_bound(rows_.begin(), rows_.end(), t,
                                   [](double x, const Row& r) { return x < r.t; });
  const Row& b = *it;
  const Row& a = *(it - 1);
  return lerp(a.input, b.input, (t - a.t) / (b.t - a.t));
}

std::string PilotScript::to_csv() const {
  std::string out = std::string(kHeader) + "\n";
  char buf[64];
  auto put = [&](double x, bool last) {
    std::snprintf(buf, sizeof buf, "%.17g", x);
    out += buf;
    out += last ? '\n' : ',';
  };
  for (const Row& r : rows_) {
    put(r.t, false);
    put(r.input.lean, false);
    put(r.input.cop, false);
    put(r.input.com_disp, false);
    for (int i = 0; i < 4; ++i) put(r.input.left.q(i), false);
    for (int i = 0; i < 4; ++i) put(r.input.right.q(i), i == 3);
  }
  return out;
}

ArmJoints reach_pose(Side side) {
  return {Eigen::Vector4d(1.3, 0, 0, 0.5), side};
}

PilotModel::PilotModel(const PilotConfig& cfg, const HumanParams& human,
                       bool linear_human)
    : cfg_(cfg), human_(human), linear_(linear_human) {}

PilotDecision PilotModel::decide(const AipState& s, const PilotInput& in,
                                 const PilotObservation& obs, double dt) {
  const double h = linear_ ? human_.h_com : human_.h_tilde();
  const double mg = human_.m_body * human_.g;
  const double f = obs.f_hmi / mg;
  PilotDecision d;

  // Steady CoP at lean theta is h (sin theta + f cos theta).
  const double c_hi = cfg_.lean_margin * cfg_.support.p_max / h;
  const double c_lo = cfg_.lean_margin * cfg_.support.p_min / h;
  if (linear_) {
    d.lean_cap_hi = c_hi - f;
    d.lean_cap_lo = c_lo - f;
  } else {
    const double r = std::hypot(1.0, f);
    const double phi = std::atan(f);
    d.lean_cap_hi = std::asin(std::clamp(c_hi / r, -1.0, 1.0)) - phi;
    d.lean_cap_lo = std::asin(std::clamp(c_lo / r, -1.0, 1.0)) - phi;
  }

  const TrackingConfig& tc = cfg_.tracking;
  double corr = 0;
  double err = 0;
  if (obs.t >= tc.start_time) {
    if (tc.mode == TrackingMode::kSpeed) {
      const double v = obs.box_present ? obs.box_velocity : obs.robot_velocity;
      err = tc.target_speed - v;
      corr = tc.kp * err + tc.ki * integral_;
    } else if (tc.mode == TrackingMode::kTarget) {
      corr = tc.kx * (obs.target_x - obs.hand_x) +
             tc.kv * (obs.target_velocity - obs.robot_velocity);
    }
  }
  const double corr_sat = std::clamp(corr, -tc.max_correction, tc.max_correction);
  const double want = in.lean + corr_sat;
  d.lean_ref = std::clamp(want, d.lean_cap_lo, d.lean_cap_hi);
  d.correction = d.lean_ref - in.lean;
  if (tc.mode == TrackingMode::kSpeed && obs.t >= tc.start_time) {
    // Conditional integration: freeze while the output is limited in the
    // direction the error pushes.
    const bool limited_hi = corr >= tc.max_correction || want >= d.lean_cap_hi;
    const bool limited_lo = corr <= -tc.max_correction || want <= d.lean_cap_lo;
    if (!(limited_hi && err > 0) && !(limited_lo && err < 0)) integral_ += err * dt;
  }

  const double st = linear_ ? s.theta : std::sin(s.theta);
  const double ct = linear_ ? 1.0 : std::cos(s.theta);
  const double acc_des = -cfg_.kp * (s.theta - d.lean_ref) - cfg_.kd * s.theta_dot;
  const double p = h * st + h * ct * f - (h * h / human_.g) * acc_des + in.cop;
  d.cop = cfg_.support.clamp(p);
  d.cop_clamped = d.cop != p;
  return d;
}

}  // namespace telesim
