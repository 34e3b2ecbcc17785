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

#include "telesim/runner.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "telesim/errors.hpp"
#include "telesim/locomotion.hpp"

namespace telesim {

namespace {

constexpr double kMovingSpeed = 0.02;
constexpr double kMovedDistance = 0.01;

std::size_t step_count(const ScenarioConfig& cfg) {
  return static_cast<std::size_t>(std::llround(cfg.duration / cfg.dt));
}

std::string fmt(double v, const char* format = "%.4g") {
  char buf[48];
  std::snprintf(buf, sizeof buf, format, v);
  return buf;
}

}  // namespace

RunResult run_scenario(const ScenarioConfig& cfg, const PilotScript& script,
                       const FrameSink& sink, bool keep_frames) {
  Simulator sim(cfg);
  sim.reset(script.sample(0));
  const std::size_t n = step_count(cfg);
  RunResult out;
  if (keep_frames) out.frames.reserve(n);
  std::vector<TelemetryFrame> all;
  std::vector<TelemetryFrame>& frames = keep_frames ? out.frames : all;
  std::string divergence;
  try {
    for (std::size_t k = 0; k < n; ++k) {
      const double t = static_cast<double>(k) * cfg.dt;
      const WorldState& w = sim.step(script.sample(t));
      TelemetryFrame f = make_frame(w, sim.toggles());
      if (sink) sink(f);
      frames.push_back(std::move(f));
    }
  } catch (const SimulationDiverged& e) {
    divergence = e.what();
  }
  out.report = summarize(cfg, frames);
  if (!divergence.empty()) {
    out.report.diverged = true;
    out.report.divergence = divergence;
    out.report.nominal = false;
  }
  return out;
}

ScenarioReport summarize(const ScenarioConfig& cfg,
                         const std::vector<TelemetryFrame>& frames) {
  ScenarioReport r;
  r.kind = cfg.kind;
  r.steps = frames.size();
  r.duration = frames.empty() ? 0 : frames.back().t;
  for (const auto& f : frames) {
    r.max_lean_human = std::max(r.max_lean_human, std::abs(f.human_theta));
    r.max_lean_robot = std::max(r.max_lean_robot, std::abs(f.robot_theta));
    r.max_f_r = std::max(r.max_f_r, std::abs(f.f_r));
    r.max_abs_f_hmi = std::max(r.max_abs_f_hmi, std::abs(f.f_hmi));
    r.max_abs_residual = std::max(r.max_abs_residual, std::abs(f.residual));
    r.max_dcm_error = std::max(r.max_dcm_error, std::abs(f.xi_r - f.xi_h));
    r.max_abs_robot_displacement =
        std::max(r.max_abs_robot_displacement, std::abs(f.robot_x - cfg.robot_x0));
    r.flags_seen |= f.flags;
    if (f.flags & flags::kEffortSaturated) ++r.saturated_steps;
  }
  if (!frames.empty()) {
    r.final_dcm_error = std::abs(frames.back().xi_r - frames.back().xi_h);
    r.robot_displacement = frames.back().robot_x - cfg.robot_x0;
  }
  r.nominal = (r.flags_seen & flags::kFallMask) == 0;

  if (cfg.kind == ScenarioKind::kBoxPush) {
    BoxPushMetrics b;
    std::vector<std::size_t> moving;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      b.peak_accel = std::max(b.peak_accel, std::abs(frames[i].box_a));
      if (frames[i].box_v > kMovingSpeed) moving.push_back(i);
    }
    b.displacement = frames.empty() ? 0 : frames.back().box_x - cfg.box.position;
    b.moved = b.displacement > kMovedDistance;
    b.moving_time = static_cast<double>(moving.size()) * cfg.dt;
    b.accel_within_bound = b.peak_accel <= cfg.accel_bound;
    if (!moving.empty()) {
      const std::size_t start = moving.size() / 2;
      double v = 0, fh = 0, fc = 0;
      for (std::size_t k = start; k < moving.size(); ++k) {
        v += frames[moving[k]].box_v;
        fh += frames[moving[k]].f_hmi;
        fc += frames[moving[k]].f_contact;
      }
      const double cnt = static_cast<double>(moving.size() - start);
      b.mean_velocity = v / cnt;
      b.steady_f_hmi = fh / cnt;
      b.steady_f_contact = fc / cnt;
    }
    r.box = b;
  }

  if (cfg.kind == ScenarioKind::kHandOff) {
    HandOffMetrics h;
    h.min_distance = INFINITY;
    double inside_since = -1;
    for (std::size_t i = 0; i < frames.size(); ++i) {
      const auto& f = frames[i];
      const double zt = cfg.target.z;
      const double dr = std::hypot(f.hand_r_x - f.target_x, f.hand_r_z - zt);
      const double dl = std::hypot(f.hand_l_x - f.target_x, f.hand_l_z - zt);
      const double d = std::min(dr, dl);
      h.min_distance = std::min(h.min_distance, d);
      if (d <= cfg.catch_radius) {
        if (inside_since < 0) inside_since = f.t;
        if (!h.caught && f.t - inside_since >= cfg.catch_hold - 1e-12) {
          h.caught = true;
          h.catch_time = f.t;
          if (i > 0) {
            const double hand_v = (f.hand_r_x - frames[i - 1].hand_r_x) / cfg.dt;
            const double target_v = (f.target_x - frames[i - 1].target_x) / cfg.dt;
            h.relative_speed = hand_v - target_v;
          }
        }
      } else {
        inside_since = -1;
      }
    }
    if (frames.empty()) h.min_distance = 0;
    r.hand_off = h;
  }
  return r;
}

nlohmann::json report_to_json(const ScenarioReport& r) {
  nlohmann::json j;
  j["schema"] = "telesim.report";
  j["version"] = kReportVersion;
  j["kind"] = to_string(r.kind);
  j["steps"] = r.steps;
  j["duration"] = r.duration;
  j["diverged"] = r.diverged;
  if (r.diverged) j["divergence"] = r.divergence;
  j["nominal"] = r.nominal;
  j["max_lean_human"] = r.max_lean_human;
  j["max_lean_robot"] = r.max_lean_robot;
  j["max_f_r"] = r.max_f_r;
  j["max_abs_f_hmi"] = r.max_abs_f_hmi;
  j["max_abs_residual"] = r.max_abs_residual;
  j["max_dcm_error"] = r.max_dcm_error;
  j["final_dcm_error"] = r.final_dcm_error;
  j["robot_displacement"] = r.robot_displacement;
  j["max_abs_robot_displacement"] = r.max_abs_robot_displacement;
  j["flags_seen"] = r.flags_seen;
  j["saturated_steps"] = r.saturated_steps;
  if (r.box) {
    const BoxPushMetrics& b = *r.box;
    j["box_push"] = {{"moved", b.moved},
                     {"displacement", b.displacement},
                     {"mean_velocity", b.mean_velocity},
                     {"moving_time", b.moving_time},
                     {"peak_accel", b.peak_accel},
                     {"accel_within_bound", b.accel_within_bound},
                     {"steady_f_hmi", b.steady_f_hmi},
                     {"steady_f_contact", b.steady_f_contact}};
  }
  if (r.hand_off) {
    const HandOffMetrics& h = *r.hand_off;
    j["hand_off"] = {{"caught", h.caught},
                     {"catch_time", h.catch_time},
                     {"relative_speed", h.relative_speed},
                     {"min_distance", h.min_distance}};
  }
  return j;
}

SpringComparison compare_spring(const ScenarioConfig& cfg, const PilotScript& script) {
  ScenarioConfig on = cfg;
  on.retarget.spring_enabled = true;
  ScenarioConfig off = cfg;
  off.retarget.spring_enabled = false;
  SpringComparison c;
  c.on = run_scenario(on, script, nullptr, true).report;
  c.off = run_scenario(off, script, nullptr, true).report;
  return c;
}

MappingComparison compare_mapping(const ScenarioConfig& cfg, const PilotScript& script) {
  const RunResult run = run_scenario(cfg, script);
  MappingComparison m;
  std::vector<double> theta;
  theta.reserve(run.frames.size() + 1);
  theta.push_back(script.sample(0).lean);
  for (const auto& f : run.frames) theta.push_back(f.human_theta);
  const auto [v, x] = legacy_velocity_reference(theta, cfg.dt, cfg.human.g);
  m.duration = static_cast<double>(theta.size() - 1) * cfg.dt;
  m.legacy_x_des = x.back();
  m.closed_form = 0.5 * cfg.human.g * script.sample(0).lean * m.duration * m.duration;
  m.dcm_displacement = run.report.robot_displacement;
  m.dcm_max_abs_displacement = run.report.max_abs_robot_displacement;
  m.dcm_diverged = run.report.diverged;
  return m;
}

nlohmann::json comparison_to_json(const SpringComparison& c) {
  return {{"schema", "telesim.compare"},
          {"version", kReportVersion},
          {"mode", "spring"},
          {"spring_on", report_to_json(c.on)},
          {"spring_off", report_to_json(c.off)}};
}

nlohmann::json comparison_to_json(const MappingComparison& c) {
  return {{"schema", "telesim.compare"},
          {"version", kReportVersion},
          {"mode", "mapping"},
          {"duration", c.duration},
          {"legacy_x_des", c.legacy_x_des},
          {"closed_form", c.closed_form},
          {"dcm_displacement", c.dcm_displacement},
          {"dcm_max_abs_displacement", c.dcm_max_abs_displacement},
          {"dcm_diverged", c.dcm_diverged}};
}

std::string comparison_table(const SpringComparison& c) {
  auto row = [](const std::string& name, const std::string& a, const std::string& b) {
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-22s %14s %14s\n", name.c_str(), a.c_str(), b.c_str());
    return std::string(buf);
  };
  auto moved = [](const ScenarioReport& r) {
    return r.box ? std::string(r.box->moved ? "yes" : "no") : std::string("-");
  };
  auto vel = [](const ScenarioReport& r) { return r.box ? fmt(r.box->mean_velocity) : "-"; };
  std::string out = row("metric", "spring on", "spring off");
  out += row("max lean human [rad]", fmt(c.on.max_lean_human), fmt(c.off.max_lean_human));
  out += row("max lean robot [rad]", fmt(c.on.max_lean_robot), fmt(c.off.max_lean_robot));
  out += row("max F_R [N]", fmt(c.on.max_f_r), fmt(c.off.max_f_r));
  out += row("max |F_HMI| [N]", fmt(c.on.max_abs_f_hmi), fmt(c.off.max_abs_f_hmi));
  out += row("box moved", moved(c.on), moved(c.off));
  out += row("box mean v [m/s]", vel(c.on), vel(c.off));
  out += row("robot drift [m]", fmt(c.on.robot_displacement), fmt(c.off.robot_displacement));
  out += row("diverged", c.on.diverged ? "yes" : "no", c.off.diverged ? "yes" : "no");
  return out;
}

std::string comparison_table(const MappingComparison& c) {
  std::string out;
  out += "duration [s]                 " + fmt(c.duration) + "\n";
  out += "legacy x_des [m]             " + fmt(c.legacy_x_des) + "\n";
  out += "1/2 g theta t^2 [m]          " + fmt(c.closed_form) + "\n";
  out += "dcm robot displacement [m]   " + fmt(c.dcm_displacement) + "\n";
  out += "dcm max |displacement| [m]   " + fmt(c.dcm_max_abs_displacement) + "\n";
  out += std::string("dcm diverged                 ") + (c.dcm_diverged ? "yes" : "no") + "\n";
  return out;
}

std::string gnuplot_script(const std::string& csv_path, ScenarioKind kind) {
  // Column numbers follow telemetry_csv_header().
  std::string s;
  s += "set datafile separator ','\n";
  s += "set key autotitle columnhead\n";
  s += "set multiplot layout 3,1\n";
  s += "set xlabel 't [s]'\n";
  s += "plot '" + csv_path + "' using 2:3 with lines, '' using 2:7 with lines\n";
  s += "plot '" + csv_path + "' using 2:14 with lines, '' using 2:15 with lines\n";
  if (kind == ScenarioKind::kBoxPush) {
    s += "plot '" + csv_path + "' using 2:22 with lines, '' using 2:24 with lines\n";
  } else if (kind == ScenarioKind::kHandOff) {
    s += "plot '" + csv_path + "' using 2:25 with lines, '' using 2:26 with lines\n";
  } else {
    s += "plot '" + csv_path + "' using 2:9 with lines, '' using 2:10 with lines\n";
  }
  s += "unset multiplot\n";
  return s;
}

}  // namespace telesim
