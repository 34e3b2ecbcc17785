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

// Headless scenario runs, their summary reports and the toggled comparisons.

#ifndef TELESIM_RUNNER_HPP_
#define TELESIM_RUNNER_HPP_

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "telesim/config.hpp"
#include "telesim/pilot.hpp"
#include "telesim/telemetry.hpp"

namespace telesim {

inline constexpr int kReportVersion = 1;

struct BoxPushMetrics {
  bool moved{false};
  double displacement{0};
  /// Mean box speed over the second half of the moving window (box_v > 0.02).
  double mean_velocity{0};
  double moving_time{0};
  double peak_accel{0};
  bool accel_within_bound{true};
  /// Mean F_HMI over the same steady window.
  double steady_f_hmi{0};
  double steady_f_contact{0};
};

struct HandOffMetrics {
  bool caught{false};
  double catch_time{0};
  /// Hand-minus-target speed when the catch hold completed.
  double relative_speed{0};
  double min_distance{0};
};

struct ScenarioReport {
  ScenarioKind kind{ScenarioKind::kFreeBalance};
  std::size_t steps{0};
  double duration{0};
  bool diverged{false};
  std::string divergence;
  double max_lean_human{0};
  double max_lean_robot{0};
  double max_f_r{0};
  double max_abs_f_hmi{0};
  double max_abs_residual{0};
  double max_dcm_error{0};
  double final_dcm_error{0};
  double robot_displacement{0};
  double max_abs_robot_displacement{0};
  std::uint32_t flags_seen{0};
  std::size_t saturated_steps{0};
  bool nominal{true};
  std::optional<BoxPushMetrics> box;
  std::optional<HandOffMetrics> hand_off;
};

struct RunResult {
  std::vector<TelemetryFrame> frames;
  ScenarioReport report;
};

using FrameSink = std::function<void(const TelemetryFrame&)>;

/// Runs `cfg.duration` seconds. A divergence stops the run; the report and the
/// partial telemetry are still returned with `diverged` set.
RunResult run_scenario(const ScenarioConfig& cfg, const PilotScript& script,
                       const FrameSink& sink = nullptr, bool keep_frames = true);

ScenarioReport summarize(const ScenarioConfig& cfg,
                         const std::vector<TelemetryFrame>& frames);

nlohmann::json report_to_json(const ScenarioReport& r);

/// Legacy integrated-velocity mapping applied to a telemetry run.
struct MappingComparison {
  double duration{0};
  double legacy_x_des{0};
  double closed_form{0};
  double dcm_displacement{0};
  double dcm_max_abs_displacement{0};
  bool dcm_diverged{false};
};

struct SpringComparison {
  ScenarioReport on;
  ScenarioReport off;
};

SpringComparison compare_spring(const ScenarioConfig& cfg, const PilotScript& script);
MappingComparison compare_mapping(const ScenarioConfig& cfg, const PilotScript& script);

nlohmann::json comparison_to_json(const SpringComparison& c);
nlohmann::json comparison_to_json(const MappingComparison& c);
/// Plain-text side-by-side table.
std::string comparison_table(const SpringComparison& c);
std::string comparison_table(const MappingComparison& c);

/// Gnuplot script plotting selected telemetry columns from `csv_path`.
std::string gnuplot_script(const std::string& csv_path, ScenarioKind kind);

}  // namespace telesim

#endif  // TELESIM_RUNNER_HPP_
