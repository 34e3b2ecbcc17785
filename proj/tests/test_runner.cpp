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
#include <sstream>

#include <gtest/gtest.h>

#include "telesim/runner.hpp"
#include "telesim/telemetry.hpp"
#include "test_paths.hpp"

namespace telesim {
namespace {

TEST(Runner, FreeBalanceZeroScriptNominal) {
  const ScenarioConfig cfg = default_scenario(ScenarioKind::kFreeBalance);
  const RunResult r = run_scenario(cfg, PilotScript::constant(PilotInput{}));
  EXPECT_TRUE(r.report.nominal);
  EXPECT_FALSE(r.report.diverged);
  EXPECT_EQ(r.report.steps, 5000u);
  EXPECT_EQ(r.frames.size(), 5000u);
  EXPECT_LT(std::abs(r.report.robot_displacement), 1e-12);
  EXPECT_LT(r.report.max_abs_robot_displacement, 1e-12);
  EXPECT_EQ(r.report.flags_seen & flags::kFallMask, 0u);
}

TEST(Runner, ReportJsonIsVersioned) {
  const ScenarioConfig cfg = load_scenario(scenario_path("handoff.json"));
  const RunResult r = run_scenario(cfg, PilotScript::load(scenario_path("chase.csv")));
  const nlohmann::json j = report_to_json(r.report);
  EXPECT_EQ(j["schema"], "telesim.report");
  EXPECT_EQ(j["version"], kReportVersion);
  EXPECT_EQ(j["kind"], "hand_off");
  EXPECT_TRUE(j.contains("hand_off"));
  EXPECT_FALSE(j.contains("box_push"));
}

TEST(Runner, HandOffCatchesMovingTarget) {
  const ScenarioConfig cfg = load_scenario(scenario_path("handoff.json"));
  ASSERT_EQ(cfg.target.speed, 0.4);
  const RunResult r = run_scenario(cfg, PilotScript::load(scenario_path("chase.csv")));
  ASSERT_TRUE(r.report.hand_off.has_value());
  EXPECT_TRUE(r.report.hand_off->caught);
  EXPECT_LE(r.report.hand_off->min_distance, cfg.catch_radius);
  EXPECT_FALSE(r.report.diverged);
}

// The catch rule checked independently from telemetry: hand within the
// radius of the target for at least the hold time.
TEST(Runner, CatchRuleMatchesTelemetry) {
  const ScenarioConfig cfg = load_scenario(scenario_path("handoff.json"));
  const RunResult r = run_scenario(cfg, PilotScript::load(scenario_path("chase.csv")));
  double inside_since = -1;
  double caught_at = -1;
  for (const TelemetryFrame& f : r.frames) {
    const double dz = cfg.target.z;
    const double d = std::min(std::hypot(f.hand_r_x - f.target_x, f.hand_r_z - dz),
                              std::hypot(f.hand_l_x - f.target_x, f.hand_l_z - dz));
    const bool inside = d <= cfg.catch_radius;
    if (inside && inside_since < 0) inside_since = f.t;
    if (!inside) inside_since = -1;
    if (inside_since >= 0 && f.t - inside_since >= cfg.catch_hold - 1e-9) {
      caught_at = f.t;
      break;
    }
  }
  ASSERT_GT(caught_at, 0);
  EXPECT_NEAR(r.report.hand_off->catch_time, caught_at, 0.05);
}

TEST(Runner, BoxPushReachesTargetSpeed) {
  const ScenarioConfig cfg = load_scenario(scenario_path("box8.5.json"));
  const RunResult r = run_scenario(cfg, PilotScript::load(scenario_path("push.csv")));
  ASSERT_TRUE(r.report.box.has_value());
  EXPECT_TRUE(r.report.box->moved);
  EXPECT_NEAR(r.report.box->mean_velocity, 0.2, 0.05);
  EXPECT_GE(std::abs(r.report.box->steady_f_hmi), 40);
  EXPECT_LE(std::abs(r.report.box->steady_f_hmi), 120);
  EXPECT_LT(r.report.max_abs_residual, 1e-8);
}

TEST(Runner, SpringComparisonOnMarginalScript) {
  const ScenarioConfig cfg = load_scenario(scenario_path("box8.5_marginal.json"));
  const SpringComparison c =
      compare_spring(cfg, PilotScript::load(scenario_path("marginal.csv")));
  ASSERT_TRUE(c.on.box && c.off.box);
  EXPECT_TRUE(c.on.box->moved);
  EXPECT_FALSE(c.off.box->moved);
  EXPECT_GT(c.on.max_f_r, c.off.max_f_r);
  EXPECT_GT(c.on.max_lean_human, c.off.max_lean_human);
  const std::string table = comparison_table(c);
  EXPECT_NE(table.find("box moved"), std::string::npos);
}

TEST(Runner, IdenticalTogglesGiveIdenticalMetrics) {
  ScenarioConfig cfg = load_scenario(scenario_path("box8.5_marginal.json"));
  cfg.duration = 3;
  const PilotScript s = PilotScript::load(scenario_path("marginal.csv"));
  const nlohmann::json a = report_to_json(run_scenario(cfg, s).report);
  const nlohmann::json b = report_to_json(run_scenario(cfg, s).report);
  EXPECT_EQ(a.dump(), b.dump());
}

TEST(Runner, MappingComparisonLegacyDrift) {
  const ScenarioConfig cfg = load_scenario(scenario_path("lean_hold.json"));
  const MappingComparison m = compare_mapping(cfg, PilotScript::load(scenario_path("lean.csv")));
  const double expected = 0.5 * 9.81 * 0.02 * 10.0 * 10.0;
  EXPECT_NEAR(m.closed_form, expected, 1e-9);
  EXPECT_NEAR(m.legacy_x_des, expected, 0.01 * expected);
  EXPECT_LT(m.dcm_max_abs_displacement, 1.0);
  EXPECT_FALSE(m.dcm_diverged);
  const nlohmann::json j = comparison_to_json(m);
  EXPECT_EQ(j["schema"], "telesim.compare");
  EXPECT_EQ(j["mode"], "mapping");
}

TEST(Runner, SinkSeesEveryFrame) {
  ScenarioConfig cfg = default_scenario(ScenarioKind::kFreeBalance);
  cfg.duration = 0.5;
  std::size_t n = 0;
  std::uint64_t last = 0;
  const RunResult r = run_scenario(
      cfg, PilotScript::constant(PilotInput{}),
      [&](const TelemetryFrame& f) {
        ++n;
        last = f.step;
      },
      false);
  EXPECT_EQ(n, 250u);
  EXPECT_EQ(last, 250u);
  EXPECT_TRUE(r.frames.empty());
  EXPECT_EQ(r.report.steps, 250u);
}

TEST(Telemetry, CsvHeaderIsFixed) {
  const std::string& h = telemetry_csv_header();
  EXPECT_EQ(h.rfind("step,t,human_theta,human_theta_dot,robot_x,", 0), 0u);
  EXPECT_NE(h.find(",f_ext_scaled,"), std::string::npos);
  const std::string tail = "residual,flags,spring,haptics";
  EXPECT_EQ(h.substr(h.size() - tail.size()), tail);
}

TEST(Telemetry, FrameJsonRoundTrip) {
  ScenarioConfig cfg = load_scenario(scenario_path("box8.5.json"));
  cfg.duration = 2;
  const RunResult r = run_scenario(cfg, PilotScript::load(scenario_path("push.csv")));
  for (const TelemetryFrame& f : r.frames) {
    const TelemetryFrame back = frame_from_json(frame_to_json(f));
    ASSERT_EQ(telemetry_csv_row(back), telemetry_csv_row(f));
  }
}

TEST(Telemetry, ChannelDropsOldestWhenFull) {
  Channel<int> c(3);
  for (int i = 0; i < 5; ++i) c.push(i);
  EXPECT_EQ(c.dropped(), 2u);
  const auto all = c.drain();
  ASSERT_EQ(all.size(), 3u);
  EXPECT_EQ(all.front(), 2);
  c.close();
  EXPECT_FALSE(c.pop().has_value());
  EXPECT_FALSE(c.push(9));
}

TEST(Runner, GnuplotScriptReferencesCsv) {
  const std::string g = gnuplot_script("out/telemetry.csv", ScenarioKind::kBoxPush);
  EXPECT_NE(g.find("out/telemetry.csv"), std::string::npos);
}

}  // namespace
}  // namespace telesim
