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

// Live sessions (zero-order-held pilot commands driving a Simulator) and
// their record/replay files.
//
// A record is JSON Lines: a header object, then "command" and "telemetry"
// lines in step order, then an "end" line. Commands carry the step index at
// which they took effect, so replay is independent of wall-clock timing.

#ifndef TELESIM_RECORD_HPP_
#define TELESIM_RECORD_HPP_

#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "telesim/config.hpp"
#include "telesim/pilot.hpp"
#include "telesim/sim.hpp"
#include "telesim/telemetry.hpp"

namespace telesim {

inline constexpr const char* kRecordFormat = "telesim.record";
inline constexpr int kRecordVersion = 1;

/// Identity of this build; records made by another build are refused.
const std::string& build_id();

struct PilotCommand {
  PilotInput input;
  std::optional<Toggles> toggles;
};

nlohmann::json input_to_json(const PilotInput& in);
PilotInput input_from_json(const nlohmann::json& j);

struct CommandEntry {
  std::uint64_t step{0};
  PilotCommand command;
};

struct SessionRecord {
  std::string build;
  ScenarioConfig config;
  PilotInput initial;
  std::vector<CommandEntry> commands;
  std::vector<TelemetryFrame> telemetry;
  std::uint64_t steps{0};
};

/// Streams a record as the session runs.
class RecordWriter {
 public:
  RecordWriter(std::ostream& os, const ScenarioConfig& cfg, const PilotInput& initial);
  void command(std::uint64_t step, const PilotCommand& c);
  void frame(const TelemetryFrame& f);
  void finish(std::uint64_t steps);

 private:
  std::ostream& os_;
  bool finished_{false};
};

/// Parses a record. Throws RecordError (with the byte offset of the bad
/// line) on malformed or truncated input and VersionMismatch when the record
/// was produced by a different format version or build.
SessionRecord read_record(std::istream& in, bool check_build = true);
SessionRecord load_record(const std::string& path, bool check_build = true);

struct ReplayOptions {
  std::optional<bool> spring;
  std::optional<bool> haptics;
};

/// Feeds the recorded commands at their recorded steps into a fresh world.
std::vector<TelemetryFrame> replay(const SessionRecord& rec,
                                   const ReplayOptions& opt = {});

/// A Simulator driven by zero-order-held commands.
class Session {
 public:
  Session(const ScenarioConfig& cfg, const PilotInput& initial = {});

  /// Takes effect at the next step.
  void apply(const PilotCommand& c);
  TelemetryFrame advance();

  const Simulator& simulator() const { return sim_; }
  const PilotInput& current() const { return current_; }
  std::uint64_t steps() const { return sim_.world().step; }
  const PilotInput& initial() const { return initial_; }

 private:
  Simulator sim_;
  PilotInput initial_;
  PilotInput current_;
};

}  // namespace telesim

#endif  // TELESIM_RECORD_HPP_
