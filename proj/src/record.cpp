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

#include "telesim/record.hpp"

#include <fstream>
#include <sstream>

#include "telesim/errors.hpp"

#ifndef TELESIM_BUILD_ID
#define TELESIM_BUILD_ID "dev"
#endif

namespace telesim {

using nlohmann::json;

const std::string& build_id() {
  static const std::string id = std::string("telesim-") + TELESIM_BUILD_ID;
  return id;
}

json input_to_json(const PilotInput& in) {
  auto v4 = [](const Eigen::Vector4d& q) { return json{q(0), q(1), q(2), q(3)}; };
  return {{"lean", in.lean},
          {"cop", in.cop},
          {"com_disp", in.com_disp},
          {"arms", {{"l", v4(in.left.q)}, {"r", v4(in.right.q)}}}};
}

PilotInput input_from_json(const json& j) {
  PilotInput in;
  in.lean = j.at("lean").get<double>();
  in.cop = j.at("cop").get<double>();
  in.com_disp = j.at("com_disp").get<double>();
  const json& arms = j.at("arms");
  for (int i = 0; i < 4; ++i) {
    in.left.q(i) = arms.at("l").at(i).get<double>();
    in.right.q(i) = arms.at("r").at(i).get<double>();
  }
  return in;
}

RecordWriter::RecordWriter(std::ostream& os, const ScenarioConfig& cfg,
                           const PilotInput& initial)
    : os_(os) {
  json h = {{"format", kRecordFormat},
            {"version", kRecordVersion},
            {"build", build_id()},
            {"config", scenario_to_json(cfg)},
            {"initial", input_to_json(initial)}};
  os_ << h.dump() << '\n';
}

void RecordWriter::command(std::uint64_t step, const PilotCommand& c) {
  json j = {{"type", "command"}, {"step", step}, {"input", input_to_json(c.input)}};
  if (c.toggles) {
    j["toggles"] = {{"spring", c.toggles->spring}, {"haptics", c.toggles->haptics}};
  }
  os_ << j.dump() << '\n';
}

void RecordWriter::frame(const TelemetryFrame& f) {
  os_ << json{{"type", "telemetry"}, {"frame", frame_to_json(f)}}.dump() << '\n';
}

void RecordWriter::finish(std::uint64_t steps) {
  if (finished_) return;
  finished_ = true;
  os_ << json{{"type", "end"}, {"steps", steps}}.dump() << '\n';
  os_.flush();
}

SessionRecord read_record(std::istream& in, bool check_build) {
  SessionRecord rec;
  std::string line;
  std::size_t offset = 0;
  bool have_header = false;
  bool have_end = false;
  while (true) {
    const std::size_t line_start = offset;
    if (!std::getline(in, line)) break;
    const bool terminated = !in.eof();
    offset += line.size() + (terminated ? 1 : 0);
    if (have_end) {
      if (line.empty()) continue;
      throw RecordError("record: data after end marker", line_start);
    }
    if (!terminated) throw RecordError("record: truncated line", line_start);
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error&) {
      throw RecordError("record: malformed line", line_start);
    }
    try {
      if (!have_header) {
        if (!j.is_object() || j.value("format", "") != kRecordFormat) {
          throw RecordError("record: missing header", line_start);
        }
        const int version = j.at("version").get<int>();
        if (version != kRecordVersion) {
          throw VersionMismatch("record format version " + std::to_string(version) +
                                " is not supported (expected " +
                                std::to_string(kRecordVersion) + ")");
        }
        rec.build = j.at("build").get<std::string>();
        if (check_build && rec.build != build_id()) {
          throw VersionMismatch("record was produced by build '" + rec.build +
                                "' but this is '" + build_id() +
                                "'; replay would not be bit-identical");
        }
        rec.config = scenario_from_json(j.at("config"));
        rec.initial = input_from_json(j.at("initial"));
        have_header = true;
        continue;
      }
      const std::string type = j.at("type").get<std::string>();
      if (type == "command") {
        CommandEntry e;
        e.step = j.at("step").get<std::uint64_t>();
        if (!rec.commands.empty() && e.step < rec.commands.back().step) {
          throw RecordError("record: command steps out of order", line_start);
        }
        e.command.input = input_from_json(j.at("input"));
        if (j.contains("toggles")) {
          Toggles t;
          t.spring = j["toggles"].at("spring").get<bool>();
          t.haptics = j["toggles"].at("haptics").get<bool>();
          e.command.toggles = t;
        }
        rec.commands.push_back(std::move(e));
      } else if (type == "telemetry") {
        rec.telemetry.push_back(frame_from_json(j.at("frame")));
      } else if (type == "end") {
        rec.steps = j.at("steps").get<std::uint64_t>();
        have_end = true;
      } else {
        throw RecordError("record: unknown line type '" + type + "'", line_start);
      }
    } catch (const json::exception& e) {
      throw RecordError(std::string("record: bad field: ") + e.what(), line_start);
    } catch (const ConfigError& e) {
      throw RecordError(std::string("record: ") + e.what(), line_start);
    }
  }
  if (!have_header) throw RecordError("record: empty file", offset);
  if (!have_end) throw RecordError("record: truncated (no end marker)", offset);
  return rec;
}

SessionRecord load_record(const std::string& path, bool check_build) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open record file '" + path + "'");
  return read_record(in, check_build);
}

Session::Session(const ScenarioConfig& cfg, const PilotInput& initial)
    : sim_(cfg), initial_(initial), current_(initial) {
  sim_.reset(initial);
}

void Session::apply(const PilotCommand& c) {
  current_ = c.input;
  if (c.toggles) sim_.set_toggles(*c.toggles);
}

TelemetryFrame Session::advance() {
  const WorldState& w = sim_.step(current_);
  return make_frame(w, sim_.toggles());
}

std::vector<TelemetryFrame> replay(const SessionRecord& rec, const ReplayOptions& opt) {
  ScenarioConfig cfg = rec.config;
  if (opt.spring) cfg.retarget.spring_enabled = *opt.spring;
  if (opt.haptics) cfg.haptics_enabled = *opt.haptics;
  Session session(cfg, rec.initial);
  std::vector<TelemetryFrame> out;
  out.reserve(rec.steps);
  std::size_t next = 0;
  for (std::uint64_t k = 0; k < rec.steps; ++k) {
    while (next < rec.commands.size() && rec.commands[next].step == k) {
      PilotCommand c = rec.commands[next].command;
      if (c.toggles) {
        if (opt.spring) c.toggles->spring = *opt.spring;
        if (opt.haptics) c.toggles->haptics = *opt.haptics;
      }
      session.apply(c);
      ++next;
    }
    out.push_back(session.advance());
  }
  return out;
}

}  // namespace telesim
