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

// telesim: headless scenario runner, comparisons, live server and replay.
//
// Exit codes: 0 success, 1 configuration or input error, 2 simulation
// divergence.

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "telesim/config.hpp"
#include "telesim/errors.hpp"
#include "telesim/pilot.hpp"
#include "telesim/record.hpp"
#include "telesim/runner.hpp"
#include "telesim/telemetry.hpp"
#ifdef TELESIM_HAVE_SERVICE
#include "telesim/service.hpp"
#endif

#ifndef TELESIM_SCENARIO_DIR
#define TELESIM_SCENARIO_DIR ""
#endif

namespace fs = std::filesystem;
using namespace telesim;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 1;
constexpr int kExitDiverged = 2;

// Relative paths that do not exist are also looked up in the shipped
// scenarios directory, so `--config box8.5.json` works from anywhere.
std::string resolve(const std::string& path) {
  if (path.empty() || fs::exists(path)) return path;
  const fs::path p(path);
  const fs::path shipped = fs::path(TELESIM_SCENARIO_DIR) / p;
  if (p.is_relative() && std::string(TELESIM_SCENARIO_DIR).size() && fs::exists(shipped)) {
    return shipped.string();
  }
  return path;
}

ScenarioConfig load_config(const std::string& scenario, const std::string& config,
                           std::optional<double> duration) {
  ScenarioConfig cfg;
  if (!config.empty()) {
    cfg = load_scenario(resolve(config));
    if (!scenario.empty() && parse_scenario_kind(scenario) != cfg.kind) {
      throw ConfigError("--scenario " + scenario + " does not match config kind '" +
                        to_string(cfg.kind) + "'");
    }
  } else {
    cfg = default_scenario(parse_scenario_kind(scenario.empty() ? "free_balance" : scenario));
  }
  if (duration) cfg.duration = *duration;
  cfg.validate();
  return cfg;
}

PilotScript load_script(const std::string& path) {
  if (path.empty()) return PilotScript::constant(PilotInput{});
  return PilotScript::load(resolve(path));
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ConfigError("cannot write '" + path.string() + "'");
  os << text;
}

fs::path prepare_out(const std::string& out) {
  fs::path dir(out);
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec || !fs::is_directory(dir)) {
    throw ConfigError("cannot create output directory '" + out + "'");
  }
  return dir;
}

struct RunArgs {
  std::string scenario;
  std::string config;
  std::string script;
  std::string out;
  std::optional<double> duration;
  bool gnuplot{false};
};

int cmd_run(const RunArgs& a) {
  const ScenarioConfig cfg = load_config(a.scenario, a.config, a.duration);
  const PilotScript script = load_script(a.script);
  std::optional<fs::path> dir;
  std::ofstream csv;
  if (!a.out.empty()) {
    dir = prepare_out(a.out);
    csv.open(*dir / "telemetry.csv", std::ios::binary);
    if (!csv) throw ConfigError("cannot write '" + (*dir / "telemetry.csv").string() + "'");
    csv << telemetry_csv_header() << '\n';
  }
  FrameSink sink;
  if (csv.is_open()) {
    sink = [&csv](const TelemetryFrame& f) { csv << telemetry_csv_row(f) << '\n'; };
  }
  const RunResult r = run_scenario(cfg, script, sink, false);
  const std::string report = report_to_json(r.report).dump(2) + "\n";
  std::cout << report;
  if (dir) {
    write_text(*dir / "report.json", report);
    if (a.gnuplot) {
      write_text(*dir / "plot.gp", gnuplot_script((*dir / "telemetry.csv").string(), cfg.kind));
    }
  }
  if (r.report.diverged) {
    std::cerr << "telesim: simulation diverged: " << r.report.divergence << "\n";
    return kExitDiverged;
  }
  return kExitOk;
}

struct CompareArgs {
  std::string mode;
  std::string scenario;
  std::string config;
  std::string script;
  std::string out;
  std::optional<double> duration;
};

int cmd_compare(const CompareArgs& a) {
  const ScenarioConfig cfg = load_config(a.scenario, a.config, a.duration);
  nlohmann::json j;
  int code = kExitOk;
  if (a.mode == "spring") {
    const SpringComparison c = compare_spring(cfg, load_script(a.script));
    std::cout << comparison_table(c);
    j = comparison_to_json(c);
    if (c.on.diverged) std::cerr << "telesim: spring-on run diverged: " << c.on.divergence << "\n";
    if (c.off.diverged) {
      std::cerr << "telesim: spring-off run diverged: " << c.off.divergence << "\n";
    }
    if (c.on.diverged || c.off.diverged) code = kExitDiverged;
  } else {
    PilotScript script = a.script.empty() ? PilotScript::constant(PilotInput{0.02})
                                          : load_script(a.script);
    const MappingComparison c = compare_mapping(cfg, script);
    std::cout << comparison_table(c);
    j = comparison_to_json(c);
    if (c.dcm_diverged) {
      std::cerr << "telesim: DCM-mapping run diverged\n";
      code = kExitDiverged;
    }
  }
  if (!a.out.empty()) write_text(prepare_out(a.out) / "compare.json", j.dump(2) + "\n");
  return code;
}

#ifdef TELESIM_HAVE_SERVICE
std::atomic<bool> g_stop{false};
void on_signal(int) { g_stop = true; }

struct ServeArgs {
  std::string scenario;
  std::string config;
  std::string bind{"127.0.0.1:8765"};
  std::string record;
  double sim_rate{500};
  double stream_rate{50};
};

int cmd_serve(const ServeArgs& a) {
  configure_logging_from_env();
  ServiceConfig sc;
  sc.scenario = load_config(a.scenario, a.config, std::nullopt);
  const auto [host, port] = parse_bind_address(a.bind);
  sc.host = host;
  sc.port = port;
  sc.sim_rate = a.sim_rate;
  sc.stream_rate = a.stream_rate;
  if (!a.record.empty()) sc.record_path = a.record;
  TeleopServer server(sc);
  try {
    server.start();
  } catch (const ConfigError&) {
    throw;
  } catch (const Error& e) {
    std::cerr << "telesim: " << e.what() << "\n";
    return kExitConfig;
  }
  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  std::cerr << "telesim: listening on ws://" << host << ":" << server.port() << "/\n";
  while (!g_stop) std::this_thread::sleep_for(std::chrono::milliseconds(50));
  server.stop();
  const ServiceStats st = server.stats();
  std::cerr << "telesim: stopped after " << st.steps << " steps (" << st.achieved_rate
            << " Hz)\n";
  return st.diverged ? kExitDiverged : kExitOk;
}
#endif

struct ReplayArgs {
  std::string record;
  std::string out;
  std::string spring;
  std::string haptics;
  bool verify{false};
};

std::optional<bool> on_off(const std::string& v) {
  if (v.empty()) return std::nullopt;
  return v == "on";
}

int cmd_replay(const ReplayArgs& a) {
  const SessionRecord rec = load_record(a.record);
  ReplayOptions opt;
  opt.spring = on_off(a.spring);
  opt.haptics = on_off(a.haptics);
  std::vector<TelemetryFrame> frames;
  try {
    frames = replay(rec, opt);
  } catch (const SimulationDiverged& e) {
    std::cerr << "telesim: replay diverged: " << e.what() << "\n";
    return kExitDiverged;
  }
  if (!a.out.empty()) {
    std::ofstream os(a.out, std::ios::binary);
    if (!os) throw ConfigError("cannot write '" + a.out + "'");
    write_telemetry_csv(os, frames);
  }
  if (a.verify) {
    std::ostringstream want, got;
    write_telemetry_csv(want, rec.telemetry);
    write_telemetry_csv(got, frames);
    const bool same = want.str() == got.str();
    std::cout << (same ? "identical" : "differs") << " (" << frames.size() << " steps)\n";
    if (!same && !opt.spring && !opt.haptics) {
      std::cerr << "telesim: replay does not reproduce the recorded telemetry\n";
      return kExitConfig;
    }
  } else {
    std::cout << frames.size() << " steps replayed\n";
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"telesim: bilateral whole-body teleoperation simulator"};
  app.require_subcommand(1);

  RunArgs run;
  auto* run_cmd = app.add_subcommand("run", "Run one scenario headless");
  run_cmd->add_option("--scenario", run.scenario, "box_push | hand_off | free_balance");
  run_cmd->add_option("--config", run.config, "Scenario config JSON");
  run_cmd->add_option("--script", run.script, "Pilot script CSV");
  run_cmd->add_option("--out", run.out, "Output directory (telemetry.csv, report.json)");
  run_cmd->add_option("--duration", run.duration, "Override duration [s]");
  run_cmd->add_flag("--gnuplot", run.gnuplot, "Also write plot.gp into --out");

  CompareArgs cmp;
  auto* cmp_cmd = app.add_subcommand("compare", "Spring on/off or legacy/DCM mapping");
  cmp_cmd->add_option("--mode", cmp.mode, "spring | mapping")
      ->required()
      ->check(CLI::IsMember({"spring", "mapping"}));
  cmp_cmd->add_option("--scenario", cmp.scenario, "box_push | hand_off | free_balance");
  cmp_cmd->add_option("--config", cmp.config, "Scenario config JSON");
  cmp_cmd->add_option("--script", cmp.script, "Pilot script CSV");
  cmp_cmd->add_option("--out", cmp.out, "Output directory (compare.json)");
  cmp_cmd->add_option("--duration", cmp.duration, "Override duration [s]");

#ifdef TELESIM_HAVE_SERVICE
  ServeArgs srv;
  auto* srv_cmd = app.add_subcommand("serve", "Run the live teleoperation server");
  srv_cmd->add_option("--scenario", srv.scenario, "box_push | hand_off | free_balance");
  srv_cmd->add_option("--config", srv.config, "Scenario config JSON");
  srv_cmd->add_option("--bind", srv.bind, "host:port (port 0 picks a free one)");
  srv_cmd->add_option("--record", srv.record, "Write a session record here");
  srv_cmd->add_option("--sim-rate", srv.sim_rate, "Simulation rate [Hz]");
  srv_cmd->add_option("--stream-rate", srv.stream_rate, "State stream rate [Hz]");
#endif

  ReplayArgs rep;
  auto* rep_cmd = app.add_subcommand("replay", "Replay a session record");
  rep_cmd->add_option("--record", rep.record, "Session record")->required();
  rep_cmd->add_option("--out", rep.out, "Telemetry CSV output");
  rep_cmd->add_option("--spring", rep.spring, "Override spring toggle")
      ->check(CLI::IsMember({"on", "off"}));
  rep_cmd->add_option("--haptics", rep.haptics, "Override haptics toggle")
      ->check(CLI::IsMember({"on", "off"}));
  rep_cmd->add_flag("--verify", rep.verify, "Compare against the recorded telemetry");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*run_cmd) return cmd_run(run);
    if (*cmp_cmd) return cmd_compare(cmp);
#ifdef TELESIM_HAVE_SERVICE
    if (*srv_cmd) return cmd_serve(srv);
#endif
    if (*rep_cmd) return cmd_replay(rep);
  } catch (const SimulationDiverged& e) {
    std::cerr << "telesim: " << e.what() << "\n";
    return kExitDiverged;
  } catch (const Error& e) {
    std::cerr << "telesim: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "telesim: " << e.what() << "\n";
    return kExitConfig;
  }
  return kExitConfig;
}
