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

// Real-time teleoperation server. A stepping thread owns the world and runs
// it at a fixed wall-clock rate; WebSocket I/O runs on its own thread and
// talks to the stepper only through queues. See docs/protocol.md.

#ifndef TELESIM_SERVICE_HPP_
#define TELESIM_SERVICE_HPP_

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include <nlohmann/json.hpp>

#include "telesim/config.hpp"
#include "telesim/pilot.hpp"
#include "telesim/record.hpp"

namespace telesim {

inline constexpr int kProtocolVersion = 1;

struct ServiceConfig {
  ScenarioConfig scenario;
  PilotInput initial;
  std::string host{"127.0.0.1"};
  /// 0 picks a free port.
  std::uint16_t port{8765};
  double sim_rate{500};
  double stream_rate{50};
  std::optional<std::string> record_path;
};

struct ServiceStats {
  std::uint64_t steps{0};
  double t_sim{0};
  double achieved_rate{0};
  std::uint64_t commands_applied{0};
  std::uint64_t commands_stale{0};
  std::uint64_t commands_rejected{0};
  std::uint64_t frames_sent{0};
  std::uint64_t frames_dropped{0};
  std::size_t clients{0};
  bool has_pilot{false};
  bool diverged{false};
};

/// Result of validating one inbound command message.
struct ParsedCommand {
  std::uint64_t seq{0};
  double t_client{0};
  PilotCommand command;
};

/// Validates a "command" message against the last applied input (arms are
/// optional and zero-order held). Throws ParameterError with a reason when a
/// field is missing or non-finite.
ParsedCommand parse_command(const nlohmann::json& j, const PilotInput& previous);

/// "host:port" or ":port" or "port".
std::pair<std::string, std::uint16_t> parse_bind_address(const std::string& addr);

/// Log level from TELESIM_LOG (trace|debug|info|warn|error|critical|off).
void configure_logging_from_env();

class TeleopServer {
 public:
  explicit TeleopServer(ServiceConfig cfg);
  ~TeleopServer();
  TeleopServer(const TeleopServer&) = delete;
  TeleopServer& operator=(const TeleopServer&) = delete;

  /// Binds and starts the I/O and stepping threads. Throws Error on bind
  /// failure.
  void start();
  /// Stops both threads and finalizes the record file.
  void stop();
  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();

  std::uint16_t port() const;
  ServiceStats stats() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace telesim

#endif  // TELESIM_SERVICE_HPP_
