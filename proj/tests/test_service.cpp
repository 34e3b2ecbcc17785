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

// Live-socket tests: a real server on a free port and WebSocket clients.

#include <sys/socket.h>
#include <sys/time.h>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <sstream>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>

#include "telesim/errors.hpp"
#include "telesim/record.hpp"
#include "telesim/service.hpp"

namespace telesim {
namespace {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;
using namespace std::chrono_literals;

class Client {
 public:
  explicit Client(std::uint16_t port) : ws_(ioc_) {
    tcp::resolver resolver(ioc_);
    beast::get_lowest_layer(ws_).connect(resolver.resolve("127.0.0.1", std::to_string(port)));
    // A stalled server fails the read instead of hanging the test.
    timeval tv{3, 0};
    setsockopt(beast::get_lowest_layer(ws_).socket().native_handle(), SOL_SOCKET, SO_RCVTIMEO,
               &tv, sizeof tv);
    ws_.handshake("127.0.0.1", "/");
    ws_.text(true);
  }

  void send(const json& j) { send_raw(j.dump()); }
  void send_raw(const std::string& s) { ws_.write(asio::buffer(s)); }

  json read() {
    beast::flat_buffer buf;
    ws_.read(buf);
    return json::parse(beast::buffers_to_string(buf.data()));
  }

  /// Reads until a message of `type` arrives, skipping others.
  json read_type(const std::string& type, int max_messages = 500) {
    for (int i = 0; i < max_messages; ++i) {
      json j = read();
      if (j.value("type", "") == type) return j;
    }
    throw std::runtime_error("no '" + type + "' message");
  }

  json hello(const std::string& role) {
    send({{"type", "hello"}, {"proto", 1}, {"role", role}});
    return read_type("welcome");
  }

  void close() {
    beast::error_code ec;
    ws_.close(websocket::close_code::normal, ec);
  }

 private:
  asio::io_context ioc_;
  websocket::stream<beast::tcp_stream> ws_;
};

ServiceConfig test_config() {
  ServiceConfig c;
  c.scenario = default_scenario(ScenarioKind::kFreeBalance);
  c.port = 0;
  return c;
}

json command(std::uint64_t seq, double lean) {
  return {{"type", "command"}, {"proto", 1}, {"seq", seq}, {"t_client", 0.0}, {"lean", lean},
          {"cop", 0.0}, {"com_disp", 0.0}};
}

TEST(ServiceProtocol, ParseCommandValidates) {
  const PilotInput prev;
  const ParsedCommand ok = parse_command(command(3, 0.01), prev);
  EXPECT_EQ(ok.seq, 3u);
  EXPECT_EQ(ok.command.input.lean, 0.01);
  EXPECT_FALSE(ok.command.toggles.has_value());

  json nolean = command(1, 0);
  nolean.erase("lean");
  EXPECT_THROW(parse_command(nolean, prev), ParameterError);
  json nullean = command(1, 0);
  nullean["lean"] = nullptr;
  EXPECT_THROW(parse_command(nullean, prev), ParameterError);
  json noseq = command(1, 0);
  noseq["seq"] = -1;
  EXPECT_THROW(parse_command(noseq, prev), ParameterError);
  json badarm = command(1, 0);
  badarm["arms"] = {{"l", {0, 0, 0}}};
  EXPECT_THROW(parse_command(badarm, prev), ParameterError);
  json badtog = command(1, 0);
  badtog["toggles"] = {{"spring", true}};
  EXPECT_THROW(parse_command(badtog, prev), ParameterError);
}

TEST(ServiceProtocol, ArmsAreZeroOrderHeld) {
  PilotInput prev;
  prev.left.q << 1, 2, 3, 4;
  json j = command(1, 0.0);
  j["arms"] = {{"r", {0.1, 0.2, 0.3, 0.4}}};
  j["toggles"] = {{"spring", false}, {"haptics", true}};
  const ParsedCommand c = parse_command(j, prev);
  EXPECT_EQ(c.command.input.left.q, prev.left.q);
  EXPECT_EQ(c.command.input.right.q(3), 0.4);
  ASSERT_TRUE(c.command.toggles.has_value());
  EXPECT_FALSE(c.command.toggles->spring);
}

TEST(ServiceProtocol, BindAddress) {
  EXPECT_EQ(parse_bind_address("0.0.0.0:9000"), std::make_pair(std::string("0.0.0.0"),
                                                                std::uint16_t(9000)));
  EXPECT_EQ(parse_bind_address(":8765").second, 8765);
  EXPECT_EQ(parse_bind_address("8765").first, "127.0.0.1");
  EXPECT_EQ(parse_bind_address("[::1]:80").first, "::1");
  EXPECT_THROW(parse_bind_address("host:http"), ConfigError);
  EXPECT_THROW(parse_bind_address("host:70000"), ConfigError);
}

TEST(Service, BindFailureThrows) {
  TeleopServer a(test_config());
  a.start();
  ServiceConfig c = test_config();
  c.port = a.port();
  TeleopServer b(c);
  EXPECT_THROW(b.start(), Error);
  a.stop();
}

class LiveServer : public ::testing::Test {
 protected:
  void SetUp() override {
    server_ = std::make_unique<TeleopServer>(test_config());
    server_->start();
  }
  void TearDown() override { server_->stop(); }
  std::unique_ptr<TeleopServer> server_;
};

TEST_F(LiveServer, RolesAndPilotSlot) {
  Client a(server_->port());
  EXPECT_EQ(a.hello("pilot")["role"], "pilot");
  Client b(server_->port());
  const json wb = b.hello("pilot");
  EXPECT_EQ(wb["role"], "observer");
  EXPECT_EQ(wb["proto"], 1);
  EXPECT_EQ(wb["sim_rate"], 500.0);
  EXPECT_EQ(wb["stream_rate"], 50.0);
  a.close();
  // The slot frees once the server has seen the disconnect.
  std::string role;
  for (int i = 0; i < 50 && role != "pilot"; ++i) {
    std::this_thread::sleep_for(20ms);
    role = b.hello("pilot")["role"];
  }
  EXPECT_EQ(role, "pilot");
}

TEST_F(LiveServer, NoCommandsHoldsBalanceAtOrigin) {
  Client c(server_->port());
  c.hello("observer");
  for (int i = 0; i < 20; ++i) {
    const json s = c.read_type("state");
    EXPECT_EQ(s["frame"]["robot_x"], 0.0);
    EXPECT_EQ(s["frame"]["robot_theta"], 0.0);
  }
}

TEST_F(LiveServer, NanCommandRejectedStateUnaffected) {
  Client c(server_->port());
  c.hello("pilot");
  c.send_raw(R"({"type":"command","proto":1,"seq":1,"t_client":0,"lean":NaN,"cop":0,"com_disp":0})");
  const json e = c.read_type("error");
  EXPECT_EQ(e["code"], "invalid_command");
  EXPECT_EQ(e["seq"], 1);
  json nul = command(2, 0.0);
  nul["lean"] = nullptr;
  c.send(nul);
  EXPECT_EQ(c.read_type("error")["code"], "invalid_command");
  for (int i = 0; i < 10; ++i) {
    const json s = c.read_type("state");
    EXPECT_EQ(s["frame"]["human_theta"], 0.0);
    EXPECT_EQ(s["frame"]["lean_ref"], 0.0);
  }
  EXPECT_EQ(server_->stats().commands_applied, 0u);
  EXPECT_EQ(server_->stats().commands_rejected, 2u);
}

TEST_F(LiveServer, ObserverCannotMutate) {
  Client pilot(server_->port());
  pilot.hello("pilot");
  Client obs(server_->port());
  ASSERT_EQ(obs.hello("observer")["role"], "observer");
  obs.send(command(1, 0.2));
  EXPECT_EQ(obs.read_type("error")["code"], "not_pilot");
  for (int i = 0; i < 10; ++i) {
    EXPECT_EQ(obs.read_type("state")["frame"]["lean_ref"], 0.0);
  }
  EXPECT_EQ(server_->stats().commands_applied, 0u);
}

TEST_F(LiveServer, MalformedMessageSessionSurvives) {
  Client c(server_->port());
  c.hello("pilot");
  c.send_raw("{this is not json");
  EXPECT_EQ(c.read_type("error")["code"], "malformed");
  c.send({{"type", "warp"}});
  EXPECT_EQ(c.read_type("error")["code"], "malformed");
  c.send({{"type", "hello"}, {"proto", 2}});
  EXPECT_EQ(c.read_type("error")["code"], "unsupported_proto");
  c.send({{"type", "ping"}, {"t_client", 1.0}});
  EXPECT_EQ(c.read_type("pong")["t_client"], 1.0);
}

TEST_F(LiveServer, PingEchoesServerTimestamps) {
  Client c(server_->port());
  c.hello("observer");
  const double t0 = std::chrono::duration<double>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count();
  c.send({{"type", "ping"}, {"proto", 1}, {"t_client", t0}, {"id", 7}});
  const json p = c.read_type("pong");
  const double t3 = std::chrono::duration<double>(
                        std::chrono::system_clock::now().time_since_epoch())
                        .count();
  EXPECT_EQ(p["t_client"], t0);
  EXPECT_EQ(p["id"], 7);
  const double recv = p["t_server_recv"], send = p["t_server_send"];
  EXPECT_LE(recv, send);
  EXPECT_GE(recv, t0 - 1e-3);
  EXPECT_LE(send, t3 + 1e-3);
  const double rtt = (t3 - t0) - (send - recv);
  EXPECT_GE(rtt, 0);
  EXPECT_LT(rtt, 0.5);
}

TEST_F(LiveServer, CommandsDriveTheWorldAndStaleAreDropped) {
  Client c(server_->port());
  c.hello("pilot");
  std::uint64_t seq = 10;
  for (int i = 0; i < 25; ++i) {
    c.send(command(++seq, 0.05));
    std::this_thread::sleep_for(20ms);
  }
  c.send(command(5, -0.3));  // stale
  // Messages on one session are handled in order: once the pong is back the
  // stale command has been seen.
  c.send({{"type", "ping"}, {"proto", 1}, {"t_client", 0.0}, {"id", 77}});
  c.read_type("pong");
  double lean_ref = 0, theta = 0;
  for (int i = 0; i < 25; ++i) {
    const json s = c.read_type("state");
    lean_ref = s["frame"]["lean_ref"];
    theta = s["frame"]["human_theta"];
  }
  EXPECT_NEAR(lean_ref, 0.05, 1e-12);
  EXPECT_GT(theta, 0.01);
  EXPECT_EQ(server_->stats().commands_stale, 1u);
  EXPECT_EQ(server_->stats().commands_applied, 25u);
}

TEST_F(LiveServer, StreamRateAndSimRate) {
  Client c(server_->port());
  c.hello("observer");
  // Keep up with the stream while the server's rate window fills.
  const auto warm = std::chrono::steady_clock::now();
  while (std::chrono::steady_clock::now() - warm < 1200ms) c.read_type("state");
  const json first = c.read_type("state");
  const auto start = std::chrono::steady_clock::now();
  double last_t = first["t_sim"];
  std::uint64_t last_seq = first["seq"];
  int n = 0;
  while (std::chrono::steady_clock::now() - start < 2s) {
    const json s = c.read_type("state");
    const double t = s["t_sim"];
    EXPECT_GT(t, last_t);
    EXPECT_GT(s["seq"].get<std::uint64_t>(), last_seq);
    last_t = t;
    last_seq = s["seq"];
    ++n;
  }
  const double rate =
      n / std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_NEAR(rate, 50.0, 5.0);
  EXPECT_GE(server_->stats().achieved_rate, 0.95 * 500);
}

// A client that connects and never reads must not slow the stepper.
TEST_F(LiveServer, SlowClientDoesNotStallSim) {
  Client lazy(server_->port());
  lazy.hello("observer");
  Client reader(server_->port());
  reader.hello("observer");
  std::this_thread::sleep_for(2500ms);
  EXPECT_GE(server_->stats().achieved_rate, 0.95 * 500);
  const json s = reader.read_type("state");
  EXPECT_EQ(s["proto"], 1);
}

TEST(Service, RecordedSessionReplaysIdentically) {
  const std::string path =
      (std::filesystem::temp_directory_path() / "telesim_service_record.jsonl").string();
  ServiceConfig cfg = test_config();
  cfg.record_path = path;
  {
    TeleopServer server(cfg);
    server.start();
    Client c(server.port());
    c.hello("pilot");
    std::uint64_t seq = 0;
    for (int i = 0; i < 30; ++i) {
      json cmd = command(++seq, 0.002 * i);
      if (i == 15) cmd["toggles"] = {{"spring", false}, {"haptics", true}};
      c.send(cmd);
      std::this_thread::sleep_for(15ms);
    }
    // Commands still queued at shutdown never reach the sim, so wait for all.
    for (int i = 0; i < 100 && server.stats().commands_applied < 30; ++i) {
      std::this_thread::sleep_for(5ms);
    }
    c.close();
    server.stop();
  }
  const SessionRecord rec = load_record(path);
  ASSERT_GT(rec.steps, 100u);
  ASSERT_EQ(rec.commands.size(), 30u);
  std::ostringstream a, b;
  write_telemetry_csv(a, rec.telemetry);
  write_telemetry_csv(b, replay(rec));
  EXPECT_EQ(a.str(), b.str());
  std::filesystem::remove(path);
}

}  // namespace
}  // namespace telesim
