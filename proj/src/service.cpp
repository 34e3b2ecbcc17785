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

#include "telesim/service.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdlib>
#include <deque>
#include <fstream>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <spdlog/spdlog.h>

#include "telesim/errors.hpp"
#include "telesim/telemetry.hpp"

namespace telesim {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

namespace {

double wall_seconds() {
  return std::chrono::duration<double>(std::chrono::system_clock::now().time_since_epoch())
      .count();
}

double finite_number(const json& j, const char* key) {
  if (!j.contains(key)) throw ParameterError(std::string("missing field '") + key + "'");
  const json& v = j.at(key);
  if (!v.is_number()) throw ParameterError(std::string("field '") + key + "' must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ParameterError(std::string("field '") + key + "' must be finite");
  return d;
}

Eigen::Vector4d joint_vector(const json& v, const char* name) {
  if (!v.is_array() || v.size() != 4) {
    throw ParameterError(std::string("arms.") + name + " must be an array of 4 numbers");
  }
  Eigen::Vector4d q;
  for (int i = 0; i < 4; ++i) {
    if (!v[i].is_number() || !std::isfinite(v[i].get<double>())) {
      throw ParameterError(std::string("arms.") + name + " must be finite numbers");
    }
    q(i) = v[i].get<double>();
  }
  return q;
}

// Some encoders (Python's json module among them) write non-finite floats as
// the bare tokens NaN / Infinity, which strict JSON rejects. Map them to null
// so such a command is reported as invalid rather than unparseable.
std::string nonfinite_tokens_to_null(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_string = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      out += c;
      if (c == '\\' && i + 1 < text.size()) {
        out += text[++i];
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
      out += c;
      continue;
    }
    bool replaced = false;
    for (const char* tok : {"-Infinity", "Infinity", "NaN"}) {
      const std::size_t n = std::char_traits<char>::length(tok);
      if (text.compare(i, n, tok) == 0) {
        out += "null";
        i += n - 1;
        replaced = true;
        break;
      }
    }
    if (!replaced) out += c;
  }
  return out;
}

std::string error_frame(const std::string& code, const std::string& message,
                        std::optional<std::uint64_t> seq = std::nullopt) {
  json j = {{"type", "error"}, {"proto", kProtocolVersion}, {"code", code},
            {"message", message}};
  if (seq) j["seq"] = *seq;
  return j.dump();
}

}  // namespace

ParsedCommand parse_command(const json& j, const PilotInput& previous) {
  ParsedCommand out;
  if (!j.contains("seq") || !j["seq"].is_number_unsigned()) {
    throw ParameterError("field 'seq' must be an unsigned integer");
  }
  out.seq = j["seq"].get<std::uint64_t>();
  out.t_client = j.contains("t_client") ? finite_number(j, "t_client") : 0.0;
  PilotInput in = previous;
  in.lean = finite_number(j, "lean");
  in.cop = j.contains("cop") ? finite_number(j, "cop") : 0.0;
  in.com_disp = j.contains("com_disp") ? finite_number(j, "com_disp") : 0.0;
  if (j.contains("arms")) {
    const json& a = j["arms"];
    if (!a.is_object()) throw ParameterError("arms must be an object");
    if (a.contains("l")) in.left.q = joint_vector(a["l"], "l");
    if (a.contains("r")) in.right.q = joint_vector(a["r"], "r");
  }
  out.command.input = in;
  if (j.contains("toggles")) {
    const json& t = j["toggles"];
    if (!t.is_object()) throw ParameterError("toggles must be an object");
    Toggles tg;
    if (!t.contains("spring") || !t["spring"].is_boolean() || !t.contains("haptics") ||
        !t["haptics"].is_boolean()) {
      throw ParameterError("toggles must carry boolean 'spring' and 'haptics'");
    }
    tg.spring = t["spring"].get<bool>();
    tg.haptics = t["haptics"].get<bool>();
    out.command.toggles = tg;
  }
  return out;
}

std::pair<std::string, std::uint16_t> parse_bind_address(const std::string& addr) {
  std::string host = "127.0.0.1";
  std::string port = addr;
  const auto colon = addr.rfind(':');
  if (colon != std::string::npos) {
    if (colon > 0) host = addr.substr(0, colon);
    port = addr.substr(colon + 1);
  }
  if (!host.empty() && host.front() == '[' && host.back() == ']') {
    host = host.substr(1, host.size() - 2);
  }
  char* end = nullptr;
  const long p = std::strtol(port.c_str(), &end, 10);
  if (port.empty() || *end != '\0' || p < 0 || p > 65535) {
    throw ConfigError("bad bind address '" + addr + "' (expected host:port)");
  }
  return {host, static_cast<std::uint16_t>(p)};
}

void configure_logging_from_env() {
  const char* v = std::getenv("TELESIM_LOG");
  if (!v) return;
  const auto level = spdlog::level::from_str(v);
  spdlog::set_level(level);
}

struct TeleopServer::Impl {
  class Session;

  struct Inbound {
    std::uint64_t session{0};
    PilotCommand command;
  };

  explicit Impl(ServiceConfig c) : cfg(std::move(c)), commands(0) {}

  ServiceConfig cfg;
  asio::io_context ioc{1};
  std::optional<tcp::acceptor> acceptor;
  std::thread io_thread;
  std::thread step_thread;
  std::atomic<bool> running{false};
  std::atomic<bool> started{false};
  std::mutex wait_mu;
  std::condition_variable wait_cv;
  bool stopped{false};

  // I/O thread only.
  std::map<std::uint64_t, std::weak_ptr<Session>> sessions;
  std::uint64_t next_session{1};
  std::uint64_t pilot{0};
  PilotInput last_input;

  Channel<Inbound> commands;

  mutable std::mutex stats_mu;
  ServiceStats st;

  void accept();
  void broadcast(std::shared_ptr<const std::string> msg);
  void step_loop();
  void on_message(Session& s, const std::string& text);
  void on_close(std::uint64_t id);
};

class TeleopServer::Impl::Session
    : public std::enable_shared_from_this<TeleopServer::Impl::Session> {
 public:
  Session(tcp::socket socket, Impl* server, std::uint64_t id)
      : ws_(std::move(socket)), server_(server), id_(id) {}

  void run() {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.set_option(websocket::stream_base::decorator([](websocket::response_type& res) {
      res.set(beast::http::field::server, "telesim");
    }));
    ws_.async_accept(beast::bind_front_handler(&Session::on_accept, shared_from_this()));
  }

  std::uint64_t id() const { return id_; }
  bool is_pilot() const { return pilot_; }
  void set_pilot(bool p) { pilot_ = p; }
  std::optional<std::uint64_t>& last_seq() { return last_seq_; }

  void send_control(std::string msg) {
    control_.push_back(std::make_shared<const std::string>(std::move(msg)));
    pump();
  }

  /// Latest-wins: an unsent state frame is replaced by the newer one.
  void send_state(std::shared_ptr<const std::string> msg) {
    if (!open_) return;
    if (pending_state_) {
      std::lock_guard<std::mutex> lock(server_->stats_mu);
      ++server_->st.frames_dropped;
    }
    pending_state_ = std::move(msg);
    pump();
  }

  void close() {
    if (!open_) return;
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).socket().close(ec);
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) {
      spdlog::debug("session {}: handshake failed: {}", id_, ec.message());
      server_->on_close(id_);
      return;
    }
    open_ = true;
    spdlog::info("session {}: connected", id_);
    read();
  }

  void read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&Session::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      open_ = false;
      spdlog::info("session {}: closed ({})", id_, ec.message());
      server_->on_close(id_);
      return;
    }
    const std::string text = beast::buffers_to_string(buffer_.data());
    buffer_.consume(buffer_.size());
    if (!ws_.got_text()) {
      send_control(error_frame("malformed", "binary frames are not accepted"));
    } else {
      server_->on_message(*this, text);
    }
    read();
  }

  void pump() {
    if (writing_ || !open_) return;
    std::shared_ptr<const std::string> next;
    bool state = false;
    if (!control_.empty()) {
      next = control_.front();
      control_.pop_front();
    } else if (pending_state_) {
      next = std::move(pending_state_);
      pending_state_.reset();
      state = true;
    } else {
      return;
    }
    writing_ = true;
    ws_.text(true);
    ws_.async_write(asio::buffer(*next),
                    [self = shared_from_this(), next, state](beast::error_code ec,
                                                             std::size_t) {
                      self->writing_ = false;
                      if (ec) {
                        self->open_ = false;
                        return;
                      }
                      if (state) {
                        std::lock_guard<std::mutex> lock(self->server_->stats_mu);
                        ++self->server_->st.frames_sent;
                      }
                      self->pump();
                    });
  }

  websocket::stream<beast::tcp_stream> ws_;
  beast::flat_buffer buffer_;
  Impl* server_;
  std::uint64_t id_;
  bool pilot_{false};
  bool open_{false};
  bool writing_{false};
  std::optional<std::uint64_t> last_seq_;
  std::deque<std::shared_ptr<const std::string>> control_;
  std::shared_ptr<const std::string> pending_state_;
};

void TeleopServer::Impl::accept() {
  acceptor->async_accept(asio::make_strand(ioc), [this](beast::error_code ec,
                                                        tcp::socket socket) {
    if (ec) {
      if (running) spdlog::warn("accept failed: {}", ec.message());
    } else {
      const std::uint64_t id = next_session++;
      auto s = std::make_shared<Session>(std::move(socket), this, id);
      sessions[id] = s;
      {
        std::lock_guard<std::mutex> lock(stats_mu);
        st.clients = sessions.size();
      }
      s->run();
    }
    if (running && acceptor->is_open()) accept();
  });
}

void TeleopServer::Impl::on_close(std::uint64_t id) {
  sessions.erase(id);
  if (pilot == id) {
    pilot = 0;
    spdlog::info("pilot session {} left; pilot slot free", id);
  }
  std::lock_guard<std::mutex> lock(stats_mu);
  st.clients = sessions.size();
  st.has_pilot = pilot != 0;
}

void TeleopServer::Impl::on_message(Session& s, const std::string& text) {
  json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) j = json::parse(nonfinite_tokens_to_null(text), nullptr, false);
  if (j.is_discarded()) {
    s.send_control(error_frame("malformed", "message is not valid JSON"));
    return;
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    s.send_control(error_frame("malformed", "message must be an object with a 'type'"));
    return;
  }
  const std::string type = j["type"].get<std::string>();
  if (j.contains("proto") && j["proto"] != kProtocolVersion) {
    s.send_control(error_frame("unsupported_proto", "server speaks proto 1"));
    return;
  }
  if (type == "hello") {
    const std::string want = j.value("role", std::string("pilot"));
    if (want != "pilot" && want != "observer") {
      s.send_control(error_frame("malformed", "role must be 'pilot' or 'observer'"));
      return;
    }
    if (s.is_pilot() && want == "observer") {
      s.set_pilot(false);
      pilot = 0;
    } else if (want == "pilot" && !s.is_pilot() && pilot == 0) {
      s.set_pilot(true);
      pilot = s.id();
    }
    {
      std::lock_guard<std::mutex> lock(stats_mu);
      st.has_pilot = pilot != 0;
    }
    json w = {{"type", "welcome"},
              {"proto", kProtocolVersion},
              {"session", s.id()},
              {"role", s.is_pilot() ? "pilot" : "observer"},
              {"sim_rate", cfg.sim_rate},
              {"stream_rate", cfg.stream_rate},
              {"dt", cfg.scenario.dt}};
    s.send_control(w.dump());
    return;
  }
  if (type == "ping") {
    const double recv = wall_seconds();
    json p = {{"type", "pong"}, {"proto", kProtocolVersion}, {"t_server_recv", recv}};
    if (j.contains("t_client")) p["t_client"] = j["t_client"];
    if (j.contains("id")) p["id"] = j["id"];
    {
      std::lock_guard<std::mutex> lock(stats_mu);
      p["t_sim"] = st.t_sim;
    }
    p["t_server_send"] = wall_seconds();
    s.send_control(p.dump());
    return;
  }
  if (type == "command") {
    if (!s.is_pilot()) {
      std::lock_guard<std::mutex> lock(stats_mu);
      ++st.commands_rejected;
      s.send_control(error_frame("not_pilot", "observers cannot send commands"));
      return;
    }
    ParsedCommand pc;
    try {
      pc = parse_command(j, last_input);
    } catch (const ParameterError& e) {
      {
        std::lock_guard<std::mutex> lock(stats_mu);
        ++st.commands_rejected;
      }
      std::optional<std::uint64_t> seq;
      if (j.contains("seq") && j["seq"].is_number_unsigned()) seq = j["seq"].get<std::uint64_t>();
      s.send_control(error_frame("invalid_command", e.what(), seq));
      return;
    }
    if (s.last_seq() && pc.seq <= *s.last_seq()) {
      std::lock_guard<std::mutex> lock(stats_mu);
      ++st.commands_stale;
      spdlog::debug("session {}: stale seq {} dropped", s.id(), pc.seq);
      return;
    }
    s.last_seq() = pc.seq;
    last_input = pc.command.input;
    commands.push(Inbound{s.id(), pc.command});
    return;
  }
  s.send_control(error_frame("malformed", "unknown message type '" + type + "'"));
}

void TeleopServer::Impl::broadcast(std::shared_ptr<const std::string> msg) {
  for (auto it = sessions.begin(); it != sessions.end();) {
    if (auto s = it->second.lock()) {
      s->send_state(msg);
      ++it;
    } else {
      it = sessions.erase(it);
    }
  }
}

void TeleopServer::Impl::step_loop() {
  std::ofstream record_file;
  std::unique_ptr<RecordWriter> recorder;
  if (cfg.record_path) {
    record_file.open(*cfg.record_path, std::ios::binary | std::ios::trunc);
    recorder = std::make_unique<RecordWriter>(record_file, cfg.scenario, cfg.initial);
  }
  telesim::Session world(cfg.scenario, cfg.initial);
  const auto period = std::chrono::duration_cast<Clock::duration>(
      std::chrono::duration<double>(1.0 / cfg.sim_rate));
  const auto decimation = static_cast<std::uint64_t>(
      std::max(1.0, std::round(cfg.sim_rate / cfg.stream_rate)));
  auto next = Clock::now();
  auto window_start = next;
  std::uint64_t window_steps = 0;
  double achieved = 0;
  std::uint64_t seq = 0;
  bool diverged = false;

  while (running) {
    for (Inbound& in : commands.drain()) {
      if (recorder) recorder->command(world.steps(), in.command);
      world.apply(in.command);
      std::lock_guard<std::mutex> lock(stats_mu);
      ++st.commands_applied;
    }
    if (!diverged) {
      try {
        const TelemetryFrame f = world.advance();
        if (recorder) recorder->frame(f);
        ++window_steps;
        const auto now = Clock::now();
        const double span = std::chrono::duration<double>(now - window_start).count();
        if (span >= 1.0) {
          achieved = static_cast<double>(window_steps) / span;
          window_steps = 0;
          window_start = now;
        }
        {
          std::lock_guard<std::mutex> lock(stats_mu);
          st.steps = f.step;
          st.t_sim = f.t;
          st.achieved_rate = achieved;
        }
        if (f.step % decimation == 0) {
          json msg = {{"type", "state"},
                      {"proto", kProtocolVersion},
                      {"seq", ++seq},
                      {"t_sim", f.t},
                      {"achieved_rate", achieved},
                      {"frame", frame_to_json(f)}};
          auto text = std::make_shared<const std::string>(msg.dump());
          asio::post(ioc, [this, text] { broadcast(text); });
        }
      } catch (const SimulationDiverged& e) {
        diverged = true;
        spdlog::error("{}", e.what());
        {
          std::lock_guard<std::mutex> lock(stats_mu);
          st.diverged = true;
        }
        auto text = std::make_shared<const std::string>(error_frame("diverged", e.what()));
        asio::post(ioc, [this, text] {
          for (auto& [id, w] : sessions) {
            if (auto s = w.lock()) s->send_control(*text);
          }
        });
      }
    }
    next += period;
    const auto now = Clock::now();
    if (now > next + 20 * period) next = now;  // fell far behind: resynchronize
    std::this_thread::sleep_until(next);
  }
  if (recorder) recorder->finish(world.steps());
}

TeleopServer::TeleopServer(ServiceConfig cfg) : impl_(std::make_unique<Impl>(std::move(cfg))) {
  impl_->cfg.scenario.validate();
  if (!(impl_->cfg.sim_rate > 0) || !(impl_->cfg.stream_rate > 0) ||
      impl_->cfg.stream_rate > impl_->cfg.sim_rate) {
    throw ConfigError("service rates must satisfy 0 < stream_rate <= sim_rate");
  }
  impl_->last_input = impl_->cfg.initial;
}

TeleopServer::~TeleopServer() { stop(); }

void TeleopServer::start() {
  Impl& m = *impl_;
  if (m.started) return;
  beast::error_code ec;
  const auto address = asio::ip::make_address(m.cfg.host, ec);
  if (ec) throw ConfigError("bad bind host '" + m.cfg.host + "': " + ec.message());
  const tcp::endpoint ep(address, m.cfg.port);
  m.acceptor.emplace(m.ioc);
  m.acceptor->open(ep.protocol(), ec);
  if (!ec) m.acceptor->set_option(asio::socket_base::reuse_address(true), ec);
  if (!ec) m.acceptor->bind(ep, ec);
  if (!ec) m.acceptor->listen(asio::socket_base::max_listen_connections, ec);
  if (ec) {
    throw Error("cannot bind " + m.cfg.host + ":" + std::to_string(m.cfg.port) + ": " +
                ec.message());
  }
  if (m.cfg.record_path) {
    std::ofstream probe(*m.cfg.record_path, std::ios::binary | std::ios::app);
    if (!probe) throw ConfigError("cannot open record file '" + *m.cfg.record_path + "'");
  }
  m.running = true;
  m.started = true;
  m.accept();
  m.io_thread = std::thread([&m] { m.ioc.run(); });
  m.step_thread = std::thread([&m] { m.step_loop(); });
  spdlog::info("serving on {}:{} (sim {} Hz, stream {} Hz)", m.cfg.host, port(),
               m.cfg.sim_rate, m.cfg.stream_rate);
}

void TeleopServer::stop() {
  Impl& m = *impl_;
  if (!m.started.exchange(false)) return;
  m.running = false;
  if (m.step_thread.joinable()) m.step_thread.join();
  asio::post(m.ioc, [&m] {
    beast::error_code ec;
    m.acceptor->close(ec);
    for (auto& [id, w] : m.sessions) {
      if (auto s = w.lock()) s->close();
    }
  });
  // Give the closes a moment to run, then stop the loop.
  asio::post(m.ioc, [&m] { m.ioc.stop(); });
  if (m.io_thread.joinable()) m.io_thread.join();
  {
    std::lock_guard<std::mutex> lock(m.wait_mu);
    m.stopped = true;
  }
  m.wait_cv.notify_all();
}

void TeleopServer::wait() {
  std::unique_lock<std::mutex> lock(impl_->wait_mu);
  impl_->wait_cv.wait(lock, [&] { return impl_->stopped; });
}

std::uint16_t TeleopServer::port() const {
  if (!impl_->acceptor || !impl_->acceptor->is_open()) return impl_->cfg.port;
  beast::error_code ec;
  const auto ep = impl_->acceptor->local_endpoint(ec);
  return ec ? impl_->cfg.port : ep.port();
}

ServiceStats TeleopServer::stats() const {
  std::lock_guard<std::mutex> lock(impl_->stats_mu);
  return impl_->st;
}

}  // namespace telesim
