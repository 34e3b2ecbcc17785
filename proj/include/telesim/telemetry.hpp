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

// Telemetry frames: one per step, a fixed CSV column order and the same
// fields as a JSON object on the wire.

#ifndef TELESIM_TELEMETRY_HPP_
#define TELESIM_TELEMETRY_HPP_

#include <condition_variable>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "telesim/sim.hpp"

namespace telesim {

struct TelemetryFrame {
  std::uint64_t step{0};
  double t{0};
  double human_theta{0};
  double human_theta_dot{0};
  double robot_x{0};
  double robot_x_dot{0};
  double robot_theta{0};
  double robot_theta_dot{0};
  double xi_h{0};
  double xi_r{0};
  double lean_ref{0};
  double cop{0};
  double com_disp{0};
  double f_r{0};
  double f_hmi{0};
  double f_s{0};
  double f_ext{0};
  double f_ext_hat{0};
  double f_ext_scaled{0};
  double wheel_effort{0};
  double box_x{0};
  double box_v{0};
  double box_a{0};
  double f_contact{0};
  double target_x{0};
  double hand_r_x{0};
  double hand_r_z{0};
  double hand_l_x{0};
  double hand_l_z{0};
  Eigen::Vector4d q_r{Eigen::Vector4d::Zero()};
  Eigen::Vector4d q_l{Eigen::Vector4d::Zero()};
  double residual{0};
  std::uint32_t flags{0};
  bool spring{true};
  bool haptics{true};
};

TelemetryFrame make_frame(const WorldState& w, const Toggles& toggles);

/// Comma-separated column names, no trailing newline.
const std::string& telemetry_csv_header();
/// One CSV row (no newline); doubles printed with %.17g so rows round-trip.
std::string telemetry_csv_row(const TelemetryFrame& f);
void write_telemetry_csv(std::ostream& os, const std::vector<TelemetryFrame>& frames);

nlohmann::json frame_to_json(const TelemetryFrame& f);
TelemetryFrame frame_from_json(const nlohmann::json& j);

/// Multi-producer/multi-consumer frame channel. With a capacity, pushing onto
/// a full channel drops the oldest frame (latest wins).
template <typename T>
class Channel {
 public:
  explicit Channel(std::size_t capacity = 0) : capacity_(capacity) {}

  /// Returns false if an old item had to be dropped.
  bool push(T v) {
    bool kept = true;
    {
      std::lock_guard<std::mutex> lock(mu_);
      if (closed_) return false;
      if (capacity_ > 0 && items_.size() >= capacity_) {
        items_.pop_front();
        ++dropped_;
        kept = false;
      }
      items_.push_back(std::move(v));
    }
    cv_.notify_one();
    return kept;
  }

  std::optional<T> try_pop() {
    std::lock_guard<std::mutex> lock(mu_);
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  /// Blocks until an item arrives or the channel is closed and drained.
  std::optional<T> pop() {
    std::unique_lock<std::mutex> lock(mu_);
    cv_.wait(lock, [&] { return closed_ || !items_.empty(); });
    if (items_.empty()) return std::nullopt;
    T v = std::move(items_.front());
    items_.pop_front();
    return v;
  }

  std::vector<T> drain() {
    std::lock_guard<std::mutex> lock(mu_);
    std::vector<T> out(std::make_move_iterator(items_.begin()),
                       std::make_move_iterator(items_.end()));
    items_.clear();
    return out;
  }

  void close() {
    {
      std::lock_guard<std::mutex> lock(mu_);
      closed_ = true;
    }
    cv_.notify_all();
  }

  std::size_t dropped() const {
    std::lock_guard<std::mutex> lock(mu_);
    return dropped_;
  }

 private:
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<T> items_;
  std::size_t capacity_;
  std::size_t dropped_{0};
  bool closed_{false};
};

}  // namespace telesim

#endif  // TELESIM_TELEMETRY_HPP_
