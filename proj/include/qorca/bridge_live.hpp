/*
 * bridge_live.hpp
 * qorca
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "qorca/bridge_protocol.hpp"

namespace qorca::bridge {

struct LiveOptions {
  /// Sim seconds per wall second; 0 runs unpaced.
  double realtime_factor = 1.0;
  double broadcast_hz = 30.0;
  double disconnect_decay = 0.5;  ///< [s] of sim time
};

/// Per-connection outgoing queue. Acks and errors are never dropped; state
/// frames keep only the newest unsent one.
class Outbox {
 public:
  void push_control(std::string message);
  void offer_state(std::string frame);
  std::optional<std::string> pop();
  std::size_t dropped_states() const;

  /// Invoked (from the pushing thread) whenever something is queued.
  void set_notify(std::function<void()> notify);

 private:
  void signal();

  mutable std::mutex mutex_;
  std::deque<std::string> control_;
  std::optional<std::string> state_;
  std::size_t dropped_ = 0;
  std::function<void()> notify_;
};

struct TickTiming {
  std::size_t samples = 0;
  double nominal = 0.0;     ///< [s] wall period per tick
  double mean = 0.0;        ///< [s]
  double stddev = 0.0;      ///< [s]
  double max_abs_dev = 0.0; ///< [s] largest |period - nominal|
};

struct HealthStatus {
  std::string status;  ///< "running", "stopped" or "aborted"
  long tick = 0;
  double sim_time = 0.0;
  std::size_t clients = 0;
  std::optional<std::string> abort_reason;
};

/// A live simulation that operators steer. The tick loop is the only
/// writer of world state; connections hand it text messages and receive
/// frames through their Outbox.
class LiveSession {
 public:
  using ConnectionId = std::uint64_t;

  LiveSession(Scenario scenario, LiveOptions options = {});
  ~LiveSession();
  LiveSession(const LiveSession&) = delete;
  LiveSession& operator=(const LiveSession&) = delete;

  const Scenario& scenario() const { return scenario_; }
  const LiveOptions& options() const { return options_; }

  ConnectionId connect(std::shared_ptr<Outbox> outbox);
  void disconnect(ConnectionId id);
  /// Parse errors are answered immediately; commands queue for the next tick.
  void receive(ConnectionId id, std::string_view text);

  /// Runs one tick on the calling thread: applies queued commands and
  /// disconnects, steps the world, broadcasts on frame ticks.
  void tick();

  /// Starts or stops the paced tick loop on its own thread.
  void start();
  void stop();
  bool running() const { return running_; }

  HealthStatus health() const;
  TickTiming timing() const;
  /// Ticks completed so far.
  long ticks() const;

 private:
  struct Pending {
    ConnectionId conn;
    std::optional<CommandFrame> command;  // empty: disconnect
  };
  struct Control {
    Vec3 preferred;
    std::optional<ConnectionId> owner;
    std::optional<std::int64_t> last_seq;
    std::optional<double> decay_start;  // sim time
    Vec3 decay_from;
  };

  void apply(const Pending& p);
  void send_control(ConnectionId id, const Message& m);
  void loop();

  Scenario scenario_;
  LiveOptions options_;
  Simulation sim_;
  long broadcast_every_ = 1;

  mutable std::mutex conn_mutex_;
  std::map<ConnectionId, std::shared_ptr<Outbox>> connections_;
  ConnectionId next_id_ = 1;

  std::mutex inbox_mutex_;
  std::vector<Pending> inbox_;

  std::map<int, Control> controls_;  // tick thread only

  mutable std::mutex status_mutex_;
  HealthStatus status_;
  std::size_t period_count_ = 0;
  double period_sum_ = 0.0;
  double period_sum_sq_ = 0.0;
  double period_max_dev_ = 0.0;

  std::atomic<bool> running_{false};
  std::atomic<bool> stop_requested_{false};
  std::thread thread_;
};

}  // namespace qorca::bridge
