/*
 * bridge_live.cpp
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

#include "qorca/bridge_live.hpp"

#include <algorithm>
#include <cmath>

namespace qorca::bridge {

void Outbox::push_control(std::string message) {
  {
    std::lock_guard lock(mutex_);
    control_.push_back(std::move(message));
  }
  signal();
}

void Outbox::offer_state(std::string frame) {
  {
    std::lock_guard lock(mutex_);
    if (state_) ++dropped_;
    state_ = std::move(frame);
  }
  signal();
}

std::optional<std::string> Outbox::pop() {
  std::lock_guard lock(mutex_);
  if (!control_.empty()) {
    std::string m = std::move(control_.front());
    control_.pop_front();
    return m;
  }
  if (state_) {
    std::optional<std::string> m = std::move(state_);
    state_.reset();
    return m;
  }
  return std::nullopt;
}

std::size_t Outbox::dropped_states() const {
  std::lock_guard lock(mutex_);
  return dropped_;
}

void Outbox::set_notify(std::function<void()> notify) {
  std::lock_guard lock(mutex_);
  notify_ = std::move(notify);
}

void Outbox::signal() {
  std::function<void()> n;
  {
    std::lock_guard lock(mutex_);
    n = notify_;
  }
  if (n) n();
}

LiveSession::LiveSession(Scenario scenario, LiveOptions options)
    : scenario_(std::move(scenario)), options_(options), sim_(scenario_) {
  if (options_.broadcast_hz > 0.0)
    broadcast_every_ = std::max(1L, std::lround(1.0 / (options_.broadcast_hz * scenario_.tick_dt)));
  for (const AgentSpec& a : scenario_.agents)
    if (a.policy.kind == PolicyKind::External) controls_[a.id] = Control{};
  status_.status = "stopped";
}

LiveSession::~LiveSession() { stop(); }

LiveSession::ConnectionId LiveSession::connect(std::shared_ptr<Outbox> outbox) {
  std::lock_guard lock(conn_mutex_);
  const ConnectionId id = next_id_++;
  connections_[id] = std::move(outbox);
  return id;
}

void LiveSession::disconnect(ConnectionId id) {
  {
    std::lock_guard lock(conn_mutex_);
    connections_.erase(id);
  }
  std::lock_guard lock(inbox_mutex_);
  inbox_.push_back({id, std::nullopt});
}

void LiveSession::send_control(ConnectionId id, const Message& m) {
  std::shared_ptr<Outbox> box;
  {
    std::lock_guard lock(conn_mutex_);
    auto it = connections_.find(id);
    if (it == connections_.end()) return;
    box = it->second;
  }
  box->push_control(serialize(m));
}

void LiveSession::receive(ConnectionId id, std::string_view text) {
  try {
    Message m = parse_message(text);
    if (auto* cmd = std::get_if<CommandFrame>(&m)) {
      std::lock_guard lock(inbox_mutex_);
      inbox_.push_back({id, *cmd});
      return;
    }
    send_control(id, ErrorFrame{ErrorCode::UnknownType, "clients may only send command messages", {}, {}});
  } catch (const ProtocolError& e) {
    send_control(id, ErrorFrame{e.code(), e.what(), {}, {}});
  }
}

void LiveSession::apply(const Pending& p) {
  if (!p.command) {
    for (auto& [agent, c] : controls_)
      if (c.owner == p.conn) {
        c.owner.reset();
        c.last_seq.reset();
        c.decay_start = sim_.time();
        c.decay_from = c.preferred;
      }
    return;
  }
  const CommandFrame& cmd = *p.command;
  auto reject = [&](ErrorCode code, const std::string& msg) {
    send_control(p.conn, ErrorFrame{code, msg, cmd.agent_id, cmd.client_seq});
  };
  if (!scenario_.agent(cmd.agent_id)) return reject(ErrorCode::UnknownAgent, "no such agent");
  auto it = controls_.find(cmd.agent_id);
  if (it == controls_.end()) return reject(ErrorCode::NotExternal, "agent is not externally steered");
  Control& c = it->second;
  if (c.owner && *c.owner != p.conn) return reject(ErrorCode::AgentClaimed, "agent is steered by another client");
  if (c.last_seq && cmd.client_seq < *c.last_seq)
    return reject(ErrorCode::StaleSeq, "client_seq is older than the last applied command; ignored");

  Vec3 v = cmd.preferred_vel;
  const double limit = scenario_.solver.max_speed;
  const double speed = norm(v);
  const bool clamped = speed > limit;
  if (clamped) v = v * (limit / speed);
  c.preferred = v;
  c.owner = p.conn;
  c.last_seq = cmd.client_seq;
  c.decay_start.reset();
  send_control(p.conn, AckFrame{cmd.agent_id, cmd.client_seq, sim_.tick(), v, clamped});
}

void LiveSession::tick() {
  if (sim_.aborted()) return;
  std::vector<Pending> pending;
  {
    std::lock_guard lock(inbox_mutex_);
    pending.swap(inbox_);
  }
  for (const Pending& p : pending) apply(p);

  for (auto& [agent, c] : controls_) {
    if (c.decay_start) {
      const double left = 1.0 - (sim_.time() - *c.decay_start) / options_.disconnect_decay;
      c.preferred = left > 0.0 ? c.decay_from * left : Vec3{};
      if (left <= 0.0) c.decay_start.reset();
    }
    sim_.set_external_preferred(agent, c.preferred);
  }

  const TickRecord rec = sim_.step();
  if (!sim_.aborted() && rec.tick % broadcast_every_ == 0) {
    const std::string frame = serialize(make_state_frame(rec));
    std::vector<std::shared_ptr<Outbox>> boxes;
    {
      std::lock_guard lock(conn_mutex_);
      for (const auto& [id, box] : connections_) boxes.push_back(box);
    }
    for (const auto& box : boxes) box->offer_state(frame);
  }

  std::size_t clients;
  {
    std::lock_guard lock(conn_mutex_);
    clients = connections_.size();
  }
  std::lock_guard lock(status_mutex_);
  status_.tick = sim_.tick();
  status_.sim_time = sim_.time();
  status_.clients = clients;
  if (sim_.aborted()) {
    status_.status = "aborted";
    status_.abort_reason = sim_.abort()->reason;
  }
}

void LiveSession::loop() {
  using clock = std::chrono::steady_clock;
  const bool paced = options_.realtime_factor > 0.0;
  const auto period = std::chrono::duration_cast<clock::duration>(
      std::chrono::duration<double>(paced ? scenario_.tick_dt / options_.realtime_factor : 0.0));
  auto next = clock::now();
  std::optional<clock::time_point> last;
  while (!stop_requested_) {
    const auto now = clock::now();
    if (last) {
      const double p = std::chrono::duration<double>(now - *last).count();
      const double nominal = paced ? scenario_.tick_dt / options_.realtime_factor : 0.0;
      std::lock_guard lock(status_mutex_);
      ++period_count_;
      period_sum_ += p;
      period_sum_sq_ += p * p;
      period_max_dev_ = std::max(period_max_dev_, std::abs(p - nominal));
    }
    last = now;
    tick();
    if (sim_.aborted()) break;
    if (paced) {
      next += period;
      if (clock::now() > next + 10 * period) next = clock::now();
      std::this_thread::sleep_until(next);
    }
  }
}

void LiveSession::start() {
  if (running_) return;
  stop_requested_ = false;
  {
    std::lock_guard lock(status_mutex_);
    if (status_.status != "aborted") status_.status = "running";
  }
  running_ = true;
  thread_ = std::thread([this] { loop(); });
}

void LiveSession::stop() {
  if (!running_) return;
  stop_requested_ = true;
  if (thread_.joinable()) thread_.join();
  running_ = false;
  std::lock_guard lock(status_mutex_);
  if (status_.status == "running") status_.status = "stopped";
}

HealthStatus LiveSession::health() const {
  std::lock_guard lock(status_mutex_);
  HealthStatus h = status_;
  std::lock_guard clock(conn_mutex_);
  h.clients = connections_.size();
  return h;
}

TickTiming LiveSession::timing() const {
  std::lock_guard lock(status_mutex_);
  TickTiming t;
  t.nominal = options_.realtime_factor > 0.0 ? scenario_.tick_dt / options_.realtime_factor : 0.0;
  t.samples = period_count_;
  if (period_count_ == 0) return t;
  const double n = static_cast<double>(period_count_);
  t.mean = period_sum_ / n;
  t.stddev = std::sqrt(std::max(0.0, period_sum_sq_ / n - t.mean * t.mean));
  t.max_abs_dev = period_max_dev_;
  return t;
}

long LiveSession::ticks() const {
  std::lock_guard lock(status_mutex_);
  return status_.tick;
}

}  // namespace qorca::bridge
