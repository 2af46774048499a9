/*
 * sim_engine.hpp
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

#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "qorca/scenario.hpp"

namespace qorca {

struct PlaneRecord {
  int neighbor = -1;
  bool in_obstacle = false;
  bool emergency = false;
  Vec3 u;  ///< world-space avoidance vector, zero when outside
  Vec3 point;
  Vec3 normal;
};

struct TrackRecord {
  int id = -1;
  Vec3 rel_pos;
  Vec3 vel;
  double pos_sd = 0.0;  ///< sqrt of the mean rel_pos variance
  bool usable = false;
  long last_seen = 0;
};

struct AgentRecord {
  int id = 0;
  Vec3 pos;
  Vec3 vel;
  Vec3 preferred;
  Vec3 commanded;
  Vec3 own_vel_est;
  std::vector<TrackRecord> tracks;
  std::vector<PlaneRecord> planes;

  const PlaneRecord* plane_for(int neighbor) const;
  const TrackRecord* track_for(int neighbor) const;
};

struct TickRecord {
  long tick = 0;
  double time = 0.0;
  std::vector<AgentRecord> agents;  // agent-id order
  /// Smallest scaled-space clearance over pairs, using true states and
  /// physical shapes; below 1 the ellipsoids overlap. Infinite for one agent.
  double min_clearance = 0.0;

  const AgentRecord* agent(int id) const;
};

struct AbortRecord {
  long tick = 0;
  std::string reason;
};

struct RunLog {
  Scenario scenario;
  std::vector<TickRecord> ticks;
  std::optional<AbortRecord> abort;
};

/// Scaled clearance between two agents: |S (p_j - p_i)| with S built from
/// both shapes. Below 1 means overlap.
double scaled_clearance(const Vec3& pos_i, const AgentShape& shape_i, const Vec3& pos_j, const AgentShape& shape_j);

/// Overlap check on a record's true-state clearance (open at 1).
bool detect_collision(const TickRecord& record);

/// Live world. Agents are stepped in id order; everything they act on comes
/// from their own belief.
class Simulation {
 public:
  explicit Simulation(Scenario scenario);

  const Scenario& scenario() const { return scenario_; }
  long tick() const { return tick_; }
  double time() const { return static_cast<double>(tick_) * scenario_.tick_dt; }
  bool aborted() const { return abort_.has_value(); }
  const std::optional<AbortRecord>& abort() const { return abort_; }
  bool finished() const { return aborted() || tick_ >= scenario_.tick_count(); }

  /// Preferred velocity for an External agent, read on the next tick.
  /// Returns false if the agent does not exist or is not External.
  bool set_external_preferred(int agent_id, const Vec3& preferred);
  bool is_external(int agent_id) const;

  /// Advances one tick and returns its record (state at the start of the
  /// tick plus the decisions taken in it). No-op once aborted.
  TickRecord step();

  const std::vector<AgentState>& agents() const { return states_; }
  const std::vector<Belief>& beliefs() const { return beliefs_; }

 private:
  Vec3 preferred_for(std::size_t i);
  void sense_and_filter(std::size_t i, bool frame);
  std::vector<PlaneRecord> avoid(std::size_t i, const Vec3& preferred, Vec3& commanded);
  bool check_finite(const std::vector<Vec3>& commanded);

  Scenario scenario_;
  std::vector<AgentState> states_;
  std::vector<Belief> beliefs_;
  std::vector<FilterConfig> filters_;
  std::vector<Rng> sensor_rngs_;
  std::vector<std::size_t> waypoint_index_;
  std::map<int, Vec3> external_;
  std::vector<Vec3> head_on_targets_;
  long tick_ = 0;
  std::optional<AbortRecord> abort_;
};

RunLog run(const Scenario& scenario);

/// Frozen geometry harness: one agent against a constant-velocity opponent
/// whose relative position never changes. The agent's preferred velocity
/// is its initial velocity and it builds its plane from true states with
/// no tie-break bias.
struct FrozenVoConfig {
  Vec3 rel_pos{4.0, 0.0, 0.0};
  double combined_radius = 1.0;
  double tau = 2.0;
  Vec3 self_vel{1.75, 0.0, 0.0};
  Vec3 other_vel;
  double share = 0.5;
  double max_speed = 100.0;
  Dynamics dynamics = Dynamics::instantaneous();
  double dt = 1.0 / 60.0;
  int steps = 30;
};

/// Agent 0 is the avoiding agent, agent 1 the opponent. Plane records carry
/// u in the VO's own (unscaled) space.
RunLog run_frozen_vo(const FrozenVoConfig& cfg);

// JSONL serialization.

/// A run log that does not parse.
class RunLogError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

void write_runlog(std::ostream& out, const RunLog& log);
std::string runlog_to_string(const RunLog& log);
nlohmann::json tick_to_json(const TickRecord& t);
nlohmann::json header_json(const Scenario& s);
RunLog read_runlog(std::istream& in);
RunLog load_runlog(const std::string& path);

}  // namespace qorca
