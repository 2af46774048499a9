/*
 * scenario.hpp
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

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qorca/dynamics.hpp"
#include "qorca/estimation.hpp"
#include "qorca/orca_solver.hpp"
#include "qorca/sensing.hpp"

namespace qorca {

enum class PolicyKind { HeadOn, Stationary, ConstantVel, Waypoint, External };

/// Source of an agent's preferred velocity.
struct Policy {
  PolicyKind kind = PolicyKind::Stationary;
  double speed = 1.0;           // HeadOn, Waypoint [m/s]
  int toward = -1;              // HeadOn: agent whose start we fly at (-1: first other agent)
  Vec3 velocity;                // ConstantVel
  std::vector<Vec3> waypoints;  // Waypoint
  double waypoint_tolerance = 0.2;
};

struct AgentSpec {
  int id = 0;
  Vec3 position;
  Vec3 velocity;
  std::optional<double> yaw_deg;  ///< default: along the initial preferred velocity
  AgentShape shape;
  double inflation = 1.0;  ///< avoidance-only scale on shape
  Dynamics dynamics;
  bool cooperative = true;
  Policy policy;
};

/// Filter settings that are per-scenario; gain, focal length and noise are
/// filled in from the agent and camera.
struct FilterSettings {
  double process_noise = 1.0;
  double own_vel_noise = 0.0;
  double init_own_vel_var = 1.0;
  double init_vel_var = 1.0;
  double init_pos_inflation = 4.0;
  long coast_ticks = 120;
  long drop_ticks = 480;
};

struct Scenario {
  std::string name = "scenario";
  double duration = 10.0;
  double tick_dt = 1.0 / 60.0;
  double tau = 3.0;
  std::uint64_t seed = 0;
  CameraModel camera;
  NoiseModel noise;
  FilterSettings filter;
  SolverConfig solver;
  std::vector<AgentSpec> agents;

  long tick_count() const;
  /// Sim ticks per camera frame (>= 1).
  long camera_period() const;
  const AgentSpec* agent(int id) const;
  FilterConfig filter_config(const AgentSpec& agent) const;
};

/// Invalid scenario document. pointer is an RFC 6901 JSON pointer to the
/// offending key or value.
class ScenarioError : public std::runtime_error {
 public:
  ScenarioError(std::string pointer, const std::string& message)
      : std::runtime_error(pointer + ": " + message), pointer_(std::move(pointer)) {}
  const std::string& pointer() const { return pointer_; }

 private:
  std::string pointer_;
};

/// A file could not be opened or read.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

Scenario scenario_from_json(const nlohmann::json& doc);
Scenario parse_scenario(const std::string& text);
Scenario load_scenario(const std::string& path);
nlohmann::json scenario_to_json(const Scenario& s);
/// FNV-1a over the canonical JSON dump, as 16 hex digits.
std::string scenario_hash(const Scenario& s);
/// Throws ScenarioError on semantic violations (shapes, ids, rates, ...).
void validate(const Scenario& s);

// Generators.

struct HeadOnOptions {
  double separation = 6.0;
  double speed = 1.0;
  AgentShape shape{0.3, 0.5};
  double inflation = 1.0;
  Dynamics dynamics = Dynamics::instantaneous();
  double duration = 8.0;
  NoiseModel noise = NoiseModel::noiseless();
};

/// Two cooperative agents at (+-separation/2, 0, 0) flying at each other.
Scenario make_head_on(const HeadOnOptions& opt = {});

/// Two cooperative agents on a seeded collision course: crossing angle in
/// [135, 180] deg so each stays in the other's camera view; speeds, ranges
/// and small altitude offsets are drawn from the seed. Noiseless.
Scenario make_crossing(std::uint64_t seed);

/// One non-cooperative agent at constant velocity against one cooperative
/// agent with inflated radii, seeded geometry. Noiseless.
Scenario make_noncooperative(std::uint64_t seed, double inflation = 1.3);

/// A stationary agent facing away (never sees the other) and an operator
/// flying straight at it.
Scenario make_one_sided(double inflation = 1.3);

}  // namespace qorca
