/*
 * dynamics.hpp
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

#include "qorca/linalg.hpp"
#include "qorca/vo_geometry.hpp"

namespace qorca {

enum class DynamicsMode { Instantaneous, FirstOrder };

struct Dynamics {
  DynamicsMode mode = DynamicsMode::Instantaneous;
  double gain = 2.0;  ///< k [1/s], FirstOrder only

  static Dynamics instantaneous() { return {DynamicsMode::Instantaneous, 2.0}; }
  static Dynamics first_order(double k) { return {DynamicsMode::FirstOrder, k}; }
};

/// Below this horizontal speed the heading is held.
inline constexpr double kHeadingMinSpeed = 0.05;

/// Ground truth for one agent.
struct AgentState {
  int id = 0;
  Vec3 pos;
  Vec3 vel;
  /// Camera orientation: columns are the camera x (right), y (down) and z
  /// (optical axis) in world coordinates, so camera coords are R^T * world.
  Mat3 heading = Mat3::identity();
  AgentShape shape;
  Dynamics dynamics;
  bool cooperative = true;
  Vec3 commanded_vel;
};

/// Forward-facing, level camera whose optical axis points along the
/// horizontal direction (cos, sin).
Mat3 heading_from_direction(double cos_yaw, double sin_yaw);
Mat3 heading_from_yaw(double yaw_rad);

/// Advances one tick: velocity response (none for non-cooperative agents),
/// then pos += vel_new * dt, then yaw follows the horizontal velocity.
AgentState step(const AgentState& state, double dt);

}  // namespace qorca
