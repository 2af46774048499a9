/*
 * dynamics.cpp
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

#include "qorca/dynamics.hpp"

namespace qorca {

Mat3 heading_from_direction(double cos_yaw, double sin_yaw) {
  const Vec3 right{sin_yaw, -cos_yaw, 0.0};
  const Vec3 down{0.0, 0.0, -1.0};
  const Vec3 forward{cos_yaw, sin_yaw, 0.0};
  return Mat3::from_columns(right, down, forward);
}

Mat3 heading_from_yaw(double yaw_rad) { return heading_from_direction(std::cos(yaw_rad), std::sin(yaw_rad)); }

AgentState step(const AgentState& state, double dt) {
  AgentState next = state;
  if (state.cooperative) {
    switch (state.dynamics.mode) {
      case DynamicsMode::Instantaneous:
        next.vel = state.commanded_vel;
        break;
      case DynamicsMode::FirstOrder: {
        // Forward Euler on dv/dt = k (v* - v), the same map the filter predicts with.
        next.vel = state.vel + (state.commanded_vel - state.vel) * (state.dynamics.gain * dt);
        break;
      }
    }
  }
  next.pos = state.pos + next.vel * dt;

  // Direction from components (not atan2) keeps mirrored agents bit-exact.
  const double horizontal = std::hypot(next.vel.x, next.vel.y);
  if (horizontal >= kHeadingMinSpeed)
    next.heading = heading_from_direction(next.vel.x / horizontal, next.vel.y / horizontal);
  return next;
}

}  // namespace qorca
