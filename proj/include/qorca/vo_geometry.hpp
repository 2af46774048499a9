/*
 * vo_geometry.hpp
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

namespace qorca {

/// Axis-aligned ellipsoid safety volume, elongated along z to keep agents out
/// of each other's downwash.
struct AgentShape {
  double r_xy = 0.3;  ///< horizontal semi-axis [m]
  double r_z = 0.5;   ///< vertical semi-axis [m]

  bool valid() const { return r_xy > 0.0 && r_z > 0.0; }
  AgentShape inflated(double factor) const { return {r_xy * factor, r_z * factor}; }
  friend bool operator==(const AgentShape&, const AgentShape&) = default;
};

/// Per-axis scale taking an ellipsoid pair to a unit-sphere obstacle.
struct SphereSpace {
  Mat3 scale;    ///< diag(1/(rxy_i+rxy_j), 1/(rxy_i+rxy_j), 1/(rz_i+rz_j))
  Mat3 inverse;  ///< diag(rxy_i+rxy_j, rxy_i+rxy_j, rz_i+rz_j)

  Vec3 to_scaled(const Vec3& world) const { return scale * world; }
  Vec3 to_world(const Vec3& scaled) const { return inverse * scaled; }
};

SphereSpace sphere_space(const AgentShape& self, const AgentShape& other);

/// Scaled relative position and the scale matrix itself.
struct ScaledPosition {
  Vec3 rel_pos;
  Mat3 scale;
};

ScaledPosition scale_to_sphere_space(const Vec3& rel_pos, const AgentShape& self,
                                     const AgentShape& other);

/// Truncated-cone velocity obstacle. rel_pos is other minus self; relative
/// velocities passed alongside are self minus other.
struct VelocityObstacle {
  Vec3 rel_pos;
  double combined_radius = 1.0;
  double tau = 3.0;
};

struct AvoidanceResult {
  bool in_obstacle = false;
  /// Relative positions already overlap; u/plane fields are not filled in.
  /// Use emergency_avoidance() instead.
  bool colliding = false;
  /// Minimal change taking rel_vel onto the VO boundary; zero when outside.
  Vec3 u;
  /// u / |u|, zero when outside.
  Vec3 plane_normal;
  /// Signed step to the nearest boundary point, defined inside and outside
  /// (equal to u when inside).
  Vec3 boundary_step;
  /// Outward unit normal at the nearest boundary point.
  Vec3 outward_normal;
  /// True when the nearest point lies on the cutoff sphere rather than the
  /// cone's lateral surface.
  bool cutoff_region = false;
};

/// Lateral direction used when a relative velocity lies exactly on the VO
/// axis: normalize(rel_pos x z), or normalize(rel_pos x x) when rel_pos is
/// vertical. Mirrored pairs get opposite directions.
Vec3 lateral_convention(const Vec3& rel_pos);

AvoidanceResult compute_avoidance(const VelocityObstacle& vo, const Vec3& rel_vel);

/// Direct-separation plane for overlapping agents: asks for a closing speed
/// along rel_pos of at most -(radius - distance)/tau, i.e. clear the overlap
/// within one time horizon.
AvoidanceResult emergency_avoidance(const VelocityObstacle& vo, const Vec3& rel_vel);

}  // namespace qorca
