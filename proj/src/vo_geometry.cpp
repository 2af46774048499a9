/*
 * vo_geometry.cpp
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

#include "qorca/vo_geometry.hpp"

namespace qorca {

namespace {

// Below this lateral magnitude (relative to |rel_vel|) the relative velocity
// is treated as lying on the VO axis.
constexpr double kAxisTolerance = 1e-12;

}  // namespace

SphereSpace sphere_space(const AgentShape& self, const AgentShape& other) {
  const double rxy = self.r_xy + other.r_xy;
  const double rz = self.r_z + other.r_z;
  return {Mat3::diag(1.0 / rxy, 1.0 / rxy, 1.0 / rz), Mat3::diag(rxy, rxy, rz)};
}

ScaledPosition scale_to_sphere_space(const Vec3& rel_pos, const AgentShape& self,
                                     const AgentShape& other) {
  const SphereSpace s = sphere_space(self, other);
  return {s.to_scaled(rel_pos), s.scale};
}

Vec3 lateral_convention(const Vec3& rel_pos) {
  const Vec3 side = cross(rel_pos, Vec3{0.0, 0.0, 1.0});
  if (norm_sq(side) > 1e-24 * norm_sq(rel_pos)) return normalize(side);
  return normalize(cross(rel_pos, Vec3{1.0, 0.0, 0.0}));
}

AvoidanceResult compute_avoidance(const VelocityObstacle& vo, const Vec3& rel_vel) {
  AvoidanceResult out;
  const Vec3& p = vo.rel_pos;
  const double r = vo.combined_radius;
  const double dist_sq = norm_sq(p);
  if (dist_sq <= r * r) {
    out.colliding = true;
    return out;
  }

  const double dist = std::sqrt(dist_sq);
  const Vec3 axis = p / dist;
  const double sin_a = r / dist;
  const double cos_a = std::sqrt(dist_sq - r * r) / dist;

  // Meridian-plane decomposition of rel_vel: along the axis and laterally.
  const double along = dot(rel_vel, axis);
  const Vec3 lateral = rel_vel - along * axis;
  const double lateral_len = norm(lateral);
  const Vec3 side = lateral_len > kAxisTolerance * norm(rel_vel) && lateral_len > 0.0
                        ? lateral / lateral_len
                        : lateral_convention(p);

  const Vec3 generator = cos_a * axis + sin_a * side;
  const Vec3 w = rel_vel - p / vo.tau;

  if (dot(w, generator) > 0.0) {
    // Nearest boundary point is on the cone's lateral surface.
    const Vec3 leg_normal = -sin_a * axis + cos_a * side;
    const double signed_dist = dot(rel_vel, leg_normal);
    out.outward_normal = leg_normal;
    out.boundary_step = -signed_dist * leg_normal;
    out.in_obstacle = signed_dist < 0.0;
    out.cutoff_region = false;
  } else {
    // Nearest boundary point is on the cutoff sphere (center p/tau).
    const double w_len = norm(w);
    const Vec3 w_dir = w_len > 0.0 ? w / w_len : -axis;
    const double cutoff_radius = r / vo.tau;
    out.outward_normal = w_dir;
    out.boundary_step = (cutoff_radius - w_len) * w_dir;
    out.in_obstacle = w_len < cutoff_radius;
    out.cutoff_region = true;
  }

  if (out.in_obstacle) {
    out.u = out.boundary_step;
    out.plane_normal = out.outward_normal;
  }
  return out;
}

AvoidanceResult emergency_avoidance(const VelocityObstacle& vo, const Vec3& rel_vel) {
  AvoidanceResult out;
  out.colliding = true;
  const double dist = norm(vo.rel_pos);
  const Vec3 axis = dist > 0.0 ? vo.rel_pos / dist : Vec3{1.0, 0.0, 0.0};
  // Allowed relative velocities satisfy rel_vel . axis <= -(r - dist)/tau.
  const double limit = -(vo.combined_radius - dist) / vo.tau;
  const double closing = dot(rel_vel, axis);
  out.outward_normal = -axis;
  out.boundary_step = (closing - limit) * out.outward_normal;
  out.in_obstacle = closing > limit;
  if (out.in_obstacle) {
    out.u = out.boundary_step;
    out.plane_normal = out.outward_normal;
  }
  return out;
}

}  // namespace qorca
