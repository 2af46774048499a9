/*
 * orca_solver.hpp
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
#include <span>
#include <vector>

#include "qorca/linalg.hpp"
#include "qorca/vo_geometry.hpp"

namespace qorca {

/// Half-space of permitted velocities: (v - point) . normal >= 0.
struct OrcaPlane {
  Vec3 point;
  Vec3 normal;
  int neighbor_id = -1;
};

struct SolverConfig {
  double share = 0.5;             ///< fraction of u this agent applies, in (0, 1]
  double max_speed = 2.0;         ///< [m/s]
  double tie_break_bias = 0.001;  ///< lateral bias for head-on degeneracy [m/s]
  std::uint64_t shuffle_seed = 0;

  bool valid() const { return share > 0.0 && share <= 1.0 && max_speed > 0.0 && tie_break_bias >= 0.0; }
};

/// Angle below which u counts as parallel to rel_pos.
inline constexpr double kTieBreakAngle = 1e-3;

/// When an in-obstacle u and rel_vel both lie within kTieBreakAngle of the
/// line through rel_pos (a head-on), adds `bias` along
/// lateral_convention(rel_pos) and re-derives the normals. Otherwise
/// returns the input unchanged.
AvoidanceResult apply_tie_break(const AvoidanceResult& avoidance, const Vec3& rel_pos, const Vec3& rel_vel,
                                double bias);

/// point = self_vel + share * boundary_step, normal = outward normal. For an
/// in-obstacle result this is self_vel + share * u with normal u/|u|; for an
/// outside result the plane still admits self_vel.
OrcaPlane build_plane(const Vec3& self_vel, const AvoidanceResult& avoidance, const SolverConfig& cfg,
                      int neighbor_id = -1);

/// Maps a plane expressed in sphere space (velocities scaled by
/// space.scale) back to world velocities. Exact: membership is preserved.
OrcaPlane plane_to_world(const OrcaPlane& scaled, const SphereSpace& space);

struct SolveResult {
  Vec3 velocity;
  bool feasible = true;  ///< false when the min-max-violation fallback ran
};

SolveResult solve_detailed(const Vec3& preferred, std::span<const OrcaPlane> planes, const SolverConfig& cfg);

/// Velocity closest to `preferred` inside every plane and the max-speed
/// ball; falls back to minimizing the largest violation when infeasible.
inline Vec3 solve(const Vec3& preferred, std::span<const OrcaPlane> planes, const SolverConfig& cfg) {
  return solve_detailed(preferred, planes, cfg).velocity;
}

/// Largest (v - point) . -normal over the planes; <= 0 means feasible.
double max_violation(const Vec3& v, std::span<const OrcaPlane> planes);

}  // namespace qorca
