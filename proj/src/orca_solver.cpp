/*
 * orca_solver.cpp
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

#include "qorca/orca_solver.hpp"

#include <algorithm>
#include <limits>

namespace qorca {

namespace {

constexpr double kEpsilon = 1e-12;

struct Line {
  Vec3 point;
  Vec3 direction;
};

// The incremental LP below follows the RVO2-3D structure: each level solves
// the problem restricted to the boundary of the plane that invalidated the
// current optimum, one dimension lower.

// 1-D: optimum on `line`, subject to planes [0, plane_no) and the speed ball.
bool linear_program1(std::span<const OrcaPlane> planes, std::size_t plane_no, const Line& line,
                     double radius, const Vec3& opt, bool direction_opt, Vec3& result) {
  const double dot_product = dot(line.point, line.direction);
  const double discriminant = dot_product * dot_product + radius * radius - norm_sq(line.point);
  if (discriminant < 0.0) return false;  // speed ball misses the line

  const double sqrt_disc = std::sqrt(discriminant);
  double t_left = -dot_product - sqrt_disc;
  double t_right = -dot_product + sqrt_disc;

  for (std::size_t i = 0; i < plane_no; ++i) {
    const double numerator = dot(planes[i].point - line.point, planes[i].normal);
    const double denominator = dot(line.direction, planes[i].normal);
    if (denominator * denominator <= kEpsilon) {
      if (numerator > 0.0) return false;  // parallel and excluded
      continue;
    }
    const double t = numerator / denominator;
    if (denominator >= 0.0) {
      t_left = std::max(t_left, t);
    } else {
      t_right = std::min(t_right, t);
    }
    if (t_left > t_right) return false;
  }

  if (direction_opt) {
    result = dot(opt, line.direction) > 0.0 ? line.point + t_right * line.direction
                                            : line.point + t_left * line.direction;
  } else {
    const double t = dot(line.direction, opt - line.point);
    result = line.point + std::clamp(t, t_left, t_right) * line.direction;
  }
  return true;
}

// 2-D: optimum on plane `plane_no`, subject to planes [0, plane_no).
bool linear_program2(std::span<const OrcaPlane> planes, std::size_t plane_no, double radius,
                     const Vec3& opt, bool direction_opt, Vec3& result) {
  const OrcaPlane& plane = planes[plane_no];
  const double plane_dist = dot(plane.point, plane.normal);
  const double plane_dist_sq = plane_dist * plane_dist;
  const double radius_sq = radius * radius;
  if (plane_dist_sq > radius_sq) return false;  // speed ball misses the plane

  const double plane_radius_sq = radius_sq - plane_dist_sq;
  const Vec3 plane_center = plane_dist * plane.normal;

  if (direction_opt) {
    const Vec3 plane_opt = opt - dot(opt, plane.normal) * plane.normal;
    const double plane_opt_len_sq = norm_sq(plane_opt);
    result = plane_opt_len_sq <= kEpsilon
                 ? plane_center
                 : plane_center + std::sqrt(plane_radius_sq / plane_opt_len_sq) * plane_opt;
  } else {
    result = opt + dot(plane.point - opt, plane.normal) * plane.normal;
    if (norm_sq(result) > radius_sq) {
      const Vec3 plane_result = result - plane_center;
      const double plane_result_len_sq = norm_sq(plane_result);
      result = plane_center + std::sqrt(plane_radius_sq / plane_result_len_sq) * plane_result;
    }
  }

  for (std::size_t i = 0; i < plane_no; ++i) {
    if (dot(planes[i].normal, planes[i].point - result) <= 0.0) continue;

    const Vec3 cross_product = cross(planes[i].normal, plane.normal);
    if (norm_sq(cross_product) <= kEpsilon) return false;  // parallel, i excludes plane_no

    Line line;
    line.direction = normalize(cross_product);
    const Vec3 line_normal = cross(line.direction, plane.normal);
    line.point = plane.point + (dot(planes[i].point - plane.point, planes[i].normal) /
                                dot(line_normal, planes[i].normal)) *
                                   line_normal;
    if (!linear_program1(planes, i, line, radius, opt, direction_opt, result)) return false;
  }
  return true;
}

// 3-D: returns planes.size() on success, else the index of the first plane
// that made the problem infeasible (result then holds the last optimum).
std::size_t linear_program3(std::span<const OrcaPlane> planes, double radius, const Vec3& opt,
                            bool direction_opt, Vec3& result) {
  if (direction_opt) {
    result = opt * radius;
  } else if (norm_sq(opt) > radius * radius) {
    result = normalize(opt) * radius;
  } else {
    result = opt;
  }

  for (std::size_t i = 0; i < planes.size(); ++i) {
    if (dot(planes[i].normal, planes[i].point - result) > 0.0) {
      const Vec3 previous = result;
      if (!linear_program2(planes, i, radius, opt, direction_opt, result)) {
        result = previous;
        return i;
      }
    }
  }
  return planes.size();
}

// Minimizes the largest violation over planes [begin, n) given that planes
// [0, begin) were satisfiable.
void linear_program4(std::span<const OrcaPlane> planes, std::size_t begin, double radius, Vec3& result) {
  double distance = 0.0;
  std::vector<OrcaPlane> projected;
  for (std::size_t i = begin; i < planes.size(); ++i) {
    if (dot(planes[i].normal, planes[i].point - result) <= distance) continue;

    projected.clear();
    for (std::size_t j = 0; j < i; ++j) {
      OrcaPlane plane;
      const Vec3 cross_product = cross(planes[j].normal, planes[i].normal);
      if (norm_sq(cross_product) <= kEpsilon) {
        if (dot(planes[i].normal, planes[j].normal) > 0.0) continue;  // same direction
        plane.point = 0.5 * (planes[i].point + planes[j].point);
      } else {
        const Vec3 line_normal = cross(cross_product, planes[i].normal);
        plane.point = planes[i].point + (dot(planes[j].point - planes[i].point, planes[j].normal) /
                                         dot(line_normal, planes[j].normal)) *
                                            line_normal;
      }
      plane.normal = normalize(planes[j].normal - planes[i].normal);
      projected.push_back(plane);
    }

    const Vec3 previous = result;
    if (linear_program3(projected, radius, planes[i].normal, true, result) < projected.size()) {
      // Only reachable through round-off: result is feasible by construction.
      result = previous;
    }
    distance = dot(planes[i].normal, planes[i].point - result);
  }
}

}  // namespace

AvoidanceResult apply_tie_break(const AvoidanceResult& avoidance, const Vec3& rel_pos, const Vec3& rel_vel,
                                double bias) {
  if (!avoidance.in_obstacle || bias <= 0.0) return avoidance;
  const Vec3 axis = normalize(rel_pos);
  const double limit = std::sin(kTieBreakAngle);
  if (norm(cross(normalize(avoidance.u), axis)) >= limit) return avoidance;
  // A radial u with a sideways rel_vel is a grazing pass, not a head-on.
  if (norm(cross(rel_vel, axis)) >= limit * norm(rel_vel)) return avoidance;

  AvoidanceResult out = avoidance;
  out.u = avoidance.u + bias * lateral_convention(rel_pos);
  out.plane_normal = normalize(out.u);
  out.boundary_step = out.u;
  out.outward_normal = out.plane_normal;
  return out;
}

OrcaPlane build_plane(const Vec3& self_vel, const AvoidanceResult& avoidance, const SolverConfig& cfg,
                      int neighbor_id) {
  return {self_vel + cfg.share * avoidance.boundary_step, avoidance.outward_normal, neighbor_id};
}

OrcaPlane plane_to_world(const OrcaPlane& scaled, const SphereSpace& space) {
  return {space.to_world(scaled.point), normalize(space.scale * scaled.normal), scaled.neighbor_id};
}

double max_violation(const Vec3& v, std::span<const OrcaPlane> planes) {
  double worst = -std::numeric_limits<double>::infinity();
  for (const auto& plane : planes) worst = std::max(worst, dot(plane.point - v, plane.normal));
  return worst;
}

SolveResult solve_detailed(const Vec3& preferred, std::span<const OrcaPlane> planes, const SolverConfig& cfg) {
  std::vector<OrcaPlane> order(planes.begin(), planes.end());
  // Seeded Fisher-Yates: expected linear time independent of input order.
  Rng rng(cfg.shuffle_seed);
  for (std::size_t i = order.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng.next_u64() % i);
    std::swap(order[i - 1], order[j]);
  }

  SolveResult out;
  const std::size_t fail = linear_program3(order, cfg.max_speed, preferred, false, out.velocity);
  if (fail < order.size()) {
    out.feasible = false;
    linear_program4(order, fail, cfg.max_speed, out.velocity);
  }
  return out;
}

}  // namespace qorca
