/*
 * sensing.hpp
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

#include <array>
#include <optional>

#include "qorca/dynamics.hpp"
#include "qorca/linalg.hpp"

namespace qorca {

/// Pinhole camera. Pixel coordinates are in normalized image units.
struct CameraModel {
  double focal_length = 1.0;
  double hfov = 92.0 * 3.14159265358979323846 / 180.0;  ///< [rad]
  double vfov = 51.0 * 3.14159265358979323846 / 180.0;  ///< [rad]
  double max_range = 8.0;                               ///< [m]
  double rate = 30.0;                                   ///< [Hz]

  bool valid() const;
};

/// Tag-based range grows noisier with distance: sigma_d(d) =
/// sigma_dist_0 * (1 + (d / dist_ref)^2). The range is also scaled by
/// (1 + dist_bias * d / dist_ref), an underestimate for negative dist_bias.
struct NoiseModel {
  double sigma_pixel = 0.002;
  double sigma_dist_0 = 0.05;  ///< [m]
  double dist_ref = 2.0;       ///< [m]
  double dist_bias = -0.02;
  double sigma_selfvel = 0.05;  ///< [m/s]

  bool valid() const;
  double sigma_dist(double distance) const;
  double bias(double distance) const { return dist_bias * distance / dist_ref; }

  static NoiseModel noiseless() { return {0.0, 0.0, 2.0, 0.0, 0.0}; }
};

using Pixel = std::array<double, 2>;

struct Projection {
  Pixel pixel{};
  bool visible = false;
};

/// q = R^T rel_pos in camera coordinates; b = (q_x, q_y) f / q_z.
Projection project(const CameraModel& cam, const Mat3& heading, const Vec3& rel_pos);

/// Inverse of project() given the range.
Vec3 back_project(const CameraModel& cam, const Mat3& heading, const Pixel& pixel, double distance);

struct Sighting {
  int target_id = -1;
  Pixel pixel{};
  double distance = 0.0;
};

/// One camera frame's worth of data for one observer. target is absent for
/// a self-velocity-only update; self_vel is absent when another measurement
/// from the same frame already carried it.
struct Measurement {
  int observer_id = -1;
  std::optional<Sighting> target;
  std::optional<Vec3> self_vel;
  long tick = 0;
};

/// Noisy sighting of `target` by `observer`, or nullopt when out of view.
std::optional<Sighting> sight(const CameraModel& cam, const NoiseModel& noise, Rng& rng,
                              const AgentState& observer, const AgentState& target);

/// Noisy self-velocity from the on-board estimator.
Vec3 measure_self_velocity(const NoiseModel& noise, Rng& rng, const AgentState& observer);

/// Sighting plus self-velocity, or nullopt when target is out of view.
std::optional<Measurement> measure(const CameraModel& cam, const NoiseModel& noise, Rng& rng,
                                   const AgentState& observer, const AgentState& target, long tick = 0);

}  // namespace qorca
