/*
 * sensing.cpp
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

#include "qorca/sensing.hpp"

#include <numbers>

namespace qorca {

namespace {

// Smallest range the tag detector can report.
constexpr double kMinRange = 1e-3;

}  // namespace

bool CameraModel::valid() const {
  return focal_length > 0.0 && hfov > 0.0 && hfov < std::numbers::pi && vfov > 0.0 &&
         vfov < std::numbers::pi && max_range > 0.0 && rate > 0.0;
}

bool NoiseModel::valid() const {
  return sigma_pixel >= 0.0 && sigma_dist_0 >= 0.0 && dist_ref > 0.0 && sigma_selfvel >= 0.0 &&
         std::isfinite(dist_bias);
}

double NoiseModel::sigma_dist(double distance) const {
  const double ratio = distance / dist_ref;
  return sigma_dist_0 * (1.0 + ratio * ratio);
}

Projection project(const CameraModel& cam, const Mat3& heading, const Vec3& rel_pos) {
  const Vec3 q = heading.transposed() * rel_pos;
  Projection out;
  if (q.z <= 0.0) return out;
  out.pixel = {q.x * cam.focal_length / q.z, q.y * cam.focal_length / q.z};
  out.visible = std::abs(std::atan2(q.x, q.z)) <= 0.5 * cam.hfov &&
                std::abs(std::atan2(q.y, q.z)) <= 0.5 * cam.vfov && norm(rel_pos) <= cam.max_range;
  return out;
}

Vec3 back_project(const CameraModel& cam, const Mat3& heading, const Pixel& pixel, double distance) {
  const Vec3 ray{pixel[0] / cam.focal_length, pixel[1] / cam.focal_length, 1.0};
  return heading * (normalize(ray) * distance);
}

std::optional<Sighting> sight(const CameraModel& cam, const NoiseModel& noise, Rng& rng,
                              const AgentState& observer, const AgentState& target) {
  const Vec3 rel_pos = target.pos - observer.pos;
  const Projection proj = project(cam, observer.heading, rel_pos);
  if (!proj.visible) return std::nullopt;

  const double truth = norm(rel_pos);
  Sighting s;
  s.target_id = target.id;
  s.pixel = {proj.pixel[0] + noise.sigma_pixel * rng.standard_normal(),
             proj.pixel[1] + noise.sigma_pixel * rng.standard_normal()};
  const double ranged = truth * (1.0 + noise.bias(truth)) + noise.sigma_dist(truth) * rng.standard_normal();
  s.distance = std::max(ranged, kMinRange);
  return s;
}

Vec3 measure_self_velocity(const NoiseModel& noise, Rng& rng, const AgentState& observer) {
  const double s = noise.sigma_selfvel;
  return sample_gaussian(rng, observer.vel, Mat3::diag(s * s, s * s, s * s));
}

std::optional<Measurement> measure(const CameraModel& cam, const NoiseModel& noise, Rng& rng,
                                   const AgentState& observer, const AgentState& target, long tick) {
  auto s = sight(cam, noise, rng, observer, target);
  if (!s) return std::nullopt;
  Measurement m;
  m.observer_id = observer.id;
  m.target = *s;
  m.self_vel = measure_self_velocity(noise, rng, observer);
  m.tick = tick;
  return m;
}

}  // namespace qorca
