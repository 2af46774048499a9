/*
 * estimation.hpp
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

#include <Eigen/Core>
#include <span>
#include <vector>

#include "qorca/linalg.hpp"
#include "qorca/sensing.hpp"

namespace qorca {

/// Relative-state track of one neighbor.
struct Track {
  int id = -1;
  Vec3 rel_pos;  ///< neighbor minus self [m]
  Vec3 vel;      ///< neighbor's absolute velocity [m/s]
  long last_seen_tick = 0;
};

/// EKF state: [own_vel, (rel_pos_k, vel_k) for each track in id order].
struct Belief {
  Vec3 own_vel;
  std::vector<Track> tracks;  // sorted by id
  Eigen::MatrixXd cov;

  static constexpr int kOwnDim = 3;
  static constexpr int kTrackDim = 6;

  int dim() const { return kOwnDim + kTrackDim * static_cast<int>(tracks.size()); }
  /// Index into tracks, or -1.
  int index_of(int id) const;
  const Track* find(int id) const;
  static int pos_offset(int track_index) { return kOwnDim + kTrackDim * track_index; }
  static int vel_offset(int track_index) { return pos_offset(track_index) + 3; }

  Eigen::VectorXd state() const;
  void set_state(const Eigen::VectorXd& x);
  Mat3 block(int row, int col) const;
  bool finite() const;
};

struct FilterConfig {
  double gain = 2.0;                                  ///< k of dv/dt = k (v* - v) [1/s]
  Mat3 process_noise = Mat3::diag(1.0, 1.0, 1.0);     ///< M, neighbor velocity random walk [(m/s)^2/s]
  double own_vel_noise = 0.0;                         ///< disturbance on own velocity [(m/s)^2/s]
  NoiseModel meas_noise;
  double focal_length = 1.0;
  double init_own_vel_var = 1.0;                      ///< [(m/s)^2]
  double init_vel_var = 1.0;                          ///< [(m/s)^2]
  double init_pos_inflation = 4.0;
  long coast_ticks = 120;
  long drop_ticks = 480;

  bool valid() const;
};

/// Measurement standard deviations never drop below this.
inline constexpr double kMinMeasSigma = 1e-6;
/// (R^T p)_z below this skips the pixel rows.
inline constexpr double kMinDepth = 0.01;

Belief initial_belief(const FilterConfig& cfg, const Vec3& own_vel = {});

/// Semi-implicit Euler step of dv_i/dt = k (v* - v_i), dp/dt = v_j - v_i,
/// dv_j/dt = m_j: own velocity first, then positions with the new v_i.
Belief predict(const Belief& belief, const FilterConfig& cfg, const Vec3& commanded, double dt);

/// Pixel, range and self-velocity rows present in `meas`. The target must
/// already be tracked; only the self-velocity rows apply otherwise.
Belief update(const Belief& belief, const FilterConfig& cfg, const Measurement& meas, const Mat3& heading);

/// Stacked measurement function and its Jacobian for `meas`, evaluated at
/// the belief mean. Exposed for Jacobian checks.
struct MeasurementModel {
  Eigen::VectorXd z;
  Eigen::VectorXd h;
  Eigen::MatrixXd jacobian;
  Eigen::VectorXd variance;
  bool pixel_rows = false;
};
MeasurementModel measurement_model(const Belief& belief, const FilterConfig& cfg, const Measurement& meas,
                                   const Mat3& heading);
/// h(x) alone at an arbitrary state vector (same row layout as above).
Eigen::VectorXd evaluate_measurement(const Belief& layout, const Eigen::VectorXd& x, const FilterConfig& cfg,
                                     const Measurement& meas, const Mat3& heading, bool pixel_rows);

/// New track from a sighting's back-projection, velocity zero.
Belief spawn_track(const Belief& belief, const FilterConfig& cfg, const Sighting& sighting, const Mat3& heading,
                   long tick);
Belief drop_track(const Belief& belief, int id);

/// Spawns tracks for untracked sightings and drops tracks unseen for more
/// than drop_ticks.
Belief manage_tracks(const Belief& belief, const FilterConfig& cfg, std::span<const Sighting> visible,
                     const Mat3& heading, long tick);

/// Track still fit to act on: seen within coast_ticks, or within drop_ticks
/// while its predicted range is still shrinking.
bool track_usable(const Track& track, const Vec3& own_vel, const FilterConfig& cfg, long tick);

/// Symmetrizes and clamps negative eigenvalues to zero.
void condition_covariance(Eigen::MatrixXd& cov);

}  // namespace qorca
