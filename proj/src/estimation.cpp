/*
 * estimation.cpp
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

#include "qorca/estimation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>

namespace qorca {

namespace {

using Eigen::MatrixXd;
using Eigen::VectorXd;

Vec3 get3(const VectorXd& x, int offset) { return {x(offset), x(offset + 1), x(offset + 2)}; }

void put3(VectorXd& x, int offset, const Vec3& v) {
  x(offset) = v.x;
  x(offset + 1) = v.y;
  x(offset + 2) = v.z;
}

void put_block(MatrixXd& m, int row, int col, const Mat3& b) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m(row + i, col + j) = b(i, j);
}

double floored(double sigma) { return std::max(sigma, kMinMeasSigma); }

// Rows of d(pixel)/d(rel_pos).
void pixel_jacobian(const Mat3& heading, const Vec3& rel_pos, double f, Vec3& row_x, Vec3& row_y) {
  const Mat3 rt = heading.transposed();
  const Vec3 q = rt * rel_pos;
  const double inv_z = 1.0 / q.z;
  const Vec3 dq_x{f * inv_z, 0.0, -f * q.x * inv_z * inv_z};
  const Vec3 dq_y{0.0, f * inv_z, -f * q.y * inv_z * inv_z};
  // d/dp = d/dq * R^T, so each row is R * (d/dq row).
  row_x = heading * dq_x;
  row_y = heading * dq_y;
}

}  // namespace

int Belief::index_of(int id) const {
  auto it = std::lower_bound(tracks.begin(), tracks.end(), id, [](const Track& t, int v) { return t.id < v; });
  return it != tracks.end() && it->id == id ? static_cast<int>(it - tracks.begin()) : -1;
}

const Track* Belief::find(int id) const {
  const int k = index_of(id);
  return k < 0 ? nullptr : &tracks[static_cast<std::size_t>(k)];
}

VectorXd Belief::state() const {
  VectorXd x(dim());
  put3(x, 0, own_vel);
  for (int k = 0; k < static_cast<int>(tracks.size()); ++k) {
    put3(x, pos_offset(k), tracks[static_cast<std::size_t>(k)].rel_pos);
    put3(x, vel_offset(k), tracks[static_cast<std::size_t>(k)].vel);
  }
  return x;
}

void Belief::set_state(const VectorXd& x) {
  own_vel = get3(x, 0);
  for (int k = 0; k < static_cast<int>(tracks.size()); ++k) {
    tracks[static_cast<std::size_t>(k)].rel_pos = get3(x, pos_offset(k));
    tracks[static_cast<std::size_t>(k)].vel = get3(x, vel_offset(k));
  }
}

Mat3 Belief::block(int row, int col) const {
  Mat3 b;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) b(i, j) = cov(row + i, col + j);
  return b;
}

bool Belief::finite() const {
  if (!is_finite(own_vel) || !cov.allFinite()) return false;
  return std::all_of(tracks.begin(), tracks.end(),
                     [](const Track& t) { return is_finite(t.rel_pos) && is_finite(t.vel); });
}

bool FilterConfig::valid() const {
  bool psd = true;
  try {
    psd_factor(process_noise);
  } catch (const NotPsdError&) {
    psd = false;
  }
  return psd && gain > 0.0 && own_vel_noise >= 0.0 && meas_noise.valid() && focal_length > 0.0 &&
         init_own_vel_var > 0.0 && init_vel_var > 0.0 && init_pos_inflation > 0.0 && coast_ticks >= 0 &&
         drop_ticks > coast_ticks;
}

void condition_covariance(MatrixXd& cov) {
  cov = 0.5 * (cov + cov.transpose());
  Eigen::SelfAdjointEigenSolver<MatrixXd> eig(cov);
  if (eig.eigenvalues().minCoeff() >= 0.0) return;
  const VectorXd clamped = eig.eigenvalues().cwiseMax(0.0);
  cov = eig.eigenvectors() * clamped.asDiagonal() * eig.eigenvectors().transpose();
  cov = 0.5 * (cov + cov.transpose());
}

Belief initial_belief(const FilterConfig& cfg, const Vec3& own_vel) {
  Belief b;
  b.own_vel = own_vel;
  b.cov = MatrixXd::Identity(3, 3) * cfg.init_own_vel_var;
  return b;
}

Belief predict(const Belief& belief, const FilterConfig& cfg, const Vec3& commanded, double dt) {
  Belief out = belief;
  const int n = belief.dim();
  const double kdt = cfg.gain * dt;

  out.own_vel = belief.own_vel + (commanded - belief.own_vel) * kdt;
  for (std::size_t k = 0; k < belief.tracks.size(); ++k)
    out.tracks[k].rel_pos = belief.tracks[k].rel_pos + (belief.tracks[k].vel - out.own_vel) * dt;

  MatrixXd f = MatrixXd::Identity(n, n);
  f.topLeftCorner(3, 3) *= (1.0 - kdt);
  MatrixXd q = MatrixXd::Zero(n, n);
  const double own_q = cfg.own_vel_noise * dt;
  q.topLeftCorner(3, 3) = MatrixXd::Identity(3, 3) * own_q;
  for (int k = 0; k < static_cast<int>(belief.tracks.size()); ++k) {
    const int p = Belief::pos_offset(k);
    const int v = Belief::vel_offset(k);
    f.block(p, 0, 3, 3) = -dt * (1.0 - kdt) * MatrixXd::Identity(3, 3);
    f.block(p, v, 3, 3) = dt * MatrixXd::Identity(3, 3);
    put_block(q, v, v, dt * cfg.process_noise);
    // The own-velocity disturbance also moves every relative position.
    q.block(p, 0, 3, 3) = MatrixXd::Identity(3, 3) * (-dt * own_q);
    q.block(0, p, 3, 3) = MatrixXd::Identity(3, 3) * (-dt * own_q);
    for (int l = 0; l < static_cast<int>(belief.tracks.size()); ++l)
      q.block(p, Belief::pos_offset(l), 3, 3) = MatrixXd::Identity(3, 3) * (dt * dt * own_q);
  }
  out.cov = f * belief.cov * f.transpose() + q;
  out.cov = 0.5 * (out.cov + out.cov.transpose());
  return out;
}

VectorXd evaluate_measurement(const Belief& layout, const VectorXd& x, const FilterConfig& cfg,
                              const Measurement& meas, const Mat3& heading, bool pixel_rows) {
  std::vector<double> rows;
  if (meas.target) {
    const int k = layout.index_of(meas.target->target_id);
    if (k >= 0) {
      const Vec3 p = get3(x, Belief::pos_offset(k));
      if (pixel_rows) {
        const Vec3 q = heading.transposed() * p;
        rows.push_back(q.x * cfg.focal_length / q.z);
        rows.push_back(q.y * cfg.focal_length / q.z);
      }
      rows.push_back(norm(p));
    }
  }
  if (meas.self_vel) {
    rows.push_back(x(0));
    rows.push_back(x(1));
    rows.push_back(x(2));
  }
  return Eigen::Map<VectorXd>(rows.data(), static_cast<Eigen::Index>(rows.size()));
}

MeasurementModel measurement_model(const Belief& belief, const FilterConfig& cfg, const Measurement& meas,
                                   const Mat3& heading) {
  MeasurementModel mm;
  const int n = belief.dim();
  const NoiseModel& noise = cfg.meas_noise;

  struct Row {
    double z, h, var;
    Eigen::RowVectorXd jac;
  };
  std::vector<Row> rows;
  auto blank = [n]() { return Eigen::RowVectorXd::Zero(n); };

  if (meas.target) {
    const int k = belief.index_of(meas.target->target_id);
    if (k >= 0) {
      const Vec3 p = belief.tracks[static_cast<std::size_t>(k)].rel_pos;
      const int po = Belief::pos_offset(k);
      const Vec3 q = heading.transposed() * p;
      mm.pixel_rows = q.z > kMinDepth;
      if (mm.pixel_rows) {
        Vec3 jx, jy;
        pixel_jacobian(heading, p, cfg.focal_length, jx, jy);
        const double var = floored(noise.sigma_pixel) * floored(noise.sigma_pixel);
        Row rx{meas.target->pixel[0], q.x * cfg.focal_length / q.z, var, blank()};
        Row ry{meas.target->pixel[1], q.y * cfg.focal_length / q.z, var, blank()};
        for (int i = 0; i < 3; ++i) {
          rx.jac(po + i) = jx[i];
          ry.jac(po + i) = jy[i];
        }
        rows.push_back(std::move(rx));
        rows.push_back(std::move(ry));
      }
      const double d = norm(p);
      const double sd = floored(noise.sigma_dist(d));
      Row rd{meas.target->distance, d, sd * sd, blank()};
      const Vec3 dir = d > 0.0 ? p / d : Vec3{};
      for (int i = 0; i < 3; ++i) rd.jac(po + i) = dir[i];
      rows.push_back(std::move(rd));
    }
  }
  if (meas.self_vel) {
    const double var = floored(noise.sigma_selfvel) * floored(noise.sigma_selfvel);
    for (int i = 0; i < 3; ++i) {
      Row r{(*meas.self_vel)[i], belief.own_vel[i], var, blank()};
      r.jac(i) = 1.0;
      rows.push_back(std::move(r));
    }
  }

  const auto m = static_cast<Eigen::Index>(rows.size());
  mm.z.resize(m);
  mm.h.resize(m);
  mm.variance.resize(m);
  mm.jacobian.resize(m, n);
  for (Eigen::Index i = 0; i < m; ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    mm.z(i) = r.z;
    mm.h(i) = r.h;
    mm.variance(i) = r.var;
    mm.jacobian.row(i) = r.jac;
  }
  return mm;
}

Belief update(const Belief& belief, const FilterConfig& cfg, const Measurement& meas, const Mat3& heading) {
  const MeasurementModel mm = measurement_model(belief, cfg, meas, heading);
  if (mm.z.size() == 0) return belief;

  const MatrixXd& h = mm.jacobian;
  const MatrixXd r = mm.variance.asDiagonal();
  const MatrixXd ph_t = belief.cov * h.transpose();
  const MatrixXd s = h * ph_t + r;
  const MatrixXd gain = s.ldlt().solve(ph_t.transpose()).transpose();

  Belief out = belief;
  out.set_state(belief.state() + gain * (mm.z - mm.h));

  // Joseph form.
  const MatrixXd a = MatrixXd::Identity(belief.dim(), belief.dim()) - gain * h;
  out.cov = a * belief.cov * a.transpose() + gain * r * gain.transpose();
  condition_covariance(out.cov);

  if (meas.target) {
    const int k = out.index_of(meas.target->target_id);
    if (k >= 0) out.tracks[static_cast<std::size_t>(k)].last_seen_tick = meas.tick;
  }
  return out;
}

Belief spawn_track(const Belief& belief, const FilterConfig& cfg, const Sighting& sighting, const Mat3& heading,
                   long tick) {
  if (belief.index_of(sighting.target_id) >= 0) return belief;

  CameraModel cam;
  cam.focal_length = cfg.focal_length;
  Track t;
  t.id = sighting.target_id;
  t.rel_pos = back_project(cam, heading, sighting.pixel, sighting.distance);
  t.last_seen_tick = tick;

  const double d = sighting.distance;
  const double range_sd = floored(cfg.meas_noise.sigma_dist(d));
  const double lateral_sd = d * floored(cfg.meas_noise.sigma_pixel) / cfg.focal_length;
  const double pos_var = cfg.init_pos_inflation * std::max(range_sd * range_sd, lateral_sd * lateral_sd);

  Belief out;
  out.own_vel = belief.own_vel;
  out.tracks = belief.tracks;
  auto it = std::lower_bound(out.tracks.begin(), out.tracks.end(), t.id,
                             [](const Track& a, int v) { return a.id < v; });
  const int k = static_cast<int>(it - out.tracks.begin());
  out.tracks.insert(it, t);

  // Old covariance with a 6x6 block spliced in at the new track's slot.
  const int n_old = belief.dim();
  const int at = Belief::pos_offset(k);
  out.cov = MatrixXd::Zero(n_old + Belief::kTrackDim, n_old + Belief::kTrackDim);
  auto map_index = [at](int i) { return i < at ? i : i + Belief::kTrackDim; };
  for (int i = 0; i < n_old; ++i)
    for (int j = 0; j < n_old; ++j) out.cov(map_index(i), map_index(j)) = belief.cov(i, j);
  for (int i = 0; i < 3; ++i) {
    out.cov(at + i, at + i) = pos_var;
    out.cov(at + 3 + i, at + 3 + i) = cfg.init_vel_var;
  }
  return out;
}

Belief drop_track(const Belief& belief, int id) {
  const int k = belief.index_of(id);
  if (k < 0) return belief;
  Belief out;
  out.own_vel = belief.own_vel;
  out.tracks = belief.tracks;
  out.tracks.erase(out.tracks.begin() + k);

  const int at = Belief::pos_offset(k);
  const int n = out.dim();
  out.cov.resize(n, n);
  auto map_index = [at](int i) { return i < at ? i : i + Belief::kTrackDim; };
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) out.cov(i, j) = belief.cov(map_index(i), map_index(j));
  return out;
}

Belief manage_tracks(const Belief& belief, const FilterConfig& cfg, std::span<const Sighting> visible,
                     const Mat3& heading, long tick) {
  Belief out = belief;
  std::vector<int> stale;
  for (const auto& t : out.tracks)
    if (tick - t.last_seen_tick > cfg.drop_ticks) stale.push_back(t.id);
  for (int id : stale) out = drop_track(out, id);
  for (const auto& s : visible) out = spawn_track(out, cfg, s, heading, tick);
  return out;
}

bool track_usable(const Track& track, const Vec3& own_vel, const FilterConfig& cfg, long tick) {
  const long unseen = tick - track.last_seen_tick;
  if (unseen <= cfg.coast_ticks) return true;
  return unseen <= cfg.drop_ticks && dot(track.rel_pos, track.vel - own_vel) < 0.0;
}

}  // namespace qorca
