/*
 * acceptance_main.cpp
 * qorca acceptance
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

// One PASS/FAIL line per acceptance criterion. Exit status is nonzero when
// any primary criterion fails.

#include <CLI11.hpp>
#include <Eigen/Dense>
#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <functional>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "qorca/analysis.hpp"
#include "qorca/batch.hpp"
#include "qorca/bridge_server.hpp"
#include "qorca/estimation.hpp"
#include "qorca/orca_solver.hpp"
#include "ws_client.hpp"

using namespace qorca;

namespace {

const std::string kSource = QORCA_SOURCE_DIR;

struct Outcome {
  bool pass = false;
  std::string detail;
};

struct Criterion {
  int id;
  bool primary;
  std::string name;
  double limit_s;  // 0: none
  std::function<Outcome()> check;
};

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

Vec3 random_in_ball(Rng& rng, double radius) {
  while (true) {
    const Vec3 v{rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    if (norm_sq(v) <= 1.0) return v * radius;
  }
}

Vec3 random_unit(Rng& rng) {
  while (true) {
    const Vec3 v = random_in_ball(rng, 1.0);
    if (norm(v) > 0.1) return normalize(v);
  }
}

double min_clearance(const RunLog& log) {
  double m = std::numeric_limits<double>::infinity();
  for (const TickRecord& t : log.ticks) m = std::min(m, t.min_clearance);
  return m;
}

// ---------------------------------------------------------------------------

Outcome discrete_convergence() {
  const RunLog log = run_frozen_vo({});
  double worst = 0.0;
  int ratios = 0;
  for (std::size_t k = 1; k < log.ticks.size(); ++k) {
    const double a = norm(log.ticks[k - 1].agents[0].planes[0].u);
    const double b = norm(log.ticks[k].agents[0].planes[0].u);
    worst = std::max(worst, std::abs(b / a - 0.5));
    ++ratios;
  }
  return {log.ticks.size() == 30 && ratios == 29 && worst <= 1e-9,
          std::to_string(log.ticks.size()) + " steps, max |ratio - 0.5| = " + fmt("%.2e", worst)};
}

Outcome continuous_convergence() {
  FrozenVoConfig cfg;
  cfg.dynamics = Dynamics::first_order(2.0);
  cfg.steps = 180;
  const RunLog log = run_frozen_vo(cfg);
  const auto fit = fit_convergence(log, 0, 1);
  if (!fit || fit->degenerate) return {false, "no usable in-obstacle block to fit"};
  return {std::abs(fit->rate - 1.0) <= 0.05,
          "fitted rate " + fmt("%.4f", fit->rate) + " 1/s over " + std::to_string(fit->samples) + " ticks"};
}

Outcome symmetry() {
  Rng rng(301);
  SolverConfig cfg;
  cfg.max_speed = 1e3;
  cfg.tie_break_bias = 0.0;
  int pairs = 0, sum_fail = 0, exit_fail = 0;
  double worst_sum = 0.0, worst_target = 0.0;
  while (pairs < 1000) {
    const double r = rng.uniform(0.3, 1.5), tau = rng.uniform(0.5, 4.0);
    const Vec3 p = random_in_ball(rng, 6.0);
    if (norm(p) <= r * 1.01) continue;
    const Vec3 vi = random_in_ball(rng, 2.0), vj = random_in_ball(rng, 2.0);
    const VelocityObstacle vo_i{p, r, tau}, vo_j{p * -1.0, r, tau};
    const AvoidanceResult ai = compute_avoidance(vo_i, vi - vj);
    const AvoidanceResult aj = compute_avoidance(vo_j, vj - vi);
    if (!ai.in_obstacle) continue;
    ++pairs;
    const double s = norm(ai.u + aj.u);
    worst_sum = std::max(worst_sum, s);
    if (!aj.in_obstacle || s > 1e-9) ++sum_fail;

    // Each agent solves its own one-plane LP from its current velocity.
    const OrcaPlane pi = build_plane(vi, ai, cfg, 1), pj = build_plane(vj, aj, cfg, 0);
    const Vec3 ni = solve(vi, std::span(&pi, 1), cfg), nj = solve(vj, std::span(&pj, 1), cfg);
    const Vec3 rel = ni - nj;
    worst_target = std::max(worst_target, norm(rel - (vi - vj + ai.u)));
    // On the boundary: just outside must be free, just inside must not.
    const Vec3 step = rel - (vi - vj);
    if (oracle::in_vo(p, r, tau, rel + step * 1e-9) || !oracle::in_vo(p, r, tau, rel - step * 1e-3)) ++exit_fail;
  }
  return {sum_fail == 0 && exit_fail == 0 && worst_target <= 1e-9,
          std::to_string(pairs) + " pairs, max |u_i+u_j| = " + fmt("%.1e", worst_sum) +
              ", max |new rel - (rel+u)| = " + fmt("%.1e", worst_target) + ", oracle exit failures " +
              std::to_string(exit_fail)};
}

Outcome zero_noise_safety() {
  std::vector<Scenario> runs;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    Scenario h = make_head_on();
    h.seed = seed;
    runs.push_back(h);
    runs.push_back(make_crossing(seed));
  }
  double worst = std::numeric_limits<double>::infinity();
  int failures = 0;
  for (const Scenario& s : runs) {
    const RunLog log = run(s);
    const double c = min_clearance(log);
    worst = std::min(worst, c);
    if (log.abort || c < 1.0 - 1e-6) ++failures;
  }
  return {failures == 0, std::to_string(runs.size()) + " runs (100 head-on, 100 crossing), worst clearance " +
                             fmt("%.9f", worst) + ", failures " + std::to_string(failures)};
}

Outcome noncooperative() {
  double worst = std::numeric_limits<double>::infinity();
  int collisions = 0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const RunLog log = run(make_noncooperative(seed, 1.3));
    const double c = min_clearance(log);
    worst = std::min(worst, c);
    if (log.abort || c < 1.0 - 1e-6) ++collisions;
  }
  return {collisions == 0,
          "100 seeds, worst clearance " + fmt("%.6f", worst) + ", collisions " + std::to_string(collisions)};
}

Outcome dance_onset() {
  const std::vector<double> levels{0.0, 0.05, 0.1, 0.2, 0.4};
  HeadOnOptions opt;
  opt.inflation = 1.3;
  opt.noise = NoiseModel::noiseless();
  std::vector<std::uint64_t> seeds(100);
  for (std::size_t i = 0; i < seeds.size(); ++i) seeds[i] = i;
  const auto scenarios = expand_batch(make_head_on(opt), seeds, levels);
  const auto results = run_batch(scenarios, 1);
  std::vector<RunSummary> summaries;
  for (const BatchResult& r : results) {
    if (!r.summary) return {false, "run " + std::to_string(r.index) + " failed: " + r.error};
    summaries.push_back(*r.summary);
  }
  const auto rows = sweep_summary(summaries);
  bool zero_at_0 = rows.front().dance_runs == 0;
  bool some_at_max = rows.back().dance_runs > 0;
  bool monotone = true, no_collisions = true;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].collision_runs != 0) no_collisions = false;
    for (std::size_t j = i + 1; j < rows.size(); ++j)
      if (rows[j].dance_ci.upper < rows[i].dance_ci.lower) monotone = false;
  }
  std::string detail = "dance runs per 100:";
  for (const SweepRow& r : rows) detail += " " + fmt("%g", r.noise) + "->" + std::to_string(r.dance_runs);
  detail += "; collisions:";
  for (const SweepRow& r : rows) detail += " " + std::to_string(r.collision_runs);
  detail += std::string("; zero at 0: ") + (zero_at_0 ? "yes" : "NO") + ", >0 at 0.4: " + (some_at_max ? "yes" : "NO") +
            ", nondecreasing within CI: " + (monotone ? "yes" : "NO");
  return {zero_at_0 && some_at_max && monotone && no_collisions, detail};
}

Outcome lp_oracle() {
  Rng rng(701);
  SolverConfig cfg;
  cfg.max_speed = 2.0;
  const double h = 0.04;
  int bad_obj = 0, worse = 0, bad_kkt = 0, bad_slack = 0;
  double worst_gap = 0.0, worst_kkt = 0.0, worst_slack = 0.0;
  for (int inst = 0; inst < 1000; ++inst) {
    cfg.shuffle_seed = static_cast<std::uint64_t>(inst);
    const Vec3 c = random_in_ball(rng, 1.0);
    std::vector<OrcaPlane> planes;
    const int n = 1 + static_cast<int>(rng.uniform() * 5.0);
    for (int k = 0; k < n; ++k) {
      const Vec3 nrm = random_unit(rng);
      planes.push_back({c - nrm * rng.uniform(0.1, 1.5), nrm});
    }
    const Vec3 pref = random_in_ball(rng, 3.0);
    const SolveResult got = solve_detailed(pref, planes, cfg);
    const oracle::GridResult grid = oracle::grid_lp(pref, planes, cfg.max_speed, h);
    if (!grid.found) return {false, "grid oracle found no feasible point in instance " + std::to_string(inst)};
    const double mine = norm(got.velocity - pref), theirs = std::sqrt(grid.objective);
    worst_gap = std::max(worst_gap, theirs - mine);
    if (std::abs(theirs - mine) > 2.0 * h) ++bad_obj;
    if (mine * mine > grid.objective + 1e-9) ++worse;
    const double slack = -std::max(max_violation(got.velocity, planes), norm(got.velocity) - cfg.max_speed);
    worst_slack = std::min(worst_slack, slack);
    if (!got.feasible || slack < -1e-9) ++bad_slack;
    const double kkt = oracle::kkt_residual(pref, got.velocity, planes, cfg.max_speed);
    worst_kkt = std::max(worst_kkt, kkt);
    if (kkt > 1e-9) ++bad_kkt;
  }
  return {bad_obj == 0 && worse == 0 && bad_kkt == 0 && bad_slack == 0,
          "1000 instances, grid h=0.04: objective gap max " + fmt("%.4f", worst_gap) + " (<= 2h), worse than grid " +
              std::to_string(worse) + ", min slack " + fmt("%.1e", worst_slack) + ", max KKT residual " +
              fmt("%.1e", worst_kkt)};
}

Outcome minimality() {
  Rng rng(801);
  int inside = 0, failures = 0;
  double worst = std::numeric_limits<double>::infinity();
  while (inside < 1000) {
    const VelocityObstacle vo{random_in_ball(rng, 5.0), rng.uniform(0.3, 1.5), rng.uniform(0.5, 4.0)};
    if (norm(vo.rel_pos) <= vo.combined_radius * 1.01) continue;
    const Vec3 v = random_in_ball(rng, 3.0);
    const AvoidanceResult a = compute_avoidance(vo, v);
    if (!a.in_obstacle) continue;
    ++inside;
    const double shortest = oracle::shortest_exit(vo.rel_pos, vo.combined_radius, vo.tau, v, 4000);
    worst = std::min(worst, shortest / norm(a.u));
    if (shortest < 0.999 * norm(a.u)) ++failures;
  }
  return {failures == 0, "1000 instances, 4000 directions each, min(shortest exit / |u|) = " + fmt("%.6f", worst)};
}

// EKF ----------------------------------------------------------------------

Eigen::VectorXd sample(Rng& rng, const Eigen::VectorXd& mean, const Eigen::MatrixXd& cov) {
  const Eigen::LLT<Eigen::MatrixXd> llt(cov);
  Eigen::VectorXd z(mean.size());
  for (Eigen::Index i = 0; i < z.size(); ++i) z(i) = rng.standard_normal();
  return mean + llt.matrixL() * z;
}

double jacobian_check() {
  Rng rng(901);
  double worst = 0.0;
  for (int inst = 0; inst < 50; ++inst) {
    FilterConfig cfg;
    cfg.meas_noise.sigma_selfvel = 0.1;
    const Mat3 h = heading_from_yaw(rng.uniform(-3.0, 3.0));
    Belief b = initial_belief(cfg, random_in_ball(rng, 1.0));
    const int tracks = 1 + static_cast<int>(rng.uniform() * 3.0);
    for (int k = 0; k < tracks; ++k)
      b = spawn_track(b, cfg, Sighting{k, {rng.uniform(-0.5, 0.5), rng.uniform(-0.3, 0.3)}, rng.uniform(1.0, 7.0)}, h,
                      0);
    for (Track& t : b.tracks) t.vel = random_in_ball(rng, 1.0);
    Measurement m;
    m.target = Sighting{static_cast<int>(rng.uniform() * tracks), {0.0, 0.0}, 3.0};
    m.self_vel = Vec3{};
    const MeasurementModel mm = measurement_model(b, cfg, m, h);
    const auto num = oracle::numeric_jacobian(
        [&](const Eigen::VectorXd& s) { return evaluate_measurement(b, s, cfg, m, h, mm.pixel_rows); }, b.state(),
        1e-6);
    for (Eigen::Index r = 0; r < mm.jacobian.rows(); ++r) {
      const double scale = std::max(mm.jacobian.row(r).norm(), 1e-12);
      double err = 0.0;
      for (Eigen::Index c = 0; c < mm.jacobian.cols(); ++c)
        err = std::max(err, std::abs(mm.jacobian(r, c) -
                                     num[static_cast<std::size_t>(r)][static_cast<std::size_t>(c)]));
      worst = std::max(worst, err / scale);
    }
  }
  return worst;
}

// Fraction of steps whose run-averaged NEES lies in the two-sided 95%
// chi-square band, for the own-velocity plus unobserved-track subproblem.
double nees_fraction(int runs, int steps) {
  FilterConfig cfg;
  cfg.meas_noise.sigma_selfvel = 0.1;
  cfg.own_vel_noise = 0.2;
  cfg.process_noise = Mat3::diag(0.3, 0.3, 0.1);
  const double dt = 1.0 / 30.0;
  const Vec3 cmd{0.8, -0.2, 0.1};
  std::vector<double> nees(static_cast<std::size_t>(steps), 0.0);
  for (int r = 0; r < runs; ++r) {
    Rng rng = Rng::derive(902, static_cast<std::uint64_t>(r));
    Belief b = initial_belief(cfg);
    b = spawn_track(b, cfg, Sighting{1, {0.0, 0.0}, 3.0}, heading_from_yaw(0.0), 0);
    Eigen::VectorXd x = sample(rng, b.state(), b.cov);
    for (int k = 0; k < steps; ++k) {
      b = predict(b, cfg, cmd, dt);
      Eigen::VectorXd y = x;
      for (int i = 0; i < 3; ++i) {
        y(i) = x(i) + cfg.gain * dt * (cmd[i] - x(i)) + std::sqrt(cfg.own_vel_noise * dt) * rng.standard_normal();
        y(6 + i) = x(6 + i) + std::sqrt(cfg.process_noise(i, i) * dt) * rng.standard_normal();
      }
      for (int i = 0; i < 3; ++i) y(3 + i) = x(3 + i) + (x(6 + i) - y(i)) * dt;
      x = y;
      Measurement m;
      m.self_vel = Vec3{x(0), x(1), x(2)} +
                   Vec3{rng.standard_normal(), rng.standard_normal(), rng.standard_normal()} *
                       cfg.meas_noise.sigma_selfvel;
      b = update(b, cfg, m, heading_from_yaw(0.0));
      const Eigen::VectorXd e = x - b.state();
      nees[static_cast<std::size_t>(k)] += e.dot(b.cov.ldlt().solve(e)) / runs;
    }
  }
  const boost::math::chi_squared chi(9.0 * runs);
  const double lo = boost::math::quantile(chi, 0.025) / runs, hi = boost::math::quantile(chi, 0.975) / runs;
  int inside = 0;
  for (double v : nees) inside += (v >= lo && v <= hi) ? 1 : 0;
  return static_cast<double>(inside) / steps;
}

// Position-error standard deviation per 1 m range bin, nearest bin first,
// for a target flying straight at a hovering observer.
std::vector<double> approach_error_std(int runs) {
  const CameraModel cam;
  FilterConfig cfg;
  const double dt = 1.0 / 60.0;
  const int bins = 6;  // [1,2) .. [6,7)
  std::vector<Vec3> sum(bins), sum_sq(bins);
  std::vector<int> count(bins, 0);
  for (int r = 0; r < runs; ++r) {
    Rng rng = Rng::derive(903, static_cast<std::uint64_t>(r));
    AgentState obs, tgt;
    obs.heading = heading_from_yaw(0.0);
    tgt.id = 1;
    tgt.pos = {7.9, rng.uniform(-0.4, 0.4), rng.uniform(-0.2, 0.2)};
    tgt.vel = {-1.0, 0.0, 0.0};
    Belief b = initial_belief(cfg);
    for (long t = 0; tgt.pos.x > 0.9; ++t) {
      b = predict(b, cfg, {}, dt);
      tgt.pos += tgt.vel * dt;
      if (t % 2 != 0) continue;
      const auto m = measure(cam, cfg.meas_noise, rng, obs, tgt, t);
      if (!m) continue;
      const std::vector<Sighting> seen{*m->target};
      b = manage_tracks(b, cfg, seen, obs.heading, t);
      b = update(b, cfg, *m, obs.heading);
      const int bin = static_cast<int>(std::floor(norm(tgt.pos))) - 1;
      if (bin < 0 || bin >= bins || b.tracks.empty()) continue;
      const Vec3 e = b.tracks[0].rel_pos - tgt.pos;
      sum[static_cast<std::size_t>(bin)] += e;
      sum_sq[static_cast<std::size_t>(bin)] += Vec3{e.x * e.x, e.y * e.y, e.z * e.z};
      ++count[static_cast<std::size_t>(bin)];
    }
  }
  std::vector<double> sd;
  for (int k = 0; k < bins; ++k) {
    const double n = count[static_cast<std::size_t>(k)];
    const Vec3 mean = sum[static_cast<std::size_t>(k)] * (1.0 / n);
    const Vec3 sq = sum_sq[static_cast<std::size_t>(k)] * (1.0 / n);
    sd.push_back(std::sqrt(sq.x - mean.x * mean.x + sq.y - mean.y * mean.y + sq.z - mean.z * mean.z));
  }
  return sd;
}

Outcome ekf_validity() {
  const double jac = jacobian_check();
  const double frac = nees_fraction(200, 60);
  const std::vector<double> sd = approach_error_std(200);
  bool trend = true;
  for (std::size_t k = 1; k < sd.size(); ++k)
    if (sd[k - 1] > sd[k]) trend = false;
  std::string bins;
  for (std::size_t k = 0; k < sd.size(); ++k)
    bins += (k ? " " : "") + std::to_string(k + 1) + "m:" + fmt("%.4f", sd[k]);
  return {jac < 1e-4 && frac >= 0.9 && trend,
          "Jacobian rel err " + fmt("%.1e", jac) + "; NEES in 95% band at " + fmt("%.0f", frac * 100.0) +
              "% of 60 steps (200 runs, need >= 90%); error sd by range " + bins};
}

Outcome determinism() {
  int mismatches = 0;
  for (const Scenario& s : {load_scenario(kSource + "/scenarios/head_on_noisy.json"),
                            load_scenario(kSource + "/scenarios/noncooperative.json"), make_crossing(7)})
    if (runlog_to_string(run(s)) != runlog_to_string(run(s))) ++mismatches;

  HeadOnOptions opt;
  opt.duration = 5.0;
  opt.noise.sigma_selfvel = 0.1;
  opt.noise.sigma_pixel = 0.002;
  opt.noise.sigma_dist_0 = 0.05;
  const std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4, 5, 6, 7};
  const std::vector<double> levels{0.0, 0.2};
  const auto scenarios = expand_batch(make_head_on(opt), seeds, levels);
  auto render = [&](unsigned workers) {
    std::vector<std::string> logs(scenarios.size());
    std::mutex m;
    const auto results = run_batch(scenarios, workers, [&](std::size_t i, const RunLog& log) {
      std::string text = runlog_to_string(log);
      std::lock_guard lock(m);
      logs[i] = std::move(text);
    });
    std::vector<RunSummary> summaries;
    for (const BatchResult& r : results)
      if (r.summary) summaries.push_back(*r.summary);
    std::ostringstream out;
    write_summary_csv(out, summaries);
    const auto rows = sweep_summary(summaries);
    write_sweep_csv(out, rows);
    for (const std::string& l : logs) out << l;
    return out.str();
  };
  const std::string one = render(1);
  const bool invariant = one == render(4) && one == render(8);
  return {mismatches == 0 && invariant, "repeat-run log mismatches " + std::to_string(mismatches) +
                                            ", batch of 16 identical for 1/4/8 workers: " +
                                            (invariant ? "yes" : "NO")};
}

// Live steering --------------------------------------------------------------

Outcome live_steering() {
  using namespace qorca::bridge;
  Scenario s = load_scenario(kSource + "/scenarios/live_duel.json");
  s.noise = NoiseModel::noiseless();
  s.duration = 70.0;
  ServerOptions opt;
  opt.port = 0;
  opt.live.broadcast_hz = 60.0;
  opt.live.realtime_factor = 1.0;
  BridgeServer server(s, opt);
  server.start();

  std::map<int, Vec3> target;
  for (const AgentSpec& a : s.agents) {
    const AgentSpec& other = s.agents[a.id == s.agents[0].id ? 1 : 0];
    target[a.id] = other.position;
  }
  const double speed = 1.0;
  const double sim_seconds = 60.0;

  testnet::WsClient ws(server.port());
  std::int64_t seq = 0;
  std::map<std::int64_t, long> sent_at;  // client_seq -> tick of the frame it answered
  long frames = 0, last_tick = -1, max_lag = 0, acks = 0, errors = 0, swaps = 0;
  double worst = std::numeric_limits<double>::infinity();
  const AgentShape sa = s.agents[0].shape, sb = s.agents[1].shape;
  while (true) {
    const auto text = ws.read(std::chrono::milliseconds(3000));
    if (!text) break;
    const Message msg = parse_message(*text);
    if (const auto* ack = std::get_if<AckFrame>(&msg)) {
      ++acks;
      max_lag = std::max(max_lag, ack->effective_tick - sent_at.at(ack->client_seq));
      sent_at.erase(ack->client_seq);
      continue;
    }
    if (std::holds_alternative<ErrorFrame>(msg)) {
      ++errors;
      continue;
    }
    const auto* st = std::get_if<StateFrame>(&msg);
    if (!st) continue;
    ++frames;
    last_tick = st->tick;
    worst = std::min(worst, scaled_clearance(st->agents[0].pos, sa, st->agents[1].pos, sb));
    if (st->sim_time >= sim_seconds) break;
    for (const auto& a : st->agents) {
      Vec3 to = target[a.id] - a.pos;
      if (norm(to) < 0.2) {
        // Arrived: head back to where the other agent started from.
        target[a.id] = target[a.id] * -1.0;
        to = target[a.id] - a.pos;
        ++swaps;
      }
      ++seq;
      sent_at[seq] = st->tick;
      ws.send(serialize(CommandFrame{a.id, normalize(to) * speed, seq}));
    }
  }
  ws.close();
  const HealthStatus health = server.session().health();
  server.stop();
  const bool finished = last_tick >= static_cast<long>(std::lround(sim_seconds / s.tick_dt)) - 1;
  return {finished && worst >= 1.0 - 1e-6 && max_lag <= 3 && errors == 0 && health.status == "running",
          std::to_string(frames) + " frames to tick " + std::to_string(last_tick) + ", " + std::to_string(acks) +
              " acks, max ack lag " + std::to_string(max_lag) + " ticks, " + std::to_string(swaps) +
              " target swaps, min clearance " + fmt("%.6f", worst) + ", errors " + std::to_string(errors)};
}

Outcome protocol_fixtures() {
  using namespace qorca::bridge;
  int files = 0, mismatches = 0;
  for (const char* name : {"command.json", "ack.json", "error_full.json", "error_bare.json", "state.json"}) {
    std::ifstream in(kSource + "/tests/fixtures/protocol/" + name);
    std::string text;
    if (!std::getline(in, text)) return {false, std::string("missing fixture ") + name};
    ++files;
    const Message m = parse_message(text);
    if (serialize(m) != text || !(parse_message(serialize(m)) == m)) ++mismatches;
  }
  return {mismatches == 0, std::to_string(files) + " fixtures, byte mismatches " + std::to_string(mismatches)};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"qorca acceptance checks"};
  std::vector<int> only;
  app.add_option("--only", only, "Criteria to run (default: all)")->delimiter(',');
  CLI11_PARSE(app, argc, argv);

  const std::vector<Criterion> criteria{
      {1, true, "discrete convergence: residual halves each step", 1.0, discrete_convergence},
      {2, true, "continuous convergence: k=2 rate 1.0/s +-5%", 1.0, continuous_convergence},
      {3, true, "symmetry: u_i + u_j = 0, new relative velocity exits the VO", 10.0, symmetry},
      {4, true, "zero-noise safety: head-on and crossing", 30.0, zero_noise_safety},
      {5, true, "non-cooperative robustness: radii x1.3", 30.0, noncooperative},
      {6, true, "dance onset across the self-velocity noise sweep", 300.0, dance_onset},
      {7, true, "LP matches the grid oracle", 60.0, lp_oracle},
      {8, true, "VO minimality against the exit oracle", 60.0, minimality},
      {9, true, "EKF validity: Jacobian, NEES, approach error trend", 120.0, ekf_validity},
      {10, true, "determinism: byte-identical logs, worker invariance", 0.0, determinism},
      {11, false, "live steering: 60 s scripted session, acks within 3 ticks", 0.0, live_steering},
      {12, false, "protocol fixtures round-trip bit-exactly", 0.0, protocol_fixtures},
  };

  int primary_failures = 0, secondary_failures = 0;
  for (const Criterion& c : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), c.id) == only.end()) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.check();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool in_time = c.limit_s <= 0.0 || secs < c.limit_s;
    const bool pass = o.pass && in_time;
    if (!pass) ++(c.primary ? primary_failures : secondary_failures);
    std::string timing = fmt("%.2f s", secs);
    if (c.limit_s > 0.0) timing += fmt(" (limit %g s)", c.limit_s);
    if (!in_time) timing += " TOO SLOW";
    std::printf("%s [%2d] %-9s %s | %s | %s\n", pass ? "PASS" : "FAIL", c.id, c.primary ? "PRIMARY" : "SECONDARY",
                c.name.c_str(), o.detail.c_str(), timing.c_str());
    std::fflush(stdout);
  }
  std::printf("primary failures: %d, secondary failures: %d\n", primary_failures, secondary_failures);
  return primary_failures + secondary_failures == 0 ? 0 : 1;
}
