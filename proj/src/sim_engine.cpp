/*
 * sim_engine.cpp
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

#include "qorca/sim_engine.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numbers>
#include <sstream>

namespace qorca {

using nlohmann::json;

namespace {

// Stream index offset separating LP shuffle streams from sensor streams.
constexpr std::uint64_t kShuffleStream = 1ULL << 32;

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

Vec3 vec_from(const json& j) { return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()}; }

double finite_or_null(const json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

Mat3 initial_heading(const AgentSpec& a, const Vec3& preferred) {
  if (a.yaw_deg) return heading_from_yaw(*a.yaw_deg * std::numbers::pi / 180.0);
  for (const Vec3& v : {preferred, a.velocity}) {
    const double h = std::hypot(v.x, v.y);
    if (h > 0.0) return heading_from_direction(v.x / h, v.y / h);
  }
  return heading_from_yaw(0.0);
}

double min_pair_clearance(const std::vector<AgentState>& states) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < states.size(); ++i)
    for (std::size_t j = i + 1; j < states.size(); ++j)
      best = std::min(best, scaled_clearance(states[i].pos, states[i].shape, states[j].pos, states[j].shape));
  return best;
}

}  // namespace

const PlaneRecord* AgentRecord::plane_for(int neighbor) const {
  for (const auto& p : planes)
    if (p.neighbor == neighbor) return &p;
  return nullptr;
}

const TrackRecord* AgentRecord::track_for(int neighbor) const {
  for (const auto& t : tracks)
    if (t.id == neighbor) return &t;
  return nullptr;
}

const AgentRecord* TickRecord::agent(int id) const {
  for (const auto& a : agents)
    if (a.id == id) return &a;
  return nullptr;
}

double scaled_clearance(const Vec3& pos_i, const AgentShape& shape_i, const Vec3& pos_j, const AgentShape& shape_j) {
  return norm(sphere_space(shape_i, shape_j).to_scaled(pos_j - pos_i));
}

bool detect_collision(const TickRecord& record) { return record.min_clearance < 1.0; }

// ---------------------------------------------------------------------------

Simulation::Simulation(Scenario scenario) : scenario_(std::move(scenario)) {
  validate(scenario_);
  std::sort(scenario_.agents.begin(), scenario_.agents.end(),
            [](const AgentSpec& a, const AgentSpec& b) { return a.id < b.id; });

  for (const AgentSpec& a : scenario_.agents) {
    Vec3 target;
    if (a.policy.kind == PolicyKind::HeadOn) {
      const AgentSpec* other = a.policy.toward >= 0 ? scenario_.agent(a.policy.toward) : nullptr;
      if (!other)
        for (const AgentSpec& b : scenario_.agents)
          if (b.id != a.id) {
            other = &b;
            break;
          }
      target = other->position;
    }
    head_on_targets_.push_back(target);
  }
  waypoint_index_.assign(scenario_.agents.size(), 0);

  for (std::size_t i = 0; i < scenario_.agents.size(); ++i) {
    const AgentSpec& a = scenario_.agents[i];
    AgentState s;
    s.id = a.id;
    s.pos = a.position;
    s.vel = a.velocity;
    s.shape = a.shape;
    s.dynamics = a.dynamics;
    s.cooperative = a.cooperative;
    states_.push_back(s);
    if (a.policy.kind == PolicyKind::External) external_[a.id] = Vec3{};
  }
  for (std::size_t i = 0; i < states_.size(); ++i) {
    states_[i].heading = initial_heading(scenario_.agents[i], preferred_for(i));
    filters_.push_back(scenario_.filter_config(scenario_.agents[i]));
    beliefs_.push_back(initial_belief(filters_.back(), states_[i].vel));
    sensor_rngs_.push_back(Rng::derive(scenario_.seed, static_cast<std::uint64_t>(states_[i].id)));
  }
}

bool Simulation::is_external(int agent_id) const { return external_.count(agent_id) > 0; }

bool Simulation::set_external_preferred(int agent_id, const Vec3& preferred) {
  auto it = external_.find(agent_id);
  if (it == external_.end() || !is_finite(preferred)) return false;
  it->second = preferred;
  return true;
}

Vec3 Simulation::preferred_for(std::size_t i) {
  const AgentSpec& a = scenario_.agents[i];
  const Policy& p = a.policy;
  switch (p.kind) {
    case PolicyKind::HeadOn: {
      const Vec3 d = head_on_targets_[i] - a.position;
      const double n = norm(d);
      return n > 0.0 ? d * (p.speed / n) : Vec3{};
    }
    case PolicyKind::Stationary: return {};
    case PolicyKind::ConstantVel: return p.velocity;
    case PolicyKind::Waypoint: {
      std::size_t& k = waypoint_index_[i];
      const Vec3 pos = states_.empty() ? a.position : states_[i].pos;
      while (k < p.waypoints.size() && norm(p.waypoints[k] - pos) <= p.waypoint_tolerance) ++k;
      if (k >= p.waypoints.size()) return {};
      const Vec3 d = p.waypoints[k] - pos;
      return d * (p.speed / norm(d));
    }
    case PolicyKind::External: {
      auto it = external_.find(a.id);
      return it == external_.end() ? Vec3{} : it->second;
    }
  }
  return {};
}

void Simulation::sense_and_filter(std::size_t i, bool frame) {
  const FilterConfig& cfg = filters_[i];
  const AgentState& me = states_[i];
  Belief b = beliefs_[i];
  if (tick_ > 0) b = predict(b, cfg, me.commanded_vel, scenario_.tick_dt);

  std::vector<Sighting> fresh;
  if (frame) {
    Rng& rng = sensor_rngs_[i];
    const Vec3 self_vel = measure_self_velocity(scenario_.noise, rng, me);
    bool self_used = false;
    for (std::size_t j = 0; j < states_.size(); ++j) {
      if (j == i) continue;
      auto s = sight(scenario_.camera, scenario_.noise, rng, me, states_[j]);
      if (!s) continue;
      if (b.index_of(s->target_id) < 0) {
        fresh.push_back(*s);
        continue;
      }
      Measurement m;
      m.observer_id = me.id;
      m.target = *s;
      if (!self_used) m.self_vel = self_vel;
      m.tick = tick_;
      b = update(b, cfg, m, me.heading);
      self_used = true;
    }
    if (!self_used) {
      Measurement m;
      m.observer_id = me.id;
      m.self_vel = self_vel;
      m.tick = tick_;
      b = update(b, cfg, m, me.heading);
    }
  }
  beliefs_[i] = manage_tracks(b, cfg, fresh, me.heading, tick_);
}

std::vector<PlaneRecord> Simulation::avoid(std::size_t i, const Vec3& preferred, Vec3& commanded) {
  std::vector<PlaneRecord> records;
  const AgentSpec& spec = scenario_.agents[i];
  if (!spec.cooperative) {
    commanded = preferred;
    return records;
  }
  const Belief& b = beliefs_[i];
  const AgentShape self_shape = spec.shape.inflated(spec.inflation);
  const long last_frame = tick_ - tick_ % scenario_.camera_period();
  bool coasting = false;
  std::vector<OrcaPlane> planes;
  for (const Track& t : b.tracks) {
    if (!track_usable(t, beliefs_[i].own_vel, filters_[i], tick_)) continue;
    coasting = coasting || t.last_seen_tick < last_frame;
    const AgentSpec* other = scenario_.agent(t.id);
    if (!other) continue;
    const SphereSpace space = sphere_space(self_shape, other->shape);
    const VelocityObstacle vo{space.to_scaled(t.rel_pos), 1.0, scenario_.tau};
    const Vec3 rel_vel = space.to_scaled(b.own_vel - t.vel);
    AvoidanceResult av = compute_avoidance(vo, rel_vel);
    const bool emergency = av.colliding;
    if (emergency)
      av = emergency_avoidance(vo, rel_vel);
    else
      av = apply_tie_break(av, vo.rel_pos, rel_vel, scenario_.solver.tie_break_bias * space.scale(0, 0));
    const OrcaPlane plane =
        plane_to_world(build_plane(space.to_scaled(b.own_vel), av, scenario_.solver, t.id), space);
    planes.push_back(plane);

    PlaneRecord r;
    r.neighbor = t.id;
    r.in_obstacle = av.in_obstacle;
    r.emergency = emergency;
    r.u = space.to_world(av.u);
    r.point = plane.point;
    r.normal = plane.normal;
    records.push_back(r);
  }
  SolverConfig cfg = scenario_.solver;
  cfg.shuffle_seed =
      Rng::derive(scenario_.seed, kShuffleStream + static_cast<std::uint64_t>(tick_) * 4096u +
                                      static_cast<std::uint64_t>(states_[i].id))
          .next_u64();
  // A coasted track assumes the neighbor keeps its velocity; hold ours too
  // so both sides of an unseen pass stay consistent.
  commanded = solve(coasting ? b.own_vel : preferred, planes, cfg);
  return records;
}

bool Simulation::check_finite(const std::vector<Vec3>& commanded) {
  for (std::size_t i = 0; i < states_.size(); ++i) {
    const char* what = nullptr;
    if (!beliefs_[i].finite())
      what = "belief";
    else if (!is_finite(commanded[i]))
      what = "commanded velocity";
    else if (!is_finite(states_[i].pos) || !is_finite(states_[i].vel))
      what = "true state";
    if (what) {
      abort_ = AbortRecord{tick_, std::string("non-finite ") + what + " for agent " + std::to_string(states_[i].id)};
      return false;
    }
  }
  return true;
}

TickRecord Simulation::step() {
  TickRecord rec;
  rec.tick = tick_;
  rec.time = time();
  if (aborted()) return rec;

  const std::size_t n = states_.size();
  std::vector<Vec3> preferred(n), commanded(n);
  for (std::size_t i = 0; i < n; ++i) preferred[i] = preferred_for(i);

  const bool frame = tick_ % scenario_.camera_period() == 0;
  for (std::size_t i = 0; i < n; ++i) sense_and_filter(i, frame);

  std::vector<std::vector<PlaneRecord>> planes(n);
  for (std::size_t i = 0; i < n; ++i) planes[i] = avoid(i, preferred[i], commanded[i]);

  if (!check_finite(commanded)) return rec;

  rec.min_clearance = min_pair_clearance(states_);
  for (std::size_t i = 0; i < n; ++i) {
    AgentRecord a;
    a.id = states_[i].id;
    a.pos = states_[i].pos;
    a.vel = states_[i].vel;
    a.preferred = preferred[i];
    a.commanded = commanded[i];
    a.own_vel_est = beliefs_[i].own_vel;
    const Belief& b = beliefs_[i];
    for (std::size_t k = 0; k < b.tracks.size(); ++k) {
      const Track& t = b.tracks[k];
      const int off = Belief::pos_offset(static_cast<int>(k));
      TrackRecord tr;
      tr.id = t.id;
      tr.rel_pos = t.rel_pos;
      tr.vel = t.vel;
      tr.pos_sd = std::sqrt(std::max(0.0, (b.cov(off, off) + b.cov(off + 1, off + 1) + b.cov(off + 2, off + 2)) / 3.0));
      tr.usable = track_usable(t, beliefs_[i].own_vel, filters_[i], tick_);
      tr.last_seen = t.last_seen_tick;
      a.tracks.push_back(tr);
    }
    a.planes = std::move(planes[i]);
    rec.agents.push_back(std::move(a));
  }

  for (std::size_t i = 0; i < n; ++i) {
    states_[i].commanded_vel = commanded[i];
    states_[i] = qorca::step(states_[i], scenario_.tick_dt);
  }
  ++tick_;
  if (!check_finite(commanded)) abort_->tick = tick_ - 1;
  return rec;
}

RunLog run(const Scenario& scenario) {
  RunLog log;
  Simulation sim(scenario);
  log.scenario = sim.scenario();
  const long ticks = sim.scenario().tick_count();
  log.ticks.reserve(static_cast<std::size_t>(ticks));
  while (!sim.finished()) {
    TickRecord r = sim.step();
    if (sim.aborted() && r.agents.empty()) break;
    log.ticks.push_back(std::move(r));
  }
  log.abort = sim.abort();
  return log;
}

RunLog run_frozen_vo(const FrozenVoConfig& cfg) {
  RunLog log;
  Scenario& s = log.scenario;
  s.name = "frozen_vo";
  s.tick_dt = cfg.dt;
  s.tau = cfg.tau;
  s.duration = cfg.dt * cfg.steps;
  s.noise = NoiseModel::noiseless();
  s.solver.share = cfg.share;
  s.solver.max_speed = cfg.max_speed;
  s.solver.tie_break_bias = 0.0;
  AgentSpec self, other;
  self.id = 0;
  self.velocity = cfg.self_vel;
  self.dynamics = cfg.dynamics;
  self.policy.kind = PolicyKind::ConstantVel;
  self.policy.velocity = cfg.self_vel;
  other.id = 1;
  other.position = cfg.rel_pos;
  other.velocity = cfg.other_vel;
  other.cooperative = false;
  other.policy.kind = PolicyKind::ConstantVel;
  other.policy.velocity = cfg.other_vel;
  s.agents = {self, other};

  const VelocityObstacle vo{cfg.rel_pos, cfg.combined_radius, cfg.tau};
  AgentState me;
  me.vel = cfg.self_vel;
  me.dynamics = cfg.dynamics;
  for (int n = 0; n < cfg.steps; ++n) {
    const AvoidanceResult av = compute_avoidance(vo, me.vel - cfg.other_vel);
    std::vector<OrcaPlane> planes;
    if (!av.colliding) planes.push_back(build_plane(me.vel, av, s.solver, 1));
    const Vec3 cmd = solve(cfg.self_vel, planes, s.solver);

    TickRecord rec;
    rec.tick = n;
    rec.time = n * cfg.dt;
    rec.min_clearance = norm(cfg.rel_pos) / cfg.combined_radius;
    AgentRecord a0, a1;
    a0.id = 0;
    a0.vel = me.vel;
    a0.preferred = cfg.self_vel;
    a0.commanded = cmd;
    a0.own_vel_est = me.vel;
    a0.tracks.push_back({1, cfg.rel_pos, cfg.other_vel, 0.0, true, n});
    if (!planes.empty())
      a0.planes.push_back({1, av.in_obstacle, false, av.u, planes[0].point, planes[0].normal});
    a1.id = 1;
    a1.pos = cfg.rel_pos;
    a1.vel = a1.preferred = a1.commanded = a1.own_vel_est = cfg.other_vel;
    rec.agents = {a0, a1};
    log.ticks.push_back(std::move(rec));

    me.commanded_vel = cmd;
    me.vel = qorca::step(me, cfg.dt).vel;
  }
  return log;
}

// ---------------------------------------------------------------------------

json header_json(const Scenario& s) {
  return json{{"type", "header"},
              {"format", "qorca-runlog"},
              {"version", 1},
              {"scenario_hash", scenario_hash(s)},
              {"seed", s.seed},
              {"duration", s.duration},
              {"tick_dt", s.tick_dt},
              {"scenario", scenario_to_json(s)}};
}

json tick_to_json(const TickRecord& t) {
  json agents = json::array();
  for (const AgentRecord& a : t.agents) {
    json tracks = json::array();
    for (const TrackRecord& tr : a.tracks)
      tracks.push_back({{"id", tr.id},
                        {"rel_pos", vec_json(tr.rel_pos)},
                        {"vel", vec_json(tr.vel)},
                        {"pos_sd", tr.pos_sd},
                        {"usable", tr.usable},
                        {"last_seen", tr.last_seen}});
    json planes = json::array();
    for (const PlaneRecord& p : a.planes)
      planes.push_back({{"neighbor", p.neighbor},
                        {"in_obstacle", p.in_obstacle},
                        {"emergency", p.emergency},
                        {"u", vec_json(p.u)},
                        {"point", vec_json(p.point)},
                        {"normal", vec_json(p.normal)}});
    agents.push_back({{"id", a.id},
                      {"pos", vec_json(a.pos)},
                      {"vel", vec_json(a.vel)},
                      {"preferred", vec_json(a.preferred)},
                      {"commanded", vec_json(a.commanded)},
                      {"own_vel_est", vec_json(a.own_vel_est)},
                      {"tracks", tracks},
                      {"planes", planes}});
  }
  json j{{"type", "tick"}, {"tick", t.tick}, {"time", t.time}, {"agents", agents}};
  // JSON has no infinity; a lone agent has no clearance.
  j["min_clearance"] = std::isfinite(t.min_clearance) ? json(t.min_clearance) : json(nullptr);
  return j;
}

void write_runlog(std::ostream& out, const RunLog& log) {
  out << header_json(log.scenario).dump() << '\n';
  for (const TickRecord& t : log.ticks) out << tick_to_json(t).dump() << '\n';
  if (log.abort)
    out << json{{"type", "abort"}, {"tick", log.abort->tick}, {"reason", log.abort->reason}}.dump() << '\n';
}

std::string runlog_to_string(const RunLog& log) {
  std::ostringstream out;
  write_runlog(out, log);
  return out.str();
}

namespace {

TickRecord tick_from_json(const json& j) {
  TickRecord t;
  t.tick = j.at("tick").get<long>();
  t.time = j.at("time").get<double>();
  t.min_clearance = finite_or_null(j.at("min_clearance"));
  for (const json& a : j.at("agents")) {
    AgentRecord r;
    r.id = a.at("id").get<int>();
    r.pos = vec_from(a.at("pos"));
    r.vel = vec_from(a.at("vel"));
    r.preferred = vec_from(a.at("preferred"));
    r.commanded = vec_from(a.at("commanded"));
    r.own_vel_est = vec_from(a.at("own_vel_est"));
    for (const json& tr : a.at("tracks"))
      r.tracks.push_back({tr.at("id").get<int>(), vec_from(tr.at("rel_pos")), vec_from(tr.at("vel")),
                          tr.at("pos_sd").get<double>(), tr.at("usable").get<bool>(), tr.at("last_seen").get<long>()});
    for (const json& p : a.at("planes"))
      r.planes.push_back({p.at("neighbor").get<int>(), p.at("in_obstacle").get<bool>(), p.at("emergency").get<bool>(),
                          vec_from(p.at("u")), vec_from(p.at("point")), vec_from(p.at("normal"))});
    t.agents.push_back(std::move(r));
  }
  return t;
}

}  // namespace

RunLog read_runlog(std::istream& in) {
  RunLog log;
  std::string line;
  bool have_header = false;
  long lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      const std::string type = j.at("type").get<std::string>();
      if (type == "header") {
        log.scenario = scenario_from_json(j.at("scenario"));
        have_header = true;
      } else if (type == "tick") {
        log.ticks.push_back(tick_from_json(j));
      } else if (type == "abort") {
        log.abort = AbortRecord{j.at("tick").get<long>(), j.at("reason").get<std::string>()};
      } else {
        throw std::runtime_error("unknown record type '" + type + "'");
      }
    } catch (const ScenarioError& e) {
      throw RunLogError("runlog line " + std::to_string(lineno) + ": scenario " + e.what());
    } catch (const std::exception& e) {
      throw RunLogError("runlog line " + std::to_string(lineno) + ": " + e.what());
    }
  }
  if (!have_header) throw RunLogError("runlog has no header record");
  return log;
}

RunLog load_runlog(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open runlog '" + path + "'");
  return read_runlog(in);
}

}  // namespace qorca
