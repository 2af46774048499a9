/*
 * scenario.cpp
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

#include "qorca/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <set>
#include <sstream>

namespace qorca {

using nlohmann::json;

namespace {

constexpr double kDeg = std::numbers::pi / 180.0;

std::string escape_token(const std::string& key) {
  std::string out;
  for (char c : key) {
    if (c == '~')
      out += "~0";
    else if (c == '/')
      out += "~1";
    else
      out += c;
  }
  return out;
}

// Walks one JSON object, remembering which keys were read so leftovers can
// be rejected.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string pointer) : node_(node), pointer_(std::move(pointer)) {
    if (!node_.is_object()) throw ScenarioError(pointer_.empty() ? "/" : pointer_, "expected an object");
  }

  std::string child(const std::string& key) const { return pointer_ + "/" + escape_token(key); }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = node_.find(key);
    return it == node_.end() ? nullptr : &*it;
  }

  const json& require(const std::string& key) {
    const json* v = get(key);
    if (!v) throw ScenarioError(child(key), "missing required key");
    return *v;
  }

  void number(const std::string& key, double& out) {
    if (const json* v = get(key)) out = as_number(*v, child(key));
  }

  void integer(const std::string& key, long& out) {
    if (const json* v = get(key)) out = as_integer(*v, child(key));
  }

  void boolean(const std::string& key, bool& out) {
    if (const json* v = get(key)) {
      if (!v->is_boolean()) throw ScenarioError(child(key), "expected a boolean");
      out = v->get<bool>();
    }
  }

  void string(const std::string& key, std::string& out) {
    if (const json* v = get(key)) {
      if (!v->is_string()) throw ScenarioError(child(key), "expected a string");
      out = v->get<std::string>();
    }
  }

  void vec3(const std::string& key, Vec3& out) {
    if (const json* v = get(key)) out = as_vec3(*v, child(key));
  }

  void finish() const {
    for (auto it = node_.begin(); it != node_.end(); ++it)
      if (!seen_.count(it.key())) throw ScenarioError(child(it.key()), "unknown key");
  }

  static double as_number(const json& v, const std::string& ptr) {
    if (!v.is_number()) throw ScenarioError(ptr, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) throw ScenarioError(ptr, "expected a finite number");
    return x;
  }

  static long as_integer(const json& v, const std::string& ptr) {
    if (!v.is_number_integer()) throw ScenarioError(ptr, "expected an integer");
    return v.get<long>();
  }

  static Vec3 as_vec3(const json& v, const std::string& ptr) {
    if (!v.is_array() || v.size() != 3) throw ScenarioError(ptr, "expected [x, y, z]");
    return {as_number(v[0], ptr + "/0"), as_number(v[1], ptr + "/1"), as_number(v[2], ptr + "/2")};
  }

 private:
  const json& node_;
  std::string pointer_;
  std::set<std::string> seen_;
};

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

const char* policy_name(PolicyKind k) {
  switch (k) {
    case PolicyKind::HeadOn: return "head_on";
    case PolicyKind::Stationary: return "stationary";
    case PolicyKind::ConstantVel: return "constant_velocity";
    case PolicyKind::Waypoint: return "waypoint";
    case PolicyKind::External: return "external";
  }
  return "stationary";
}

Policy read_policy(const json& node, const std::string& ptr) {
  ObjectReader r(node, ptr);
  Policy p;
  const json& type = r.require("type");
  if (!type.is_string()) throw ScenarioError(r.child("type"), "expected a string");
  const std::string t = type.get<std::string>();
  if (t == "head_on") {
    p.kind = PolicyKind::HeadOn;
    r.number("speed", p.speed);
    long toward = -1;
    r.integer("toward", toward);
    p.toward = static_cast<int>(toward);
  } else if (t == "stationary") {
    p.kind = PolicyKind::Stationary;
  } else if (t == "constant_velocity") {
    p.kind = PolicyKind::ConstantVel;
    p.velocity = ObjectReader::as_vec3(r.require("velocity"), r.child("velocity"));
  } else if (t == "waypoint") {
    p.kind = PolicyKind::Waypoint;
    const json& pts = r.require("points");
    if (!pts.is_array() || pts.empty()) throw ScenarioError(r.child("points"), "expected a non-empty array");
    for (std::size_t i = 0; i < pts.size(); ++i)
      p.waypoints.push_back(ObjectReader::as_vec3(pts[i], r.child("points") + "/" + std::to_string(i)));
    r.number("speed", p.speed);
    r.number("tolerance", p.waypoint_tolerance);
  } else if (t == "external") {
    p.kind = PolicyKind::External;
  } else {
    throw ScenarioError(r.child("type"), "unknown policy type '" + t + "'");
  }
  r.finish();
  return p;
}

json policy_json(const Policy& p) {
  json j{{"type", policy_name(p.kind)}};
  switch (p.kind) {
    case PolicyKind::HeadOn:
      j["speed"] = p.speed;
      j["toward"] = p.toward;
      break;
    case PolicyKind::ConstantVel: j["velocity"] = vec_json(p.velocity); break;
    case PolicyKind::Waypoint: {
      json pts = json::array();
      for (const Vec3& w : p.waypoints) pts.push_back(vec_json(w));
      j["points"] = pts;
      j["speed"] = p.speed;
      j["tolerance"] = p.waypoint_tolerance;
      break;
    }
    default: break;
  }
  return j;
}

AgentSpec read_agent(const json& node, const std::string& ptr) {
  ObjectReader r(node, ptr);
  AgentSpec a;
  a.id = static_cast<int>(ObjectReader::as_integer(r.require("id"), r.child("id")));
  a.position = ObjectReader::as_vec3(r.require("position"), r.child("position"));
  r.vec3("velocity", a.velocity);
  if (const json* yaw = r.get("yaw_deg")) a.yaw_deg = ObjectReader::as_number(*yaw, r.child("yaw_deg"));
  if (const json* shape = r.get("shape")) {
    ObjectReader s(*shape, r.child("shape"));
    s.number("r_xy", a.shape.r_xy);
    s.number("r_z", a.shape.r_z);
    s.finish();
  }
  r.number("inflation", a.inflation);
  if (const json* dyn = r.get("dynamics")) {
    ObjectReader d(*dyn, r.child("dynamics"));
    std::string mode = "instantaneous";
    d.string("mode", mode);
    if (mode == "instantaneous")
      a.dynamics.mode = DynamicsMode::Instantaneous;
    else if (mode == "first_order")
      a.dynamics.mode = DynamicsMode::FirstOrder;
    else
      throw ScenarioError(d.child("mode"), "expected 'instantaneous' or 'first_order'");
    d.number("gain", a.dynamics.gain);
    d.finish();
  }
  r.boolean("cooperative", a.cooperative);
  if (const json* pol = r.get("policy")) a.policy = read_policy(*pol, r.child("policy"));
  r.finish();
  return a;
}

json agent_json(const AgentSpec& a) {
  json j{{"id", a.id},
         {"position", vec_json(a.position)},
         {"velocity", vec_json(a.velocity)},
         {"shape", {{"r_xy", a.shape.r_xy}, {"r_z", a.shape.r_z}}},
         {"inflation", a.inflation},
         {"dynamics",
          {{"mode", a.dynamics.mode == DynamicsMode::FirstOrder ? "first_order" : "instantaneous"},
           {"gain", a.dynamics.gain}}},
         {"cooperative", a.cooperative},
         {"policy", policy_json(a.policy)}};
  if (a.yaw_deg) j["yaw_deg"] = *a.yaw_deg;
  return j;
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

}  // namespace

long Scenario::tick_count() const {
  return static_cast<long>(std::floor(duration / tick_dt + 1e-9));
}

long Scenario::camera_period() const {
  return std::max(1L, std::lround(1.0 / (camera.rate * tick_dt)));
}

const AgentSpec* Scenario::agent(int id) const {
  for (const AgentSpec& a : agents)
    if (a.id == id) return &a;
  return nullptr;
}

FilterConfig Scenario::filter_config(const AgentSpec& a) const {
  FilterConfig cfg;
  // The filter models the commanded-velocity response; an instantaneous
  // agent reaches its command within one tick.
  cfg.gain = a.dynamics.mode == DynamicsMode::FirstOrder ? a.dynamics.gain : 1.0 / tick_dt;
  cfg.process_noise = Mat3::diag(filter.process_noise, filter.process_noise, filter.process_noise);
  cfg.own_vel_noise = filter.own_vel_noise;
  cfg.meas_noise = noise;
  cfg.focal_length = camera.focal_length;
  cfg.init_own_vel_var = filter.init_own_vel_var;
  cfg.init_vel_var = filter.init_vel_var;
  cfg.init_pos_inflation = filter.init_pos_inflation;
  cfg.coast_ticks = filter.coast_ticks;
  cfg.drop_ticks = filter.drop_ticks;
  return cfg;
}

Scenario scenario_from_json(const json& doc) {
  ObjectReader r(doc, "");
  Scenario s;
  r.string("name", s.name);
  r.number("duration", s.duration);
  r.number("tick_dt", s.tick_dt);
  r.number("tau", s.tau);
  if (const json* seed = r.get("seed")) {
    if (!seed->is_number_unsigned() && !(seed->is_number_integer() && seed->get<long long>() >= 0))
      throw ScenarioError(r.child("seed"), "expected a non-negative integer");
    s.seed = seed->get<std::uint64_t>();
  }
  if (const json* cam = r.get("camera")) {
    ObjectReader c(*cam, r.child("camera"));
    double hfov = s.camera.hfov / kDeg, vfov = s.camera.vfov / kDeg;
    c.number("focal_length", s.camera.focal_length);
    c.number("hfov_deg", hfov);
    c.number("vfov_deg", vfov);
    c.number("max_range", s.camera.max_range);
    c.number("rate", s.camera.rate);
    c.finish();
    s.camera.hfov = hfov * kDeg;
    s.camera.vfov = vfov * kDeg;
  }
  if (const json* n = r.get("noise")) {
    ObjectReader c(*n, r.child("noise"));
    c.number("sigma_pixel", s.noise.sigma_pixel);
    c.number("sigma_dist_0", s.noise.sigma_dist_0);
    c.number("dist_ref", s.noise.dist_ref);
    c.number("dist_bias", s.noise.dist_bias);
    c.number("sigma_selfvel", s.noise.sigma_selfvel);
    c.finish();
  }
  if (const json* f = r.get("filter")) {
    ObjectReader c(*f, r.child("filter"));
    c.number("process_noise", s.filter.process_noise);
    c.number("own_vel_noise", s.filter.own_vel_noise);
    c.number("init_own_vel_var", s.filter.init_own_vel_var);
    c.number("init_vel_var", s.filter.init_vel_var);
    c.number("init_pos_inflation", s.filter.init_pos_inflation);
    c.integer("coast_ticks", s.filter.coast_ticks);
    c.integer("drop_ticks", s.filter.drop_ticks);
    c.finish();
  }
  if (const json* sv = r.get("solver")) {
    ObjectReader c(*sv, r.child("solver"));
    c.number("share", s.solver.share);
    c.number("max_speed", s.solver.max_speed);
    c.number("tie_break_bias", s.solver.tie_break_bias);
    c.finish();
  }
  const json& agents = r.require("agents");
  if (!agents.is_array()) throw ScenarioError(r.child("agents"), "expected an array");
  for (std::size_t i = 0; i < agents.size(); ++i)
    s.agents.push_back(read_agent(agents[i], r.child("agents") + "/" + std::to_string(i)));
  r.finish();
  validate(s);
  return s;
}

void validate(const Scenario& s) {
  if (!(s.tick_dt > 0.0)) throw ScenarioError("/tick_dt", "must be positive");
  if (!(s.duration >= s.tick_dt)) throw ScenarioError("/duration", "must be at least tick_dt");
  if (!(s.tau > 0.0)) throw ScenarioError("/tau", "must be positive");
  if (!s.camera.valid()) throw ScenarioError("/camera", "invalid camera model");
  if (!s.noise.valid()) throw ScenarioError("/noise", "invalid noise model");
  if (!s.solver.valid()) throw ScenarioError("/solver", "invalid solver settings");
  const FilterSettings& f = s.filter;
  if (!(f.process_noise >= 0.0 && f.own_vel_noise >= 0.0 && f.init_own_vel_var > 0.0 && f.init_vel_var > 0.0 &&
        f.init_pos_inflation > 0.0 && f.coast_ticks >= 0 && f.drop_ticks >= f.coast_ticks))
    throw ScenarioError("/filter", "invalid filter settings");
  if (s.agents.empty()) throw ScenarioError("/agents", "at least one agent required");
  std::set<int> ids;
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const AgentSpec& a = s.agents[i];
    const std::string ptr = "/agents/" + std::to_string(i);
    if (!ids.insert(a.id).second) throw ScenarioError(ptr + "/id", "duplicate agent id");
    if (!a.shape.valid()) throw ScenarioError(ptr + "/shape", "radii must be positive");
    if (!(a.inflation >= 1.0)) throw ScenarioError(ptr + "/inflation", "must be at least 1");
    if (!(a.dynamics.gain > 0.0)) throw ScenarioError(ptr + "/dynamics/gain", "must be positive");
    if ((a.policy.kind == PolicyKind::HeadOn || a.policy.kind == PolicyKind::Waypoint) && !(a.policy.speed >= 0.0))
      throw ScenarioError(ptr + "/policy/speed", "must be non-negative");
  }
  for (std::size_t i = 0; i < s.agents.size(); ++i) {
    const Policy& p = s.agents[i].policy;
    if (p.kind == PolicyKind::HeadOn) {
      if (p.toward >= 0 && (!ids.count(p.toward) || p.toward == s.agents[i].id))
        throw ScenarioError("/agents/" + std::to_string(i) + "/policy/toward", "must name another agent");
      if (p.toward < 0 && s.agents.size() < 2)
        throw ScenarioError("/agents/" + std::to_string(i) + "/policy", "head_on needs another agent");
    }
  }
}

Scenario parse_scenario(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ScenarioError("", std::string("malformed JSON: ") + e.what());
  }
  return scenario_from_json(doc);
}

Scenario load_scenario(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open scenario file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

json scenario_to_json(const Scenario& s) {
  json agents = json::array();
  for (const AgentSpec& a : s.agents) agents.push_back(agent_json(a));
  return json{{"name", s.name},
              {"duration", s.duration},
              {"tick_dt", s.tick_dt},
              {"tau", s.tau},
              {"seed", s.seed},
              {"camera",
               {{"focal_length", s.camera.focal_length},
                {"hfov_deg", s.camera.hfov / kDeg},
                {"vfov_deg", s.camera.vfov / kDeg},
                {"max_range", s.camera.max_range},
                {"rate", s.camera.rate}}},
              {"noise",
               {{"sigma_pixel", s.noise.sigma_pixel},
                {"sigma_dist_0", s.noise.sigma_dist_0},
                {"dist_ref", s.noise.dist_ref},
                {"dist_bias", s.noise.dist_bias},
                {"sigma_selfvel", s.noise.sigma_selfvel}}},
              {"filter",
               {{"process_noise", s.filter.process_noise},
                {"own_vel_noise", s.filter.own_vel_noise},
                {"init_own_vel_var", s.filter.init_own_vel_var},
                {"init_vel_var", s.filter.init_vel_var},
                {"init_pos_inflation", s.filter.init_pos_inflation},
                {"coast_ticks", s.filter.coast_ticks},
                {"drop_ticks", s.filter.drop_ticks}}},
              {"solver",
               {{"share", s.solver.share},
                {"max_speed", s.solver.max_speed},
                {"tie_break_bias", s.solver.tie_break_bias}}},
              {"agents", agents}};
}

std::string scenario_hash(const Scenario& s) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(scenario_to_json(s).dump())));
  return buf;
}

// ---------------------------------------------------------------------------

Scenario make_head_on(const HeadOnOptions& opt) {
  Scenario s;
  s.name = "head_on";
  s.duration = opt.duration;
  s.noise = opt.noise;
  const double half = 0.5 * opt.separation;
  for (int i = 0; i < 2; ++i) {
    AgentSpec a;
    a.id = i;
    a.position = {i == 0 ? -half : half, 0.0, 0.0};
    a.shape = opt.shape;
    a.inflation = opt.inflation;
    a.dynamics = opt.dynamics;
    a.policy.kind = PolicyKind::HeadOn;
    a.policy.speed = opt.speed;
    a.policy.toward = 1 - i;
    s.agents.push_back(a);
  }
  return s;
}

Scenario make_crossing(std::uint64_t seed) {
  Rng rng(seed);
  Scenario s;
  s.name = "crossing";
  s.seed = seed;
  s.noise = NoiseModel::noiseless();
  const double angle = (135.0 + 45.0 * rng.uniform()) * kDeg;
  const double heading0 = 2.0 * std::numbers::pi * rng.uniform();
  const double meet_time = 3.5 + 1.5 * rng.uniform();
  const Vec3 meet{rng.uniform() - 0.5, rng.uniform() - 0.5, 0.0};
  s.duration = meet_time + 4.0;
  for (int i = 0; i < 2; ++i) {
    const double yaw = heading0 + (i == 0 ? 0.0 : angle);
    const double speed = 0.8 + 0.4 * rng.uniform();
    const Vec3 dir{std::cos(yaw), std::sin(yaw), 0.0};
    AgentSpec a;
    a.id = i;
    a.position = meet - dir * (speed * meet_time) + Vec3{0.0, 0.0, 0.3 * (rng.uniform() - 0.5)};
    a.yaw_deg = yaw / kDeg;
    a.policy.kind = PolicyKind::ConstantVel;
    a.policy.velocity = dir * speed;
    s.agents.push_back(a);
  }
  return s;
}

Scenario make_noncooperative(std::uint64_t seed, double inflation) {
  Rng rng(seed ^ 0x6e6f6e636f6f70ULL);
  Scenario s;
  s.name = "noncooperative";
  s.seed = seed;
  s.noise = NoiseModel::noiseless();
  const double angle = (130.0 + 50.0 * rng.uniform()) * kDeg;
  const double heading0 = 2.0 * std::numbers::pi * rng.uniform();
  const double meet_time = 3.5 + 1.5 * rng.uniform();
  const Vec3 meet{rng.uniform() - 0.5, rng.uniform() - 0.5, 0.0};
  s.duration = meet_time + 4.0;
  for (int i = 0; i < 2; ++i) {
    const double yaw = heading0 + (i == 0 ? 0.0 : angle);
    const double speed = i == 0 ? 0.6 + 0.4 * rng.uniform() : 0.4 + 0.4 * rng.uniform();
    const Vec3 dir{std::cos(yaw), std::sin(yaw), 0.0};
    AgentSpec a;
    a.id = i;
    a.position = meet - dir * (speed * meet_time);
    a.velocity = i == 0 ? dir * speed : Vec3{};
    a.yaw_deg = yaw / kDeg;
    a.cooperative = i != 0;
    a.inflation = i == 0 ? 1.0 : inflation;
    a.policy.kind = PolicyKind::ConstantVel;
    a.policy.velocity = dir * speed;
    s.agents.push_back(a);
  }
  return s;
}

Scenario make_one_sided(double inflation) {
  Scenario s;
  s.name = "one_sided";
  s.noise = NoiseModel::noiseless();
  s.duration = 10.0;
  AgentSpec held;
  held.id = 0;
  held.position = {0.0, 0.0, 0.0};
  held.yaw_deg = 0.0;  // looks along +x, away from the operator
  held.inflation = inflation;
  held.policy.kind = PolicyKind::Stationary;
  AgentSpec op;
  op.id = 1;
  op.position = {-5.0, 0.05, 0.0};
  op.yaw_deg = 0.0;
  op.inflation = inflation;
  op.policy.kind = PolicyKind::HeadOn;
  op.policy.speed = 0.8;
  op.policy.toward = 0;
  s.agents = {held, op};
  return s;
}

}  // namespace qorca
