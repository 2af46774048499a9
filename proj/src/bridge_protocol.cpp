/*
 * bridge_protocol.cpp
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

#include "qorca/bridge_protocol.hpp"

#include <cmath>
#include <initializer_list>
#include <limits>
#include <set>

#include "qorca/analysis.hpp"

namespace qorca::bridge {

using nlohmann::json;

namespace {

[[noreturn]] void malformed(const std::string& what) { throw ProtocolError(ErrorCode::Malformed, what); }

void expect_keys(const json& obj, const std::string& where, std::initializer_list<const char*> required,
                 std::initializer_list<const char*> optional = {}) {
  if (!obj.is_object()) malformed(where + " must be an object");
  std::set<std::string> allowed;
  for (const char* k : required) {
    if (!obj.contains(k)) malformed(where + " is missing \"" + k + "\"");
    allowed.insert(k);
  }
  for (const char* k : optional) allowed.insert(k);
  for (const auto& [k, v] : obj.items())
    if (!allowed.count(k)) malformed(where + " has unknown key \"" + k + "\"");
}

double get_number(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number()) malformed(where + "." + key + " must be a number");
  const double d = v.get<double>();
  if (!std::isfinite(d)) malformed(where + "." + key + " must be finite");
  return d;
}

std::int64_t get_integer(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_number_integer()) malformed(where + "." + key + " must be an integer");
  return v.get<std::int64_t>();
}

int get_id(const json& obj, const char* key, const std::string& where) {
  const std::int64_t v = get_integer(obj, key, where);
  if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max())
    malformed(where + "." + key + " is out of range");
  return static_cast<int>(v);
}

bool get_bool(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_boolean()) malformed(where + "." + key + " must be a boolean");
  return v.get<bool>();
}

Vec3 get_vec(const json& obj, const char* key, const std::string& where) {
  const json& v = obj.at(key);
  if (!v.is_array() || v.size() != 3) malformed(where + "." + key + " must be an array of 3 numbers");
  double c[3];
  for (std::size_t i = 0; i < 3; ++i) {
    if (!v[i].is_number()) malformed(where + "." + key + " must be an array of 3 numbers");
    c[i] = v[i].get<double>();
    if (!std::isfinite(c[i])) malformed(where + "." + key + " must be finite");
  }
  return {c[0], c[1], c[2]};
}

json vec_json(const Vec3& v) { return json::array({v.x, v.y, v.z}); }

StateFrame parse_state(const json& j) {
  expect_keys(j, "state", {"proto", "type", "tick", "sim_time", "agents"});
  StateFrame f;
  f.tick = static_cast<long>(get_integer(j, "tick", "state"));
  f.sim_time = get_number(j, "sim_time", "state");
  if (!j.at("agents").is_array()) malformed("state.agents must be an array");
  for (const json& ja : j.at("agents")) {
    const std::string w = "state.agents[]";
    expect_keys(ja, w, {"id", "pos", "vel", "preferred", "commanded", "tracks", "planes", "dance_flag"});
    AgentState a;
    a.id = get_id(ja, "id", w);
    a.pos = get_vec(ja, "pos", w);
    a.vel = get_vec(ja, "vel", w);
    a.preferred = get_vec(ja, "preferred", w);
    a.commanded = get_vec(ja, "commanded", w);
    a.dance_flag = get_bool(ja, "dance_flag", w);
    if (!ja.at("tracks").is_array() || !ja.at("planes").is_array()) malformed(w + " tracks/planes must be arrays");
    for (const json& jt : ja.at("tracks")) {
      expect_keys(jt, w + ".tracks[]", {"id", "rel_pos", "vel", "usable"});
      a.tracks.push_back({get_id(jt, "id", "track"), get_vec(jt, "rel_pos", "track"), get_vec(jt, "vel", "track"),
                          get_bool(jt, "usable", "track")});
    }
    for (const json& jp : ja.at("planes")) {
      expect_keys(jp, w + ".planes[]", {"neighbor", "in_obstacle", "point", "normal", "u"});
      a.planes.push_back({get_id(jp, "neighbor", "plane"), get_bool(jp, "in_obstacle", "plane"),
                          get_vec(jp, "point", "plane"), get_vec(jp, "normal", "plane"), get_vec(jp, "u", "plane")});
    }
    f.agents.push_back(std::move(a));
  }
  return f;
}

ErrorCode parse_error_code(const std::string& name) {
  for (ErrorCode c : {ErrorCode::Malformed, ErrorCode::UnsupportedProto, ErrorCode::UnknownType,
                      ErrorCode::UnknownAgent, ErrorCode::NotExternal, ErrorCode::AgentClaimed, ErrorCode::StaleSeq})
    if (error_code_name(c) == name) return c;
  malformed("error.code \"" + name + "\" is not a known code");
}

}  // namespace

std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Malformed: return "malformed";
    case ErrorCode::UnsupportedProto: return "unsupported_proto";
    case ErrorCode::UnknownType: return "unknown_type";
    case ErrorCode::UnknownAgent: return "unknown_agent";
    case ErrorCode::NotExternal: return "not_external";
    case ErrorCode::AgentClaimed: return "agent_claimed";
    case ErrorCode::StaleSeq: return "stale_seq";
  }
  return "malformed";
}

Message parse_message(std::string_view text) {
  const json j = json::parse(text, nullptr, false);
  if (j.is_discarded()) malformed("not valid JSON");
  if (!j.is_object()) malformed("message must be a JSON object");
  if (!j.contains("proto") || !j.at("proto").is_number_integer())
    throw ProtocolError(ErrorCode::UnsupportedProto, "missing integer \"proto\"");
  if (j.at("proto").get<std::int64_t>() != kProtocolVersion)
    throw ProtocolError(ErrorCode::UnsupportedProto, "proto " + j.at("proto").dump() + " is not supported");
  if (!j.contains("type") || !j.at("type").is_string()) malformed("missing string \"type\"");
  const std::string type = j.at("type").get<std::string>();

  if (type == "state") return parse_state(j);
  if (type == "command") {
    expect_keys(j, "command", {"proto", "type", "agent_id", "preferred_vel", "client_seq"});
    return CommandFrame{get_id(j, "agent_id", "command"), get_vec(j, "preferred_vel", "command"),
                        get_integer(j, "client_seq", "command")};
  }
  if (type == "ack") {
    expect_keys(j, "ack", {"proto", "type", "agent_id", "client_seq", "effective_tick", "applied_vel", "clamped"});
    return AckFrame{get_id(j, "agent_id", "ack"), get_integer(j, "client_seq", "ack"),
                    static_cast<long>(get_integer(j, "effective_tick", "ack")), get_vec(j, "applied_vel", "ack"),
                    get_bool(j, "clamped", "ack")};
  }
  if (type == "error") {
    expect_keys(j, "error", {"proto", "type", "code", "message"}, {"agent_id", "client_seq"});
    if (!j.at("code").is_string() || !j.at("message").is_string()) malformed("error.code/message must be strings");
    ErrorFrame e;
    e.code = parse_error_code(j.at("code").get<std::string>());
    e.message = j.at("message").get<std::string>();
    if (j.contains("agent_id")) e.agent_id = get_id(j, "agent_id", "error");
    if (j.contains("client_seq")) e.client_seq = get_integer(j, "client_seq", "error");
    return e;
  }
  throw ProtocolError(ErrorCode::UnknownType, "unknown message type \"" + type + "\"");
}

json to_json(const Message& message) {
  json j = {{"proto", kProtocolVersion}};
  std::visit(
      [&j](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, StateFrame>) {
          j["type"] = "state";
          j["tick"] = m.tick;
          j["sim_time"] = m.sim_time;
          json agents = json::array();
          for (const AgentState& a : m.agents) {
            json tracks = json::array(), planes = json::array();
            for (const TrackState& t : a.tracks)
              tracks.push_back(
                  {{"id", t.id}, {"rel_pos", vec_json(t.rel_pos)}, {"vel", vec_json(t.vel)}, {"usable", t.usable}});
            for (const PlaneState& p : a.planes)
              planes.push_back({{"neighbor", p.neighbor},
                                {"in_obstacle", p.in_obstacle},
                                {"point", vec_json(p.point)},
                                {"normal", vec_json(p.normal)},
                                {"u", vec_json(p.u)}});
            agents.push_back({{"id", a.id},
                              {"pos", vec_json(a.pos)},
                              {"vel", vec_json(a.vel)},
                              {"preferred", vec_json(a.preferred)},
                              {"commanded", vec_json(a.commanded)},
                              {"tracks", std::move(tracks)},
                              {"planes", std::move(planes)},
                              {"dance_flag", a.dance_flag}});
          }
          j["agents"] = std::move(agents);
        } else if constexpr (std::is_same_v<T, CommandFrame>) {
          j["type"] = "command";
          j["agent_id"] = m.agent_id;
          j["preferred_vel"] = vec_json(m.preferred_vel);
          j["client_seq"] = m.client_seq;
        } else if constexpr (std::is_same_v<T, AckFrame>) {
          j["type"] = "ack";
          j["agent_id"] = m.agent_id;
          j["client_seq"] = m.client_seq;
          j["effective_tick"] = m.effective_tick;
          j["applied_vel"] = vec_json(m.applied_vel);
          j["clamped"] = m.clamped;
        } else {
          j["type"] = "error";
          j["code"] = std::string(error_code_name(m.code));
          j["message"] = m.message;
          if (m.agent_id) j["agent_id"] = *m.agent_id;
          if (m.client_seq) j["client_seq"] = *m.client_seq;
        }
      },
      message);
  return j;
}

std::string serialize(const Message& message) { return to_json(message).dump(); }

StateFrame make_state_frame(const TickRecord& record) {
  StateFrame f;
  f.tick = record.tick;
  f.sim_time = record.time;
  for (const AgentRecord& a : record.agents) {
    AgentState s;
    s.id = a.id;
    s.pos = a.pos;
    s.vel = a.vel;
    s.preferred = a.preferred;
    s.commanded = a.commanded;
    for (const TrackRecord& t : a.tracks) s.tracks.push_back({t.id, t.rel_pos, t.vel, t.usable});
    for (const PlaneRecord& p : a.planes) {
      s.planes.push_back({p.neighbor, p.in_obstacle, p.point, p.normal, p.u});
      const AgentRecord* other = record.agent(p.neighbor);
      if (other && dance_tick(&p, other->plane_for(a.id))) s.dance_flag = true;
    }
    f.agents.push_back(std::move(s));
  }
  return f;
}

}  // namespace qorca::bridge
