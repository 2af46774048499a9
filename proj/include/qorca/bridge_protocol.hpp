/*
 * bridge_protocol.hpp
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

// Live-steering wire format, version 1. One JSON object per WebSocket text
// frame, always carrying "proto": 1 and a "type" of state, command, ack or
// error. Unknown keys are rejected.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

#include "qorca/sim_engine.hpp"

namespace qorca::bridge {

inline constexpr int kProtocolVersion = 1;

struct TrackState {
  int id = 0;
  Vec3 rel_pos;
  Vec3 vel;
  bool usable = false;
  bool operator==(const TrackState&) const = default;
};

struct PlaneState {
  int neighbor = 0;
  bool in_obstacle = false;
  Vec3 point;
  Vec3 normal;
  Vec3 u;
  bool operator==(const PlaneState&) const = default;
};

struct AgentState {
  int id = 0;
  Vec3 pos;
  Vec3 vel;
  Vec3 preferred;
  Vec3 commanded;
  std::vector<TrackState> tracks;
  std::vector<PlaneState> planes;
  bool dance_flag = false;  ///< this tick, u toward some neighbor points the same way as its u back
  bool operator==(const AgentState&) const = default;
};

struct StateFrame {
  long tick = 0;
  double sim_time = 0.0;
  std::vector<AgentState> agents;
  bool operator==(const StateFrame&) const = default;
};

struct CommandFrame {
  int agent_id = 0;
  Vec3 preferred_vel;
  std::int64_t client_seq = 0;
  bool operator==(const CommandFrame&) const = default;
};

struct AckFrame {
  int agent_id = 0;
  std::int64_t client_seq = 0;
  long effective_tick = 0;  ///< first tick that reads the command
  Vec3 applied_vel;         ///< after clamping to max_speed
  bool clamped = false;
  bool operator==(const AckFrame&) const = default;
};

enum class ErrorCode { Malformed, UnsupportedProto, UnknownType, UnknownAgent, NotExternal, AgentClaimed, StaleSeq };

std::string_view error_code_name(ErrorCode code);

struct ErrorFrame {
  ErrorCode code = ErrorCode::Malformed;
  std::string message;
  std::optional<int> agent_id;
  std::optional<std::int64_t> client_seq;
  bool operator==(const ErrorFrame&) const = default;
};

using Message = std::variant<StateFrame, CommandFrame, AckFrame, ErrorFrame>;

class ProtocolError : public std::runtime_error {
 public:
  ProtocolError(ErrorCode code, const std::string& message) : std::runtime_error(message), code_(code) {}
  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

Message parse_message(std::string_view text);
nlohmann::json to_json(const Message& message);
/// Compact dump of to_json; keys sort alphabetically.
std::string serialize(const Message& message);

StateFrame make_state_frame(const TickRecord& record);

}  // namespace qorca::bridge
