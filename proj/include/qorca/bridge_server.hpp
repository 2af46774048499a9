/*
 * bridge_server.hpp
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

#include <memory>
#include <stdexcept>
#include <string>

#include "qorca/bridge_live.hpp"

namespace qorca::bridge {

class PortInUseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ServerOptions {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  ///< 0 picks a free port
  LiveOptions live;
};

/// HTTP + WebSocket front end for a LiveSession.
///   /ws            live protocol
///   GET /scenario  active scenario document
///   GET /healthz   run status
class BridgeServer {
 public:
  /// Binds immediately; throws PortInUseError when the port is taken.
  BridgeServer(Scenario scenario, ServerOptions options = {});
  ~BridgeServer();
  BridgeServer(const BridgeServer&) = delete;
  BridgeServer& operator=(const BridgeServer&) = delete;

  unsigned short port() const;
  void start();
  void stop();

  LiveSession& session();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace qorca::bridge
