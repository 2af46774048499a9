/*
 * bridge_server.cpp
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

#include "qorca/bridge_server.hpp"

#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

namespace qorca::bridge {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, LiveSession& live) : ws_(std::move(socket)), live_(live) {}
  ~WsSession() { close(); }

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    id_ = live_.connect(box_);
    connected_ = true;
    std::weak_ptr<WsSession> weak = shared_from_this();
    auto exec = ws_.get_executor();
    box_->set_notify([weak, exec] {
      net::post(exec, [weak] {
        if (auto self = weak.lock()) self->pump();
      });
    });
    read();
    pump();
  }

  void read() {
    ws_.async_read(in_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->close();
      self->live_.receive(self->id_, beast::buffers_to_string(self->in_.data()));
      self->in_.consume(self->in_.size());
      self->read();
    });
  }

  void pump() {
    if (writing_ || closed_) return;
    auto next = box_->pop();
    if (!next) return;
    writing_ = true;
    out_ = std::move(*next);
    ws_.text(true);
    ws_.async_write(net::buffer(out_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      self->writing_ = false;
      if (ec) return self->close();
      self->pump();
    });
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    box_->set_notify({});
    if (connected_) live_.disconnect(id_);
  }

  websocket::stream<beast::tcp_stream> ws_;
  LiveSession& live_;
  std::shared_ptr<Outbox> box_ = std::make_shared<Outbox>();
  LiveSession::ConnectionId id_ = 0;
  beast::flat_buffer in_;
  std::string out_;
  bool writing_ = false;
  bool connected_ = false;
  bool closed_ = false;
};

nlohmann::json health_json(const HealthStatus& h) {
  nlohmann::json j = {{"status", h.status}, {"tick", h.tick}, {"sim_time", h.sim_time}, {"clients", h.clients}};
  if (h.abort_reason) j["abort_reason"] = *h.abort_reason;
  return j;
}

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket socket, LiveSession& live) : stream_(std::move(socket)), live_(live) {}

  void run() { read(); }

 private:
  void read() {
    req_ = {};
    stream_.expires_after(std::chrono::seconds(30));
    http::async_read(stream_, buffer_, req_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->shutdown();
      self->handle();
    });
  }

  void handle() {
    const std::string target(req_.target());
    const std::string path = target.substr(0, target.find('?'));
    if (websocket::is_upgrade(req_)) {
      if (path == "/ws") {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), live_)->run(std::move(req_));
        return;
      }
      return respond(http::status::not_found, "text/plain", "unknown endpoint\n");
    }
    if (req_.method() != http::verb::get) return respond(http::status::method_not_allowed, "text/plain", "GET only\n");
    if (path == "/scenario") return respond(http::status::ok, "application/json", scenario_to_json(live_.scenario()).dump());
    if (path == "/healthz") return respond(http::status::ok, "application/json", health_json(live_.health()).dump());
    respond(http::status::not_found, "text/plain", "unknown endpoint\n");
  }

  void respond(http::status status, const char* type, std::string body) {
    auto res = std::make_shared<http::response<http::string_body>>(status, req_.version());
    res->set(http::field::content_type, type);
    res->keep_alive(req_.keep_alive());
    res->body() = std::move(body);
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res](beast::error_code ec, std::size_t) {
      if (ec || !res->keep_alive()) return self->shutdown();
      self->read();
    });
  }

  void shutdown() {
    beast::error_code ec;
    stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
  }

  beast::tcp_stream stream_;
  LiveSession& live_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> req_;
};

}  // namespace

struct BridgeServer::Impl {
  Impl(Scenario scenario, const ServerOptions& options)
      : live(std::move(scenario), options.live), ioc(1), acceptor(ioc) {
    beast::error_code ec;
    const tcp::endpoint endpoint(net::ip::make_address(options.address, ec), options.port);
    if (ec) throw std::invalid_argument("bad bind address " + options.address);
    acceptor.open(endpoint.protocol(), ec);
    if (!ec) acceptor.set_option(net::socket_base::reuse_address(true), ec);
    if (!ec) acceptor.bind(endpoint, ec);
    if (ec == net::error::address_in_use || ec == net::error::access_denied)
      throw PortInUseError("port " + std::to_string(options.port) + " is not available: " + ec.message());
    if (!ec) acceptor.listen(net::socket_base::max_listen_connections, ec);
    if (ec) throw std::runtime_error("cannot listen on port " + std::to_string(options.port) + ": " + ec.message());
  }

  void accept() {
    acceptor.async_accept(net::make_strand(ioc), [this](beast::error_code ec, tcp::socket socket) {
      if (ec) {
        if (ec == net::error::operation_aborted) return;
      } else {
        socket.set_option(tcp::no_delay(true), ec);
        std::make_shared<HttpSession>(std::move(socket), live)->run();
      }
      accept();
    });
  }

  // Declared first so it outlives every session still queued on ioc.
  LiveSession live;
  net::io_context ioc;
  tcp::acceptor acceptor;
  std::thread io_thread;
  bool started = false;
};

BridgeServer::BridgeServer(Scenario scenario, ServerOptions options)
    : impl_(std::make_unique<Impl>(std::move(scenario), options)) {}

BridgeServer::~BridgeServer() { stop(); }

unsigned short BridgeServer::port() const { return impl_->acceptor.local_endpoint().port(); }

LiveSession& BridgeServer::session() { return impl_->live; }

void BridgeServer::start() {
  if (impl_->started) return;
  impl_->started = true;
  impl_->accept();
  impl_->io_thread = std::thread([this] { impl_->ioc.run(); });
  impl_->live.start();
}

void BridgeServer::stop() {
  if (!impl_ || !impl_->started) return;
  impl_->started = false;
  impl_->live.stop();
  net::post(impl_->ioc, [this] {
    beast::error_code ec;
    impl_->acceptor.close(ec);
  });
  impl_->ioc.stop();
  if (impl_->io_thread.joinable()) impl_->io_thread.join();
}

}  // namespace qorca::bridge
