#pragma once

#include <sys/socket.h>

#include <atomic>
#include <chrono>
#include <cstdlib>
#include <memory>
#include <mutex>
#include <optional>
#include <regex>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>
#include <nlohmann/json.hpp>

#include "slg/service/session.hpp"

namespace slg {

namespace net = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = net::ip::tcp;

struct BindAddress {
  std::string host = "127.0.0.1";
  unsigned short port = 8080;
};

// "host:port", ":port" or "port"; unset or empty gives the default.
inline BindAddress parse_bind(const char* spec) {
  BindAddress b;
  if (!spec || !*spec) return b;
  const std::string s(spec);
  const auto colon = s.rfind(':');
  const std::string host = colon == std::string::npos ? "" : s.substr(0, colon);
  const std::string port = colon == std::string::npos ? s : s.substr(colon + 1);
  if (!host.empty()) b.host = host;
  try {
    std::size_t used = 0;
    const int p = std::stoi(port, &used);
    if (used != port.size() || p < 0 || p > 65535) throw std::invalid_argument(port);
    b.port = static_cast<unsigned short>(p);
  } catch (const std::exception&) {
    throw ConfigError("invalid bind address '" + s + "'");
  }
  return b;
}

inline BindAddress bind_from_env() { return parse_bind(std::getenv("SLG_BIND")); }

struct HttpReply {
  http::status status = http::status::ok;
  nlohmann::json body;
};

// Transport-independent request routing.
class Router {
 public:
  explicit Router(SessionManager& sessions) : sessions_(sessions) {}

  HttpReply handle(http::verb method, const std::string& target, const std::string& body) {
    try {
      return route(method, target, body);
    } catch (const SessionError& e) {
      return error(e.kind() == "UnknownSession" ? http::status::not_found : http::status::conflict, e.kind(), e.what());
    } catch (const nlohmann::json::exception& e) {
      return error(http::status::bad_request, "BadRequest", e.what());
    } catch (const Error& e) {
      return error(http::status::bad_request, e.kind(), e.what());
    } catch (const std::exception& e) {
      return error(http::status::internal_server_error, "Internal", e.what());
    }
  }

 private:
  static HttpReply error(http::status s, const std::string& kind, const std::string& msg) {
    return {s, {{"error", {{"kind", kind}, {"message", msg}}}}};
  }

  static nlohmann::json parse_body(const std::string& body) {
    if (body.empty()) return nlohmann::json::object();
    return nlohmann::json::parse(body);
  }

  HttpReply route(http::verb method, std::string target, const std::string& body) {
    if (auto q = target.find('?'); q != std::string::npos) target.resize(q);
    static const std::regex session_path(R"(^/sessions/([A-Za-z0-9_-]+)(/([a-z]+))?$)");
    std::smatch m;
    if (target == "/maps" && method == http::verb::get) {
      nlohmann::json ids = nlohmann::json::array();
      for (const auto& map : sessions_.maps()) ids.push_back(map.id);
      return {http::status::ok, {{"maps", ids}}};
    }
    if (target.rfind("/maps/", 0) == 0 && method == http::verb::get) {
      const std::string id = target.substr(6);
      for (const auto& map : sessions_.maps())
        if (map.id == id) return {http::status::ok, map_to_json(map)};
      return error(http::status::not_found, "UnknownMap", "no map '" + id + "'");
    }
    if (target == "/sessions") {
      if (method == http::verb::post) {
        auto s = sessions_.create(parse_body(body));
        return {http::status::created, {{"session", s->id()}, {"state", s->state()}}};
      }
      if (method == http::verb::get) return {http::status::ok, {{"sessions", sessions_.ids()}}};
    }
    if (!std::regex_match(target, m, session_path)) return error(http::status::not_found, "NotFound", "no route " + target);
    const std::string id = m[1], action = m[3];
    auto s = sessions_.get(id);
    const auto j = parse_body(body);
    if (action.empty() && method == http::verb::delete_) {
      sessions_.remove(id);
      return {http::status::ok, {{"deleted", id}}};
    }
    if (action == "state" && method == http::verb::get) return {http::status::ok, s->state()};
    if (action == "events" && method == http::verb::get) return {http::status::ok, {{"events", s->events()}}};
    if (method != http::verb::post) return error(http::status::method_not_allowed, "MethodNotAllowed", target);
    if (action == "sentence") {
      if (!j.contains("text") || !j["text"].is_string()) return error(http::status::bad_request, "BadRequest", "missing text");
      return {http::status::ok, s->sentence(j["text"].get<std::string>())};
    }
    if (action == "step") return {http::status::ok, s->step(j.value("count", 1))};
    if (action == "run") {
      s->run(std::chrono::milliseconds(j.value("interval_ms", 1000)), j.value("steps", 0));
      return {http::status::ok, {{"running", true}}};
    }
    if (action == "pause") {
      s->pause();
      return {http::status::ok, {{"running", false}}};
    }
    return error(http::status::not_found, "NotFound", "no route " + target);
  }

  SessionManager& sessions_;
};

// Blocking thread-per-connection server. Plain requests go to the router;
// a WebSocket upgrade on /sessions/{id}/events subscribes to that session.
class Server {
 public:
  Server(SessionManager& sessions, BindAddress bind)
      : sessions_(sessions), router_(sessions), acceptor_(ioc_) {
    const tcp::endpoint ep(net::ip::make_address(bind.host), bind.port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  ~Server() { stop(); }

  unsigned short port() const { return acceptor_.local_endpoint().port(); }

  void start() {
    accept_thread_ = std::thread([this] { accept_loop(); });
  }

  // Blocks until stop() is called from another thread.
  void wait() {
    std::unique_lock lock(mu_);
    stopped_cv_.wait(lock, [&] { return stopping_; });
  }

  void stop() {
    {
      std::lock_guard lock(mu_);
      if (stopping_ && !accept_thread_.joinable()) return;
      stopping_ = true;
      for (int fd : open_fds_) ::shutdown(fd, SHUT_RDWR);
      for (auto& q : streams_) q->close();
    }
    stopped_cv_.notify_all();
    ::shutdown(acceptor_.native_handle(), SHUT_RDWR);
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> threads;
    {
      std::lock_guard lock(mu_);
      threads.swap(threads_);
    }
    for (auto& t : threads) t.join();
    beast::error_code ec;
    acceptor_.close(ec);
  }

 private:
  void accept_loop() {
    for (;;) {
      tcp::socket sock(ioc_);
      beast::error_code ec;
      acceptor_.accept(sock, ec);
      std::lock_guard lock(mu_);
      if (stopping_) return;
      if (ec) continue;
      open_fds_.insert(sock.native_handle());
      threads_.emplace_back([this, s = std::move(sock)]() mutable { serve(std::move(s)); });
    }
  }

  void forget(int fd) {
    std::lock_guard lock(mu_);
    open_fds_.erase(fd);
  }

  void serve(tcp::socket sock) {
    const int fd = sock.native_handle();
    beast::flat_buffer buf;
    beast::error_code ec;
    for (;;) {
      http::request<http::string_body> req;
      http::read(sock, buf, req, ec);
      if (ec) break;
      if (websocket::is_upgrade(req)) {
        stream(std::move(sock), req);
        forget(fd);
        return;
      }
      const auto reply = router_.handle(req.method(), std::string(req.target()), req.body());
      http::response<http::string_body> res{reply.status, req.version()};
      res.set(http::field::content_type, "application/json");
      res.set(http::field::access_control_allow_origin, "*");
      res.keep_alive(req.keep_alive());
      res.body() = reply.body.dump();
      res.prepare_payload();
      http::write(sock, res, ec);
      if (ec || !res.keep_alive()) break;
    }
    sock.shutdown(tcp::socket::shutdown_both, ec);
    forget(fd);
  }

  void stream(tcp::socket sock, const http::request<http::string_body>& req) {
    static const std::regex events_path(R"(^/sessions/([A-Za-z0-9_-]+)/events(\?.*)?$)");
    std::smatch m;
    const std::string target(req.target());
    websocket::stream<tcp::socket> ws(std::move(sock));
    beast::error_code ec;
    std::shared_ptr<Session> session;
    if (std::regex_match(target, m, events_path)) {
      try {
        session = sessions_.get(m[1]);
      } catch (const SessionError&) {
      }
    }
    if (!session) {
      http::response<http::string_body> res{http::status::not_found, req.version()};
      res.set(http::field::content_type, "application/json");
      res.body() = nlohmann::json{{"error", {{"kind", "UnknownSession"}, {"message", "no stream at " + target}}}}.dump();
      res.prepare_payload();
      http::write(ws.next_layer(), res, ec);
      return;
    }
    ws.accept(req, ec);
    if (ec) return;
    std::shared_ptr<MessageQueue> q;
    try {
      q = session->subscribe();
    } catch (const SessionError&) {
      return;
    }
    {
      std::lock_guard lock(mu_);
      if (stopping_) q->close();
      streams_.insert(q);
    }
    // Client frames are never read; a disconnect surfaces as a failed write.
    ws.text(true);
    while (auto msg = q->pop()) {
      ws.write(net::buffer(*msg), ec);
      if (ec) break;
    }
    if (!ec) ws.close(websocket::close_code::going_away, ec);
    session->unsubscribe(q);
    std::lock_guard lock(mu_);
    streams_.erase(q);
  }

  SessionManager& sessions_;
  Router router_;
  net::io_context ioc_;
  tcp::acceptor acceptor_;
  std::thread accept_thread_;
  std::mutex mu_;
  std::condition_variable stopped_cv_;
  bool stopping_ = false;
  std::set<int> open_fds_;
  std::set<std::shared_ptr<MessageQueue>> streams_;
  std::vector<std::thread> threads_;
};

}  // namespace slg
