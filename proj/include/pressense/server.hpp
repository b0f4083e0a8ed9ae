#pragma once

// WebSocket and HTTP front end over SessionHandler (Boost.Beast).
//
//   GET /health    {"status": "ok", "sessions": <open sessions>}
//   GET /layouts   {"layouts": [<layout object>, ...]}
//   /session       WebSocket upgrade; text messages per service.hpp
//
// Each connection runs on its own thread and owns its handler; connections
// share nothing except the read-only layout registry and a session counter.

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio/ip/tcp.hpp>
#include <boost/asio/signal_set.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "pressense/service.hpp"

namespace pressense {

struct ServerConfig {
  std::string address = "127.0.0.1";
  unsigned short port = 8765;  // 0 picks a free port
  std::string layouts_dir;
};

class Server {
 public:
  explicit Server(ServerConfig cfg)
      : cfg_(std::move(cfg)),
        layouts_(LayoutRegistry::from_directory(cfg_.layouts_dir)),
        acceptor_(ioc_) {
    namespace net = boost::asio;
    const net::ip::tcp::endpoint ep(net::ip::make_address(cfg_.address), cfg_.port);
    acceptor_.open(ep.protocol());
    acceptor_.set_option(net::socket_base::reuse_address(true));
    acceptor_.bind(ep);
    acceptor_.listen();
  }

  ~Server() {
    stop();
    std::vector<std::thread> workers;
    {
      std::lock_guard lock(mu_);
      workers.swap(workers_);
    }
    for (auto& t : workers)
      if (t.joinable()) t.join();
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  unsigned short port() const { return acceptor_.local_endpoint().port(); }
  int open_sessions() const noexcept { return sessions_.load(); }

  /// Calls stop() when SIGINT or SIGTERM arrives while run() is active.
  void stop_on_signals() {
    signals_.emplace(ioc_, SIGINT, SIGTERM);
    signals_->async_wait([this](const boost::system::error_code& ec, int) {
      if (!ec) stop();
    });
  }

  /// Accepts connections until stop() is called.
  void run() {
    accept();
    ioc_.run();
  }

  void stop() {
    if (stopped_.exchange(true)) return;
    boost::asio::post(ioc_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
      if (signals_) signals_->cancel(ec);
    });
    std::lock_guard lock(mu_);
    for (auto& weak : sockets_)
      if (auto s = weak.lock()) {
        boost::system::error_code ec;
        s->shutdown(boost::asio::ip::tcp::socket::shutdown_both, ec);
      }
  }

 private:
  using tcp = boost::asio::ip::tcp;

  void accept() {
    acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
      if (ec || stopped_) return;
      auto s = std::make_shared<tcp::socket>(std::move(socket));
      {
        std::lock_guard lock(mu_);
        sockets_.push_back(s);
        workers_.emplace_back([this, s] { serve(s); });
      }
      accept();
    });
  }

  void serve(const std::shared_ptr<tcp::socket>& socket) {
    namespace beast = boost::beast;
    namespace http = beast::http;
    try {
      beast::flat_buffer buffer;
      http::request<http::string_body> req;
      http::read(*socket, buffer, req);
      if (beast::websocket::is_upgrade(req)) {
        if (req.target() != "/session") {
          respond(*socket, req, http::status::not_found, R"({"error": "unknown endpoint"})");
          return;
        }
        websocket(*socket, req);
        return;
      }
      if (req.method() != http::verb::get) {
        respond(*socket, req, http::status::method_not_allowed, R"({"error": "method not allowed"})");
      } else if (req.target() == "/health") {
        respond(*socket, req, http::status::ok,
                nlohmann::json{{"status", "ok"}, {"sessions", sessions_.load()}}.dump());
      } else if (req.target() == "/layouts") {
        nlohmann::ordered_json j;
        j["layouts"] = nlohmann::ordered_json::array();
        for (const auto& [name, layout] : layouts_.all()) j["layouts"].push_back(to_json(layout));
        respond(*socket, req, http::status::ok, j.dump());
      } else {
        respond(*socket, req, http::status::not_found, R"({"error": "unknown endpoint"})");
      }
    } catch (const std::exception&) {
      // Connection dropped or unreadable request; nothing to report to.
    }
  }

  static void respond(boost::asio::ip::tcp::socket& socket,
                      const boost::beast::http::request<boost::beast::http::string_body>& req,
                      boost::beast::http::status status, std::string body) {
    namespace http = boost::beast::http;
    http::response<http::string_body> res{status, req.version()};
    res.set(http::field::content_type, "application/json");
    res.set(http::field::access_control_allow_origin, "*");
    res.keep_alive(false);
    res.body() = std::move(body);
    res.prepare_payload();
    http::write(socket, res);
    boost::system::error_code ec;
    socket.shutdown(boost::asio::ip::tcp::socket::shutdown_send, ec);
  }

  void websocket(boost::asio::ip::tcp::socket& socket,
                 const boost::beast::http::request<boost::beast::http::string_body>& req) {
    namespace beast = boost::beast;
    beast::websocket::stream<boost::asio::ip::tcp::socket&> ws(socket);
    ++sessions_;
    struct Counter {
      std::atomic<int>& n;
      ~Counter() { --n; }
    } counter{sessions_};
    ws.accept(req);
    ws.text(true);
    SessionHandler handler(layouts_);
    beast::flat_buffer buffer;
    for (;;) {
      buffer.clear();
      beast::error_code ec;
      ws.read(buffer, ec);
      if (ec) return;
      auto reply = handler.handle(beast::buffers_to_string(buffer.data()));
      for (const auto& m : reply.messages) ws.write(boost::asio::buffer(m));
      if (reply.close) {
        ws.close(beast::websocket::close_code::policy_error, ec);
        return;
      }
    }
  }

  ServerConfig cfg_;
  const LayoutRegistry layouts_;
  boost::asio::io_context ioc_;
  tcp::acceptor acceptor_;
  std::optional<boost::asio::signal_set> signals_;
  std::atomic<bool> stopped_{false};
  std::atomic<int> sessions_{0};
  std::mutex mu_;
  std::vector<std::weak_ptr<tcp::socket>> sockets_;
  std::vector<std::thread> workers_;
};

}  // namespace pressense
