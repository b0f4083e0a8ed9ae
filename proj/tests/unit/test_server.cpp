#include <gtest/gtest.h>

#include <thread>

#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "pressense/server.hpp"

using namespace pressense;
namespace beast = boost::beast;
namespace http = beast::http;
using tcp = boost::asio::ip::tcp;

namespace {

struct Running {
  Server server;
  std::thread thread;
  explicit Running(ServerConfig c) : server(std::move(c)), thread([this] { server.run(); }) {}
  ~Running() {
    server.stop();
    thread.join();
  }
};

ServerConfig local() {
  ServerConfig c;
  c.port = 0;
  c.layouts_dir = PRESSENSE_LAYOUT_DIR;
  return c;
}

http::response<http::string_body> get(unsigned short port, const std::string& target) {
  boost::asio::io_context ioc;
  tcp::socket s(ioc);
  s.connect({boost::asio::ip::make_address("127.0.0.1"), port});
  http::request<http::empty_body> req{http::verb::get, target, 11};
  req.set(http::field::host, "localhost");
  http::write(s, req);
  beast::flat_buffer b;
  http::response<http::string_body> res;
  http::read(s, b, res);
  return res;
}

struct Client {
  boost::asio::io_context ioc;
  beast::websocket::stream<tcp::socket> ws{ioc};
  explicit Client(unsigned short port) {
    ws.next_layer().connect({boost::asio::ip::make_address("127.0.0.1"), port});
    ws.handshake("localhost", "/session");
  }
  nlohmann::json send(const nlohmann::json& j) {
    ws.write(boost::asio::buffer(j.dump()));
    beast::flat_buffer b;
    ws.read(b);
    return nlohmann::json::parse(beast::buffers_to_string(b.data()));
  }
};

}  // namespace

TEST(Server, HealthAndLayouts) {
  Running r(local());
  auto h = get(r.server.port(), "/health");
  EXPECT_EQ(h.result(), http::status::ok);
  EXPECT_EQ(nlohmann::json::parse(h.body())["status"], "ok");
  auto l = nlohmann::json::parse(get(r.server.port(), "/layouts").body());
  ASSERT_EQ(l["layouts"].size(), 1u);
  EXPECT_EQ(layout_from_json(l["layouts"][0]), qwerty_layout());
  EXPECT_EQ(get(r.server.port(), "/nope").result(), http::status::not_found);
}

TEST(Server, IsolatedWebSocketSessions) {
  Running r(local());
  Client a(r.server.port()), b(r.server.port());
  EXPECT_EQ(a.send({{"type", "config"}, {"session", "a"}, {"mode", "raw-events"}})["type"], "ack");
  // b has not been configured; its frame is a protocol error and does not touch a.
  nlohmann::json frame{{"type", "frame"}, {"session", "a"},
                       {"pressure", {{"width", 2}, {"height", 2}, {"data", {0, 0, 0, 0}}}}};
  EXPECT_EQ(b.send(frame)["code"], "protocol");
  auto ev = a.send(frame);
  EXPECT_EQ(ev["type"], "events");
  EXPECT_EQ(ev["frame"], 0);
  EXPECT_EQ(nlohmann::json::parse(get(r.server.port(), "/health").body())["sessions"], 2);

  b.ws.write(boost::asio::buffer(std::string("{not json")));
  beast::flat_buffer buf;
  b.ws.read(buf);
  EXPECT_EQ(nlohmann::json::parse(beast::buffers_to_string(buf.data()))["code"], "parse");
  beast::error_code ec;
  b.ws.read(buf, ec);
  EXPECT_EQ(ec, beast::websocket::error::closed);
  EXPECT_EQ(a.send(frame)["frame"], 1);
}
