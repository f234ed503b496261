#include <atomic>
#include <chrono>
#include <map>
#include <mutex>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "doctest.h"
#include "kickoff/client.hpp"
#include "kickoff/error.hpp"
#include "kickoff/server.hpp"

using namespace kickoff;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
using Clock = std::chrono::steady_clock;

namespace {

// Server running on its own thread for the lifetime of the object.
struct LiveServer {
  Server server;
  unsigned short port;
  std::thread loop;

  explicit LiveServer(RunConfig c) : server((c.server.port = 0, c)), port(server.listen()) {
    loop = std::thread([this] { server.run(); });
  }
  ~LiveServer() {
    server.stop();
    loop.join();
  }
};

std::vector<WireMessage> read_until(WsClient& c, MsgType type, int max = 200) {
  std::vector<WireMessage> seen;
  for (int i = 0; i < max; ++i) {
    auto text = c.receive();
    if (!text) break;
    seen.push_back(decode(*text));
    if (seen.back().type == type) break;
  }
  return seen;
}

}  // namespace

TEST_CASE("connect, authenticate and get detections over the socket") {
  RunConfig c;
  LiveServer s(c);
  WsClient client;
  client.connect("127.0.0.1", s.port);
  auto hello = decode(*client.receive());
  CHECK(hello.type == MsgType::hello);
  client.send(encode({MsgType::auth, 1, 0, {{"key", "green-key"}}}));
  auto seen = read_until(client, MsgType::ack);
  REQUIRE_FALSE(seen.empty());
  CHECK(seen.back().type == MsgType::ack);
  CHECK(seen.back().payload["role"] == "green");
  auto more = read_until(client, MsgType::detection);
  CHECK(more.back().type == MsgType::detection);
}

TEST_CASE("referee round trip") {
  RunConfig c;
  LiveServer s(c);
  WsClient ref;
  ref.connect("127.0.0.1", s.port);
  ref.send(encode({MsgType::auth, 1, 0, {{"key", "referee-key"}}}));
  read_until(ref, MsgType::ack);
  ref.send(encode({MsgType::referee, 2, 0, {{"action", "start_engagement"}}}));
  bool acked = false, placement = false;
  for (int i = 0; i < 200 && !(acked && placement); ++i) {
    auto m = decode(*ref.receive());
    if (m.type == MsgType::ack && m.payload["ref"] == 2) acked = true;
    if (m.type == MsgType::game_state && m.payload["phase"] == "placement") placement = true;
  }
  CHECK(acked);
  CHECK(placement);
}

TEST_CASE("targets other than /api get 404") {
  RunConfig c;
  LiveServer s(c);
  asio::io_context ioc;
  asio::ip::tcp::socket sock(ioc);
  sock.connect({asio::ip::make_address("127.0.0.1"), s.port});
  http::request<http::empty_body> req(http::verb::get, "/index.html", 11);
  req.set(http::field::host, "127.0.0.1");
  http::write(sock, req);
  beast::flat_buffer buf;
  http::response<http::string_body> res;
  http::read(sock, buf, res);
  CHECK(res.result() == http::status::not_found);

  WsClient wrong;
  CHECK_THROWS_AS(wrong.connect("127.0.0.1", s.port, "/other"), Error);
}

TEST_CASE("listen reports a busy port") {
  RunConfig c;
  LiveServer s(c);
  RunConfig d;
  d.server.port = s.port;
  Server second(d);
  CHECK_THROWS_AS(second.listen(), Error);
}

TEST_CASE("real-time service: steady 30 Hz to many clients despite a stalled one") {
  RunConfig c;
  c.server.duration = 6.0;
  c.server.port = 0;
  Server server(c);
  const unsigned short port = server.listen();

  std::mutex mu;
  std::vector<Clock::time_point> ticks;
  server.on_frame([&](const DetectionFrame&) {
    std::lock_guard lock(mu);
    ticks.push_back(Clock::now());
  });

  std::thread loop([&] { server.run(); });

  // A client that completes the handshake and never reads again.
  asio::io_context ioc;
  beast::websocket::stream<asio::ip::tcp::socket> stalled(ioc);
  stalled.next_layer().open(asio::ip::tcp::v4());
  stalled.next_layer().set_option(asio::socket_base::receive_buffer_size(2048));
  stalled.next_layer().connect({asio::ip::make_address("127.0.0.1"), port});
  stalled.handshake("127.0.0.1", "/api");

  constexpr int kClients = 8;
  std::vector<std::unique_ptr<WsClient>> clients;
  for (int i = 0; i < kClients; ++i) {
    clients.push_back(std::make_unique<WsClient>());
    clients.back()->connect("127.0.0.1", port);
  }
  std::vector<std::vector<std::string>> frames(kClients);
  std::vector<std::thread> readers;
  for (int i = 0; i < kClients; ++i) {
    readers.emplace_back([&, i] {
      while (auto text = clients[i]->receive()) {
        if (text->find("\"type\":\"detection\"") != std::string::npos) frames[i].push_back(*text);
      }
    });
  }
  loop.join();
  for (auto& r : readers) r.join();

  const ServerStats st = server.stats();
  REQUIRE(ticks.size() >= 100);
  const double span = std::chrono::duration<double>(ticks.back() - ticks.front()).count();
  const double rate = static_cast<double>(ticks.size() - 1) / span;
  MESSAGE("frame rate " << rate << " Hz, max lateness " << st.max_lateness << " s, dropped " << st.dropped);
  CHECK(std::abs(rate - 30.0) <= 0.03);
  CHECK(st.max_lateness < 0.05);
  CHECK(st.frames == 180);
  CHECK(st.dropped > 0);  // the stalled client's queue overflowed

  // Each reader sees an unbroken run of frames from when it joined, and every
  // frame shared by all readers is byte-identical.
  std::vector<std::map<std::uint64_t, std::string>> by_number(kClients);
  for (int i = 0; i < kClients; ++i) {
    REQUIRE(frames[i].size() >= 170);
    for (const auto& text : frames[i]) by_number[i][decode(text).payload["frame_number"].get<std::uint64_t>()] = text;
    CHECK(by_number[i].size() == frames[i].size());
    CHECK(by_number[i].rbegin()->first - by_number[i].begin()->first + 1 == by_number[i].size());
  }
  std::size_t shared = 0;
  for (const auto& [n, text] : by_number[0]) {
    bool everywhere = true;
    for (int i = 1; i < kClients; ++i) {
      auto it = by_number[i].find(n);
      if (it == by_number[i].end()) {
        everywhere = false;
        break;
      }
      CHECK(it->second == text);
    }
    shared += everywhere;
  }
  CHECK(shared >= 170);
}
