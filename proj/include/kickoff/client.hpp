#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>

#include "kickoff/strategy_client.hpp"

namespace kickoff {

// Minimal blocking WebSocket client for the /api endpoint.
class WsClient {
 public:
  WsClient();
  ~WsClient();

  WsClient(const WsClient&) = delete;
  WsClient& operator=(const WsClient&) = delete;

  // Throws Errc::io when the connection or handshake fails.
  void connect(const std::string& host, unsigned short port, const std::string& target = "/api");
  void send(const std::string& text);
  // Next text message; empty once the connection is closed.
  std::optional<std::string> receive();
  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct TeamClientResult {
  std::uint64_t frames = 0;
  std::uint64_t goals = 0;
  std::uint64_t nacks = 0;
  Json last_state;
};

// Plays `client` over a WebSocket connection until the server closes it, the
// match is finished, or `stop` returns true.
TeamClientResult run_team_client(const std::string& host, unsigned short port, StrategyClient& client,
                                 const std::function<bool()>& stop = {});

}  // namespace kickoff
