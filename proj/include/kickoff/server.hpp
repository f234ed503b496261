#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>

#include "kickoff/config.hpp"
#include "kickoff/controller.hpp"
#include "kickoff/replay.hpp"

namespace kickoff {

struct ServerStats {
  std::uint64_t ticks = 0;
  std::uint64_t frames = 0;
  std::uint64_t dropped = 0;       // outbound messages discarded by full session queues
  double max_lateness = 0.0;       // s, worst tick start behind its deadline (real-time mode)
  std::uint64_t sessions_seen = 0;
};

// WebSocket face of the controller on ws://host:port/api.
//
// Real-time mode paces physics ticks against absolute steady-clock deadlines.
// Lockstep mode (server.lockstep_clients > 0) advances as fast as the lockstep
// clients sync, which makes a match reproducible bit for bit.
// Slow readers never block the loop: each session buffers at most
// server.queue_bound messages and drops the oldest beyond that.
class Server {
 public:
  explicit Server(RunConfig config, std::ostream* replay = nullptr);
  ~Server();

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  // Binds and listens. Throws Errc::io naming the address on failure.
  // Returns the bound port (useful with port 0).
  unsigned short listen();

  // Blocks until stop() or until the controller reports done().
  void run();

  // Safe from any thread.
  void stop();

  unsigned short port() const;
  ServerStats stats() const;

  // Called on the loop thread after each detection frame is broadcast.
  void on_frame(std::function<void(const DetectionFrame&)> hook);

 private:
  struct Impl;
  std::shared_ptr<Impl> impl_;
};

// Streams a replay's broadcast messages to every client on ws://host:port/api,
// starting when the first client connects. `listening` receives the bound port.
// Throws Errc::io when the address cannot be bound.
void serve_playback(const std::string& host, unsigned short port, const std::vector<PlaybackItem>& items,
                    const std::function<void(unsigned short)>& listening = {});

}  // namespace kickoff
