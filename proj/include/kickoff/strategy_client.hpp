#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kickoff/controller.hpp"
#include "kickoff/protocol.hpp"
#include "kickoff/strategies.hpp"

namespace kickoff {

// PlayParams as announced in a hello payload.
PlayParams play_params_from_hello(const Json& payload);

// A team's decision loop speaking the wire protocol, independent of transport:
// feed it every message the controller sends and forward what it returns.
class StrategyClient {
 public:
  StrategyClient(Team team, std::vector<std::string> roles, std::string key, bool lockstep = false);

  std::vector<std::string> on_message(std::string_view text);

  Team team() const { return strategy_.team(); }
  bool authenticated() const { return authenticated_; }
  std::optional<Phase> phase() const { return phase_; }
  const Json& last_state() const { return last_state_; }
  std::uint64_t frames_seen() const { return frames_; }
  double last_time() const { return last_time_; }
  std::uint64_t nacks() const { return nacks_; }
  std::uint64_t goals_seen() const { return goals_; }

 private:
  std::string message(MsgType type, Json payload);

  TeamStrategy strategy_;
  std::string key_;
  bool lockstep_;
  std::optional<PlayParams> params_;
  bool authenticated_ = false;
  int green_side_ = -1;
  std::optional<Phase> phase_;
  Json last_state_;
  std::uint64_t seq_ = 0;
  std::uint64_t frames_ = 0;
  double last_time_ = 0.0;
  std::uint64_t nacks_ = 0;
  std::uint64_t goals_ = 0;
};

// Runs a controller with in-process clients until it reports done() or
// `stop` returns true. Every exchange goes through the wire codec.
void run_local_match(Controller& controller, const std::vector<StrategyClient*>& clients,
                     const std::function<bool(const Controller&)>& stop = {});

}  // namespace kickoff
