#pragma once

#include <cstddef>
#include <filesystem>
#include <string>

#include "kickoff/protocol.hpp"
#include "kickoff/rules.hpp"
#include "kickoff/simulator.hpp"

namespace kickoff {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8765;                 // 0 picks a free port
  std::size_t queue_bound = 8;     // outbound messages buffered per session
  double rate_limit = 100.0;       // commands per second per robot
  double rate_burst = 10.0;        // bucket depth
  int game_state_every = 30;       // frames between unconditional game_state messages
  int lockstep_clients = 0;        // > 0: advance only when that many clients have synced
  double duration = 0.0;           // simulated seconds before stopping, 0 = unlimited

  void validate() const;
};

// Everything a run needs; the replay header embeds it so logs are self-describing.
struct RunConfig {
  SimConfig sim;
  RulesConfig rules;
  ServerConfig server;

  void validate() const;
};

// JSON document, every section optional. Throws Errc::config with the
// offending path ("field.length: must be positive", "physics.tick: unknown key")
// and Errc::io when the file cannot be read.
RunConfig config_from_json(const Json& doc);
RunConfig load_config(const std::filesystem::path& path);
Json config_to_json(const RunConfig& config);

}  // namespace kickoff
