#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>

namespace kickoff::cli {

// Exit codes shared by every subcommand.
inline constexpr int kOk = 0;
inline constexpr int kRuntime = 1;
inline constexpr int kUsage = 2;

struct CommonOptions {
  std::string config;  // empty: built-in defaults
  std::optional<std::uint64_t> seed;
  std::string replay_out;
};

struct ServeOptions {
  CommonOptions common;
  std::optional<int> port;
  int lockstep = 0;
  bool auto_referee = false;
  double duration = 0.0;
};

struct DemoOptions {
  CommonOptions common;
  std::string green = "attacker,goalie";
  std::string blue = "attacker,goalie";
  double duration = 0.0;  // 0: until the match is finished
  std::string connect;    // host:port of a running lockstep server; empty runs embedded
};

struct ReplayOptions {
  std::string log;
  double speed = 1.0;
  bool verify = false;
  std::optional<int> port;
};

struct CalibrateOptions {
  CommonOptions common;
  std::string samples;  // CSV impulse_s,speed_mps
  int simulate = 0;
  std::optional<double> noise;
  std::string out;      // write the samples used as CSV
};

int cmd_serve(const ServeOptions& o, std::ostream& out, std::ostream& err);
int cmd_demo(const DemoOptions& o, std::ostream& out, std::ostream& err);
int cmd_replay(const ReplayOptions& o, std::ostream& out, std::ostream& err);
int cmd_calibrate_kick(const CalibrateOptions& o, std::ostream& out, std::ostream& err);
int cmd_validate_config(const std::string& path, std::ostream& out, std::ostream& err);

}  // namespace kickoff::cli
