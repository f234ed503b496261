#pragma once

// JSON wire codec for the /api WebSocket endpoint.
//
// Every message is one text frame:
//   {"type": <string>, "seq": <uint>, "t": <seconds>, "payload": {...}}
// Units are metres, radians and seconds. Unknown fields are ignored.

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"
#include "kickoff/rules.hpp"
#include "kickoff/simulator.hpp"

namespace kickoff {

using Json = nlohmann::json;

inline constexpr int kProtocolVersion = 1;

enum class MsgType { hello, auth, detection, command, kick, ack, nack, referee, game_state, goal, penalty, sync };

std::string_view to_string(MsgType type);
std::optional<MsgType> parse_msg_type(std::string_view name);

struct WireMessage {
  MsgType type = MsgType::hello;
  std::uint64_t seq = 0;
  double t = 0.0;
  Json payload = Json::object();
};

Json to_json(const WireMessage& msg);
// Throws Errc::protocol naming the offending field.
WireMessage message_from_json(const Json& j);

std::string encode(const WireMessage& msg);

// Non-negative integer, whether it was built as signed or parsed as unsigned.
bool is_count(const Json& j);
WireMessage decode(std::string_view text);

// Machine-readable nack reasons.
enum class NackReason {
  malformed,
  unauthorized,
  preempted,
  out_of_range,
  rate_limited,
  not_found,
  cooldown,
  phase,
  unsupported,
};

std::string_view to_string(NackReason reason);
std::optional<NackReason> parse_nack_reason(std::string_view name);

// detection: {"frame_number", "timestamp", "calibrated",
//             "robots": [{"team", "number", "x", "y", "theta", "preempted"}],
//             "ball": {"x", "y"} | null}
Json detection_payload(const DetectionFrame& frame);
DetectionFrame parse_detection(const Json& payload);

// command: {"team"?, "number", "vx", "vy", "omega", "frame"?: "robot"}
struct CommandRequest {
  std::optional<Team> team;  // defaults to the session's team
  int number = 0;
  Twist twist;
};

// kick: {"team"?, "number", "impulse"}; impulse in seconds.
struct KickRequest {
  std::optional<Team> team;
  int number = 0;
  double impulse = 0.0;
};

enum class RefereeAction { start_engagement, run, end_half, halftime_swap, preempt, release };

std::string_view to_string(RefereeAction action);

// referee: {"action", "team"?, "number"?}; preempt/release need the robot.
struct RefereeRequest {
  RefereeAction action = RefereeAction::run;
  std::optional<RobotId> robot;
};

// auth: {"key", "lockstep"?}
struct AuthRequest {
  std::string key;
  bool lockstep = false;
};

// The parsers throw Errc::protocol on missing or mistyped fields and
// Errc::validation on values outside their domain.
CommandRequest parse_command(const Json& payload);
KickRequest parse_kick(const Json& payload);
RefereeRequest parse_referee(const Json& payload);
AuthRequest parse_auth(const Json& payload);
std::uint64_t parse_sync(const Json& payload);

Json command_payload(const RobotId& robot, const Twist& twist);
Json kick_payload(const RobotId& robot, double impulse);
Json referee_payload(RefereeAction action, const std::optional<RobotId>& robot = std::nullopt);

// game_state: {"phase", "score": {"green", "blue"}, "clock", "half", "green_side",
//              "swapped", "awaiting_kickoff", "penalized": [{"team", "number", "remaining"}],
//              "preempted": [{"team", "number"}]}
Json game_state_payload(const GameState& state);
Json goal_payload(const GoalEvent& goal);
Json penalty_payload(const PenaltyEvent& penalty);

Json robot_id_json(const RobotId& id);
RobotId parse_robot_id(const Json& j, std::string_view context);

}  // namespace kickoff
