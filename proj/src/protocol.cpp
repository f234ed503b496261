#include "kickoff/protocol.hpp"

#include <array>
#include <cmath>
#include <utility>

#include "kickoff/error.hpp"

namespace kickoff {
namespace {

constexpr std::array<std::pair<MsgType, std::string_view>, 12> kTypes{{
    {MsgType::hello, "hello"},
    {MsgType::auth, "auth"},
    {MsgType::detection, "detection"},
    {MsgType::command, "command"},
    {MsgType::kick, "kick"},
    {MsgType::ack, "ack"},
    {MsgType::nack, "nack"},
    {MsgType::referee, "referee"},
    {MsgType::game_state, "game_state"},
    {MsgType::goal, "goal"},
    {MsgType::penalty, "penalty"},
    {MsgType::sync, "sync"},
}};

constexpr std::array<std::pair<NackReason, std::string_view>, 9> kReasons{{
    {NackReason::malformed, "malformed"},
    {NackReason::unauthorized, "unauthorized"},
    {NackReason::preempted, "preempted"},
    {NackReason::out_of_range, "out_of_range"},
    {NackReason::rate_limited, "rate_limited"},
    {NackReason::not_found, "not_found"},
    {NackReason::cooldown, "cooldown"},
    {NackReason::phase, "phase"},
    {NackReason::unsupported, "unsupported"},
}};

constexpr std::array<std::pair<RefereeAction, std::string_view>, 6> kActions{{
    {RefereeAction::start_engagement, "start_engagement"},
    {RefereeAction::run, "run"},
    {RefereeAction::end_half, "end_half"},
    {RefereeAction::halftime_swap, "halftime_swap"},
    {RefereeAction::preempt, "preempt"},
    {RefereeAction::release, "release"},
}};

[[noreturn]] void bad(std::string_view context, std::string_view field, std::string_view why) {
  throw Error(Errc::protocol, std::string(context) + "." + std::string(field) + ": " + std::string(why));
}

const Json& need(const Json& j, std::string_view context, const char* field) {
  if (!j.is_object()) bad(context, "payload", "expected an object");
  const auto it = j.find(field);
  if (it == j.end()) bad(context, field, "missing");
  return *it;
}

double number(const Json& j, std::string_view context, const char* field) {
  const Json& v = need(j, context, field);
  if (!v.is_number()) bad(context, field, "expected a number");
  return v.get<double>();
}

double number_or(const Json& j, std::string_view context, const char* field, double fallback) {
  return j.contains(field) ? number(j, context, field) : fallback;
}

int integer(const Json& j, std::string_view context, const char* field) {
  const Json& v = need(j, context, field);
  if (!v.is_number_integer()) bad(context, field, "expected an integer");
  return v.get<int>();
}

std::string text(const Json& j, std::string_view context, const char* field) {
  const Json& v = need(j, context, field);
  if (!v.is_string()) bad(context, field, "expected a string");
  return v.get<std::string>();
}

bool boolean_or(const Json& j, std::string_view context, const char* field, bool fallback) {
  if (!j.contains(field)) return fallback;
  const Json& v = j.at(field);
  if (!v.is_boolean()) bad(context, field, "expected a boolean");
  return v.get<bool>();
}

std::optional<Team> team_field(const Json& j, std::string_view context) {
  if (!j.contains("team")) return std::nullopt;
  const auto team = parse_team(text(j, context, "team"));
  if (!team) bad(context, "team", "expected \"green\" or \"blue\"");
  return team;
}

}  // namespace

std::string_view to_string(MsgType type) {
  for (const auto& [t, name] : kTypes) {
    if (t == type) return name;
  }
  return "hello";
}

std::optional<MsgType> parse_msg_type(std::string_view name) {
  for (const auto& [t, n] : kTypes) {
    if (n == name) return t;
  }
  return std::nullopt;
}

std::string_view to_string(NackReason reason) {
  for (const auto& [r, name] : kReasons) {
    if (r == reason) return name;
  }
  return "malformed";
}

std::optional<NackReason> parse_nack_reason(std::string_view name) {
  for (const auto& [r, n] : kReasons) {
    if (n == name) return r;
  }
  return std::nullopt;
}

std::string_view to_string(RefereeAction action) {
  for (const auto& [a, name] : kActions) {
    if (a == action) return name;
  }
  return "run";
}

Json to_json(const WireMessage& msg) {
  return Json{{"type", to_string(msg.type)}, {"seq", msg.seq}, {"t", msg.t}, {"payload", msg.payload}};
}

WireMessage message_from_json(const Json& j) {
  if (!j.is_object()) bad("message", "root", "expected an object");
  WireMessage msg;
  const std::string type = text(j, "message", "type");
  const auto parsed = parse_msg_type(type);
  if (!parsed) bad("message", "type", "unknown type '" + type + "'");
  msg.type = *parsed;
  if (j.contains("seq")) {
    if (!is_count(j["seq"])) bad("message", "seq", "expected a non-negative integer");
    msg.seq = j["seq"].get<std::uint64_t>();
  }
  msg.t = number_or(j, "message", "t", 0.0);
  if (j.contains("payload")) {
    if (!j["payload"].is_object()) bad("message", "payload", "expected an object");
    msg.payload = j["payload"];
  }
  return msg;
}

bool is_count(const Json& j) {
  return j.is_number_unsigned() || (j.is_number_integer() && j.get<std::int64_t>() >= 0);
}

std::string encode(const WireMessage& msg) { return to_json(msg).dump(); }

WireMessage decode(std::string_view text) {
  Json j = Json::parse(text, nullptr, false);
  if (j.is_discarded()) throw Error(Errc::protocol, "message: not valid JSON");
  return message_from_json(j);
}

Json robot_id_json(const RobotId& id) { return Json{{"team", to_string(id.team)}, {"number", id.number}}; }

RobotId parse_robot_id(const Json& j, std::string_view context) {
  const auto team = team_field(j, context);
  if (!team) bad(context, "team", "missing");
  return {*team, integer(j, context, "number")};
}

Json detection_payload(const DetectionFrame& frame) {
  Json robots = Json::array();
  for (const RobotDetection& r : frame.robots) {
    robots.push_back({{"team", to_string(r.id.team)},
                      {"number", r.id.number},
                      {"x", r.pose.x},
                      {"y", r.pose.y},
                      {"theta", r.pose.theta},
                      {"preempted", r.preempted}});
  }
  Json ball = nullptr;
  if (frame.ball) ball = {{"x", frame.ball->x}, {"y", frame.ball->y}};
  return {{"frame_number", frame.frame_number},
          {"timestamp", frame.timestamp},
          {"calibrated", frame.calibrated},
          {"robots", robots},
          {"ball", ball}};
}

DetectionFrame parse_detection(const Json& p) {
  constexpr std::string_view ctx = "detection";
  DetectionFrame f;
  const Json& n = need(p, ctx, "frame_number");
  if (!is_count(n)) bad(ctx, "frame_number", "expected a non-negative integer");
  f.frame_number = n.get<std::uint64_t>();
  f.timestamp = number(p, ctx, "timestamp");
  f.calibrated = boolean_or(p, ctx, "calibrated", true);
  const Json& robots = need(p, ctx, "robots");
  if (!robots.is_array()) bad(ctx, "robots", "expected an array");
  for (const Json& r : robots) {
    RobotDetection d;
    d.id = parse_robot_id(r, "detection.robots[]");
    d.pose = Pose2D(number(r, "detection.robots[]", "x"), number(r, "detection.robots[]", "y"),
                    number(r, "detection.robots[]", "theta"));
    d.preempted = boolean_or(r, "detection.robots[]", "preempted", false);
    f.robots.push_back(d);
  }
  if (p.contains("ball") && !p["ball"].is_null()) {
    f.ball = Vec2{number(p["ball"], "detection.ball", "x"), number(p["ball"], "detection.ball", "y")};
  }
  return f;
}

CommandRequest parse_command(const Json& p) {
  constexpr std::string_view ctx = "command";
  CommandRequest c;
  c.team = team_field(p, ctx);
  c.number = integer(p, ctx, "number");
  c.twist = {number_or(p, ctx, "vx", 0.0), number_or(p, ctx, "vy", 0.0), number_or(p, ctx, "omega", 0.0),
             Frame::robot};
  if (p.contains("frame")) {
    const std::string frame = text(p, ctx, "frame");
    if (frame == "field") {
      c.twist.frame = Frame::field;
    } else if (frame != "robot") {
      bad(ctx, "frame", "expected \"robot\" or \"field\"");
    }
  }
  return c;
}

KickRequest parse_kick(const Json& p) {
  constexpr std::string_view ctx = "kick";
  KickRequest k;
  k.team = team_field(p, ctx);
  k.number = integer(p, ctx, "number");
  k.impulse = number(p, ctx, "impulse");
  if (k.impulse < 0.0) throw Error(Errc::validation, "kick.impulse: must be non-negative");
  return k;
}

RefereeRequest parse_referee(const Json& p) {
  constexpr std::string_view ctx = "referee";
  RefereeRequest r;
  const std::string action = text(p, ctx, "action");
  bool known = false;
  for (const auto& [a, name] : kActions) {
    if (name == action) {
      r.action = a;
      known = true;
    }
  }
  if (!known) bad(ctx, "action", "unknown action '" + action + "'");
  if (r.action == RefereeAction::preempt || r.action == RefereeAction::release) r.robot = parse_robot_id(p, ctx);
  return r;
}

AuthRequest parse_auth(const Json& p) {
  return {text(p, "auth", "key"), boolean_or(p, "auth", "lockstep", false)};
}

std::uint64_t parse_sync(const Json& p) {
  const Json& n = need(p, "sync", "frame_number");
  if (!is_count(n)) bad("sync", "frame_number", "expected a non-negative integer");
  return n.get<std::uint64_t>();
}

Json command_payload(const RobotId& robot, const Twist& twist) {
  return {{"team", to_string(robot.team)},
          {"number", robot.number},
          {"vx", twist.vx},
          {"vy", twist.vy},
          {"omega", twist.omega},
          {"frame", twist.frame == Frame::robot ? "robot" : "field"}};
}

Json kick_payload(const RobotId& robot, double impulse) {
  return {{"team", to_string(robot.team)}, {"number", robot.number}, {"impulse", impulse}};
}

Json referee_payload(RefereeAction action, const std::optional<RobotId>& robot) {
  Json p{{"action", to_string(action)}};
  if (robot) {
    p["team"] = to_string(robot->team);
    p["number"] = robot->number;
  }
  return p;
}

Json game_state_payload(const GameState& s) {
  Json penalized = Json::array();
  Json preempted = Json::array();
  for (const auto& [id, r] : s.robots) {
    if (r.penalty > 0.0) {
      Json e = robot_id_json(id);
      e["remaining"] = r.penalty;
      penalized.push_back(e);
    }
    if (r.referee_preempted) preempted.push_back(robot_id_json(id));
  }
  return {{"phase", to_string(s.phase)},
          {"score", {{"green", s.score[0]}, {"blue", s.score[1]}}},
          {"clock", s.clock},
          {"half", s.half},
          {"green_side", s.green_side},
          {"swapped", s.swapped},
          {"awaiting_kickoff", s.awaiting_kickoff},
          {"penalized", penalized},
          {"preempted", preempted}};
}

Json goal_payload(const GoalEvent& g) {
  return {{"team", to_string(g.team)}, {"time", g.time}, {"x", g.crossing.x}, {"y", g.crossing.y}};
}

Json penalty_payload(const PenaltyEvent& p) {
  Json j = robot_id_json(p.robot);
  j["time"] = p.time;
  j["duration"] = p.duration;
  return j;
}

}  // namespace kickoff
