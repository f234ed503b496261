#include "kickoff/strategy_client.hpp"

#include <map>

#include "kickoff/error.hpp"

namespace kickoff {

PlayParams play_params_from_hello(const Json& p) {
  PlayParams pp;
  const Json& f = p.at("field");
  pp.field.length = f.at("length").get<double>();
  pp.field.width = f.at("width").get<double>();
  pp.field.goal_width = f.at("goal_width").get<double>();
  pp.field.margin = f.at("margin").get<double>();
  pp.field.walls = f.value("walls", true);
  pp.robot_radius = p.at("robot_radius").get<double>();
  pp.ball_radius = p.at("ball_radius").get<double>();
  pp.decel.decel = p.at("decel").get<double>();
  pp.dt = 1.0 / p.at("detection_hz").get<double>();
  pp.limits.max_linear = p.at("max_linear_speed").get<double>();
  pp.limits.max_angular = p.at("max_angular_speed").get<double>();
  return pp;
}

StrategyClient::StrategyClient(Team team, std::vector<std::string> roles, std::string key, bool lockstep)
    : strategy_(team, std::move(roles)), key_(std::move(key)), lockstep_(lockstep) {}

std::string StrategyClient::message(MsgType type, Json payload) {
  return encode({type, ++seq_, 0.0, std::move(payload)});
}

std::vector<std::string> StrategyClient::on_message(std::string_view text) {
  std::vector<std::string> out;
  const WireMessage m = decode(text);
  switch (m.type) {
    case MsgType::hello:
      params_ = play_params_from_hello(m.payload);
      out.push_back(message(MsgType::auth, {{"key", key_}, {"lockstep", lockstep_}}));
      break;
    case MsgType::ack:
      if (m.payload.value("request", "") == "auth") authenticated_ = true;
      break;
    case MsgType::nack:
      ++nacks_;
      if (m.payload.value("reason", "") == "unauthorized" && m.payload.contains("role")) authenticated_ = false;
      break;
    case MsgType::game_state: {
      last_state_ = m.payload;
      green_side_ = m.payload.at("green_side").get<int>();
      const std::string phase = m.payload.at("phase").get<std::string>();
      for (Phase p : {Phase::idle, Phase::placement, Phase::running, Phase::halftime, Phase::finished}) {
        if (to_string(p) == phase) phase_ = p;
      }
      break;
    }
    case MsgType::goal:
      ++goals_;
      break;
    case MsgType::detection: {
      const DetectionFrame frame = parse_detection(m.payload);
      ++frames_;
      last_time_ = frame.timestamp;
      if (authenticated_ && params_) {
        const int own_side = team() == Team::green ? green_side_ : -green_side_;
        for (const auto& [id, order] : strategy_.decide(frame, -own_side, *params_)) {
          out.push_back(message(MsgType::command, command_payload(id, order.twist)));
          if (order.kick) out.push_back(message(MsgType::kick, kick_payload(id, *order.kick)));
        }
      }
      if (lockstep_) out.push_back(message(MsgType::sync, {{"frame_number", frame.frame_number}}));
      break;
    }
    default:
      break;
  }
  return out;
}

void run_local_match(Controller& controller, const std::vector<StrategyClient*>& clients,
                     const std::function<bool(const Controller&)>& stop) {
  std::map<SessionId, StrategyClient*> by_session;
  auto deliver = [&] {
    // Replies may trigger further replies only through the next tick, so one pass suffices.
    for (const Outbound& o : controller.take_outbound()) {
      for (const auto& [id, client] : by_session) {
        if (o.to && *o.to != id) continue;
        for (std::string& reply : client->on_message(o.text)) controller.receive(id, std::move(reply));
      }
    }
  };
  for (StrategyClient* c : clients) {
    by_session[controller.connect()] = c;
    deliver();
  }
  while (!controller.done() && !(stop && stop(controller))) {
    if (!controller.ready()) throw Error(Errc::protocol, "lockstep client stopped syncing");
    controller.tick();
    deliver();
  }
}

}  // namespace kickoff
