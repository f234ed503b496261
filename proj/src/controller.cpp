#include "kickoff/controller.hpp"

#include <algorithm>
#include <cmath>

#include "kickoff/error.hpp"

namespace kickoff {

RuleOutput apply_referee(RuleEngine& rules, const RefereeRequest& r) {
  switch (r.action) {
    case RefereeAction::start_engagement: return rules.start_engagement();
    case RefereeAction::run: return rules.run();
    case RefereeAction::end_half: return rules.end_half();
    case RefereeAction::halftime_swap: return rules.halftime_swap();
    case RefereeAction::preempt:
    case RefereeAction::release:
      rules.referee_preempt(*r.robot, r.action == RefereeAction::preempt);
      return {};
  }
  return {};
}

Json StatePublisher::key(const GameState& s) {
  Json penalized = Json::array();
  Json preempted = Json::array();
  for (const auto& [id, r] : s.robots) {
    if (r.penalty > 0.0) penalized.push_back(robot_id_json(id));
    if (r.referee_preempted) preempted.push_back(robot_id_json(id));
  }
  return {to_string(s.phase), s.score[0], s.score[1], s.half, s.green_side, s.swapped, s.awaiting_kickoff,
          penalized, preempted};
}

StatePublisher::Batch StatePublisher::events(const RuleOutput& out) const {
  Batch b;
  for (const GoalEvent& g : out.goals) b.emplace_back(MsgType::goal, goal_payload(g));
  for (const PenaltyEvent& p : out.penalties) b.emplace_back(MsgType::penalty, penalty_payload(p));
  return b;
}

StatePublisher::Batch StatePublisher::after_frame(const GameState& state, const RuleOutput& out,
                                                  std::uint64_t frame_number) {
  Batch b = events(out);
  Json k = key(state);
  if (!last_ || *last_ != k || frame_number % static_cast<std::uint64_t>(every_) == 0) {
    b.emplace_back(MsgType::game_state, game_state_payload(state));
    last_ = std::move(k);
  }
  return b;
}

StatePublisher::Batch StatePublisher::after_action(const GameState& state, const RuleOutput& out) {
  Batch b = events(out);
  Json k = key(state);
  if (!last_ || *last_ != k) {
    b.emplace_back(MsgType::game_state, game_state_payload(state));
    last_ = std::move(k);
  }
  return b;
}

void ReplayWriter::header(const RunConfig& config) {
  const Json h{{"type", "header"},
               {"format", "kickoff-replay"},
               {"version", kProtocolVersion},
               {"seed", config.sim.seed},
               {"config", config_to_json(config)}};
  out_ << h.dump() << '\n';
}

void ReplayWriter::write(double t, bool inbound, std::optional<SessionId> session, const Json& msg,
                         std::optional<bool> accepted) {
  if (t < last_t_) throw Error(Errc::io, "replay timestamps must not decrease");
  last_t_ = t;
  Json r{{"t", t}, {"dir", inbound ? "in" : "out"}, {"session", nullptr}, {"msg", msg}};
  if (session) r["session"] = *session;
  if (accepted) r["accepted"] = *accepted;
  out_ << r.dump() << '\n';
}

Controller::Controller(RunConfig config, std::ostream* replay)
    : config_(std::move(config)),
      sim_(config_.sim),
      rules_(config_.rules, config_.sim.field, config_.sim.green_robots, config_.sim.blue_robots),
      publisher_(config_.server.game_state_every) {
  config_.validate();
  if (replay) {
    replay_.emplace(*replay);
    replay_->header(config_);
  }
  // Robots start in the kickoff formation and free to move (idle is practice time).
  for (const auto& [id, r] : rules_.state().robots) sim_.set_preempted(id, rules_.state().is_preempted(id));
}

Json Controller::hello(SessionId id) const {
  const SimConfig& s = config_.sim;
  return {{"session", id},
          {"version", kProtocolVersion},
          {"role", "spectator"},
          {"field",
           {{"length", s.field.length},
            {"width", s.field.width},
            {"goal_width", s.field.goal_width},
            {"margin", s.field.margin},
            {"walls", s.field.walls}}},
          {"robots", {{"green", s.green_robots}, {"blue", s.blue_robots}}},
          {"robot_radius", s.robot_radius},
          {"ball_radius", s.ball_radius},
          {"decel", s.ball.decel},
          {"detection_hz", s.detection_hz},
          {"max_linear_speed", s.limits.max_linear},
          {"max_angular_speed", s.limits.max_angular},
          {"kick_cap", s.kicker.true_map.cap},
          {"calibrated", sim_.calibration().passed}};
}

SessionId Controller::connect() {
  const SessionId id = next_session_++;
  Session s;
  s.id = id;
  sessions_[id] = s;
  send(id, MsgType::hello, hello(id));
  send(id, MsgType::game_state, game_state_payload(rules_.state()));
  return id;
}

void Controller::disconnect(SessionId id) {
  sessions_.erase(id);
  std::erase_if(inbound_, [id](const Inbound& m) { return m.session == id; });
}

const Session* Controller::session(SessionId id) const {
  const auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : &it->second;
}

void Controller::receive(SessionId id, std::string text) {
  const auto it = sessions_.find(id);
  if (it == sessions_.end()) return;
  // Lockstep bookkeeping happens on arrival so the gate can open before the
  // messages themselves are processed at the tick boundary.
  Json j = Json::parse(text, nullptr, false);
  if (j.is_object() && j.contains("type") && j["payload"].is_object()) {
    try {
      if (j["type"] == "auth" && j["payload"].value("lockstep", false)) it->second.lockstep = true;
      if (j["type"] == "sync" && it->second.lockstep) it->second.synced = parse_sync(j["payload"]);
    } catch (const std::exception&) {
      // Left for the tick boundary, where it earns a nack.
    }
  }
  inbound_.push_back({id, arrivals_++, std::move(text)});
}

bool Controller::ready() const {
  const int need = config_.server.lockstep_clients;
  if (need <= 0) return true;
  int present = 0;
  for (const auto& [id, s] : sessions_) {
    if (!s.lockstep) continue;
    ++present;
    if (last_frame_ && (!s.synced || *s.synced < *last_frame_)) return false;
  }
  return lockstep_started_ ? present > 0 : present >= need;
}

bool Controller::done() const {
  if (config_.server.duration > 0.0 && time() >= config_.server.duration - 1e-9) return true;
  if (rules_.state().phase == Phase::finished) return true;
  if (config_.server.lockstep_clients > 0 && lockstep_started_) {
    return std::none_of(sessions_.begin(), sessions_.end(), [](const auto& kv) { return kv.second.lockstep; });
  }
  return false;
}

std::optional<DetectionFrame> Controller::tick() {
  if (config_.server.lockstep_clients > 0) lockstep_started_ = true;
  process_inbound();
  std::optional<DetectionFrame> frame = sim_.advance();
  if (!frame) return frame;

  const RuleOutput out = rules_.on_frame(*frame, 1.0 / config_.sim.detection_hz);
  apply(out);
  for (RobotDetection& r : frame->robots) r.preempted = rules_.state().is_preempted(r.id);
  send(std::nullopt, MsgType::detection, detection_payload(*frame));
  publish(publisher_.after_frame(rules_.state(), out, frame->frame_number));
  last_frame_ = frame->frame_number;
  ++frames_;
  return frame;
}

std::vector<Outbound> Controller::take_outbound() { return std::exchange(outbound_, {}); }

void Controller::process_inbound() {
  if (inbound_.empty()) return;
  std::vector<Inbound> batch = std::exchange(inbound_, {});
  const auto referee = [this](const Inbound& m) {
    const Session* s = session(m.session);
    return s && s->role == Role::referee;
  };
  std::stable_sort(batch.begin(), batch.end(), [&](const Inbound& a, const Inbound& b) {
    const bool ra = referee(a), rb = referee(b);
    if (ra != rb) return ra;
    if (a.session != b.session) return a.session < b.session;
    return a.arrival < b.arrival;
  });
  for (const Inbound& m : batch) {
    const auto it = sessions_.find(m.session);
    if (it != sessions_.end()) handle(it->second, m.text);
  }
}

void Controller::handle(Session& s, const std::string& text) {
  // Inbound records precede the replies they cause in the log.
  const std::size_t first_reply = outbound_.size();
  deferring_ = true;
  bool accepted = false;
  Json logged;
  try {
    const WireMessage m = decode(text);
    logged = to_json(m);
    switch (m.type) {
      case MsgType::auth: handle_auth(s, m); accepted = s.role != Role::spectator; break;
      case MsgType::command: accepted = handle_command(s, m); break;
      case MsgType::kick: accepted = handle_kick(s, m); break;
      case MsgType::referee: accepted = handle_referee(s, m); break;
      case MsgType::sync: accepted = s.lockstep; break;
      default:
        nack(s, m.seq, NackReason::unsupported, "clients may not send " + std::string(to_string(m.type)));
        break;
    }
  } catch (const Error& e) {
    if (logged.is_null()) logged = Json{{"raw", text}};
    const std::optional<std::uint64_t> ref =
        logged.contains("seq") ? std::optional<std::uint64_t>(logged["seq"].get<std::uint64_t>()) : std::nullopt;
    nack(s, ref, e.code() == Errc::validation ? NackReason::out_of_range : NackReason::malformed, e.what());
  }
  deferring_ = false;
  if (replay_) {
    replay_->write(time(), true, s.id, logged, accepted);
    for (std::size_t i = first_reply; i < outbound_.size(); ++i) log_out(outbound_[i]);
  }
}

void Controller::handle_auth(Session& s, const WireMessage& m) {
  const AuthRequest req = parse_auth(m.payload);
  const auto role = rules_.role_for_key(req.key);
  if (!role) {
    s.role = Role::spectator;
    s.key.clear();
    nack(s, m.seq, NackReason::unauthorized, "unknown key, session downgraded to spectator",
         {{"role", "spectator"}});
    return;
  }
  s.role = *role;
  s.key = req.key;
  ack(s, m, {{"role", to_string(*role)}});
}

std::optional<NackReason> Controller::check_robot(const Session& s, const RobotId& id, std::string& detail) {
  if (s.role != Role::green && s.role != Role::blue) {
    detail = "session holds no team key";
    return NackReason::unauthorized;
  }
  const Team own = s.role == Role::green ? Team::green : Team::blue;
  if (id.team != own) {
    detail = "key controls " + std::string(to_string(own)) + " robots only";
    return NackReason::unauthorized;
  }
  if (!rules_.state().robots.contains(id)) {
    detail = "no " + std::string(to_string(id.team)) + " robot " + std::to_string(id.number);
    return NackReason::not_found;
  }
  if (!rules_.authorize(s.key, id)) {
    detail = "robot is preempted";
    return NackReason::preempted;
  }
  if (!take_token(id)) {
    detail = "more than " + std::to_string(static_cast<int>(config_.server.rate_limit)) + " commands/s";
    return NackReason::rate_limited;
  }
  return std::nullopt;
}

bool Controller::take_token(const RobotId& id) {
  const double now = time();
  auto [it, fresh] = buckets_.try_emplace(id, Bucket{config_.server.rate_burst, now});
  Bucket& b = it->second;
  b.tokens = std::min(config_.server.rate_burst, b.tokens + (now - b.last) * config_.server.rate_limit);
  b.last = now;
  if (b.tokens < 1.0) return false;
  b.tokens -= 1.0;
  return true;
}

bool Controller::handle_command(Session& s, const WireMessage& m) {
  const CommandRequest req = parse_command(m.payload);
  const Team own = s.role == Role::blue ? Team::blue : Team::green;
  const RobotId id{req.team.value_or(own), req.number};
  std::string detail;
  if (const auto reason = check_robot(s, id, detail)) {
    nack(s, m.seq, *reason, detail);
    return false;
  }
  if (req.twist.frame != Frame::robot) {
    nack(s, m.seq, NackReason::out_of_range, "commands are robot-frame twists");
    return false;
  }
  sim_.command_robot(id, req.twist);
  ack(s, m);
  return true;
}

bool Controller::handle_kick(Session& s, const WireMessage& m) {
  const KickRequest req = parse_kick(m.payload);
  const Team own = s.role == Role::blue ? Team::blue : Team::green;
  const RobotId id{req.team.value_or(own), req.number};
  std::string detail;
  if (const auto reason = check_robot(s, id, detail)) {
    nack(s, m.seq, *reason, detail);
    return false;
  }
  KickOutcome k;
  try {
    k = sim_.kick(id, req.impulse);
  } catch (const Error& e) {
    if (e.code() != Errc::cooldown) throw;
    nack(s, m.seq, NackReason::cooldown, "kicker is recharging");
    return false;
  }
  Json extra{{"impulse", k.impulse}, {"clipped", k.clipped}, {"contact", k.contact}};
  if (k.clipped) {
    extra["warning"] = "impulse clipped to " + Json(k.impulse).dump() + " s";
  } else if (!k.contact) {
    extra["warning"] = "no contact";
  }
  ack(s, m, extra);
  return true;
}

bool Controller::handle_referee(Session& s, const WireMessage& m) {
  const RefereeRequest req = parse_referee(m.payload);
  if (s.role != Role::referee) {
    nack(s, m.seq, NackReason::unauthorized, "referee actions need the referee key");
    return false;
  }
  RuleOutput out;
  try {
    out = apply_referee(rules_, req);
  } catch (const Error& e) {
    if (e.code() == Errc::phase) {
      nack(s, m.seq, NackReason::phase, e.what());
    } else if (e.code() == Errc::not_found) {
      nack(s, m.seq, NackReason::not_found, e.what());
    } else {
      throw;
    }
    return false;
  }
  apply(out);
  ack(s, m);
  publish(publisher_.after_action(rules_.state(), out));
  return true;
}

void Controller::apply(const RuleOutput& out) {
  if (out.swap) sim_.swap_team_labels();
  if (out.engage) {
    const auto formation = kickoff_formation(config_.sim, rules_.state().green_side);
    // Twice: the first pass may nudge a robot off one that has not moved yet.
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& [id, pose] : formation) sim_.teleport_robot(id, pose);
    }
    sim_.teleport_ball({0.0, 0.0});
  }
  for (const RobotState& r : sim_.world().robots) {
    const bool want = rules_.state().is_preempted(r.id);
    if (r.preempted != want) sim_.set_preempted(r.id, want);
  }
}

void Controller::publish(const StatePublisher::Batch& batch) {
  for (const auto& [type, payload] : batch) send(std::nullopt, type, payload);
}

void Controller::send(std::optional<SessionId> to, MsgType type, Json payload) {
  const WireMessage m{type, ++seq_, time(), std::move(payload)};
  outbound_.push_back({to, type, encode(m)});
  if (replay_ && !deferring_) log_out(outbound_.back());
}

void Controller::log_out(const Outbound& o) {
  replay_->write(time(), false, o.to, Json::parse(o.text));
}

void Controller::ack(const Session& s, const WireMessage& m, Json extra) {
  extra["ref"] = m.seq;
  extra["request"] = to_string(m.type);
  send(s.id, MsgType::ack, std::move(extra));
}

void Controller::nack(const Session& s, std::optional<std::uint64_t> ref, NackReason reason, const std::string& detail,
                      Json extra) {
  extra["ref"] = ref ? Json(*ref) : Json(nullptr);
  extra["reason"] = to_string(reason);
  extra["detail"] = detail;
  send(s.id, MsgType::nack, std::move(extra));
}

}  // namespace kickoff
