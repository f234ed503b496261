#include "kickoff/rules.hpp"

#include <cmath>

#include "kickoff/error.hpp"

namespace kickoff {
namespace {

constexpr double kTimeEps = 1e-9;

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw Error(Errc::config, field + ": " + why);
}

std::string describe(const RobotId& id) {
  return std::string(to_string(id.team)) + " " + std::to_string(id.number);
}

}  // namespace

std::string_view to_string(Phase phase) {
  switch (phase) {
    case Phase::idle: return "idle";
    case Phase::placement: return "placement";
    case Phase::running: return "running";
    case Phase::halftime: return "halftime";
    case Phase::finished: return "finished";
  }
  return "idle";
}

std::string_view to_string(Role role) {
  switch (role) {
    case Role::green: return "green";
    case Role::blue: return "blue";
    case Role::referee: return "referee";
    case Role::spectator: return "spectator";
  }
  return "spectator";
}

void RulesConfig::validate() const {
  require(hold_radius > 0.0, "rules.hold_radius", "must be positive");
  require(hold_limit > 0.0, "rules.hold_limit", "must be positive");
  require(hold_grace >= 0.0, "rules.hold_grace", "must be non-negative");
  require(penalty_duration > 0.0, "rules.penalty_duration", "must be positive");
  require(half_duration > 0.0, "rules.half_duration", "must be positive");
  require(placement_duration >= 0.0, "rules.placement_duration", "must be non-negative");
  require(goal_rearm_distance >= 0.0, "rules.goal_rearm_distance", "must be non-negative");
  require(!green_key.empty(), "keys.green", "must not be empty");
  require(!blue_key.empty(), "keys.blue", "must not be empty");
  require(!referee_key.empty(), "keys.referee", "must not be empty");
  require(green_key != blue_key && green_key != referee_key && blue_key != referee_key, "keys",
          "green, blue and referee keys must be distinct");
}

bool GameState::is_preempted(const RobotId& id) const {
  if (phase == Phase::placement || phase == Phase::halftime || phase == Phase::finished) return true;
  const auto it = robots.find(id);
  if (it == robots.end()) return false;
  return it->second.referee_preempted || it->second.penalty > 0.0;
}

void RuleOutput::merge(const RuleOutput& o) {
  goals.insert(goals.end(), o.goals.begin(), o.goals.end());
  penalties.insert(penalties.end(), o.penalties.begin(), o.penalties.end());
  engage |= o.engage;
  swap |= o.swap;
}

std::optional<GoalEvent> check_goal(const Vec2& prev, const Vec2& cur, const FieldGeometry& field, int green_side,
                                    double time) {
  if (prev == cur) return std::nullopt;
  const double half_length = field.length / 2.0;
  const double half_goal = field.goal_width / 2.0;
  for (int side : {1, -1}) {
    const SegmentIntersection hit = segment_intersection({prev, cur}, field.goal_line(side));
    Vec2 at;
    if (hit.kind == SegmentIntersection::Kind::point) {
      if (!(side * prev.x < half_length)) continue;  // coming back in from behind the goal
      at = hit.point;
    } else if (hit.kind == SegmentIntersection::Kind::overlap) {
      at = (hit.overlap.a + hit.overlap.b) * 0.5;
    } else {
      continue;
    }
    if (!(std::abs(at.y) < half_goal)) continue;
    // The goal at `side` is defended by the team whose defended side matches.
    const Team defender = green_side == side ? Team::green : Team::blue;
    return GoalEvent{other(defender), time, at};
  }
  return std::nullopt;
}

RuleEngine::RuleEngine(RulesConfig config, FieldGeometry field, int green_robots, int blue_robots)
    : config_(std::move(config)), field_(field) {
  config_.validate();
  for (int n = 1; n <= green_robots; ++n) state_.robots[{Team::green, n}] = {};
  for (int n = 1; n <= blue_robots; ++n) state_.robots[{Team::blue, n}] = {};
}

std::optional<Role> RuleEngine::role_for_key(std::string_view key) const {
  if (key == config_.green_key) return Role::green;
  if (key == config_.blue_key) return Role::blue;
  if (key == config_.referee_key) return Role::referee;
  return std::nullopt;
}

bool RuleEngine::authorize(std::string_view key, const RobotId& robot) const {
  const auto role = role_for_key(key);
  if (!role) throw Error(Errc::auth, "unknown key");
  const bool owns = (*role == Role::green && robot.team == Team::green) ||
                    (*role == Role::blue && robot.team == Team::blue);
  return owns && state_.robots.contains(robot) && !state_.is_preempted(robot);
}

RuleOutput RuleEngine::on_frame(const DetectionFrame& frame, double dt) {
  RuleOutput out;
  state_.phase_elapsed += dt;
  update_penalties(dt);
  if (state_.phase == Phase::running) {
    update_goal(frame, out);
    update_ball_hold(frame, dt, out);
    state_.clock += dt;
    if (state_.clock >= config_.half_duration - kTimeEps) out.merge(end_half());
  }
  if (frame.ball) state_.last_ball = frame.ball;
  if (config_.auto_referee) auto_referee(dt, out);
  return out;
}

void RuleEngine::update_penalties(double dt) {
  for (auto& [id, r] : state_.robots) {
    if (r.penalty <= 0.0) continue;
    r.penalty -= dt;
    if (r.penalty <= kTimeEps) r.penalty = 0.0;
  }
}

void RuleEngine::update_goal(const DetectionFrame& frame, RuleOutput& out) {
  if (!frame.ball) return;
  const Vec2 ball = *frame.ball;
  if (!state_.goal_armed) {
    // Hysteresis: only a ball clearly back in the field can score again.
    if (std::abs(ball.x) <= field_.length / 2.0 - config_.goal_rearm_distance) state_.goal_armed = true;
    return;
  }
  if (!state_.last_ball) return;
  const auto goal = check_goal(*state_.last_ball, ball, field_, state_.green_side, frame.timestamp);
  if (!goal) return;
  ++state_.score[index(goal->team)];
  state_.goal_armed = false;
  state_.awaiting_kickoff = true;
  out.goals.push_back(*goal);
}

void RuleEngine::update_ball_hold(const DetectionFrame& frame, double dt, RuleOutput& out) {
  for (auto& [id, r] : state_.robots) {
    const RobotDetection* seen = frame.find(id);
    const bool inside = frame.ball && seen && r.penalty <= 0.0 &&
                        distance(seen->pose.position(), *frame.ball) <= config_.hold_radius;
    if (inside) {
      if (r.was_inside) r.hold += dt;
      r.outside = 0.0;
      r.was_inside = true;
      if (r.hold >= config_.hold_limit - kTimeEps) {
        r.hold = 0.0;
        r.was_inside = false;
        r.penalty = config_.penalty_duration;
        out.penalties.push_back({id, frame.timestamp, config_.penalty_duration});
      }
    } else {
      r.outside += dt;
      if (r.outside >= config_.hold_grace - kTimeEps) {
        r.hold = 0.0;
        r.was_inside = false;
      }
    }
  }
}

void RuleEngine::auto_referee(double /*dt*/, RuleOutput& out) {
  switch (state_.phase) {
    case Phase::idle:
      out.merge(start_engagement());
      break;
    case Phase::placement:
      if (state_.phase_elapsed >= config_.placement_duration - kTimeEps) out.merge(run());
      break;
    case Phase::running:
      if (state_.awaiting_kickoff) out.merge(start_engagement());
      break;
    case Phase::halftime:
      out.merge(halftime_swap());
      out.merge(start_engagement());
      break;
    case Phase::finished:
      break;
  }
}

RuleOutput RuleEngine::start_engagement() {
  const bool allowed = state_.phase == Phase::idle || state_.phase == Phase::halftime ||
                       (state_.phase == Phase::running && state_.awaiting_kickoff);
  if (!allowed) throw Error(Errc::phase, "engagement not allowed while " + std::string(to_string(state_.phase)));
  state_.phase = Phase::placement;
  state_.phase_elapsed = 0.0;
  state_.awaiting_kickoff = false;
  state_.goal_armed = true;
  state_.last_ball.reset();
  for (auto& [id, r] : state_.robots) {
    r.hold = 0.0;
    r.outside = 0.0;
    r.was_inside = false;
  }
  RuleOutput out;
  out.engage = true;
  return out;
}

RuleOutput RuleEngine::run() {
  if (state_.phase != Phase::placement) {
    throw Error(Errc::phase, "run needs placement, phase is " + std::string(to_string(state_.phase)));
  }
  state_.phase = Phase::running;
  state_.phase_elapsed = 0.0;
  return {};
}

RuleOutput RuleEngine::end_half() {
  if (state_.phase != Phase::running) {
    throw Error(Errc::phase, "no half in progress, phase is " + std::string(to_string(state_.phase)));
  }
  state_.phase_elapsed = 0.0;
  if (state_.half == 1) {
    state_.phase = Phase::halftime;
    state_.half = 2;
    state_.clock = 0.0;
  } else {
    state_.phase = Phase::finished;
  }
  for (auto& [id, r] : state_.robots) r.penalty = 0.0;
  return {};
}

RuleOutput RuleEngine::halftime_swap() {
  if (state_.phase != Phase::halftime) {
    throw Error(Errc::phase, "swap only at half time, phase is " + std::string(to_string(state_.phase)));
  }
  state_.swapped = !state_.swapped;
  state_.green_side = -state_.green_side;
  RuleOutput out;
  out.swap = true;
  return out;
}

void RuleEngine::referee_preempt(const RobotId& robot, bool on) {
  const auto it = state_.robots.find(robot);
  if (it == state_.robots.end()) throw Error(Errc::not_found, "no robot " + describe(robot));
  it->second.referee_preempted = on;
}

}  // namespace kickoff
