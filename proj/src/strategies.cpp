#include "kickoff/strategies.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kickoff/error.hpp"

namespace kickoff {

PlayParams PlayParams::from(const SimConfig& c) {
  return {c.field, c.robot_radius, c.ball_radius, c.ball, 1.0 / c.detection_hz, c.limits};
}

Twist goto_step(const Pose2D& current, const GotoTarget& target, const Gains& gains, const SpeedLimits& limits) {
  const Vec2 local = field_to_robot(current, target.pose.position());
  const double dtheta = angle_error(target.pose.theta, current.theta);
  if (local.norm() <= target.position_tolerance && std::abs(dtheta) <= target.orientation_tolerance) return {};
  return clamp_twist({gains.position * local.x, gains.position * local.y, gains.orientation * dtheta, Frame::robot},
                     limits);
}

FaceBallResult face_ball_step(const Pose2D& robot, const Vec2& ball, double gain, const SpeedLimits& limits) {
  if (robot.position() == ball) return {{}, true};
  const double err = angle_error(bearing(robot.position(), ball), robot.theta);
  return {clamp_twist({0.0, 0.0, gain * err, Frame::robot}, limits), false};
}

Order approach_and_kick_step(const Pose2D& robot, const Vec2& ball, const ApproachParams& p,
                             const SpeedLimits& limits) {
  Order out;
  if (robot.position() == ball) return out;
  // Bearing is measured from the robot origin, not the field origin.
  const double err = angle_error(bearing(robot.position(), ball), robot.theta);
  const bool aligned = std::abs(err) < p.align_threshold;
  out.twist = clamp_twist({aligned ? p.forward_speed : 0.0, 0.0, p.gain * err, Frame::robot}, limits);
  if (aligned && distance(robot.position(), ball) < p.kick_distance) out.kick = p.kick_impulse;
  return out;
}

AttackPlan attacker_plan(const Vec2& ball, const Vec2& goal_center, double standoff) {
  if (ball == goal_center) throw Error(Errc::domain, "ball and goal centre coincide");
  if (!(standoff > 0.0)) throw Error(Errc::domain, "standoff must be positive");
  const Vec2 u = (goal_center - ball) / (goal_center - ball).norm();
  return {ball - u * standoff, bearing(ball, goal_center), standoff};
}

std::optional<double> goalie_intercept(const Pose2D& attacker, const Vec2& ball, const FieldGeometry& field,
                                       int defended_side) {
  // Mirror so the defended goal is always at +length/2.
  double theta = attacker.theta;
  Vec2 b = ball;
  if (defended_side < 0) {
    theta = wrap_angle(kPi - theta);
    b.x = -b.x;
  }
  if (!(theta > -kPi / 2.0 && theta < kPi / 2.0)) return std::nullopt;
  const double slope = std::tan(theta);
  const double offset = b.y - slope * b.x;
  const double y = slope * field.length / 2.0 + offset;
  return std::clamp(y, -field.goal_width / 2.0, field.goal_width / 2.0);
}

Vec2 moving_ball_target(const BallState& ball, const DecelModel& model) { return predict_stop(ball, model).position; }

void BallTracker::observe(double t, const std::optional<Vec2>& ball) {
  if (!ball) return;
  if (!history_.empty() && (distance(history_.back().p, *ball) > 0.2 || !(t > history_.back().t))) history_.clear();
  history_.push_back({t, *ball});
  while (history_.size() > window_) history_.pop_front();
}

std::optional<BallState> BallTracker::estimate() const {
  if (history_.empty()) return std::nullopt;
  BallState s{history_.back().p, {}};
  if (history_.size() >= 2) {
    const std::vector<TimedPoint> pts(history_.begin(), history_.end());
    s.vel = estimate_velocity(pts, window_);
    // Below this the finite difference is mostly detection noise.
    if (s.vel.norm() < 0.05) s.vel = {};
  }
  return s;
}

Order Attacker::decide(const RobotDetection& self, const MatchView& view) {
  Order out;
  if (!view.ball) return out;
  const PlayParams& pp = view.params;
  const Pose2D& me = self.pose;
  const Vec2 ball_now = view.ball->pos;

  if (nudge_left_) {
    // Push forward so the ball rests against the kicker, then fire.
    *nudge_left_ -= pp.dt;
    out.twist = clamp_twist({params_.kick.forward_speed, 0.0, 0.0, Frame::robot}, pp.limits);
    if (*nudge_left_ <= 0.0) {
      nudge_left_.reset();
      const Vec2 rel = field_to_robot(me, ball_now);
      if (rel.norm() < params_.kick.kick_distance && std::abs(std::atan2(rel.y, rel.x)) < params_.kick.align_threshold) {
        out.kick = params_.kick.kick_impulse;
      }
    }
    return out;
  }

  const Vec2 target_ball = params_.predict ? moving_ball_target(*view.ball, pp.decel) : ball_now;
  const Vec2 goal = pp.field.goal_center(view.attack_side);
  if (target_ball == goal) return out;
  const AttackPlan plan = attacker_plan(target_ball, goal, params_.standoff);

  const Vec2 u = (goal - target_ball) / (goal - target_ball).norm();
  const Vec2 perp{-u.y, u.x};
  const Vec2 rel = me.position() - target_ball;
  const double along = rel.dot(u);
  const double lateral = perp.dot(rel);
  const double clearance = pp.robot_radius + pp.ball_radius;

  Vec2 waypoint = plan.approach;
  if (along > -params_.standoff / 2.0 && std::abs(lateral) < clearance + 0.09) {
    // In front of the ball: go round it instead of pushing it back.
    double side = lateral >= 0.0 ? 1.0 : -1.0;
    Vec2 w = target_ball + perp * (side * (clearance + 0.14));
    if (std::abs(w.y) > pp.field.width / 2.0) w = target_ball - perp * (side * (clearance + 0.14));
    waypoint = w;
  }

  const GotoTarget target{Pose2D(waypoint, plan.heading), 0.0, 0.0};
  out.twist = goto_step(me, target, params_.gains, pp.limits);

  const bool at_approach = waypoint == plan.approach && distance(me.position(), plan.approach) < params_.arrive_position &&
                           std::abs(angle_error(plan.heading, me.theta)) < params_.arrive_orientation;
  const bool ball_resting = view.ball->vel.norm() == 0.0;
  if (at_approach && ball_resting) nudge_left_ = params_.nudge_time;
  return out;
}

Order Goalie::decide(const RobotDetection& self, const MatchView& view) {
  Order out;
  const PlayParams& pp = view.params;
  const int defended = -view.attack_side;
  const double facing = defended < 0 ? 0.0 : kPi;
  const double x = defended * (pp.field.length / 2.0 - pp.robot_radius - 0.03);

  double y = 0.0;
  if (view.ball) {
    const Vec2 b = view.ball->pos;
    y = std::clamp(b.y, -pp.field.goal_width / 2.0, pp.field.goal_width / 2.0);
    // The opponent closest to the ball is the likeliest shooter.
    const RobotDetection* shooter = nullptr;
    double best = std::numeric_limits<double>::infinity();
    for (const RobotDetection& r : view.frame.robots) {
      if (r.id.team == view.team) continue;
      const double d = distance(r.pose.position(), b);
      if (d < best) {
        best = d;
        shooter = &r;
      }
    }
    if (shooter) {
      if (auto hit = goalie_intercept(shooter->pose, b, pp.field, defended)) y = *hit;
    }
    const Vec2 rel = field_to_robot(self.pose, b);
    if (rel.norm() < kick_.kick_distance && std::abs(std::atan2(rel.y, rel.x)) < kick_.align_threshold) {
      out.kick = kick_.kick_impulse;
    }
  }
  out.twist = goto_step(self.pose, {Pose2D(x, y, facing)}, gains_, pp.limits);
  return out;
}

Order Chaser::decide(const RobotDetection& self, const MatchView& view) {
  if (!view.ball) return {};
  ApproachParams p;
  p.kick_distance = view.params.robot_radius + view.params.ball_radius + 0.02;
  return approach_and_kick_step(self.pose, view.ball->pos, p, view.params.limits);
}

bool is_behavior_name(const std::string& name) {
  return name == "attacker" || name == "attacker-naive" || name == "goalie" || name == "chaser" || name == "idle";
}

std::unique_ptr<Behavior> make_behavior(const std::string& name) {
  if (name == "attacker") return std::make_unique<Attacker>();
  if (name == "attacker-naive") {
    AttackerParams p;
    p.predict = false;
    return std::make_unique<Attacker>(p);
  }
  if (name == "goalie") return std::make_unique<Goalie>();
  if (name == "chaser") return std::make_unique<Chaser>();
  if (name == "idle") return std::make_unique<Idle>();
  throw Error(Errc::validation, "unknown strategy '" + name + "'");
}

TeamStrategy::TeamStrategy(Team team, std::vector<std::string> roles) : team_(team), roles_(std::move(roles)) {
  for (std::size_t i = 0; i < roles_.size(); ++i) behaviors_[static_cast<int>(i) + 1] = make_behavior(roles_[i]);
}

std::vector<std::pair<RobotId, Order>> TeamStrategy::decide(const DetectionFrame& frame, int attack_side,
                                                            const PlayParams& params) {
  tracker_.observe(frame.timestamp, frame.ball);
  const MatchView view{frame, params, team_, attack_side, tracker_.estimate()};
  std::vector<std::pair<RobotId, Order>> out;
  for (auto& [number, behavior] : behaviors_) {
    const RobotDetection* self = frame.find({team_, number});
    if (!self || self->preempted) {
      behavior->reset();
      continue;
    }
    out.emplace_back(RobotId{team_, number}, behavior->decide(*self, view));
  }
  return out;
}

void TeamStrategy::reset() {
  tracker_ = BallTracker{};
  for (auto& [n, b] : behaviors_) b->reset();
}

}  // namespace kickoff
