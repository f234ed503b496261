#pragma once

#include <deque>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kickoff/ball_model.hpp"
#include "kickoff/kinematics.hpp"
#include "kickoff/simulator.hpp"

namespace kickoff {

// Proportional gains. Closed-loop error decreases monotonically while
// gain * frame period < 1, i.e. below 30 s^-1 at 30 Hz.
struct Gains {
  double position = 2.0;     // s^-1
  double orientation = 3.0;  // s^-1
};

struct GotoTarget {
  Pose2D pose;
  double position_tolerance = 0.02;
  double orientation_tolerance = 2.0 * kPi / 180.0;
};

// Robot-frame twist servoing `current` onto the target; zero inside both tolerances.
Twist goto_step(const Pose2D& current, const GotoTarget& target, const Gains& gains = {},
                const SpeedLimits& limits = {});

struct FaceBallResult {
  Twist twist;
  bool coincident = false;  // ball on the robot centre, no bearing
};

FaceBallResult face_ball_step(const Pose2D& robot, const Vec2& ball, double gain = 3.0,
                              const SpeedLimits& limits = {});

struct ApproachParams {
  double gain = 3.0;
  double align_threshold = 15.0 * kPi / 180.0;
  double kick_distance = 0.09 + 0.021 + 0.02;  // robot radius + ball radius + 2 cm
  double forward_speed = 0.20;
  double kick_impulse = 0.005;
};

struct Order {
  Twist twist;
  std::optional<double> kick;  // impulse, s
};

// Rotate towards the ball all the time, drive forward only when roughly
// aligned, kick when close and aligned.
Order approach_and_kick_step(const Pose2D& robot, const Vec2& ball, const ApproachParams& params = {},
                             const SpeedLimits& limits = {});

struct AttackPlan {
  Vec2 approach;   // T: standoff point behind the ball
  double heading;  // alpha: from T towards the goal centre
  double standoff; // d
};

// Throws Errc::domain when ball == goal or d <= 0.
AttackPlan attacker_plan(const Vec2& ball, const Vec2& goal_center, double standoff);

// Where along its goal line the keeper should stand, extrapolating the
// attacker's heading through the ball. defended_side is the x sign of the goal.
std::optional<double> goalie_intercept(const Pose2D& attacker, const Vec2& ball, const FieldGeometry& field,
                                       int defended_side = 1);

// Resting point of a rolling ball (the ball itself when at rest).
Vec2 moving_ball_target(const BallState& ball, const DecelModel& model);

// Ball velocity from recent detections; resets on jumps (teleports).
class BallTracker {
 public:
  explicit BallTracker(std::size_t window = 5) : window_(window) {}

  void observe(double t, const std::optional<Vec2>& ball);
  std::optional<BallState> estimate() const;

 private:
  std::size_t window_;
  std::deque<TimedPoint> history_;
};

// Physical constants a client learns from the controller's hello.
struct PlayParams {
  FieldGeometry field;
  double robot_radius = 0.09;
  double ball_radius = 0.021;
  DecelModel decel;
  double dt = 1.0 / 30.0;  // detection period
  SpeedLimits limits;

  static PlayParams from(const SimConfig& config);
};

struct MatchView {
  const DetectionFrame& frame;
  const PlayParams& params;
  Team team = Team::green;
  int attack_side = 1;  // x sign of the goal this team attacks
  std::optional<BallState> ball;
};

class Behavior {
 public:
  virtual ~Behavior() = default;
  virtual Order decide(const RobotDetection& self, const MatchView& view) = 0;
  virtual void reset() {}
};

struct AttackerParams {
  bool predict = true;
  double standoff = 0.15;
  double nudge_time = 0.3;
  double arrive_position = 0.025;
  double arrive_orientation = 4.0 * kPi / 180.0;
  Gains gains;
  ApproachParams kick;
};

class Attacker : public Behavior {
 public:
  explicit Attacker(AttackerParams params = {}) : params_(params) {}
  Order decide(const RobotDetection& self, const MatchView& view) override;
  void reset() override { nudge_left_.reset(); }

 private:
  AttackerParams params_;
  std::optional<double> nudge_left_;
};

class Goalie : public Behavior {
 public:
  Order decide(const RobotDetection& self, const MatchView& view) override;

 private:
  Gains gains_;
  ApproachParams kick_;
};

class Chaser : public Behavior {
 public:
  Order decide(const RobotDetection& self, const MatchView& view) override;
};

class Idle : public Behavior {
 public:
  Order decide(const RobotDetection&, const MatchView&) override { return {}; }
};

// Known names: attacker, attacker-naive, goalie, chaser, idle.
// Throws Errc::validation for anything else.
std::unique_ptr<Behavior> make_behavior(const std::string& name);
bool is_behavior_name(const std::string& name);

// Per-team decision loop: one behaviour per robot number.
class TeamStrategy {
 public:
  TeamStrategy(Team team, std::vector<std::string> roles);

  Team team() const { return team_; }
  const std::vector<std::string>& roles() const { return roles_; }

  // Orders for this team's non-preempted robots seen in the frame.
  std::vector<std::pair<RobotId, Order>> decide(const DetectionFrame& frame, int attack_side,
                                                const PlayParams& params);

  void reset();

 private:
  Team team_;
  std::vector<std::string> roles_;
  std::map<int, std::unique_ptr<Behavior>> behaviors_;
  BallTracker tracker_;
};

}  // namespace kickoff
