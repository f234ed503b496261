#pragma once

#include <array>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "kickoff/simulator.hpp"

namespace kickoff {

enum class Phase { idle, placement, running, halftime, finished };

std::string_view to_string(Phase phase);

// What a key grants. Keys bind to colours, never to physical robots.
enum class Role { green, blue, referee, spectator };

std::string_view to_string(Role role);

struct RulesConfig {
  double hold_radius = 0.25;        // m
  double hold_limit = 5.0;          // s
  double hold_grace = 0.5;          // s outside the radius before the timer resets
  double penalty_duration = 5.0;    // s
  double half_duration = 300.0;     // s
  double placement_duration = 1.0;  // s, automatic referee only
  double goal_rearm_distance = 0.10;
  bool auto_referee = false;
  std::string green_key = "green-key";
  std::string blue_key = "blue-key";
  std::string referee_key = "referee-key";

  void validate() const;
};

struct GoalEvent {
  Team team = Team::green;  // scoring team
  double time = 0.0;
  Vec2 crossing;
};

struct PenaltyEvent {
  RobotId robot;
  double time = 0.0;
  double duration = 0.0;
};

struct RobotRuleState {
  double hold = 0.0;      // s accumulated near the ball
  double outside = 0.0;   // s since it last left the radius
  bool was_inside = false;
  double penalty = 0.0;   // s of preemption left
  bool referee_preempted = false;
};

struct GameState {
  Phase phase = Phase::idle;
  std::array<int, 2> score{0, 0};
  double clock = 0.0;  // s into the current half
  int half = 1;
  std::map<RobotId, RobotRuleState> robots;
  bool swapped = false;       // markers exchanged at half time
  int green_side = -1;        // x sign of the goal green defends
  bool goal_armed = true;
  bool awaiting_kickoff = false;
  double phase_elapsed = 0.0;
  std::optional<Vec2> last_ball;

  bool is_preempted(const RobotId& id) const;
  int defended_side(Team t) const { return t == Team::green ? green_side : -green_side; }
};

// Side effects the world must apply after a rule transition.
struct RuleOutput {
  std::vector<GoalEvent> goals;
  std::vector<PenaltyEvent> penalties;
  bool engage = false;  // teleport to the kickoff formation
  bool swap = false;    // exchange marker colours

  void merge(const RuleOutput& o);
};

// Goal iff prev->cur crosses a goal line strictly between the posts, moving out
// of the field. The team attacking that goal scores.
std::optional<GoalEvent> check_goal(const Vec2& prev, const Vec2& cur, const FieldGeometry& field, int green_side,
                                    double time);

class RuleEngine {
 public:
  RuleEngine(RulesConfig config, FieldGeometry field, int green_robots, int blue_robots);

  const RulesConfig& config() const { return config_; }
  const FieldGeometry& field() const { return field_; }
  const GameState& state() const { return state_; }

  std::optional<Role> role_for_key(std::string_view key) const;

  // Throws Errc::auth for a key no team or referee holds.
  bool authorize(std::string_view key, const RobotId& robot) const;

  // Advances clocks and evaluates goals, ball holding and automatic refereeing
  // for one detection frame covering dt seconds.
  RuleOutput on_frame(const DetectionFrame& frame, double dt);

  // Referee actions. Throw Errc::phase when not allowed in the current phase.
  RuleOutput start_engagement();
  RuleOutput run();
  RuleOutput end_half();
  RuleOutput halftime_swap();
  // Throws Errc::not_found for unknown robots.
  void referee_preempt(const RobotId& robot, bool on);

 private:
  void update_penalties(double dt);
  void update_goal(const DetectionFrame& frame, RuleOutput& out);
  void update_ball_hold(const DetectionFrame& frame, double dt, RuleOutput& out);
  void auto_referee(double dt, RuleOutput& out);

  RulesConfig config_;
  FieldGeometry field_;
  GameState state_;
};

}  // namespace kickoff
