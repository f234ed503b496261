#pragma once

#include <array>
#include <compare>
#include <cstdint>
#include <optional>
#include <random>
#include <string_view>
#include <vector>

#include "kickoff/ball_model.hpp"
#include "kickoff/geometry.hpp"
#include "kickoff/kinematics.hpp"
#include "kickoff/vision_calib.hpp"

namespace kickoff {

enum class Team { green, blue };

std::string_view to_string(Team team);
std::optional<Team> parse_team(std::string_view name);
constexpr Team other(Team t) { return t == Team::green ? Team::blue : Team::green; }
constexpr std::size_t index(Team t) { return t == Team::green ? 0 : 1; }

// Identity as seen by the camera: marker colour and number.
struct RobotId {
  Team team = Team::green;
  int number = 1;
  auto operator<=>(const RobotId&) const = default;
};

// Origin at the field centre, x towards the goal at +length/2.
struct FieldGeometry {
  double length = 1.83;
  double width = 1.22;
  double goal_width = 0.60;
  double margin = 0.30;
  bool walls = true;  // false: a ball leaving the carpet stops at the boundary

  // side is +1 or -1.
  Segment goal_line(int side) const;
  Vec2 goal_center(int side) const { return {side * length / 2.0, 0.0}; }
  std::array<Vec2, 4> corners() const;
  double bound_x() const { return length / 2.0 + margin; }
  double bound_y() const { return width / 2.0 + margin; }

  // Throws Errc::config naming the offending field.
  void validate() const;
};

struct DetectionNoise {
  double position = 0.002;                 // m, per axis
  double orientation = 0.5 * kPi / 180.0;  // rad
  double ball_dropout = 0.0;               // probability a frame misses the ball
};

struct KickerConfig {
  KickMap true_map{{0.0, 0.0, 40000.0}, 0.005, 0.0};
  double speed_noise = 0.05;            // m/s
  double cooldown = 0.5;                // s
  double reach = 0.04;                  // m beyond the robot's front edge
  double half_angle = 25.0 * kPi / 180.0;
};

struct VisionConfig {
  bool full_pipeline = false;
  ImageGeometry image;
  double meters_per_pixel = 0.003;
  double perspective_x = 0.0;           // h(2,0) of the synthetic camera, 1/px
  double perspective_y = 0.0;           // h(2,1)
  double marker_size = 0.08;
  double marker_inset = 0.15;
  double calibration_pixel_noise = 0.0; // px
  double calibration_tolerance = 0.01;  // m
};

struct SimConfig {
  FieldGeometry field;
  double robot_radius = 0.09;
  double ball_radius = 0.021;
  int green_robots = 2;
  int blue_robots = 2;
  SpeedLimits limits;
  WheelLayout layout = WheelLayout::three_wheel();
  DecelModel ball;
  KickerConfig kicker;
  double restitution = 0.3;
  int physics_hz = 240;
  int detection_hz = 30;
  double watchdog = 0.5;  // s before a stale command decays to zero
  DetectionNoise noise;
  VisionConfig vision;
  std::uint64_t seed = 1;

  int robots_in(Team t) const { return t == Team::green ? green_robots : blue_robots; }
  void validate() const;
};

struct RobotState {
  RobotId id;
  int body = 0;  // physical robot, fixed for the whole match
  Pose2D pose;
  Twist command;
  double command_age = 0.0;
  bool preempted = false;
  double kicker_cooldown = 0.0;
  Vec2 velocity;  // field frame, last tick
};

struct WorldState {
  double time = 0.0;
  std::uint64_t tick = 0;
  std::vector<RobotState> robots;
  BallState ball;
  std::mt19937_64 rng;

  const RobotState* find(const RobotId& id) const;
  RobotState* find(const RobotId& id);
};

struct RobotDetection {
  RobotId id;
  Pose2D pose;
  bool preempted = false;
};

struct DetectionFrame {
  double timestamp = 0.0;
  std::uint64_t frame_number = 0;
  std::vector<RobotDetection> robots;
  std::optional<Vec2> ball;
  bool calibrated = true;

  const RobotDetection* find(const RobotId& id) const;
};

// Pure world update over dt: robots move by their clamped commands, the ball
// rolls, discs are separated and the ball bounces off walls.
WorldState step(const WorldState& world, const SimConfig& config, double dt);

// Kickoff poses: attacker (number 1) 0.25 m behind centre, keeper (number 2)
// on its own goal line centre, an optional third robot between them.
// green_side is the x sign of the goal green defends.
std::vector<std::pair<RobotId, Pose2D>> kickoff_formation(const SimConfig& config, int green_side);

struct KickOutcome {
  bool contact = false;
  bool clipped = false;   // impulse exceeded the cap
  double impulse = 0.0;   // applied
  double speed = 0.0;     // imparted ball speed
};

struct TeleportOutcome {
  Vec2 displacement;  // applied on top of the requested position to clear overlaps
  bool adjusted = false;
};

class Simulator {
 public:
  explicit Simulator(SimConfig config);

  const SimConfig& config() const { return config_; }
  const WorldState& world() const { return world_; }
  double dt() const { return 1.0 / config_.physics_hz; }

  // One physics tick; returns a detection frame when the vision clock fires.
  std::optional<DetectionFrame> advance();

  // Latest-wins. Throws not_found / preempted / validation / frame_mismatch.
  void command_robot(const RobotId& id, const Twist& twist);
  // Throws not_found / preempted / cooldown / validation.
  KickOutcome kick(const RobotId& id, double impulse);
  // Throws not_found / placement.
  TeleportOutcome teleport_robot(const RobotId& id, const Pose2D& pose);
  TeleportOutcome teleport_ball(const Vec2& position);
  void set_preempted(const RobotId& id, bool on);
  // Exchanges colours between robots of the same number (marker swap).
  void swap_team_labels();

  DetectionFrame emit_detection();

  // Synthetic camera (truth) and the homography fitted from fiducials.
  const Homography& camera() const { return camera_; }
  const CalibrationReport& calibration() const { return calibration_; }
  const std::vector<Correspondence>& fiducials() const { return fiducials_; }

 private:
  void calibrate();

  SimConfig config_;
  WorldState world_;
  std::uint64_t frames_ = 0;
  Homography camera_;
  CalibrationReport calibration_;
  std::vector<Correspondence> fiducials_;
};

// Calibration run: one robot kicks a resting ball n times with impulses
// cap*(i+1)/n and the true ball speed right after each kick is recorded.
std::vector<KickSample> simulate_kicks(SimConfig config, int n);

}  // namespace kickoff
