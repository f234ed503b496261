#pragma once

#include <vector>

#include <Eigen/Core>

#include "kickoff/geometry.hpp"

namespace kickoff {

enum class Frame { robot, field };

// Chassis velocity (x_dot, y_dot, theta_dot).
struct Twist {
  double vx = 0.0;
  double vy = 0.0;
  double omega = 0.0;
  Frame frame = Frame::robot;

  bool finite() const { return std::isfinite(vx) && std::isfinite(vy) && std::isfinite(omega); }
  double linear_speed() const { return std::hypot(vx, vy); }
  bool operator==(const Twist&) const = default;
};

struct SpeedLimits {
  double max_linear = 0.20;   // m/s
  double max_angular = kPi;   // rad/s
};

struct Wheel {
  double mount_angle = 0.0;     // rad, position of the wheel around the chassis
  double chassis_radius = 0.06; // m, distance from chassis center to wheel contact
  double wheel_radius = 0.025;  // m
};

using WheelSpeeds = std::vector<double>;  // rad/s, one per wheel

class WheelLayout {
 public:
  // Throws Errc::degenerate_layout unless there are >= 3 wheels with distinct
  // mount angles, positive radii and a rank-3 layout matrix.
  explicit WheelLayout(std::vector<Wheel> wheels);

  // Three wheels at 90, 210 and 330 degrees.
  static WheelLayout three_wheel(double chassis_radius = 0.06, double wheel_radius = 0.025);

  const std::vector<Wheel>& wheels() const { return wheels_; }
  std::size_t size() const { return wheels_.size(); }

  // Row i maps a robot-frame twist onto wheel i's angular speed.
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::MatrixXd& pseudo_inverse() const { return pinv_; }

 private:
  std::vector<Wheel> wheels_;
  Eigen::MatrixXd matrix_;
  Eigen::MatrixXd pinv_;
};

// Throws Errc::frame_mismatch for a field-frame twist.
WheelSpeeds inverse_kinematics(const WheelLayout& layout, const Twist& twist);

// Least-squares chassis twist for the given wheel speeds (exact when consistent).
// Throws Errc::validation when the speed count does not match the layout.
Twist forward_kinematics(const WheelLayout& layout, const WheelSpeeds& speeds);

// Scales translation (keeping its direction) and clips rotation to the limits.
Twist clamp_twist(const Twist& twist, const SpeedLimits& limits = {});

}  // namespace kickoff
