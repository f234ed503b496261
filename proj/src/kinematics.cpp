#include "kickoff/kinematics.hpp"

#include <algorithm>
#include <string>

#include <Eigen/Dense>

#include "kickoff/error.hpp"

namespace kickoff {

WheelLayout::WheelLayout(std::vector<Wheel> wheels) : wheels_(std::move(wheels)) {
  if (wheels_.size() < 3) {
    throw Error(Errc::degenerate_layout, "need at least 3 wheels, got " + std::to_string(wheels_.size()));
  }
  for (std::size_t i = 0; i < wheels_.size(); ++i) {
    const Wheel& w = wheels_[i];
    if (!(w.chassis_radius > 0.0) || !(w.wheel_radius > 0.0) || !std::isfinite(w.mount_angle)) {
      throw Error(Errc::degenerate_layout, "wheel " + std::to_string(i) + " has invalid geometry");
    }
    for (std::size_t j = 0; j < i; ++j) {
      if (std::abs(angle_error(w.mount_angle, wheels_[j].mount_angle)) < 1e-9) {
        throw Error(Errc::degenerate_layout, "wheels " + std::to_string(j) + " and " + std::to_string(i) +
                                                 " share a mount angle");
      }
    }
  }

  matrix_.resize(static_cast<Eigen::Index>(wheels_.size()), 3);
  for (std::size_t i = 0; i < wheels_.size(); ++i) {
    const Wheel& w = wheels_[i];
    const auto row = static_cast<Eigen::Index>(i);
    matrix_(row, 0) = -std::sin(w.mount_angle) / w.wheel_radius;
    matrix_(row, 1) = std::cos(w.mount_angle) / w.wheel_radius;
    matrix_(row, 2) = w.chassis_radius / w.wheel_radius;
  }

  Eigen::JacobiSVD<Eigen::MatrixXd> svd(matrix_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& sv = svd.singularValues();
  if (sv(2) <= 1e-9 * sv(0)) throw Error(Errc::degenerate_layout, "layout matrix is rank deficient");
  pinv_ = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().transpose();
}

WheelLayout WheelLayout::three_wheel(double chassis_radius, double wheel_radius) {
  std::vector<Wheel> wheels;
  for (double deg : {90.0, 210.0, 330.0}) {
    wheels.push_back({deg * kPi / 180.0, chassis_radius, wheel_radius});
  }
  return WheelLayout(std::move(wheels));
}

WheelSpeeds inverse_kinematics(const WheelLayout& layout, const Twist& twist) {
  if (twist.frame != Frame::robot) throw Error(Errc::frame_mismatch, "inverse kinematics needs a robot-frame twist");
  WheelSpeeds out;
  out.reserve(layout.size());
  for (const Wheel& w : layout.wheels()) {
    out.push_back((-std::sin(w.mount_angle) * twist.vx + std::cos(w.mount_angle) * twist.vy +
                   w.chassis_radius * twist.omega) /
                  w.wheel_radius);
  }
  return out;
}

Twist forward_kinematics(const WheelLayout& layout, const WheelSpeeds& speeds) {
  if (speeds.size() != layout.size()) {
    throw Error(Errc::validation, "expected " + std::to_string(layout.size()) + " wheel speeds, got " +
                                      std::to_string(speeds.size()));
  }
  const Eigen::Map<const Eigen::VectorXd> s(speeds.data(), static_cast<Eigen::Index>(speeds.size()));
  const Eigen::Vector3d t = layout.pseudo_inverse() * s;
  return {t(0), t(1), t(2), Frame::robot};
}

Twist clamp_twist(const Twist& twist, const SpeedLimits& limits) {
  Twist out = twist;
  const double speed = twist.linear_speed();
  if (speed > limits.max_linear) {
    double k = limits.max_linear / speed;
    out.vx = twist.vx * k;
    out.vy = twist.vy * k;
    // Rounding may leave the norm one ulp above the limit; shrink until it is not.
    while (out.linear_speed() > limits.max_linear) {
      k = std::nextafter(k, 0.0);
      out.vx = twist.vx * k;
      out.vy = twist.vy * k;
    }
  }
  out.omega = std::clamp(twist.omega, -limits.max_angular, limits.max_angular);
  return out;
}

}  // namespace kickoff
