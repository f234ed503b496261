#pragma once

#include <cmath>
#include <numbers>

namespace kickoff {

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

struct Vec2 {
  double x = 0.0;
  double y = 0.0;

  constexpr Vec2() = default;
  constexpr Vec2(double x_, double y_) : x(x_), y(y_) {}

  constexpr Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
  constexpr Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
  constexpr Vec2 operator-() const { return {-x, -y}; }
  constexpr Vec2 operator*(double s) const { return {x * s, y * s}; }
  constexpr Vec2 operator/(double s) const { return {x / s, y / s}; }
  constexpr Vec2& operator+=(const Vec2& o) { x += o.x; y += o.y; return *this; }
  constexpr Vec2& operator-=(const Vec2& o) { x -= o.x; y -= o.y; return *this; }
  constexpr bool operator==(const Vec2&) const = default;

  constexpr double dot(const Vec2& o) const { return x * o.x + y * o.y; }
  constexpr double cross(const Vec2& o) const { return x * o.y - y * o.x; }
  double norm() const { return std::hypot(x, y); }
  constexpr double squared_norm() const { return x * x + y * y; }
  bool finite() const { return std::isfinite(x) && std::isfinite(y); }
};

constexpr Vec2 operator*(double s, const Vec2& v) { return v * s; }

inline double distance(const Vec2& a, const Vec2& b) { return (a - b).norm(); }

// Planar pose in the field frame. theta is kept in (-pi, pi] by the constructor.
struct Pose2D {
  double x = 0.0;
  double y = 0.0;
  double theta = 0.0;

  Pose2D() = default;
  Pose2D(double x_, double y_, double theta_);
  Pose2D(const Vec2& p, double theta_) : Pose2D(p.x, p.y, theta_) {}

  Vec2 position() const { return {x, y}; }
  // Unit vector along the robot's x axis (the kicker direction).
  Vec2 heading() const { return {std::cos(theta), std::sin(theta)}; }
  bool operator==(const Pose2D&) const = default;
};

struct Segment {
  Vec2 a;
  Vec2 b;
};

// Normalizes to (-pi, pi]. Throws Errc::domain on non-finite input.
double wrap_angle(double angle);

// Shortest signed rotation taking `current` onto `target`.
double angle_error(double target, double current);

// Direction of (to - from) in (-pi, pi]. Throws Errc::undefined_bearing if from == to.
double bearing(const Vec2& from, const Vec2& to);

Vec2 rotate(const Vec2& v, double angle);

// Robot frame: x forward (kicker), y to the left.
Vec2 field_to_robot(const Pose2D& pose, const Vec2& point);
Vec2 robot_to_field(const Pose2D& pose, const Vec2& point);

struct SegmentIntersection {
  enum class Kind { none, point, overlap };

  Kind kind = Kind::none;
  Vec2 point;          // valid for Kind::point
  Segment overlap;     // valid for Kind::overlap: the shared sub-segment

  bool intersects() const { return kind != Kind::none; }
};

// Closed-segment intersection. Throws Errc::degenerate_segment for zero-length input.
SegmentIntersection segment_intersection(const Segment& s1, const Segment& s2);

}  // namespace kickoff
