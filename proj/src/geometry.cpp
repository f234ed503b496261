#include "kickoff/geometry.hpp"

#include <algorithm>

#include "kickoff/error.hpp"

namespace kickoff {

Pose2D::Pose2D(double x_, double y_, double theta_) : x(x_), y(y_), theta(wrap_angle(theta_)) {}

double wrap_angle(double angle) {
  if (!std::isfinite(angle)) throw Error(Errc::domain, "angle is not finite");
  // remainder() lands in [-pi, pi]; move the lower boundary to the upper one.
  double r = std::remainder(angle, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  if (r > kPi) r -= kTwoPi;
  return r;
}

double angle_error(double target, double current) { return wrap_angle(target - current); }

double bearing(const Vec2& from, const Vec2& to) {
  const Vec2 d = to - from;
  if (d.x == 0.0 && d.y == 0.0) throw Error(Errc::undefined_bearing, "points coincide");
  return wrap_angle(std::atan2(d.y, d.x));
}

Vec2 rotate(const Vec2& v, double angle) {
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  return {c * v.x - s * v.y, s * v.x + c * v.y};
}

Vec2 field_to_robot(const Pose2D& pose, const Vec2& point) {
  return rotate(point - pose.position(), -pose.theta);
}

Vec2 robot_to_field(const Pose2D& pose, const Vec2& point) {
  return pose.position() + rotate(point, pose.theta);
}

SegmentIntersection segment_intersection(const Segment& s1, const Segment& s2) {
  const Vec2 r = s1.b - s1.a;
  const Vec2 s = s2.b - s2.a;
  if (r.squared_norm() == 0.0 || s.squared_norm() == 0.0) {
    throw Error(Errc::degenerate_segment, "segment endpoints coincide");
  }

  const Vec2 qp = s2.a - s1.a;
  const double denom = r.cross(s);
  const double scale = r.norm() * s.norm();
  constexpr double kEps = 1e-12;

  SegmentIntersection out;
  if (std::abs(denom) <= kEps * scale) {
    // Parallel. Collinear only if s2.a lies on the supporting line of s1.
    if (std::abs(qp.cross(r)) > kEps * r.norm() * std::max(1.0, qp.norm())) return out;
    const double rr = r.squared_norm();
    double t0 = qp.dot(r) / rr;
    double t1 = t0 + s.dot(r) / rr;
    if (t0 > t1) std::swap(t0, t1);
    const double lo = std::max(0.0, t0);
    const double hi = std::min(1.0, t1);
    if (lo > hi) return out;
    if (lo == hi) {
      out.kind = SegmentIntersection::Kind::point;
      out.point = s1.a + r * lo;
      return out;
    }
    out.kind = SegmentIntersection::Kind::overlap;
    out.overlap = {s1.a + r * lo, s1.a + r * hi};
    return out;
  }

  const double t = qp.cross(s) / denom;
  const double u = qp.cross(r) / denom;
  if (t < 0.0 || t > 1.0 || u < 0.0 || u > 1.0) return out;
  out.kind = SegmentIntersection::Kind::point;
  out.point = s1.a + r * t;
  return out;
}

}  // namespace kickoff
