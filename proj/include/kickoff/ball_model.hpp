#pragma once

#include <array>
#include <iosfwd>
#include <span>
#include <vector>

#include "kickoff/geometry.hpp"

namespace kickoff {

struct BallState {
  Vec2 pos;  // m, field frame
  Vec2 vel;  // m/s, field frame

  double speed() const { return vel.norm(); }
  bool operator==(const BallState&) const = default;
};

// Rolling friction as a constant deceleration opposing the velocity.
struct DecelModel {
  double decel = 0.25;  // m/s^2
};

// Impulse duration (s) -> initial ball speed (m/s), a polynomial of degree <= 2.
struct KickMap {
  std::array<double, 3> coeffs{0.0, 0.0, 0.0};  // c0 + c1*t + c2*t^2
  double cap = 0.005;                             // s
  double residual_variance = 0.0;                 // (m/s)^2, from the fit

  // Evaluates on [0, cap] (the impulse is clamped) and never returns a negative speed.
  double speed(double impulse) const;
  double raw(double impulse) const;
};

struct KickSample {
  double impulse = 0.0;  // s
  double speed = 0.0;    // m/s
};

// Advances by dt with exact piecewise integration: the ball stops exactly at
// |v|/decel and never reverses. Throws Errc::domain unless dt > 0.
BallState step_ball(const BallState& state, const DecelModel& model, double dt);

struct StopPrediction {
  Vec2 position;
  double time = 0.0;  // s until rest
};

StopPrediction predict_stop(const BallState& state, const DecelModel& model);

// Least-squares quadratic fit (degree reduced when fewer than 3 distinct
// impulses are present). Throws Errc::insufficient_data on an empty set and
// Errc::validation on samples outside [0, cap] or with negative speed.
KickMap fit_kick_map(std::span<const KickSample> samples, double cap = 0.005);

struct KickInversion {
  double impulse = 0.0;
  bool reachable = true;
};

// Smallest impulse in [0, cap] whose predicted speed reaches target_speed.
// Throws Errc::calibration_invalid if the map decreases on [0, cap].
KickInversion invert_kick_map(const KickMap& map, double target_speed);

struct TimedPoint {
  double t = 0.0;
  Vec2 p;
};

// Finite-difference velocity over the trailing `window` samples.
// Throws Errc::insufficient_data with fewer than 2 samples and
// Errc::validation if timestamps are not strictly increasing.
Vec2 estimate_velocity(std::span<const TimedPoint> positions, std::size_t window = 3);

struct SpeedSample {
  double t = 0.0;
  double speed = 0.0;
};

// Speed curve from sliding finite differences; each sample is stamped at the
// centre of its window.
std::vector<SpeedSample> finite_difference_speeds(std::span<const TimedPoint> positions, std::size_t window = 3);

// CSV with header `impulse_s,speed_mps`.
std::vector<KickSample> read_kick_samples(std::istream& in);
void write_kick_samples(std::ostream& out, std::span<const KickSample> samples);

}  // namespace kickoff
