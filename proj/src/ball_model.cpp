#include "kickoff/ball_model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include <Eigen/Dense>

#include "kickoff/csv.hpp"
#include "kickoff/error.hpp"

namespace kickoff {

double KickMap::raw(double impulse) const {
  return coeffs[0] + impulse * (coeffs[1] + impulse * coeffs[2]);
}

double KickMap::speed(double impulse) const {
  return std::max(0.0, raw(std::clamp(impulse, 0.0, cap)));
}

BallState step_ball(const BallState& state, const DecelModel& model, double dt) {
  if (!(dt > 0.0)) throw Error(Errc::domain, "dt must be positive");
  const double speed = state.speed();
  if (speed == 0.0) return {state.pos, {0.0, 0.0}};

  const Vec2 dir = state.vel / speed;
  const double t_stop = speed / model.decel;
  if (dt >= t_stop) {
    return {state.pos + dir * (speed * speed / (2.0 * model.decel)), {0.0, 0.0}};
  }
  const double travelled = speed * dt - 0.5 * model.decel * dt * dt;
  return {state.pos + dir * travelled, dir * (speed - model.decel * dt)};
}

StopPrediction predict_stop(const BallState& state, const DecelModel& model) {
  const double speed = state.speed();
  if (speed == 0.0) return {state.pos, 0.0};
  const Vec2 dir = state.vel / speed;
  return {state.pos + dir * (speed * speed / (2.0 * model.decel)), speed / model.decel};
}

KickMap fit_kick_map(std::span<const KickSample> samples, double cap) {
  if (samples.empty()) throw Error(Errc::insufficient_data, "no kick samples");
  if (!(cap > 0.0)) throw Error(Errc::validation, "impulse cap must be positive");

  std::set<double> distinct;
  for (const KickSample& s : samples) {
    if (!std::isfinite(s.impulse) || !std::isfinite(s.speed) || s.impulse < 0.0 || s.impulse > cap ||
        s.speed < 0.0) {
      throw Error(Errc::validation, "kick sample out of range (impulse " + std::to_string(s.impulse) +
                                        ", speed " + std::to_string(s.speed) + ")");
    }
    distinct.insert(s.impulse);
  }
  const int terms = static_cast<int>(std::min<std::size_t>(3, distinct.size()));

  // Fit in u = impulse / cap so the columns are of comparable magnitude.
  const auto n = static_cast<Eigen::Index>(samples.size());
  Eigen::MatrixXd a(n, terms);
  Eigen::VectorXd b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double u = samples[static_cast<std::size_t>(i)].impulse / cap;
    double p = 1.0;
    for (int k = 0; k < terms; ++k) {
      a(i, k) = p;
      p *= u;
    }
    b(i) = samples[static_cast<std::size_t>(i)].speed;
  }
  const Eigen::VectorXd x = a.colPivHouseholderQr().solve(b);

  KickMap map;
  map.cap = cap;
  double scale = 1.0;
  for (int k = 0; k < terms; ++k) {
    map.coeffs[static_cast<std::size_t>(k)] = x(k) / scale;
    scale *= cap;
  }
  const double ssr = (a * x - b).squaredNorm();
  map.residual_variance = n > terms ? ssr / static_cast<double>(n - terms) : 0.0;
  return map;
}

KickInversion invert_kick_map(const KickMap& map, double target_speed) {
  if (!(target_speed >= 0.0)) throw Error(Errc::validation, "target speed must be non-negative");
  const double c0 = map.coeffs[0];
  const double c1 = map.coeffs[1];
  const double c2 = map.coeffs[2];

  // The derivative is linear in t, so checking both ends covers the interval.
  const double tol = 1e-9 * (std::abs(c1) + 2.0 * std::abs(c2) * map.cap);
  if (c1 < -tol || c1 + 2.0 * c2 * map.cap < -tol) {
    throw Error(Errc::calibration_invalid, "kick map is not monotonic on [0, cap]");
  }

  if (target_speed <= map.speed(0.0)) return {0.0, true};
  if (target_speed > map.speed(map.cap)) return {map.cap, false};

  // Unique root of c2 t^2 + c1 t + (c0 - target) in (0, cap].
  const double c = c0 - target_speed;
  double t = 0.0;
  if (std::abs(c2) * map.cap <= 1e-12 * std::abs(c1)) {
    t = -c / c1;
  } else {
    const double disc = std::max(0.0, c1 * c1 - 4.0 * c2 * c);
    const double q = -0.5 * (c1 + std::copysign(std::sqrt(disc), c1));
    const double r1 = q / c2;
    const double r2 = q != 0.0 ? c / q : r1;
    auto inside = [&](double r) { return r >= -1e-12 * map.cap && r <= map.cap * (1.0 + 1e-12); };
    t = inside(r1) && (!inside(r2) || r1 <= r2) ? r1 : r2;
  }
  t = std::clamp(t, 0.0, map.cap);
  // Newton polish, then step up by ulps until the predicted speed reaches the target.
  const double slope = c1 + 2.0 * c2 * t;
  if (slope > 0.0) t = std::clamp(t - (map.raw(t) - target_speed) / slope, 0.0, map.cap);
  while (map.speed(t) < target_speed && t < map.cap) t = std::nextafter(t, map.cap);
  return {t, true};
}

namespace {

void check_timeline(std::span<const TimedPoint> positions) {
  if (positions.size() < 2) throw Error(Errc::insufficient_data, "need at least 2 timestamped positions");
  for (std::size_t i = 1; i < positions.size(); ++i) {
    if (!(positions[i].t > positions[i - 1].t)) {
      throw Error(Errc::validation, "timestamps must be strictly increasing");
    }
  }
}

}  // namespace

Vec2 estimate_velocity(std::span<const TimedPoint> positions, std::size_t window) {
  check_timeline(positions);
  const std::size_t w = std::clamp<std::size_t>(window, 2, positions.size());
  const TimedPoint& first = positions[positions.size() - w];
  const TimedPoint& last = positions.back();
  return (last.p - first.p) / (last.t - first.t);
}

std::vector<SpeedSample> finite_difference_speeds(std::span<const TimedPoint> positions, std::size_t window) {
  check_timeline(positions);
  const std::size_t w = std::clamp<std::size_t>(window, 2, positions.size());
  std::vector<SpeedSample> out;
  for (std::size_t end = w; end <= positions.size(); ++end) {
    const auto slice = positions.subspan(end - w, w);
    out.push_back({0.5 * (slice.front().t + slice.back().t), estimate_velocity(slice, w).norm()});
  }
  return out;
}

std::vector<KickSample> read_kick_samples(std::istream& in) {
  std::vector<KickSample> out;
  for (const auto& row : csv::read_numeric(in, 2, "impulse_s,speed_mps")) out.push_back({row[0], row[1]});
  return out;
}

void write_kick_samples(std::ostream& out, std::span<const KickSample> samples) {
  std::vector<std::vector<double>> rows;
  for (const KickSample& s : samples) rows.push_back({s.impulse, s.speed});
  csv::write_numeric(out, "impulse_s,speed_mps", rows);
}

}  // namespace kickoff
