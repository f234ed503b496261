#include "kickoff/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Core>

#include "kickoff/error.hpp"

namespace kickoff {
namespace {

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw Error(Errc::config, field + ": " + why);
}

// Exact displacement for a constant robot-frame twist held over dt.
Vec2 arc_displacement(double theta, const Twist& t, double dt) {
  const double a = t.omega * dt;
  double s = 0.0, c = 0.0;  // sin(a)/omega and (1 - cos(a))/omega
  if (std::abs(a) < 1e-6) {
    s = dt * (1.0 - a * a / 6.0);
    c = dt * (a / 2.0 - a * a * a / 24.0);
  } else {
    s = std::sin(a) / t.omega;
    c = (1.0 - std::cos(a)) / t.omega;
  }
  const Vec2 local{s * t.vx - c * t.vy, c * t.vx + s * t.vy};
  return rotate(local, theta);
}

// Resolves contacts after a tick. Robots never get pushed: a robot whose path
// runs into another robot, or into a ball it cannot move, stops short along its
// own path, so no robot covers more than its commanded displacement. The ball
// is pushed out of robots and bounces off the walls.
struct Separator {
  const SimConfig& cfg;
  WorldState& w;
  std::vector<Vec2> from;    // robot positions before the tick (empty: robots fixed)
  std::vector<Vec2> delta;   // proposed displacement, already inside the bounds
  std::vector<double> frac;  // share of the displacement allowed

  double bx() const { return cfg.field.bound_x() - cfg.ball_radius; }
  double by() const { return cfg.field.bound_y() - cfg.ball_radius; }

  Vec2 at(std::size_t i, double f) const { return from[i] + delta[i] * f; }

  void place(std::size_t i) { w.robots[i].pose = Pose2D(at(i, frac[i]), w.robots[i].pose.theta); }

  // Largest f in [0, hi] with ok(f), given ok(0). Bisection; the result is on the safe side.
  template <class Ok>
  static double back_off(double hi, Ok ok) {
    if (ok(hi)) return hi;
    double lo = 0.0;
    for (int k = 0; k < 50; ++k) {
      const double mid = 0.5 * (lo + hi);
      (ok(mid) ? lo : hi) = mid;
    }
    return lo;
  }

  bool robots_apart() {
    if (from.empty()) return false;
    bool moved = false;
    const double min_d = 2.0 * cfg.robot_radius;
    for (std::size_t i = 0; i < w.robots.size(); ++i) {
      for (std::size_t j = i + 1; j < w.robots.size(); ++j) {
        if (distance(at(i, frac[i]), at(j, frac[j])) >= min_d) continue;
        const double fi = frac[i], fj = frac[j];
        // Both robots retreat along their paths by the same proportion.
        const double s = back_off(1.0, [&](double t) { return distance(at(i, fi * t), at(j, fj * t)) >= min_d; });
        frac[i] = fi * s;
        frac[j] = fj * s;
        place(i);
        place(j);
        moved = true;
      }
    }
    return moved;
  }

  // Moves the ball out of robots; the ball picks up the robot's normal speed.
  bool ball_off_robots() {
    bool moved = false;
    const double min_d = cfg.robot_radius + cfg.ball_radius;
    for (const RobotState& r : w.robots) {
      const Vec2 d = w.ball.pos - r.pose.position();
      const double n = d.norm();
      if (n >= min_d) continue;
      const Vec2 dir = n > 0.0 ? d / n : r.pose.heading();
      w.ball.pos = r.pose.position() + dir * min_d;
      const double vn = w.ball.vel.dot(dir);
      const double un = r.velocity.dot(dir);
      if (vn < un) w.ball.vel += dir * (un - vn);
      moved = true;
    }
    return moved;
  }

  bool ball_in_bounds() {
    bool moved = false;
    auto bounce = [&](double& p, double& v, double lim) {
      if (p > lim) {
        p = cfg.field.walls ? lim - cfg.restitution * (p - lim) : lim;
        v = cfg.field.walls ? -cfg.restitution * v : 0.0;
        moved = true;
      } else if (p < -lim) {
        p = cfg.field.walls ? -lim + cfg.restitution * (-lim - p) : -lim;
        v = cfg.field.walls ? -cfg.restitution * v : 0.0;
        moved = true;
      }
    };
    const double before_x = w.ball.pos.x, before_y = w.ball.pos.y;
    bounce(w.ball.pos.x, w.ball.vel.x, bx());
    bounce(w.ball.pos.y, w.ball.vel.y, by());
    if (!cfg.field.walls && (before_x != w.ball.pos.x || before_y != w.ball.pos.y)) w.ball.vel = {};
    return moved;
  }

  // A ball pinned against a wall blocks the robot driving into it.
  bool robots_off_ball() {
    if (from.empty()) return false;
    bool moved = false;
    const double min_d = cfg.robot_radius + cfg.ball_radius;
    for (std::size_t i = 0; i < w.robots.size(); ++i) {
      if (distance(w.robots[i].pose.position(), w.ball.pos) >= min_d) continue;
      if (distance(from[i], w.ball.pos) < min_d) continue;  // the ball came to it; push the ball instead
      frac[i] = back_off(frac[i], [&](double f) { return distance(at(i, f), w.ball.pos) >= min_d; });
      place(i);
      moved = true;
    }
    return moved;
  }

  void resolve() {
    for (int pass = 0; pass < 16; ++pass) {
      bool moved = robots_apart();
      moved |= ball_off_robots();
      moved |= ball_in_bounds();
      moved |= robots_off_ball();
      if (!moved) break;
    }
  }
};

}  // namespace

std::string_view to_string(Team team) { return team == Team::green ? "green" : "blue"; }

std::optional<Team> parse_team(std::string_view name) {
  if (name == "green") return Team::green;
  if (name == "blue") return Team::blue;
  return std::nullopt;
}

Segment FieldGeometry::goal_line(int side) const {
  const double x = side * length / 2.0;
  return {{x, -goal_width / 2.0}, {x, goal_width / 2.0}};
}

std::array<Vec2, 4> FieldGeometry::corners() const {
  const double x = length / 2.0, y = width / 2.0;
  return {Vec2{x, y}, Vec2{-x, y}, Vec2{-x, -y}, Vec2{x, -y}};
}

void FieldGeometry::validate() const {
  require(length > 0.0 && std::isfinite(length), "field.length", "must be positive");
  require(width > 0.0 && std::isfinite(width), "field.width", "must be positive");
  require(goal_width > 0.0 && goal_width < width, "field.goal_width", "must be positive and below field.width");
  require(margin > 0.0 && std::isfinite(margin), "field.margin", "must be positive");
}

void SimConfig::validate() const {
  field.validate();
  require(robot_radius > 0.0 && robot_radius < field.margin + field.width / 2.0, "robot.radius", "must be positive and fit the field");
  require(ball_radius > 0.0 && ball_radius < robot_radius, "ball.radius", "must be positive and smaller than the robot");
  require(green_robots >= 0 && green_robots <= 3, "robots.green", "must be in [0, 3]");
  require(blue_robots >= 0 && blue_robots <= 3, "robots.blue", "must be in [0, 3]");
  require(limits.max_linear > 0.0, "robot.max_linear_speed", "must be positive");
  require(limits.max_angular > 0.0, "robot.max_angular_speed", "must be positive");
  require(ball.decel > 0.0, "ball.decel", "must be positive");
  require(kicker.true_map.cap > 0.0, "kicker.cap", "must be positive");
  require(kicker.speed_noise >= 0.0, "kicker.speed_noise", "must be non-negative");
  require(kicker.cooldown >= 0.0, "kicker.cooldown", "must be non-negative");
  require(kicker.reach >= 0.0, "kicker.reach", "must be non-negative");
  require(kicker.half_angle > 0.0 && kicker.half_angle <= kPi, "kicker.half_angle", "must be in (0, pi]");
  require(restitution >= 0.0 && restitution <= 1.0, "physics.restitution", "must be in [0, 1]");
  require(physics_hz > 0 && physics_hz <= 10000, "physics.physics_hz", "must be in (0, 10000]");
  require(detection_hz > 0 && detection_hz <= physics_hz, "physics.detection_hz", "must be in (0, physics_hz]");
  require(watchdog > 0.0, "physics.watchdog", "must be positive");
  require(noise.position >= 0.0, "noise.position", "must be non-negative");
  require(noise.orientation >= 0.0, "noise.orientation", "must be non-negative");
  require(noise.ball_dropout >= 0.0 && noise.ball_dropout <= 1.0, "noise.ball_dropout", "must be in [0, 1]");
  require(vision.image.width > 0 && vision.image.height > 0, "vision.image", "must have positive size");
  require(vision.meters_per_pixel > 0.0, "vision.meters_per_pixel", "must be positive");
  require(vision.marker_size > 0.0, "vision.marker_size", "must be positive");
  require(vision.calibration_pixel_noise >= 0.0, "vision.calibration_pixel_noise", "must be non-negative");
  require(vision.calibration_tolerance > 0.0, "vision.calibration_tolerance", "must be positive");
}

const RobotState* WorldState::find(const RobotId& id) const {
  for (const RobotState& r : robots) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

RobotState* WorldState::find(const RobotId& id) {
  return const_cast<RobotState*>(std::as_const(*this).find(id));
}

const RobotDetection* DetectionFrame::find(const RobotId& id) const {
  for (const RobotDetection& r : robots) {
    if (r.id == id) return &r;
  }
  return nullptr;
}

WorldState step(const WorldState& world, const SimConfig& cfg, double dt) {
  WorldState w = world;
  Separator sep{cfg, w, {}, {}, {}};
  const double lx = cfg.field.bound_x() - cfg.robot_radius;
  const double ly = cfg.field.bound_y() - cfg.robot_radius;
  for (RobotState& r : w.robots) {
    Twist applied{};
    // Ticks are counted rather than summed so the cut-off lands exactly on the watchdog.
    if (!r.preempted && r.command_age + 0.5 * dt < cfg.watchdog) {
      // The firmware drives wheels; the chassis follows the forward model.
      applied = forward_kinematics(cfg.layout, inverse_kinematics(cfg.layout, clamp_twist(r.command, cfg.limits)));
    }
    const Vec2 p = r.pose.position();
    const Vec2 d = arc_displacement(r.pose.theta, applied, dt);
    // Clamping to the carpet only shortens each component of the step.
    const Vec2 target{std::clamp(p.x + d.x, -lx, lx), std::clamp(p.y + d.y, -ly, ly)};
    sep.from.push_back(p);
    sep.delta.push_back(target - p);
    sep.frac.push_back(1.0);
    r.pose = Pose2D(target, r.pose.theta + applied.omega * dt);
    r.command_age += dt;
    r.kicker_cooldown = std::max(0.0, r.kicker_cooldown - dt);
  }
  w.ball = step_ball(w.ball, cfg.ball, dt);
  for (std::size_t i = 0; i < w.robots.size(); ++i) w.robots[i].velocity = sep.delta[i] / dt;
  sep.resolve();
  for (std::size_t i = 0; i < w.robots.size(); ++i) w.robots[i].velocity = sep.delta[i] * (sep.frac[i] / dt);
  w.time += dt;
  return w;
}

std::vector<std::pair<RobotId, Pose2D>> kickoff_formation(const SimConfig& cfg, int green_side) {
  std::vector<std::pair<RobotId, Pose2D>> out;
  for (Team team : {Team::green, Team::blue}) {
    const int side = team == Team::green ? green_side : -green_side;
    const double facing = side < 0 ? 0.0 : kPi;
    const Vec2 spots[3] = {{side * 0.25, 0.0}, {side * cfg.field.length / 2.0, 0.0},
                           {side * cfg.field.length / 4.0, side * 0.3}};
    for (int n = 1; n <= cfg.robots_in(team); ++n) out.push_back({{team, n}, Pose2D(spots[n - 1], facing)});
  }
  return out;
}

Simulator::Simulator(SimConfig config) : config_(std::move(config)) {
  config_.validate();
  world_.rng.seed(config_.seed);
  int body = 0;
  for (const auto& [id, pose] : kickoff_formation(config_, -1)) {
    RobotState r;
    r.id = id;
    r.body = body++;
    r.pose = pose;
    world_.robots.push_back(r);
  }
  calibrate();
}

void Simulator::calibrate() {
  const VisionConfig& v = config_.vision;
  Eigen::Matrix3d h;
  const double cu = v.image.width / 2.0, cv = v.image.height / 2.0, s = v.meters_per_pixel;
  // Top-down camera: image v grows towards -y. Optional perspective terms tilt it.
  h << s, 0.0, -s * cu, 0.0, -s, s * cv, v.perspective_x, v.perspective_y, 1.0;
  camera_ = Homography(h);

  fiducials_.clear();
  std::normal_distribution<double> noise(0.0, 1.0);
  for (const Vec2& p : fiducial_points(config_.field.length, config_.field.width, v.marker_size, v.marker_inset)) {
    PixelPoint px = field_to_pixel(camera_, p);
    if (v.calibration_pixel_noise > 0.0) {
      px.u += v.calibration_pixel_noise * noise(world_.rng);
      px.v += v.calibration_pixel_noise * noise(world_.rng);
    }
    fiducials_.push_back({px, p});
  }
  const VisibilityTarget target{config_.field.corners(), v.image};
  try {
    calibration_ = verify_calibration(fit_homography(fiducials_), fiducials_, v.calibration_tolerance, target);
  } catch (const Error&) {
    calibration_ = CalibrationReport{};
    calibration_.passed = false;
  }
}

std::optional<DetectionFrame> Simulator::advance() {
  world_ = step(world_, config_, dt());
  ++world_.tick;
  world_.time = static_cast<double>(world_.tick) / config_.physics_hz;
  const auto frames_at = [&](std::uint64_t tick) {
    return tick * static_cast<std::uint64_t>(config_.detection_hz) / static_cast<std::uint64_t>(config_.physics_hz);
  };
  if (frames_at(world_.tick) > frames_at(world_.tick - 1)) return emit_detection();
  return std::nullopt;
}

void Simulator::command_robot(const RobotId& id, const Twist& twist) {
  RobotState* r = world_.find(id);
  if (!r) throw Error(Errc::not_found, "no robot " + std::string(to_string(id.team)) + " " + std::to_string(id.number));
  if (!twist.finite()) throw Error(Errc::validation, "twist has non-finite components");
  if (twist.frame != Frame::robot) throw Error(Errc::frame_mismatch, "commands are robot-frame twists");
  if (r->preempted) throw Error(Errc::preempted, "robot is preempted");
  r->command = twist;
  r->command_age = 0.0;
}

KickOutcome Simulator::kick(const RobotId& id, double impulse) {
  RobotState* r = world_.find(id);
  if (!r) throw Error(Errc::not_found, "no robot " + std::string(to_string(id.team)) + " " + std::to_string(id.number));
  if (!std::isfinite(impulse) || impulse < 0.0) throw Error(Errc::validation, "impulse must be a non-negative number");
  if (r->preempted) throw Error(Errc::preempted, "robot is preempted");
  if (r->kicker_cooldown > 0.0) throw Error(Errc::cooldown, "kicker is recharging");

  KickOutcome out;
  const double cap = config_.kicker.true_map.cap;
  out.clipped = impulse > cap;
  out.impulse = std::min(impulse, cap);
  r->kicker_cooldown = config_.kicker.cooldown;

  const Vec2 rel = world_.ball.pos - r->pose.position();
  const double dist = rel.norm();
  const bool in_reach = dist - config_.robot_radius <= config_.kicker.reach;
  const bool in_front = dist > 0.0 && std::abs(angle_error(std::atan2(rel.y, rel.x), r->pose.theta)) <= config_.kicker.half_angle;
  if (!in_reach || !in_front) return out;

  out.contact = true;
  double speed = config_.kicker.true_map.speed(out.impulse);
  if (out.impulse > 0.0 && config_.kicker.speed_noise > 0.0) {
    std::normal_distribution<double> noise(0.0, config_.kicker.speed_noise);
    speed += noise(world_.rng);
  }
  out.speed = std::max(0.0, speed);
  world_.ball.vel = r->pose.heading() * out.speed;
  return out;
}

TeleportOutcome Simulator::teleport_robot(const RobotId& id, const Pose2D& pose) {
  RobotState* r = world_.find(id);
  if (!r) throw Error(Errc::not_found, "no robot " + std::string(to_string(id.team)) + " " + std::to_string(id.number));
  const double lx = config_.field.bound_x() - config_.robot_radius;
  const double ly = config_.field.bound_y() - config_.robot_radius;
  if (!std::isfinite(pose.x) || !std::isfinite(pose.y) || std::abs(pose.x) > lx || std::abs(pose.y) > ly) {
    throw Error(Errc::placement, "robot target outside the field and margin");
  }
  r->pose = pose;
  r->command = {};
  r->command_age = config_.watchdog;
  r->velocity = {};

  // Move only the teleported robot to clear other robots.
  const double min_d = 2.0 * config_.robot_radius;
  Vec2 p = pose.position();
  for (int pass = 0; pass < 16; ++pass) {
    bool moved = false;
    for (const RobotState& o : world_.robots) {
      if (&o == r) continue;
      const Vec2 d = p - o.pose.position();
      const double n = d.norm();
      if (n >= min_d - 1e-12) continue;
      const Vec2 dir = n > 0.0 ? d / n : Vec2{p.x <= 0.0 ? 1.0 : -1.0, 0.0};
      p = o.pose.position() + dir * min_d;
      p.x = std::clamp(p.x, -lx, lx);
      p.y = std::clamp(p.y, -ly, ly);
      moved = true;
    }
    if (!moved) break;
  }
  r->pose = Pose2D(p, pose.theta);
  TeleportOutcome out;
  out.displacement = p - pose.position();
  out.adjusted = out.displacement.squared_norm() > 0.0;
  Separator{config_, world_, {}, {}, {}}.resolve();
  return out;
}

TeleportOutcome Simulator::teleport_ball(const Vec2& position) {
  const double lx = config_.field.bound_x() - config_.ball_radius;
  const double ly = config_.field.bound_y() - config_.ball_radius;
  if (!position.finite() || std::abs(position.x) > lx || std::abs(position.y) > ly) {
    throw Error(Errc::placement, "ball target outside the field and margin");
  }
  world_.ball = {position, {0.0, 0.0}};
  Separator{config_, world_, {}, {}, {}}.resolve();
  TeleportOutcome out;
  out.displacement = world_.ball.pos - position;
  out.adjusted = out.displacement.squared_norm() > 0.0;
  world_.ball.vel = {};
  return out;
}

void Simulator::set_preempted(const RobotId& id, bool on) {
  RobotState* r = world_.find(id);
  if (!r) throw Error(Errc::not_found, "no robot " + std::string(to_string(id.team)) + " " + std::to_string(id.number));
  r->preempted = on;
  if (on) {
    r->command = {};
    r->command_age = config_.watchdog;
  }
}

void Simulator::swap_team_labels() {
  // Only numbers both teams field change colour, otherwise identities would collide.
  std::vector<bool> paired(world_.robots.size(), false);
  for (std::size_t i = 0; i < world_.robots.size(); ++i) {
    const RobotId partner{other(world_.robots[i].id.team), world_.robots[i].id.number};
    paired[i] = world_.find(partner) != nullptr;
  }
  for (std::size_t i = 0; i < world_.robots.size(); ++i) {
    RobotState& r = world_.robots[i];
    if (paired[i]) r.id = {other(r.id.team), r.id.number};
  }
}

DetectionFrame Simulator::emit_detection() {
  DetectionFrame f;
  f.timestamp = world_.time;
  f.frame_number = frames_++;
  f.calibrated = !config_.vision.full_pipeline || calibration_.passed;

  std::normal_distribution<double> unit(0.0, 1.0);
  const DetectionNoise& nz = config_.noise;
  const bool pipeline = config_.vision.full_pipeline;
  const Homography& fitted = calibration_.homography;

  auto observe = [&](Vec2 p) {
    if (pipeline) {
      PixelPoint px = field_to_pixel(camera_, p);
      px = {std::round(px.u), std::round(px.v)};
      p = pixel_to_field(fitted, px);
    }
    if (nz.position > 0.0) {
      p.x += nz.position * unit(world_.rng);
      p.y += nz.position * unit(world_.rng);
    }
    return p;
  };

  for (const RobotState& r : world_.robots) {
    RobotDetection d;
    d.id = r.id;
    d.preempted = r.preempted;
    double theta = r.pose.theta;
    if (pipeline) {
      const Vec2 front = r.pose.position() + r.pose.heading() * config_.vision.marker_size;
      const Vec2 a = pixel_to_field(fitted, field_to_pixel(camera_, r.pose.position()));
      const Vec2 b = pixel_to_field(fitted, field_to_pixel(camera_, front));
      theta = std::atan2(b.y - a.y, b.x - a.x);
    }
    if (nz.orientation > 0.0) theta += nz.orientation * unit(world_.rng);
    d.pose = Pose2D(observe(r.pose.position()), theta);
    f.robots.push_back(d);
  }

  bool ball_seen = true;
  if (nz.ball_dropout > 0.0) ball_seen = std::uniform_real_distribution<double>(0.0, 1.0)(world_.rng) >= nz.ball_dropout;
  if (ball_seen) f.ball = observe(world_.ball.pos);
  return f;
}

}  // namespace kickoff

namespace kickoff {

std::vector<KickSample> simulate_kicks(SimConfig config, int n) {
  if (n <= 0) throw Error(Errc::insufficient_data, "need a positive number of kicks");
  config.green_robots = 1;
  config.blue_robots = 0;
  Simulator sim(config);
  const RobotId kicker{Team::green, 1};
  const double cap = config.kicker.true_map.cap;
  const int rest_ticks = static_cast<int>(std::ceil(config.kicker.cooldown * config.physics_hz)) + 1;
  std::vector<KickSample> out;
  for (int i = 0; i < n; ++i) {
    sim.teleport_robot(kicker, Pose2D(0.0, 0.0, 0.0));
    sim.teleport_ball({config.robot_radius + config.ball_radius + 0.005, 0.0});
    const double impulse = cap * (i + 1) / n;
    sim.kick(kicker, impulse);
    out.push_back({impulse, sim.world().ball.speed()});
    for (int t = 0; t < rest_ticks; ++t) sim.advance();
  }
  return out;
}

}  // namespace kickoff
