#include "kickoff/config.hpp"

#include <fstream>
#include <set>
#include <vector>

#include "kickoff/error.hpp"

namespace kickoff {
namespace {

void require(bool ok, const std::string& field, const std::string& why) {
  if (!ok) throw Error(Errc::config, field + ": " + why);
}

// Reads one JSON object, rejecting unknown keys so typos do not pass silently.
class Section {
 public:
  Section(const Json& doc, std::string path) : path_(std::move(path)) {
    if (doc.is_null()) return;
    require(doc.is_object(), path_, "expected an object");
    j_ = &doc;
  }

  ~Section() noexcept(false) {
    if (!j_ || std::uncaught_exceptions() > 0) return;
    for (const auto& [key, value] : j_->items()) {
      require(seen_.contains(key), path_.empty() ? key : path_ + "." + key, "unknown key");
    }
  }

  const Json& child(const char* key) {
    seen_.insert(key);
    static const Json null;
    if (!j_ || !j_->contains(key)) return null;
    return j_->at(key);
  }

  void get(const char* key, double& out) {
    const Json& v = child(key);
    if (v.is_null()) return;
    require(v.is_number(), where(key), "expected a number");
    out = v.get<double>();
  }

  void get(const char* key, int& out) {
    const Json& v = child(key);
    if (v.is_null()) return;
    require(v.is_number_integer(), where(key), "expected an integer");
    out = v.get<int>();
  }

  void get(const char* key, std::size_t& out) {
    const Json& v = child(key);
    if (v.is_null()) return;
    require(is_count(v), where(key), "expected a non-negative integer");
    out = v.get<std::size_t>();
  }

  void get(const char* key, bool& out) {
    const Json& v = child(key);
    if (v.is_null()) return;
    require(v.is_boolean(), where(key), "expected a boolean");
    out = v.get<bool>();
  }

  void get(const char* key, std::string& out) {
    const Json& v = child(key);
    if (v.is_null()) return;
    require(v.is_string(), where(key), "expected a string");
    out = v.get<std::string>();
  }

  void get(const char* key, std::vector<double>& out) {
    const Json& v = child(key);
    if (v.is_null()) return;
    require(v.is_array(), where(key), "expected an array of numbers");
    out.clear();
    for (const Json& e : v) {
      require(e.is_number(), where(key), "expected an array of numbers");
      out.push_back(e.get<double>());
    }
  }

  std::string where(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const Json* j_ = nullptr;
  std::string path_;
  std::set<std::string> seen_;
};

}  // namespace

void ServerConfig::validate() const {
  require(!host.empty(), "server.host", "must not be empty");
  require(port >= 0 && port <= 65535, "server.port", "must be in [0, 65535]");
  require(queue_bound >= 1, "server.queue_bound", "must be at least 1");
  require(rate_limit > 0.0, "server.rate_limit", "must be positive");
  require(rate_burst >= 1.0, "server.rate_burst", "must be at least 1");
  require(game_state_every >= 1, "server.game_state_every", "must be at least 1");
  require(lockstep_clients >= 0, "server.lockstep_clients", "must be non-negative");
  require(duration >= 0.0, "server.duration", "must be non-negative");
}

void RunConfig::validate() const {
  sim.validate();
  rules.validate();
  server.validate();
}

RunConfig config_from_json(const Json& doc) {
  RunConfig c;
  SimConfig& s = c.sim;
  {
    Section root(doc, "");
    {
      Section f(root.child("field"), "field");
      f.get("length", s.field.length);
      f.get("width", s.field.width);
      f.get("goal_width", s.field.goal_width);
      f.get("margin", s.field.margin);
      f.get("walls", s.field.walls);
    }
    {
      Section r(root.child("robot"), "robot");
      r.get("radius", s.robot_radius);
      r.get("max_linear_speed", s.limits.max_linear);
      r.get("max_angular_speed", s.limits.max_angular);
      double chassis = s.layout.wheels().front().chassis_radius;
      double wheel = s.layout.wheels().front().wheel_radius;
      std::vector<double> angles;
      for (const Wheel& w : s.layout.wheels()) angles.push_back(w.mount_angle);
      r.get("chassis_radius", chassis);
      r.get("wheel_radius", wheel);
      r.get("wheel_angles", angles);
      std::vector<Wheel> wheels;
      for (double a : angles) wheels.push_back({a, chassis, wheel});
      try {
        s.layout = WheelLayout(std::move(wheels));
      } catch (const Error& e) {
        throw Error(Errc::config, std::string("robot.wheel_angles: ") + e.what());
      }
    }
    {
      Section r(root.child("robots"), "robots");
      r.get("green", s.green_robots);
      r.get("blue", s.blue_robots);
    }
    {
      Section b(root.child("ball"), "ball");
      b.get("radius", s.ball_radius);
      b.get("decel", s.ball.decel);
    }
    {
      Section k(root.child("kicker"), "kicker");
      std::vector<double> coeffs(s.kicker.true_map.coeffs.begin(), s.kicker.true_map.coeffs.end());
      k.get("coeffs", coeffs);
      require(coeffs.size() == 3, "kicker.coeffs", "expected 3 numbers (c0, c1, c2)");
      for (std::size_t i = 0; i < 3; ++i) s.kicker.true_map.coeffs[i] = coeffs[i];
      k.get("cap", s.kicker.true_map.cap);
      k.get("speed_noise", s.kicker.speed_noise);
      k.get("cooldown", s.kicker.cooldown);
      k.get("reach", s.kicker.reach);
      k.get("half_angle", s.kicker.half_angle);
    }
    {
      Section p(root.child("physics"), "physics");
      p.get("physics_hz", s.physics_hz);
      p.get("detection_hz", s.detection_hz);
      p.get("restitution", s.restitution);
      p.get("watchdog", s.watchdog);
    }
    {
      Section n(root.child("noise"), "noise");
      n.get("position", s.noise.position);
      n.get("orientation", s.noise.orientation);
      n.get("ball_dropout", s.noise.ball_dropout);
    }
    {
      Section v(root.child("vision"), "vision");
      v.get("full_pipeline", s.vision.full_pipeline);
      v.get("image_width", s.vision.image.width);
      v.get("image_height", s.vision.image.height);
      v.get("meters_per_pixel", s.vision.meters_per_pixel);
      v.get("perspective_x", s.vision.perspective_x);
      v.get("perspective_y", s.vision.perspective_y);
      v.get("marker_size", s.vision.marker_size);
      v.get("marker_inset", s.vision.marker_inset);
      v.get("calibration_pixel_noise", s.vision.calibration_pixel_noise);
      v.get("calibration_tolerance", s.vision.calibration_tolerance);
    }
    {
      Section r(root.child("rules"), "rules");
      r.get("hold_radius", c.rules.hold_radius);
      r.get("hold_limit", c.rules.hold_limit);
      r.get("hold_grace", c.rules.hold_grace);
      r.get("penalty_duration", c.rules.penalty_duration);
      r.get("half_duration", c.rules.half_duration);
      r.get("placement_duration", c.rules.placement_duration);
      r.get("goal_rearm_distance", c.rules.goal_rearm_distance);
      r.get("auto_referee", c.rules.auto_referee);
    }
    {
      Section k(root.child("keys"), "keys");
      k.get("green", c.rules.green_key);
      k.get("blue", c.rules.blue_key);
      k.get("referee", c.rules.referee_key);
    }
    {
      Section n(root.child("server"), "server");
      n.get("host", c.server.host);
      n.get("port", c.server.port);
      n.get("queue_bound", c.server.queue_bound);
      n.get("rate_limit", c.server.rate_limit);
      n.get("rate_burst", c.server.rate_burst);
      n.get("game_state_every", c.server.game_state_every);
      n.get("lockstep_clients", c.server.lockstep_clients);
      n.get("duration", c.server.duration);
    }
    root.get("seed", s.seed);
  }
  c.validate();
  return c;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open config " + path.string());
  Json doc = Json::parse(in, nullptr, false, true);
  if (doc.is_discarded()) throw Error(Errc::config, path.string() + ": not valid JSON");
  return config_from_json(doc);
}

Json config_to_json(const RunConfig& c) {
  const SimConfig& s = c.sim;
  Json angles = Json::array();
  for (const Wheel& w : s.layout.wheels()) angles.push_back(w.mount_angle);
  const Wheel& w0 = s.layout.wheels().front();
  const auto& k = s.kicker.true_map.coeffs;
  return {
      {"field",
       {{"length", s.field.length},
        {"width", s.field.width},
        {"goal_width", s.field.goal_width},
        {"margin", s.field.margin},
        {"walls", s.field.walls}}},
      {"robot",
       {{"radius", s.robot_radius},
        {"max_linear_speed", s.limits.max_linear},
        {"max_angular_speed", s.limits.max_angular},
        {"chassis_radius", w0.chassis_radius},
        {"wheel_radius", w0.wheel_radius},
        {"wheel_angles", angles}}},
      {"robots", {{"green", s.green_robots}, {"blue", s.blue_robots}}},
      {"ball", {{"radius", s.ball_radius}, {"decel", s.ball.decel}}},
      {"kicker",
       {{"coeffs", {k[0], k[1], k[2]}},
        {"cap", s.kicker.true_map.cap},
        {"speed_noise", s.kicker.speed_noise},
        {"cooldown", s.kicker.cooldown},
        {"reach", s.kicker.reach},
        {"half_angle", s.kicker.half_angle}}},
      {"physics",
       {{"physics_hz", s.physics_hz},
        {"detection_hz", s.detection_hz},
        {"restitution", s.restitution},
        {"watchdog", s.watchdog}}},
      {"noise",
       {{"position", s.noise.position}, {"orientation", s.noise.orientation}, {"ball_dropout", s.noise.ball_dropout}}},
      {"vision",
       {{"full_pipeline", s.vision.full_pipeline},
        {"image_width", s.vision.image.width},
        {"image_height", s.vision.image.height},
        {"meters_per_pixel", s.vision.meters_per_pixel},
        {"perspective_x", s.vision.perspective_x},
        {"perspective_y", s.vision.perspective_y},
        {"marker_size", s.vision.marker_size},
        {"marker_inset", s.vision.marker_inset},
        {"calibration_pixel_noise", s.vision.calibration_pixel_noise},
        {"calibration_tolerance", s.vision.calibration_tolerance}}},
      {"rules",
       {{"hold_radius", c.rules.hold_radius},
        {"hold_limit", c.rules.hold_limit},
        {"hold_grace", c.rules.hold_grace},
        {"penalty_duration", c.rules.penalty_duration},
        {"half_duration", c.rules.half_duration},
        {"placement_duration", c.rules.placement_duration},
        {"goal_rearm_distance", c.rules.goal_rearm_distance},
        {"auto_referee", c.rules.auto_referee}}},
      {"keys", {{"green", c.rules.green_key}, {"blue", c.rules.blue_key}, {"referee", c.rules.referee_key}}},
      {"server",
       {{"host", c.server.host},
        {"port", c.server.port},
        {"queue_bound", c.server.queue_bound},
        {"rate_limit", c.server.rate_limit},
        {"rate_burst", c.server.rate_burst},
        {"game_state_every", c.server.game_state_every},
        {"lockstep_clients", c.server.lockstep_clients},
        {"duration", c.server.duration}}},
      {"seed", s.seed},
  };
}

}  // namespace kickoff
