#include "kickoff/replay.hpp"

#include <fstream>
#include <istream>
#include <thread>

#include "kickoff/error.hpp"

namespace kickoff {
namespace {

ReplayRecord record_from_json(const Json& j) {
  ReplayRecord r;
  r.t = j.at("t").get<double>();
  const std::string dir = j.at("dir").get<std::string>();
  if (dir != "in" && dir != "out") throw Error(Errc::io, "dir must be in or out");
  r.inbound = dir == "in";
  if (!j.at("session").is_null()) r.session = j.at("session").get<SessionId>();
  r.msg = j.at("msg");
  if (j.contains("accepted")) r.accepted = j.at("accepted").get<bool>();
  return r;
}

std::string compact(MsgType type, double t, const Json& payload) {
  return Json{{"type", to_string(type)}, {"t", t}, {"payload", payload}}.dump();
}

}  // namespace

ReplayLog read_replay(std::istream& in) {
  ReplayLog log;
  std::string line;
  std::size_t number = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++number;
    if (line.empty()) continue;
    Json j = Json::parse(line, nullptr, false);
    if (!header) {
      if (j.is_discarded() || !j.is_object() || j.value("type", "") != "header" || !j.contains("config")) {
        throw Error(Errc::io, "line " + std::to_string(number) + ": expected a replay header");
      }
      log.config = config_from_json(j["config"]);
      header = true;
      continue;
    }
    try {
      if (j.is_discarded()) throw Error(Errc::io, "not valid JSON");
      log.records.push_back(record_from_json(j));
    } catch (const std::exception& e) {
      log.truncated = true;
      log.warning = "line " + std::to_string(number) + ": " + e.what() + "; playback stops at the last complete record";
      break;
    }
  }
  return log;
}

ReplayLog read_replay(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::io, "cannot open replay " + path.string());
  return read_replay(in);
}

VerifyReport verify_replay(const ReplayLog& log) {
  VerifyReport report;
  if (!log.config) return report;
  const RunConfig& cfg = *log.config;
  RuleEngine rules(cfg.rules, cfg.sim.field, cfg.sim.green_robots, cfg.sim.blue_robots);
  StatePublisher publisher(cfg.server.game_state_every);
  const double dt = 1.0 / cfg.sim.detection_hz;

  std::vector<std::string> expected;
  std::vector<std::string> recorded;
  auto expect = [&](const StatePublisher::Batch& batch, double t) {
    for (const auto& [type, payload] : batch) expected.push_back(compact(type, t, payload));
  };

  for (const ReplayRecord& r : log.records) {
    WireMessage m;
    try {
      m = message_from_json(r.msg);
    } catch (const Error&) {
      continue;  // a malformed inbound message, logged as raw text
    }
    if (r.inbound) {
      if (m.type != MsgType::referee || !r.accepted.value_or(false)) continue;
      const RuleOutput out = apply_referee(rules, parse_referee(m.payload));
      expect(publisher.after_action(rules.state(), out), r.t);
      ++report.referee_actions;
      continue;
    }
    if (r.session) continue;  // per-session replies carry no rule state
    switch (m.type) {
      case MsgType::detection: {
        const DetectionFrame frame = parse_detection(m.payload);
        const RuleOutput out = rules.on_frame(frame, dt);
        expect(publisher.after_frame(rules.state(), out, frame.frame_number), m.t);
        ++report.frames;
        break;
      }
      case MsgType::goal:
      case MsgType::penalty:
      case MsgType::game_state:
        recorded.push_back(compact(m.type, m.t, m.payload));
        break;
      default:
        break;
    }
  }

  report.rule_messages = recorded.size();
  const std::size_t n = std::max(expected.size(), recorded.size());
  for (std::size_t i = 0; i < n; ++i) {
    const std::string e = i < expected.size() ? expected[i] : "<none>";
    const std::string g = i < recorded.size() ? recorded[i] : "<none>";
    if (e != g) report.divergences.push_back({i, e, g});
  }
  return report;
}

std::vector<PlaybackItem> playback_schedule(const ReplayLog& log, double speed) {
  if (!(speed > 0.0) || !std::isfinite(speed)) throw Error(Errc::validation, "speed must be positive");
  std::vector<PlaybackItem> items;
  std::optional<double> start;
  for (const ReplayRecord& r : log.records) {
    if (r.inbound || r.session) continue;
    if (!start) start = r.t;
    items.push_back({(r.t - *start) / speed, r.t, r.msg.dump()});
  }
  return items;
}

void play(const std::vector<PlaybackItem>& items, const std::function<bool(const PlaybackItem&)>& sink) {
  using Clock = std::chrono::steady_clock;
  const Clock::time_point start = Clock::now();
  for (const PlaybackItem& item : items) {
    const Clock::time_point due =
        start + std::chrono::duration_cast<Clock::duration>(std::chrono::duration<double>(item.offset));
    // Sleep wake-ups can be late by a few ms; sleep short of the deadline and spin the rest.
    std::this_thread::sleep_until(due - std::chrono::milliseconds(2));
    while (Clock::now() < due) std::this_thread::yield();
    if (!sink(item)) return;
  }
}

}  // namespace kickoff
