#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "kickoff/config.hpp"
#include "kickoff/controller.hpp"

namespace kickoff {

// One line of a replay log:
//   {"t", "dir": "in" | "out", "session": id | null (broadcast), "msg", "accepted"?}
// The first line is a header: {"type": "header", "format", "version", "seed", "config"}.
struct ReplayRecord {
  double t = 0.0;
  bool inbound = false;
  std::optional<SessionId> session;
  Json msg;
  std::optional<bool> accepted;
};

struct ReplayLog {
  std::optional<RunConfig> config;
  std::vector<ReplayRecord> records;
  // Set when reading stopped early at an unreadable line.
  bool truncated = false;
  std::string warning;
};

// Reads up to the last complete record. Throws Errc::io only when the header
// itself is missing or unreadable on a non-empty log.
ReplayLog read_replay(std::istream& in);
ReplayLog read_replay(const std::filesystem::path& path);

struct Divergence {
  std::size_t index = 0;  // position in the sequence of rule messages
  std::string expected;
  std::string recorded;
};

struct VerifyReport {
  std::size_t frames = 0;
  std::size_t referee_actions = 0;
  std::size_t rule_messages = 0;  // goal, penalty and game_state broadcasts checked
  std::vector<Divergence> divergences;

  bool ok() const { return divergences.empty(); }
};

// Re-runs the rule engine over the logged detections and accepted referee
// messages and compares the rule messages it would publish with those logged.
VerifyReport verify_replay(const ReplayLog& log);

// Broadcast messages of a log, timed for playback.
struct PlaybackItem {
  double offset = 0.0;  // wall seconds from the start of playback
  double t = 0.0;       // original simulation time
  std::string text;
};

// Original timeline divided by speed (speed 2 plays twice as fast).
// Throws Errc::validation unless speed > 0.
std::vector<PlaybackItem> playback_schedule(const ReplayLog& log, double speed);

// Emits each item at its offset against a steady clock; stops early when the
// sink returns false.
void play(const std::vector<PlaybackItem>& items, const std::function<bool(const PlaybackItem&)>& sink);

}  // namespace kickoff
