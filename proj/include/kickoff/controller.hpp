#pragma once

#include <cstdint>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "kickoff/config.hpp"
#include "kickoff/protocol.hpp"
#include "kickoff/rules.hpp"
#include "kickoff/simulator.hpp"

namespace kickoff {

using SessionId = std::uint64_t;

// Applies a referee request to the rule engine. Throws Errc::phase or
// Errc::not_found when the engine refuses it.
RuleOutput apply_referee(RuleEngine& rules, const RefereeRequest& request);

// Decides which rule messages go out. Shared by the controller and the replay
// verifier so a log can be checked by re-running the rules.
class StatePublisher {
 public:
  explicit StatePublisher(int every_frames) : every_(every_frames) {}

  using Batch = std::vector<std::pair<MsgType, Json>>;

  // Goals, penalties, then game_state when it changed or the periodic slot is due.
  Batch after_frame(const GameState& state, const RuleOutput& out, std::uint64_t frame_number);
  Batch after_action(const GameState& state, const RuleOutput& out);

 private:
  static Json key(const GameState& state);
  Batch events(const RuleOutput& out) const;

  int every_;
  std::optional<Json> last_;
};

struct Session {
  SessionId id = 0;
  Role role = Role::spectator;
  std::string key;
  bool lockstep = false;
  std::optional<std::uint64_t> synced;  // last frame acknowledged with sync
};

struct Outbound {
  std::optional<SessionId> to;  // empty: every session
  MsgType type = MsgType::detection;
  std::string text;
};

// Appends one JSON record per line. Timestamps are simulation seconds and
// never decrease.
class ReplayWriter {
 public:
  explicit ReplayWriter(std::ostream& out) : out_(out) {}

  void header(const RunConfig& config);
  void write(double t, bool inbound, std::optional<SessionId> session, const Json& msg,
             std::optional<bool> accepted = std::nullopt);

 private:
  std::ostream& out_;
  double last_t_ = 0.0;
};

// The game controller proper: sessions, authentication, routing, rules and the
// detection clock. It owns no sockets; a transport feeds it text and carries
// its output. Everything runs on simulation time, so identical input yields
// identical output.
class Controller {
 public:
  explicit Controller(RunConfig config, std::ostream* replay = nullptr);

  const RunConfig& config() const { return config_; }
  const Simulator& simulator() const { return sim_; }
  Simulator& simulator() { return sim_; }
  const RuleEngine& rules() const { return rules_; }
  double time() const { return sim_.world().time; }
  std::uint64_t frames() const { return frames_; }

  // Sends hello and the current game_state to the new session.
  SessionId connect();
  void disconnect(SessionId id);
  const Session* session(SessionId id) const;
  std::size_t session_count() const { return sessions_.size(); }

  // Queues an inbound message; it takes effect at the next tick boundary.
  void receive(SessionId id, std::string text);

  // Lockstep gate: false until the configured number of lockstep clients is
  // present and each has synced the last frame. Always true otherwise.
  bool ready() const;

  // Processes queued input (referee first, then by session and arrival), then
  // advances one physics tick. Returns the detection frame when one was emitted.
  std::optional<DetectionFrame> tick();

  // Configured duration reached, match finished, or every lockstep client left.
  bool done() const;

  std::vector<Outbound> take_outbound();

 private:
  struct Inbound {
    SessionId session;
    std::uint64_t arrival;
    std::string text;
  };
  struct Bucket {
    double tokens;
    double last;
  };

  void process_inbound();
  void handle(Session& s, const std::string& text);
  void handle_auth(Session& s, const WireMessage& m);
  bool handle_command(Session& s, const WireMessage& m);
  bool handle_kick(Session& s, const WireMessage& m);
  bool handle_referee(Session& s, const WireMessage& m);
  // Shared checks for command and kick; returns a nack reason or nothing.
  std::optional<NackReason> check_robot(const Session& s, const RobotId& id, std::string& detail);
  bool take_token(const RobotId& id);

  void apply(const RuleOutput& out);
  void publish(const StatePublisher::Batch& batch);
  void send(std::optional<SessionId> to, MsgType type, Json payload);
  void log_out(const Outbound& o);
  void ack(const Session& s, const WireMessage& m, Json extra = Json::object());
  void nack(const Session& s, std::optional<std::uint64_t> ref, NackReason reason, const std::string& detail,
            Json extra = Json::object());
  Json hello(SessionId id) const;

  RunConfig config_;
  Simulator sim_;
  RuleEngine rules_;
  StatePublisher publisher_;
  std::optional<ReplayWriter> replay_;

  std::map<SessionId, Session> sessions_;
  SessionId next_session_ = 1;
  std::vector<Inbound> inbound_;
  std::uint64_t arrivals_ = 0;
  std::uint64_t seq_ = 0;
  std::uint64_t frames_ = 0;
  std::optional<std::uint64_t> last_frame_;
  bool lockstep_started_ = false;
  std::map<RobotId, Bucket> buckets_;
  std::vector<Outbound> outbound_;
  bool deferring_ = false;
};

}  // namespace kickoff
