#include <iostream>

#include "CLI11.hpp"
#include "commands.hpp"

using namespace kickoff::cli;

namespace {

void common_flags(CLI::App* app, CommonOptions& c) {
  app->add_option("--config", c.config, "JSON configuration file (defaults when omitted)");
  app->add_option("--seed", c.seed, "Override the simulation seed");
  app->add_option("--replay-out", c.replay_out, "Write the replay log (jsonl) to this path");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"kickoff: robot soccer game controller with an embedded simulator"};
  app.require_subcommand(1);

  ServeOptions serve;
  auto* s = app.add_subcommand("serve", "Run the game controller on ws://host:port/api");
  common_flags(s, serve.common);
  s->add_option("--port", serve.port, "TCP port (0 picks a free one)");
  s->add_option("--lockstep", serve.lockstep, "Wait for N lockstep clients and advance only as they sync");
  s->add_flag("--auto-referee", serve.auto_referee, "Run placements, kickoffs and half time automatically");
  s->add_option("--duration", serve.duration, "Stop after this many simulated seconds (0: never)");

  DemoOptions demo;
  auto* d = app.add_subcommand("demo", "Play a scripted match between reference strategies");
  common_flags(d, demo.common);
  d->add_option("--green", demo.green, "Comma-separated roles for green (attacker, attacker-naive, goalie, chaser, idle; none for no robots)");
  d->add_option("--blue", demo.blue, "Comma-separated roles for blue");
  d->add_option("--duration", demo.duration, "Simulated seconds to play (0: until the match is finished)");
  d->add_option("--connect", demo.connect, "host:port of a server started with --lockstep 2 --auto-referee");

  ReplayOptions replay;
  auto* r = app.add_subcommand("replay", "Play back or verify a replay log");
  r->add_option("log", replay.log, "Replay log (jsonl)")->required();
  r->add_option("--speed", replay.speed, "Playback speed factor")->check(CLI::PositiveNumber);
  r->add_flag("--verify", replay.verify, "Re-run the rules over the log and report divergences");
  r->add_option("--port", replay.port, "Stream playback on ws://127.0.0.1:port/api instead of stdout");

  CalibrateOptions cal;
  auto* c = app.add_subcommand("calibrate-kick", "Fit the kick map from samples");
  common_flags(c, cal.common);
  c->add_option("samples", cal.samples, "CSV with header impulse_s,speed_mps");
  c->add_option("--simulate", cal.simulate, "Generate N kicks in the simulator instead of reading a CSV");
  c->add_option("--noise", cal.noise, "Kick speed noise sigma for --simulate (m/s)");
  c->add_option("--out", cal.out, "Write the samples used to this CSV");

  std::string validate_path;
  auto* v = app.add_subcommand("validate-config", "Check a configuration file");
  v->add_option("config", validate_path, "JSON configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  if (*s) return cmd_serve(serve, std::cout, std::cerr);
  if (*d) return cmd_demo(demo, std::cout, std::cerr);
  if (*r) return cmd_replay(replay, std::cout, std::cerr);
  if (*c) return cmd_calibrate_kick(cal, std::cout, std::cerr);
  if (*v) return cmd_validate_config(validate_path, std::cout, std::cerr);
  return kUsage;
}
