#include "commands.hpp"

#include <pthread.h>

#include <atomic>
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <memory>
#include <sstream>
#include <thread>

#include "kickoff/ball_model.hpp"
#include "kickoff/client.hpp"
#include "kickoff/config.hpp"
#include "kickoff/controller.hpp"
#include "kickoff/error.hpp"
#include "kickoff/replay.hpp"
#include "kickoff/server.hpp"
#include "kickoff/strategy_client.hpp"

namespace kickoff::cli {
namespace {

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

RunConfig load(const CommonOptions& c, std::ostream& err) {
  RunConfig cfg;
  if (c.config.empty()) {
    err << "warning: no --config given, using built-in defaults\n";
  } else {
    cfg = load_config(c.config);
  }
  if (c.seed) cfg.sim.seed = *c.seed;
  return cfg;
}

std::unique_ptr<std::ofstream> open_replay(const std::string& path) {
  if (path.empty()) return nullptr;
  auto f = std::make_unique<std::ofstream>(path, std::ios::binary | std::ios::trunc);
  if (!*f) throw Error(Errc::io, "cannot write replay " + path);
  return f;
}

std::vector<std::string> parse_roles(const std::string& spec) {
  std::vector<std::string> roles;
  if (spec.empty() || spec == "none") return roles;
  std::stringstream in(spec);
  std::string role;
  while (std::getline(in, role, ',')) {
    if (!is_behavior_name(role)) throw UsageError("unknown strategy '" + role + "'");
    roles.push_back(role);
  }
  if (roles.size() > 3) throw UsageError("at most 3 robots per team");
  return roles;
}

std::pair<std::string, unsigned short> parse_endpoint(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw UsageError("--connect expects host:port");
  try {
    const int port = std::stoi(s.substr(colon + 1));
    if (port <= 0 || port > 65535) throw UsageError("--connect port out of range");
    return {s.substr(0, colon), static_cast<unsigned short>(port)};
  } catch (const std::logic_error&) {
    throw UsageError("--connect expects host:port");
  }
}

std::string score_line(const Json& state) {
  if (!state.is_object() || !state.contains("score")) return "no game state received";
  return "final score: green " + std::to_string(state["score"]["green"].get<int>()) + " - blue " +
         std::to_string(state["score"]["blue"].get<int>());
}

template <typename F>
int guarded(std::ostream& err, F&& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << '\n';
    return kUsage;
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kRuntime;
  }
}

}  // namespace

int cmd_serve(const ServeOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    RunConfig cfg = load(o.common, err);
    if (o.port) cfg.server.port = *o.port;
    if (o.lockstep > 0) cfg.server.lockstep_clients = o.lockstep;
    if (o.auto_referee) cfg.rules.auto_referee = true;
    if (o.duration > 0.0) cfg.server.duration = o.duration;
    cfg.validate();
    auto replay = open_replay(o.common.replay_out);

    // Signals go to a dedicated thread that asks the loop to stop.
    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Server server(cfg, replay.get());
    const unsigned short port = server.listen();
    out << "kickoff game controller listening on ws://" << cfg.server.host << ":" << port << "/api\n"
        << "  green key:   " << cfg.rules.green_key << "\n"
        << "  blue key:    " << cfg.rules.blue_key << "\n"
        << "  referee key: " << cfg.rules.referee_key << "\n";
    if (cfg.server.lockstep_clients > 0) out << "  lockstep: waiting for " << cfg.server.lockstep_clients << " clients\n";
    out << std::flush;

    std::thread waiter([&server, signals] {
      int sig = 0;
      sigwait(&signals, &sig);
      server.stop();
    });
    server.run();
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();

    const ServerStats st = server.stats();
    out << "stopped after " << st.frames << " frames, " << st.sessions_seen << " sessions, " << st.dropped
        << " messages dropped\n";
    return kOk;
  });
}

int cmd_demo(const DemoOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto green = parse_roles(o.green);
    const auto blue = parse_roles(o.blue);

    if (!o.connect.empty()) {
      const auto [host, port] = parse_endpoint(o.connect);
      const RunConfig defaults;
      std::vector<std::unique_ptr<StrategyClient>> clients;
      if (!green.empty()) clients.push_back(std::make_unique<StrategyClient>(Team::green, green, defaults.rules.green_key, true));
      if (!blue.empty()) clients.push_back(std::make_unique<StrategyClient>(Team::blue, blue, defaults.rules.blue_key, true));
      if (clients.empty()) throw UsageError("no robots to play with");
      std::vector<std::thread> threads;
      std::vector<TeamClientResult> results(clients.size());
      for (std::size_t i = 0; i < clients.size(); ++i) {
        // Connect one at a time so session numbering is reproducible.
        std::atomic<bool> greeted = false;
        threads.emplace_back([&, i] {
          WsClient ws;
          ws.connect(host, port);
          StrategyClient& c = *clients[i];
          while (auto text = ws.receive()) {
            for (const std::string& reply : c.on_message(*text)) ws.send(reply);
            greeted = true;
            if (c.phase() == Phase::finished) break;
            if (o.duration > 0.0 && c.last_time() >= o.duration) break;
          }
          ws.close();
          results[i] = {c.frames_seen(), c.goals_seen(), c.nacks(), c.last_state()};
        });
        while (!greeted) std::this_thread::sleep_for(std::chrono::milliseconds(1));
      }
      for (auto& t : threads) t.join();
      out << score_line(results.front().last_state) << '\n';
      return kOk;
    }

    RunConfig cfg = load(o.common, err);
    cfg.sim.green_robots = static_cast<int>(green.size());
    cfg.sim.blue_robots = static_cast<int>(blue.size());
    cfg.rules.auto_referee = true;
    cfg.server.lockstep_clients = static_cast<int>(!green.empty()) + static_cast<int>(!blue.empty());
    if (o.duration > 0.0) cfg.server.duration = o.duration;
    cfg.validate();
    auto replay = open_replay(o.common.replay_out);

    Controller controller(cfg, replay.get());
    StrategyClient g(Team::green, green, cfg.rules.green_key, true);
    StrategyClient b(Team::blue, blue, cfg.rules.blue_key, true);
    std::vector<StrategyClient*> clients;
    if (!green.empty()) clients.push_back(&g);
    if (!blue.empty()) clients.push_back(&b);
    if (clients.empty()) throw UsageError("no robots to play with");
    run_local_match(controller, clients);

    const GameState& st = controller.rules().state();
    out << "played " << std::fixed << std::setprecision(1) << controller.time() << " s, phase "
        << to_string(st.phase) << "\n";
    out << "final score: green " << st.score[0] << " - blue " << st.score[1] << '\n';
    return kOk;
  });
}

int cmd_replay(const ReplayOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const ReplayLog log = read_replay(std::filesystem::path(o.log));
    if (log.truncated) err << "warning: " << log.warning << '\n';
    if (o.verify) {
      const VerifyReport r = verify_replay(log);
      out << "frames " << r.frames << ", referee actions " << r.referee_actions << ", rule messages "
          << r.rule_messages << ", divergences " << r.divergences.size() << '\n';
      for (const Divergence& d : r.divergences) {
        out << "  #" << d.index << "\n    expected " << d.expected << "\n    recorded " << d.recorded << '\n';
      }
      return r.ok() ? kOk : kRuntime;
    }
    const auto items = playback_schedule(log, o.speed);
    if (o.port) {
      serve_playback("127.0.0.1", static_cast<unsigned short>(*o.port), items, [&](unsigned short p) {
        out << "replaying " << items.size() << " messages on ws://127.0.0.1:" << p
            << "/api once a client connects\n"
            << std::flush;
      });
      return kOk;
    }
    play(items, [&](const PlaybackItem& item) {
      out << item.text << '\n' << std::flush;
      return static_cast<bool>(out);
    });
    return kOk;
  });
}

int cmd_calibrate_kick(const CalibrateOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    std::vector<KickSample> samples;
    double cap = KickerConfig{}.true_map.cap;
    if (o.simulate > 0) {
      if (!o.samples.empty()) throw UsageError("give either a samples CSV or --simulate, not both");
      RunConfig cfg = load(o.common, err);
      if (o.noise) cfg.sim.kicker.speed_noise = *o.noise;
      cap = cfg.sim.kicker.true_map.cap;
      samples = simulate_kicks(cfg.sim, o.simulate);
    } else {
      if (o.samples.empty()) throw UsageError("give a samples CSV or --simulate N");
      std::ifstream in(o.samples);
      if (!in) throw Error(Errc::io, "cannot open " + o.samples);
      samples = read_kick_samples(in);
    }
    if (samples.size() < 3) {
      throw Error(Errc::insufficient_data,
                  "need at least 3 samples for a quadratic kick map, got " + std::to_string(samples.size()));
    }
    if (!o.out.empty()) {
      std::ofstream f(o.out);
      if (!f) throw Error(Errc::io, "cannot write " + o.out);
      write_kick_samples(f, samples);
    }

    const KickMap map = fit_kick_map(samples, cap);
    out << std::setprecision(10);
    out << "samples: " << samples.size() << "\n";
    out << "speed(t) = " << map.coeffs[0] << " + " << map.coeffs[1] << " t + " << map.coeffs[2] << " t^2\n";
    out << "residual variance: " << map.residual_variance << " (m/s)^2\n";
    out << "target_mps,impulse_s,reachable\n";
    for (int i = 1; i <= 10; ++i) {
      const double target = 0.1 * i;
      try {
        const KickInversion inv = invert_kick_map(map, target);
        out << std::setprecision(3) << target << "," << std::setprecision(6) << inv.impulse << ","
            << (inv.reachable ? "yes" : "no") << '\n';
      } catch (const Error& e) {
        out << std::setprecision(3) << target << ",nan,no\n";
        err << "warning: " << e.what() << '\n';
        break;
      }
    }
    return kOk;
  });
}

int cmd_validate_config(const std::string& path, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    load_config(path);
    out << path << ": ok\n";
    return kOk;
  });
}

}  // namespace kickoff::cli
