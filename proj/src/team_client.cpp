#include "kickoff/client.hpp"

namespace kickoff {

TeamClientResult run_team_client(const std::string& host, unsigned short port, StrategyClient& client,
                                 const std::function<bool()>& stop) {
  WsClient ws;
  ws.connect(host, port);
  while (!(stop && stop())) {
    const auto text = ws.receive();
    if (!text) break;
    for (const std::string& reply : client.on_message(*text)) ws.send(reply);
    if (client.phase() == Phase::finished) break;
  }
  ws.close();
  return {client.frames_seen(), client.goals_seen(), client.nacks(), client.last_state()};
}

}  // namespace kickoff
