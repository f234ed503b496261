#include "kickoff/server.hpp"

#include <chrono>
#include <deque>
#include <limits>
#include <map>
#include <mutex>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include "kickoff/error.hpp"

namespace kickoff {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using Clock = std::chrono::steady_clock;

namespace {

class WsSession;

// What a WebSocket session reports to whoever accepted it.
struct SessionHost {
  virtual ~SessionHost() = default;
  virtual SessionId opened(const std::shared_ptr<WsSession>& s) = 0;
  virtual void text(SessionId id, std::string text) = 0;
  virtual void closed(SessionId id) = 0;
  virtual std::size_t queue_bound(SessionId id) const = 0;
  virtual void dropped() = 0;
};

}  // namespace

struct Server::Impl : SessionHost, std::enable_shared_from_this<Server::Impl> {
  Impl(RunConfig config, std::ostream* replay)
      : controller(std::move(config), replay), acceptor(ioc), timer(ioc), replay_out(replay) {}

  void accept();
  SessionId opened(const std::shared_ptr<WsSession>& s) override;
  void text(SessionId id, std::string text) override;
  void closed(SessionId id) override;
  // Lockstep clients pace the match with sync, so their queue never holds
  // more than one frame's output and must not lose the frame they sync on.
  std::size_t queue_bound(SessionId id) const override {
    const auto* s = controller.session(id);
    if (s && s->lockstep) return std::numeric_limits<std::size_t>::max();
    return controller.config().server.queue_bound;
  }
  void dropped() override {
    std::lock_guard lock(stats_mutex);
    ++stats.dropped;
  }
  void dispatch();
  void pump_lockstep();
  void schedule();
  void on_timer();
  void shutdown();

  asio::io_context ioc;
  Controller controller;
  tcp::acceptor acceptor;
  asio::steady_timer timer;
  std::ostream* replay_out;
  std::map<SessionId, std::shared_ptr<WsSession>> sessions;
  Clock::time_point start;
  std::uint64_t tick_index = 0;
  bool stopping = false;
  std::function<void(const DetectionFrame&)> frame_hook;

  mutable std::mutex stats_mutex;
  ServerStats stats;
};

namespace {

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket socket, std::shared_ptr<SessionHost> host)
      : ws_(std::move(socket)), host_(std::move(host)), drain_timer_(ws_.get_executor()) {}

  void start() {
    http::async_read(ws_.next_layer(), buffer_, request_,
                     [self = shared_from_this()](beast::error_code ec, std::size_t) { self->on_request(ec); });
  }

  // Queues a message; beyond the bound the oldest pending one is dropped.
  void send(std::shared_ptr<const std::string> text) {
    if (closed_) return;
    if (pending_.size() >= host_->queue_bound(id_)) {
      pending_.pop_front();
      host_->dropped();
    }
    pending_.push_back(std::move(text));
    if (!writing_) write_next();
  }

  // Flushes the queue, then sends a close frame. A reader that stalls is cut
  // off after a second.
  void close_after_flush() {
    if (closed_ || draining_) return;
    draining_ = true;
    drain_timer_.expires_after(std::chrono::seconds(1));
    drain_timer_.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (!ec) self->close();
    });
    if (!writing_) send_close();
  }

  void close() {
    if (closed_) return;
    closed_ = true;
    drain_timer_.cancel();
    beast::error_code ec;
    beast::get_lowest_layer(ws_).socket().shutdown(tcp::socket::shutdown_both, ec);
    beast::get_lowest_layer(ws_).close();
  }

 private:
  void on_request(beast::error_code ec) {
    if (ec) return;
    if (!websocket::is_upgrade(request_) || request_.target() != "/api") {
      auto res = std::make_shared<http::response<http::string_body>>(http::status::not_found, request_.version());
      res->set(http::field::content_type, "text/plain");
      res->body() = "WebSocket endpoint is /api\n";
      res->prepare_payload();
      http::async_write(ws_.next_layer(), *res, [self = shared_from_this(), res](beast::error_code, std::size_t) {
        self->close();
      });
      return;
    }
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(request_, [self = shared_from_this()](beast::error_code ec) { self->on_accept(ec); });
  }

  void on_accept(beast::error_code ec) {
    if (ec) return;
    ws_.text(true);
    id_ = host_->opened(shared_from_this());
    read();
  }

  void read() {
    buffer_.clear();
    ws_.async_read(buffer_, [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->finish();
      self->host_->text(self->id_, beast::buffers_to_string(self->buffer_.data()));
      self->read();
    });
  }

  void write_next() {
    if (pending_.empty() || closed_) {
      writing_ = false;
      if (draining_) send_close();
      return;
    }
    writing_ = true;
    inflight_ = std::move(pending_.front());
    pending_.pop_front();
    ws_.async_write(asio::buffer(*inflight_), [self = shared_from_this()](beast::error_code ec, std::size_t) {
      if (ec) return self->finish();
      self->write_next();
    });
  }

  void send_close() {
    if (closed_) return;
    ws_.async_close(websocket::close_code::normal, [self = shared_from_this()](beast::error_code) { self->close(); });
  }

  void finish() {
    if (id_ != 0) {
      const SessionId id = std::exchange(id_, 0);
      host_->closed(id);
    }
    close();
  }

  websocket::stream<beast::tcp_stream> ws_;
  std::shared_ptr<SessionHost> host_;
  beast::flat_buffer buffer_;
  http::request<http::string_body> request_;
  std::deque<std::shared_ptr<const std::string>> pending_;
  std::shared_ptr<const std::string> inflight_;
  asio::steady_timer drain_timer_;
  bool writing_ = false;
  bool draining_ = false;
  bool closed_ = false;
  SessionId id_ = 0;
};

}  // namespace

void Server::Impl::accept() {
  acceptor.async_accept(ioc, [self = shared_from_this()](beast::error_code ec, tcp::socket s) {
    if (ec || self->stopping) return;
    // A modest kernel buffer keeps a stalled reader's backlog in our bounded
    // queue, where the oldest frames can be dropped, instead of in the socket.
    beast::error_code opt_ec;
    s.set_option(asio::socket_base::send_buffer_size(32 * 1024), opt_ec);
    s.set_option(tcp::no_delay(true), opt_ec);
    // The loop is single-threaded, so sessions share it without locking.
    std::make_shared<WsSession>(std::move(s), self)->start();
    self->accept();
  });
}

SessionId Server::Impl::opened(const std::shared_ptr<WsSession>& s) {
  const SessionId id = controller.connect();
  sessions[id] = s;
  {
    std::lock_guard lock(stats_mutex);
    ++stats.sessions_seen;
  }
  dispatch();
  return id;
}

void Server::Impl::closed(SessionId id) {
  if (stopping) return;  // the log is complete once the match is over
  sessions.erase(id);
  controller.disconnect(id);
  if (controller.config().server.lockstep_clients > 0) pump_lockstep();
}

void Server::Impl::text(SessionId id, std::string text) {
  if (stopping) return;
  controller.receive(id, std::move(text));
  if (controller.config().server.lockstep_clients > 0) pump_lockstep();
}

void Server::Impl::dispatch() {
  for (Outbound& o : controller.take_outbound()) {
    // One immutable buffer per message: every subscriber gets the same bytes.
    auto text = std::make_shared<const std::string>(std::move(o.text));
    if (o.to) {
      const auto it = sessions.find(*o.to);
      if (it != sessions.end()) it->second->send(text);
    } else {
      for (auto& [id, s] : sessions) s->send(text);
    }
  }
}

void Server::Impl::pump_lockstep() {
  while (!stopping && !controller.done() && controller.ready()) {
    const auto frame = controller.tick();
    {
      std::lock_guard lock(stats_mutex);
      ++stats.ticks;
      if (frame) ++stats.frames;
    }
    dispatch();
    if (frame && frame_hook) frame_hook(*frame);
  }
  dispatch();
  if (controller.done()) shutdown();
}

void Server::Impl::schedule() {
  const auto period = std::chrono::duration<double>(1.0 / controller.config().sim.physics_hz);
  timer.expires_at(start + std::chrono::duration_cast<Clock::duration>(period * static_cast<double>(tick_index)));
  timer.async_wait([self = shared_from_this()](beast::error_code ec) {
    if (!ec) self->on_timer();
  });
}

void Server::Impl::on_timer() {
  if (stopping) return;
  const double period = 1.0 / controller.config().sim.physics_hz;
  // Catch up on every deadline already due, then sleep to the next one.
  while (!controller.done()) {
    const auto deadline = start + std::chrono::duration_cast<Clock::duration>(
                                      std::chrono::duration<double>(period * static_cast<double>(tick_index)));
    const auto now = Clock::now();
    if (deadline > now) break;
    const double late = std::chrono::duration<double>(now - deadline).count();
    const auto frame = controller.tick();
    ++tick_index;
    {
      std::lock_guard lock(stats_mutex);
      ++stats.ticks;
      if (frame) ++stats.frames;
      stats.max_lateness = std::max(stats.max_lateness, late);
    }
    dispatch();
    if (frame && frame_hook) frame_hook(*frame);
  }
  if (controller.done()) return shutdown();
  schedule();
}

void Server::Impl::shutdown() {
  if (stopping) return;
  stopping = true;
  beast::error_code ec;
  acceptor.close(ec);
  timer.cancel();
  auto all = std::move(sessions);
  for (auto& [id, s] : all) s->close_after_flush();
  if (replay_out) replay_out->flush();
}

Server::Server(RunConfig config, std::ostream* replay) : impl_(std::make_shared<Impl>(std::move(config), replay)) {}

Server::~Server() {
  impl_->shutdown();
  // Handlers hold references to the implementation; drain them before it goes away.
  impl_->ioc.restart();
  impl_->ioc.poll();
}

unsigned short Server::listen() {
  const ServerConfig& sc = impl_->controller.config().server;
  const std::string where = sc.host + ":" + std::to_string(sc.port);
  try {
    const tcp::endpoint ep(asio::ip::make_address(sc.host), static_cast<unsigned short>(sc.port));
    impl_->acceptor.open(ep.protocol());
    impl_->acceptor.set_option(asio::socket_base::reuse_address(true));
    impl_->acceptor.bind(ep);
    impl_->acceptor.listen(asio::socket_base::max_listen_connections);
  } catch (const boost::system::system_error& e) {
    throw Error(Errc::io, "cannot listen on " + where + ": " + e.code().message());
  }
  return port();
}

void Server::run() {
  Impl& s = *impl_;
  s.accept();
  s.start = Clock::now();
  if (s.controller.config().server.lockstep_clients > 0) {
    asio::post(s.ioc, [&s] { s.pump_lockstep(); });
  } else {
    s.schedule();
  }
  s.ioc.run();
  if (s.replay_out) s.replay_out->flush();
}

void Server::stop() {
  asio::post(impl_->ioc, [impl = impl_] { impl->shutdown(); });
}

unsigned short Server::port() const {
  beast::error_code ec;
  const auto ep = impl_->acceptor.local_endpoint(ec);
  return ec ? 0 : ep.port();
}

ServerStats Server::stats() const {
  std::lock_guard lock(impl_->stats_mutex);
  return impl_->stats;
}

void Server::on_frame(std::function<void(const DetectionFrame&)> hook) { impl_->frame_hook = std::move(hook); }

}  // namespace kickoff

namespace kickoff {
namespace {

struct PlaybackHost : SessionHost, std::enable_shared_from_this<PlaybackHost> {
  PlaybackHost(const std::vector<PlaybackItem>& items_) : acceptor(ioc), timer(ioc), items(items_) {}

  SessionId opened(const std::shared_ptr<WsSession>& s) override {
    const SessionId id = next++;
    sessions[id] = s;
    if (!started) {
      started = true;
      start = Clock::now();
      schedule();
    }
    return id;
  }
  void text(SessionId, std::string) override {}  // playback is read-only
  void closed(SessionId id) override { sessions.erase(id); }
  std::size_t queue_bound(SessionId) const override { return 8; }
  void dropped() override {}

  void accept() {
    acceptor.async_accept(ioc, [self = shared_from_this()](beast::error_code ec, tcp::socket s) {
      if (ec) return;
      std::make_shared<WsSession>(std::move(s), self)->start();
      self->accept();
    });
  }

  void schedule() {
    if (index >= items.size()) return finish();
    timer.expires_at(start + std::chrono::duration_cast<Clock::duration>(
                                 std::chrono::duration<double>(items[index].offset)));
    timer.async_wait([self = shared_from_this()](beast::error_code ec) {
      if (ec) return;
      auto text = std::make_shared<const std::string>(self->items[self->index++].text);
      for (auto& [id, s] : self->sessions) s->send(text);
      self->schedule();
    });
  }

  void finish() {
    beast::error_code ec;
    acceptor.close(ec);
    auto all = std::move(sessions);
    for (auto& [id, s] : all) s->close_after_flush();
  }

  asio::io_context ioc;
  tcp::acceptor acceptor;
  asio::steady_timer timer;
  const std::vector<PlaybackItem>& items;
  std::map<SessionId, std::shared_ptr<WsSession>> sessions;
  SessionId next = 1;
  bool started = false;
  Clock::time_point start;
  std::size_t index = 0;
};

}  // namespace

void serve_playback(const std::string& host, unsigned short port, const std::vector<PlaybackItem>& items,
                    const std::function<void(unsigned short)>& listening) {
  auto h = std::make_shared<PlaybackHost>(items);
  try {
    const tcp::endpoint ep(asio::ip::make_address(host), port);
    h->acceptor.open(ep.protocol());
    h->acceptor.set_option(asio::socket_base::reuse_address(true));
    h->acceptor.bind(ep);
    h->acceptor.listen();
  } catch (const boost::system::system_error& e) {
    throw Error(Errc::io, "cannot listen on " + host + ":" + std::to_string(port) + ": " + e.code().message());
  }
  if (listening) listening(h->acceptor.local_endpoint().port());
  h->accept();
  h->ioc.run();
}

}  // namespace kickoff
