#include "kickoff/client.hpp"

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>

#include "kickoff/error.hpp"

namespace kickoff {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

struct WsClient::Impl {
  asio::io_context ioc;
  websocket::stream<tcp::socket> ws{ioc};
  beast::flat_buffer buffer;
  bool open = false;
};

WsClient::WsClient() : impl_(std::make_unique<Impl>()) {}

WsClient::~WsClient() {
  try {
    close();
  } catch (...) {
  }
}

void WsClient::connect(const std::string& host, unsigned short port, const std::string& target) {
  try {
    tcp::resolver resolver(impl_->ioc);
    asio::connect(impl_->ws.next_layer(), resolver.resolve(host, std::to_string(port)));
    impl_->ws.next_layer().set_option(tcp::no_delay(true));
    impl_->ws.handshake(host + ":" + std::to_string(port), target);
    impl_->ws.text(true);
    impl_->open = true;
  } catch (const boost::system::system_error& e) {
    throw Error(Errc::io, "cannot connect to ws://" + host + ":" + std::to_string(port) + target + ": " +
                              e.code().message());
  }
}

void WsClient::send(const std::string& text) {
  beast::error_code ec;
  impl_->ws.write(asio::buffer(text), ec);
  if (ec) throw Error(Errc::io, "send failed: " + ec.message());
}

std::optional<std::string> WsClient::receive() {
  if (!impl_->open) return std::nullopt;
  impl_->buffer.clear();
  beast::error_code ec;
  impl_->ws.read(impl_->buffer, ec);
  if (ec) {
    impl_->open = false;
    return std::nullopt;
  }
  return beast::buffers_to_string(impl_->buffer.data());
}

void WsClient::close() {
  if (!impl_->open) return;
  impl_->open = false;
  beast::error_code ec;
  impl_->ws.close(websocket::close_code::normal, ec);
}

}  // namespace kickoff
