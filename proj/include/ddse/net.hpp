#pragma once

#include <atomic>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "ddse/bfsre_protocol.hpp"
#include "ddse/wire.hpp"

// Socket transport for the BF-SRE server: a thread-per-connection listener
// and a client-side endpoint speaking the frame protocol.
namespace ddse::net {

struct HostPort {
  std::string host;
  std::uint16_t port = 0;
};

/// Parses "host:port"; an empty host means all interfaces.
HostPort parse_host_port(const std::string& s);

/// Serves one connection until BYE, end of stream or a malformed frame.
/// The endpoint must be safe to call from several connections at once.
void serve_connection(int fd, bfsre::ServerEndpoint& endpoint);

class TcpServer {
 public:
  /// Binds and listens immediately; port 0 picks an ephemeral port.
  TcpServer(bfsre::ServerEndpoint& endpoint, const HostPort& bind);
  ~TcpServer();
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  std::uint16_t port() const { return port_; }
  /// Accepts connections until stop() is called.
  void run();
  void stop();

 private:
  struct Connection {
    int fd = -1;
    std::thread worker;
    std::atomic<bool> done{false};
  };
  void reap(bool all);

  bfsre::ServerEndpoint& endpoint_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::mutex mu_;
  std::list<std::unique_ptr<Connection>> connections_;
};

class RemoteEndpoint final : public bfsre::ServerEndpoint {
 public:
  /// Connects and performs the HELLO exchange.
  explicit RemoteEndpoint(const HostPort& server);
  ~RemoteEndpoint() override;
  RemoteEndpoint(const RemoteEndpoint&) = delete;
  RemoteEndpoint& operator=(const RemoteEndpoint&) = delete;

  void update(const bfsre::UpdateMessage& msg) override;
  bfsre::SearchResponse search(const bfsre::SearchRequest& req) override;

  /// Sends a SEARCH and returns the RESULT body undecoded.
  Bytes search_raw(const bfsre::SearchRequest& req);
  /// Sends an arbitrary frame and returns the reply, for protocol tests.
  wire::Frame exchange(const wire::Frame& f);
  /// Sends raw bytes and reads one reply frame, nullopt if the server hung up.
  std::optional<wire::Frame> exchange_raw(ByteView bytes);
  /// Wire size of the last reply frame.
  std::size_t last_reply_bytes() const { return last_reply_bytes_; }

 private:
  Bytes expect_result(wire::Frame reply);

  int fd_ = -1;
  std::size_t last_reply_bytes_ = 0;
};

}  // namespace ddse::net
