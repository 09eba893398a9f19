#include "ddse/net.hpp"

#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "ddse/error.hpp"

namespace ddse::net {

namespace {

struct AddrInfo {
  addrinfo* list = nullptr;
  ~AddrInfo() {
    if (list) ::freeaddrinfo(list);
  }
};

AddrInfo resolve(const HostPort& hp, bool passive) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  if (passive) hints.ai_flags = AI_PASSIVE;
  AddrInfo ai;
  const auto port = std::to_string(hp.port);
  if (int rc = ::getaddrinfo(hp.host.empty() ? nullptr : hp.host.c_str(), port.c_str(), &hints, &ai.list); rc != 0)
    throw StorageError("cannot resolve " + hp.host + ": " + ::gai_strerror(rc));
  return ai;
}

void send_error(int fd, const std::string& message) {
  try {
    wire::write_frame(fd, {wire::MsgType::error, to_bytes(message)});
  } catch (const Error&) {
    // The peer is gone; nothing left to tell it.
  }
}

}  // namespace

HostPort parse_host_port(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos) throw InvalidArgument("expected host:port, got '" + s + "'");
  HostPort hp;
  hp.host = s.substr(0, colon);
  if (hp.host.size() >= 2 && hp.host.front() == '[' && hp.host.back() == ']') hp.host = hp.host.substr(1, hp.host.size() - 2);
  const auto port = std::string_view(s).substr(colon + 1);
  unsigned value = 0;
  auto [p, ec] = std::from_chars(port.data(), port.data() + port.size(), value);
  if (ec != std::errc{} || p != port.data() + port.size() || value > 65535)
    throw InvalidArgument("bad port in '" + s + "'");
  hp.port = static_cast<std::uint16_t>(value);
  return hp;
}

void serve_connection(int fd, bfsre::ServerEndpoint& endpoint) {
  using wire::MsgType;
  try {
    while (auto frame = wire::read_frame(fd)) {
      switch (frame->type) {
        case MsgType::hello: {
          ByteWriter w;
          w.u32(wire::kProtocolVersion);
          wire::write_frame(fd, {MsgType::hello, std::move(w).take()});
          break;
        }
        case MsgType::update:
        case MsgType::search: {
          Bytes body;
          try {
            if (frame->type == MsgType::update) {
              endpoint.update(bfsre::UpdateMessage::decode(frame->body));
            } else {
              body = endpoint.search(bfsre::SearchRequest::decode(frame->body)).encode();
            }
          } catch (const DecodeError&) {
            throw;
          } catch (const Error& e) {
            // Storage or protocol failure on a well-formed request: report
            // it and keep the connection.
            send_error(fd, e.what());
            continue;
          }
          wire::write_frame(fd, {MsgType::result, std::move(body)});
          break;
        }
        case MsgType::bye:
          wire::write_frame(fd, {MsgType::bye, {}});
          return;
        default:
          send_error(fd, std::string("unexpected ") + wire::type_name(frame->type) + " frame");
          return;
      }
    }
  } catch (const DecodeError& e) {
    send_error(fd, std::string("malformed frame: ") + e.what());
  } catch (const Error&) {
    // I/O failure: drop the connection.
  }
}

TcpServer::TcpServer(bfsre::ServerEndpoint& endpoint, const HostPort& bind) : endpoint_(endpoint) {
  auto ai = resolve(bind, true);
  for (auto* p = ai.list; p; p = p->ai_next) {
    const int fd = ::socket(p->ai_family, p->ai_socktype | SOCK_CLOEXEC, p->ai_protocol);
    if (fd < 0) continue;
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, p->ai_addr, p->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      listen_fd_ = fd;
      break;
    }
    ::close(fd);
  }
  if (listen_fd_ < 0) throw StorageError("cannot listen on " + bind.host + ":" + std::to_string(bind.port));
  sockaddr_storage ss{};
  socklen_t len = sizeof ss;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&ss), &len);
  port_ = ntohs(ss.ss_family == AF_INET6 ? reinterpret_cast<sockaddr_in6*>(&ss)->sin6_port
                                         : reinterpret_cast<sockaddr_in*>(&ss)->sin_port);
}

TcpServer::~TcpServer() {
  stop();
  reap(true);
  if (listen_fd_ >= 0) ::close(listen_fd_);
}

void TcpServer::run() {
  while (!stopping_) {
    const int fd = ::accept4(listen_fd_, nullptr, nullptr, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;
    }
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    reap(false);
    auto conn = std::make_unique<Connection>();
    auto* c = conn.get();
    c->fd = fd;
    c->worker = std::thread([this, c] {
      serve_connection(c->fd, endpoint_);
      ::shutdown(c->fd, SHUT_RDWR);
      c->done = true;
    });
    connections_.push_back(std::move(conn));
  }
}

void TcpServer::stop() {
  if (stopping_.exchange(true)) return;
  ::shutdown(listen_fd_, SHUT_RDWR);
  std::lock_guard lock(mu_);
  for (auto& c : connections_) ::shutdown(c->fd, SHUT_RDWR);
}

// Joins finished workers (or all of them) and closes their sockets.
void TcpServer::reap(bool all) {
  std::list<std::unique_ptr<Connection>> finished;
  {
    std::unique_lock lock(mu_, std::defer_lock);
    if (all) lock.lock();
    for (auto it = connections_.begin(); it != connections_.end();) {
      if (all || (*it)->done) {
        finished.push_back(std::move(*it));
        it = connections_.erase(it);
      } else {
        ++it;
      }
    }
  }
  for (auto& c : finished) {
    c->worker.join();
    ::close(c->fd);
  }
}

RemoteEndpoint::RemoteEndpoint(const HostPort& server) {
  auto ai = resolve(server, false);
  for (auto* p = ai.list; p; p = p->ai_next) {
    const int fd = ::socket(p->ai_family, p->ai_socktype | SOCK_CLOEXEC, p->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, p->ai_addr, p->ai_addrlen) == 0) {
      fd_ = fd;
      break;
    }
    ::close(fd);
  }
  if (fd_ < 0) throw StorageError("cannot connect to " + server.host + ":" + std::to_string(server.port));
  ByteWriter w;
  w.u32(wire::kProtocolVersion);
  const auto reply = exchange({wire::MsgType::hello, std::move(w).take()});
  if (reply.type != wire::MsgType::hello) throw ProtocolError("server did not answer HELLO");
  ByteReader r(reply.body);
  if (r.u32() != wire::kProtocolVersion) throw ProtocolError("protocol version mismatch");
}

RemoteEndpoint::~RemoteEndpoint() {
  if (fd_ < 0) return;
  try {
    wire::write_frame(fd_, {wire::MsgType::bye, {}});
    (void)wire::read_frame(fd_);
  } catch (const Error&) {
  }
  ::close(fd_);
}

wire::Frame RemoteEndpoint::exchange(const wire::Frame& f) {
  wire::write_frame(fd_, f);
  auto reply = wire::read_frame(fd_);
  if (!reply) throw ProtocolError("server closed the connection");
  last_reply_bytes_ = wire::frame_size(reply->body.size());
  return std::move(*reply);
}

std::optional<wire::Frame> RemoteEndpoint::exchange_raw(ByteView bytes) {
  if (::send(fd_, bytes.data(), bytes.size(), MSG_NOSIGNAL) != static_cast<ssize_t>(bytes.size()))
    throw StorageError("socket write failed");
  return wire::read_frame(fd_);
}

Bytes RemoteEndpoint::expect_result(wire::Frame reply) {
  if (reply.type == wire::MsgType::error) throw ProtocolError("server error: " + to_string(reply.body));
  if (reply.type != wire::MsgType::result) throw ProtocolError("expected RESULT frame");
  return std::move(reply.body);
}

void RemoteEndpoint::update(const bfsre::UpdateMessage& msg) {
  expect_result(exchange({wire::MsgType::update, msg.encode()}));
}

Bytes RemoteEndpoint::search_raw(const bfsre::SearchRequest& req) {
  return expect_result(exchange({wire::MsgType::search, req.encode()}));
}

bfsre::SearchResponse RemoteEndpoint::search(const bfsre::SearchRequest& req) {
  return bfsre::SearchResponse::decode(search_raw(req));
}

}  // namespace ddse::net
