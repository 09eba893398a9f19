#include "ddse/wire.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "ddse/error.hpp"

namespace ddse::wire {

namespace {

bool known_type(std::uint8_t t) { return t >= 1 && t <= 6; }

std::uint32_t check_length(std::uint32_t len) {
  if (len == 0) throw DecodeError("frame without a type byte");
  if (len > kMaxFrame) throw DecodeError("frame of " + std::to_string(len) + " bytes exceeds the 64 MiB limit");
  return len;
}

// Returns the number of bytes read; less than n only at end of stream.
std::size_t read_full(int fd, std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::read(fd, out + got, n - got);
    if (r == 0) break;
    if (r < 0) {
      if (errno == EINTR) continue;
      throw StorageError(std::string("socket read failed: ") + std::strerror(errno));
    }
    got += static_cast<std::size_t>(r);
  }
  return got;
}

void write_full(int fd, const std::uint8_t* data, std::size_t n) {
  while (n > 0) {
    const ssize_t w = ::send(fd, data, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw StorageError(std::string("socket write failed: ") + std::strerror(errno));
    }
    data += w;
    n -= static_cast<std::size_t>(w);
  }
}

}  // namespace

const char* type_name(MsgType t) {
  switch (t) {
    case MsgType::hello: return "HELLO";
    case MsgType::update: return "UPDATE";
    case MsgType::search: return "SEARCH";
    case MsgType::result: return "RESULT";
    case MsgType::error: return "ERROR";
    case MsgType::bye: return "BYE";
  }
  return "?";
}

Bytes encode(const Frame& f) {
  if (f.body.size() + 1 > kMaxFrame) throw InvalidArgument("frame body too large");
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(f.body.size() + 1));
  w.u8(static_cast<std::uint8_t>(f.type));
  w.raw(f.body);
  return std::move(w).take();
}

Frame decode(ByteView b) {
  ByteReader r(b);
  const auto len = check_length(r.u32());
  const auto type = r.u8();
  if (!known_type(type)) throw DecodeError("unknown frame type " + std::to_string(type));
  const auto body = r.raw(len - 1);
  r.expect_done();
  Frame f{static_cast<MsgType>(type), Bytes(body.begin(), body.end())};
  return f;
}

std::optional<Frame> read_frame(int fd) {
  std::uint8_t header[5];
  const auto got = read_full(fd, header, sizeof header);
  if (got == 0) return std::nullopt;
  if (got < sizeof header) throw StorageError("stream ended inside a frame header");
  ByteReader r(ByteView(header, sizeof header));
  const auto len = check_length(r.u32());
  const auto type = r.u8();
  if (!known_type(type)) throw DecodeError("unknown frame type " + std::to_string(type));
  Frame f{static_cast<MsgType>(type), Bytes(len - 1)};
  if (read_full(fd, f.body.data(), f.body.size()) < f.body.size())
    throw StorageError("stream ended inside a frame body");
  return f;
}

void write_frame(int fd, const Frame& f) {
  const auto bytes = encode(f);
  write_full(fd, bytes.data(), bytes.size());
}

}  // namespace ddse::wire
