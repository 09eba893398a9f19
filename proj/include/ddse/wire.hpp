#pragma once

#include <cstdint>
#include <optional>

#include "ddse/bytes.hpp"

// Length-prefixed frames: [length:4][type:1][body], where length counts the
// type byte and the body.
namespace ddse::wire {

enum class MsgType : std::uint8_t { hello = 1, update = 2, search = 3, result = 4, error = 5, bye = 6 };

inline constexpr std::uint32_t kMaxFrame = 64u << 20;
inline constexpr std::uint32_t kProtocolVersion = 1;

struct Frame {
  MsgType type = MsgType::hello;
  Bytes body;

  friend bool operator==(const Frame&, const Frame&) = default;
};

const char* type_name(MsgType t);

/// Bytes the frame occupies on the wire.
inline std::size_t frame_size(std::size_t body_len) { return 5 + body_len; }

Bytes encode(const Frame& f);
/// Parses exactly one frame; throws DecodeError on malformed or oversize input.
Frame decode(ByteView b);

/// Blocking reads and writes on a stream socket. read_frame returns nullopt
/// on a clean end of stream before the first header byte; it throws
/// DecodeError for oversize or unknown frames and StorageError on I/O
/// failure or a stream that ends mid-frame.
std::optional<Frame> read_frame(int fd);
void write_frame(int fd, const Frame& f);

}  // namespace ddse::wire
