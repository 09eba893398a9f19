#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string_view>

#include "ddse/bytes.hpp"

namespace ddse::crypto {

/// Security parameter λ in bytes (λ = 128).
inline constexpr std::size_t kLambdaBytes = 16;
inline constexpr std::size_t kNonceBytes = 12;
inline constexpr std::size_t kAeadTagBytes = 16;

using Key = std::array<std::uint8_t, kLambdaBytes>;
using Block = std::array<std::uint8_t, kLambdaBytes>;
using Digest = std::array<std::uint8_t, 32>;
using Nonce = std::array<std::uint8_t, kNonceBytes>;

class RandomSource {
 public:
  virtual ~RandomSource() = default;
  virtual void fill(std::span<std::uint8_t> out) = 0;

  Key key();
  Nonce nonce();
  std::uint64_t u64();
};

/// OpenSSL's CSPRNG.
class SystemRandom final : public RandomSource {
 public:
  void fill(std::span<std::uint8_t> out) override;
};

/// AES-128-CTR keystream keyed from a 64-bit seed. Reproducible; use only
/// for tests, benchmarks and differential runs.
class SeededRandom final : public RandomSource {
 public:
  explicit SeededRandom(std::uint64_t seed);
  void fill(std::span<std::uint8_t> out) override;

 private:
  Key key_{};
  std::uint64_t counter_ = 0;
  Block buffer_{};
  std::size_t used_ = kLambdaBytes;
};

std::shared_ptr<RandomSource> system_random();

Digest hmac_sha256(ByteView key, ByteView data);
Digest sha256(ByteView data);

/// F(K, x): HMAC-SHA256 truncated to λ bits.
Block prf(const Key& key, ByteView data);

/// Length-doubling PRG G(s) = (AES_s(0), AES_s(1)).
std::pair<Block, Block> prg_expand(const Block& seed);
/// One half of prg_expand; `right` selects the high half.
Block prg_child(const Block& seed, bool right);

/// AES-128-CTR with IV = nonce || 0^32. Encryption and decryption coincide.
Bytes aes_ctr(const Key& key, const Nonce& nonce, ByteView data);

/// AES-GCM (128 or 256 depending on key length). Output: nonce || ct || tag.
Bytes aead_seal(ByteView key, const Nonce& nonce, ByteView plaintext, ByteView aad = {});
std::optional<Bytes> aead_open(ByteView key, ByteView sealed, ByteView aad = {});

/// PBKDF2-HMAC-SHA256 producing a 32-byte key.
std::array<std::uint8_t, 32> derive_passphrase_key(std::string_view passphrase, ByteView salt,
                                                   unsigned iterations);

std::uint32_t crc32(ByteView data);

}  // namespace ddse::crypto
