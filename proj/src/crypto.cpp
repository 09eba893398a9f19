#include "ddse/crypto.hpp"

#include <openssl/evp.h>
#include <openssl/hmac.h>
#include <openssl/rand.h>
#include <openssl/sha.h>
#include <zlib.h>

#include <cstring>

namespace ddse::crypto {
namespace {

struct CtxDeleter {
  void operator()(EVP_CIPHER_CTX* c) const { EVP_CIPHER_CTX_free(c); }
};
using CtxPtr = std::unique_ptr<EVP_CIPHER_CTX, CtxDeleter>;

CtxPtr new_ctx() {
  CtxPtr ctx(EVP_CIPHER_CTX_new());
  if (!ctx) throw Error("EVP_CIPHER_CTX_new failed");
  return ctx;
}

// Per-thread ECB context; only the key changes between calls.
EVP_CIPHER_CTX* ecb_ctx() {
  thread_local CtxPtr ctx = [] {
    auto c = new_ctx();
    if (EVP_EncryptInit_ex(c.get(), EVP_aes_128_ecb(), nullptr, nullptr, nullptr) != 1)
      throw Error("AES-ECB init failed");
    EVP_CIPHER_CTX_set_padding(c.get(), 0);
    return c;
  }();
  return ctx.get();
}

void ecb_encrypt(const Key& key, const std::uint8_t* in, std::size_t len, std::uint8_t* out) {
  auto* ctx = ecb_ctx();
  int n = 0;
  if (EVP_EncryptInit_ex(ctx, nullptr, nullptr, key.data(), nullptr) != 1 ||
      EVP_EncryptUpdate(ctx, out, &n, in, static_cast<int>(len)) != 1)
    throw Error("AES-ECB failed");
}

const EVP_CIPHER* gcm_for(std::size_t key_len) {
  switch (key_len) {
    case 16: return EVP_aes_128_gcm();
    case 32: return EVP_aes_256_gcm();
    default: throw InvalidArgument("AES-GCM key must be 16 or 32 bytes");
  }
}

}  // namespace

Key RandomSource::key() {
  Key k;
  fill(k);
  return k;
}

Nonce RandomSource::nonce() {
  Nonce n;
  fill(n);
  return n;
}

std::uint64_t RandomSource::u64() {
  std::array<std::uint8_t, 8> b;
  fill(b);
  std::uint64_t v = 0;
  for (auto c : b) v = v << 8 | c;
  return v;
}

void SystemRandom::fill(std::span<std::uint8_t> out) {
  if (out.empty()) return;
  if (RAND_bytes(out.data(), static_cast<int>(out.size())) != 1) throw Error("RAND_bytes failed");
}

SeededRandom::SeededRandom(std::uint64_t seed) {
  ByteWriter w;
  w.raw(view("ddse-seeded-random")).u64(seed);
  auto d = sha256(w.bytes());
  std::copy_n(d.begin(), key_.size(), key_.begin());
}

void SeededRandom::fill(std::span<std::uint8_t> out) {
  for (auto& byte : out) {
    if (used_ == buffer_.size()) {
      Block ctr{};
      for (int i = 0; i < 8; ++i) ctr[15 - i] = static_cast<std::uint8_t>(counter_ >> (8 * i));
      ++counter_;
      ecb_encrypt(key_, ctr.data(), ctr.size(), buffer_.data());
      used_ = 0;
    }
    byte = buffer_[used_++];
  }
}

std::shared_ptr<RandomSource> system_random() {
  static auto rng = std::make_shared<SystemRandom>();
  return rng;
}

Digest hmac_sha256(ByteView key, ByteView data) {
  Digest out;
  unsigned len = 0;
  if (!HMAC(EVP_sha256(), key.data(), static_cast<int>(key.size()), data.data(), data.size(),
            out.data(), &len))
    throw Error("HMAC failed");
  return out;
}

Digest sha256(ByteView data) {
  Digest out;
  SHA256(data.data(), data.size(), out.data());
  return out;
}

Block prf(const Key& key, ByteView data) {
  auto d = hmac_sha256(key, data);
  Block out;
  std::copy_n(d.begin(), out.size(), out.begin());
  return out;
}

std::pair<Block, Block> prg_expand(const Block& seed) {
  static constexpr std::array<std::uint8_t, 32> kInput = [] {
    std::array<std::uint8_t, 32> in{};
    in[31] = 1;
    return in;
  }();
  std::array<std::uint8_t, 32> out;
  ecb_encrypt(seed, kInput.data(), kInput.size(), out.data());
  std::pair<Block, Block> children;
  std::copy_n(out.begin(), 16, children.first.begin());
  std::copy_n(out.begin() + 16, 16, children.second.begin());
  return children;
}

Block prg_child(const Block& seed, bool right) {
  Block in{};
  in[15] = right ? 1 : 0;
  Block out;
  ecb_encrypt(seed, in.data(), in.size(), out.data());
  return out;
}

Bytes aes_ctr(const Key& key, const Nonce& nonce, ByteView data) {
  auto ctx = new_ctx();
  std::array<std::uint8_t, 16> iv{};
  std::copy(nonce.begin(), nonce.end(), iv.begin());
  Bytes out(data.size());
  int n = 0;
  if (EVP_EncryptInit_ex(ctx.get(), EVP_aes_128_ctr(), nullptr, key.data(), iv.data()) != 1 ||
      EVP_EncryptUpdate(ctx.get(), out.data(), &n, data.data(), static_cast<int>(data.size())) != 1)
    throw Error("AES-CTR failed");
  return out;
}

Bytes aead_seal(ByteView key, const Nonce& nonce, ByteView plaintext, ByteView aad) {
  auto ctx = new_ctx();
  Bytes out(kNonceBytes + plaintext.size() + kAeadTagBytes);
  std::copy(nonce.begin(), nonce.end(), out.begin());
  int n = 0;
  if (EVP_EncryptInit_ex(ctx.get(), gcm_for(key.size()), nullptr, key.data(), nonce.data()) != 1)
    throw Error("AES-GCM init failed");
  if (!aad.empty() && EVP_EncryptUpdate(ctx.get(), nullptr, &n, aad.data(), static_cast<int>(aad.size())) != 1)
    throw Error("AES-GCM aad failed");
  if (EVP_EncryptUpdate(ctx.get(), out.data() + kNonceBytes, &n, plaintext.data(),
                        static_cast<int>(plaintext.size())) != 1 ||
      EVP_EncryptFinal_ex(ctx.get(), out.data() + kNonceBytes + n, &n) != 1 ||
      EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_GET_TAG, kAeadTagBytes,
                          out.data() + kNonceBytes + plaintext.size()) != 1)
    throw Error("AES-GCM seal failed");
  return out;
}

std::optional<Bytes> aead_open(ByteView key, ByteView sealed, ByteView aad) {
  if (sealed.size() < kNonceBytes + kAeadTagBytes) return std::nullopt;
  auto ctx = new_ctx();
  const std::size_t body = sealed.size() - kNonceBytes - kAeadTagBytes;
  Bytes out(body);
  std::array<std::uint8_t, kAeadTagBytes> tag;
  std::copy_n(sealed.end() - kAeadTagBytes, kAeadTagBytes, tag.begin());
  int n = 0;
  if (EVP_DecryptInit_ex(ctx.get(), gcm_for(key.size()), nullptr, key.data(), sealed.data()) != 1)
    throw Error("AES-GCM init failed");
  if (!aad.empty() && EVP_DecryptUpdate(ctx.get(), nullptr, &n, aad.data(), static_cast<int>(aad.size())) != 1)
    return std::nullopt;
  if (EVP_DecryptUpdate(ctx.get(), out.data(), &n, sealed.data() + kNonceBytes,
                        static_cast<int>(body)) != 1)
    return std::nullopt;
  EVP_CIPHER_CTX_ctrl(ctx.get(), EVP_CTRL_GCM_SET_TAG, kAeadTagBytes, tag.data());
  if (EVP_DecryptFinal_ex(ctx.get(), out.data() + n, &n) != 1) return std::nullopt;
  return out;
}

std::array<std::uint8_t, 32> derive_passphrase_key(std::string_view passphrase, ByteView salt,
                                                   unsigned iterations) {
  std::array<std::uint8_t, 32> out;
  if (PKCS5_PBKDF2_HMAC(passphrase.data(), static_cast<int>(passphrase.size()), salt.data(),
                        static_cast<int>(salt.size()), static_cast<int>(iterations), EVP_sha256(),
                        static_cast<int>(out.size()), out.data()) != 1)
    throw Error("PBKDF2 failed");
  return out;
}

std::uint32_t crc32(ByteView data) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, data.data(), static_cast<uInt>(data.size())));
}

}  // namespace ddse::crypto
