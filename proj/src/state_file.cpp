#include "ddse/state_file.hpp"

#include <fstream>
#include <iterator>

#include "ddse/error.hpp"

namespace ddse::state_file {

namespace {

constexpr std::size_t kSaltBytes = 16;
constexpr std::size_t kHeaderBytes = 4 + 2 + 4 + kSaltBytes;

}  // namespace

Bytes seal(ByteView plaintext, std::string_view passphrase, crypto::RandomSource& rng, unsigned iterations) {
  if (iterations == 0) throw InvalidArgument("PBKDF2 needs at least one iteration");
  std::array<std::uint8_t, kSaltBytes> salt;
  rng.fill(salt);
  ByteWriter header;
  header.raw(view("DDSE")).u16(kVersion).u32(iterations).raw(salt);
  const auto key = crypto::derive_passphrase_key(passphrase, salt, iterations);
  const auto sealed = crypto::aead_seal(key, rng.nonce(), plaintext, header.bytes());
  ByteWriter out(header.size() + sealed.size());
  out.raw(header.bytes()).raw(sealed);
  return std::move(out).take();
}

Bytes open(ByteView container, std::string_view passphrase) {
  ByteReader r(container);
  if (to_string(r.raw(4)) != "DDSE") throw DecodeError("not a DDSE state file");
  if (const auto v = r.u16(); v != kVersion) throw DecodeError("unsupported state file version " + std::to_string(v));
  const auto iterations = r.u32();
  if (iterations == 0) throw DecodeError("state file has zero KDF iterations");
  const auto salt = r.raw(kSaltBytes);
  const auto key = crypto::derive_passphrase_key(passphrase, salt, iterations);
  auto plain = crypto::aead_open(key, container.subspan(kHeaderBytes), container.first(kHeaderBytes));
  if (!plain) throw IntegrityError("cannot decrypt state file (wrong passphrase or corrupted)");
  return std::move(*plain);
}

void save(const std::filesystem::path& path, ByteView plaintext, std::string_view passphrase,
          crypto::RandomSource& rng, unsigned iterations) {
  const auto bytes = seal(plaintext, passphrase, rng, iterations);
  const auto tmp = std::filesystem::path(path.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw StorageError("cannot write " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

Bytes load(const std::filesystem::path& path, std::string_view passphrase) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw StorageError("cannot read " + path.string());
  const Bytes data(std::istreambuf_iterator<char>(in), {});
  return open(data, passphrase);
}

}  // namespace ddse::state_file
