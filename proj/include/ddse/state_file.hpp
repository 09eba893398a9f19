#pragma once

#include <filesystem>
#include <string_view>

#include "ddse/crypto.hpp"

// Encrypted-at-rest container for client state:
//   "DDSE" | version:2 | iterations:4 | salt:16 | AES-256-GCM(nonce || ct || tag)
// The header is bound as associated data.
namespace ddse::state_file {

inline constexpr std::uint16_t kVersion = 1;
inline constexpr unsigned kDefaultIterations = 100000;

Bytes seal(ByteView plaintext, std::string_view passphrase, crypto::RandomSource& rng,
           unsigned iterations = kDefaultIterations);
/// Throws DecodeError on a malformed container and IntegrityError on a
/// wrong passphrase or tampering.
Bytes open(ByteView container, std::string_view passphrase);

/// Atomic write through a temporary file and rename.
void save(const std::filesystem::path& path, ByteView plaintext, std::string_view passphrase,
          crypto::RandomSource& rng, unsigned iterations = kDefaultIterations);
Bytes load(const std::filesystem::path& path, std::string_view passphrase);

}  // namespace ddse::state_file
