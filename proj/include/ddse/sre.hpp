#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ddse/bloom.hpp"
#include "ddse/bytes.hpp"
#include "ddse/crypto.hpp"
#include "ddse/ggm.hpp"

// Symmetric revocable encryption with Bloom-filter-compressed revocation.
// A message encrypted under tag t is stored once per hash position H_i(t),
// each copy under the GGM leaf key at that position. Revoking t sets its
// positions in D; the revoked key punctures every set bit of D, so a
// revoked tag has no derivable component left.
namespace ddse::sre {

using Tag = crypto::Block;

struct Params {
  std::uint64_t domain;  // b, a power of two
  unsigned hashes;       // h

  friend bool operator==(const Params&, const Params&) = default;
};

/// Domain sized for `revocations` tags at accidental-revocation rate `p`,
/// rounded up to a power of two.
Params params_for_budget(std::uint64_t revocations, double p);

struct MasterKey {
  ggm::Root sk;
  bloom::BloomFilter revoked;  // D
};

MasterKey kgen(crypto::RandomSource& rng, const Params& params);

struct Component {
  crypto::Nonce nonce{};
  Bytes body;

  friend bool operator==(const Component&, const Component&) = default;
};

struct Ciphertext {
  std::vector<Component> components;

  /// [h:1][per component: nonce:12 || len:4 || body]
  Bytes encode() const;
  void encode_to(ByteWriter& w) const;
  static Ciphertext decode(ByteReader& r);
  static Ciphertext decode(ByteView b);

  friend bool operator==(const Ciphertext&, const Ciphertext&) = default;
};

Ciphertext enc(const MasterKey& msk, ByteView message, const Tag& tag, crypto::RandomSource& rng);

/// Returns D with tag's positions set.
bloom::BloomFilter comp(bloom::BloomFilter revoked, const Tag& tag);

struct RevokedKey {
  ggm::DelegatedKey punctured;
  bloom::BloomFilter revoked;

  /// DelegatedKey encoding || BloomFilter encoding.
  Bytes encode() const;
  void encode_to(ByteWriter& w) const;
  static RevokedKey decode(ByteReader& r);
  static RevokedKey decode(ByteView b);

  friend bool operator==(const RevokedKey&, const RevokedKey&) = default;
};

RevokedKey ck_rev(const ggm::Root& sk, const bloom::BloomFilter& revoked);

/// nullopt is the failure symbol: revoked tag, accidental revocation, or a
/// component that does not carry a valid frame.
std::optional<Bytes> dec(const RevokedKey& key, const Ciphertext& ct, const Tag& tag);

// Batch decryption strategies. All are observationally identical to dec().
enum class Strategy {
  baseline,     // walk from the punctured key for every ciphertext
  greedy,       // LIFO stack of unused sub-keys carried across ciphertexts
  precomputed,  // frontier table sized from the revocation budget
  combined,     // greedy stack over the precomputed frontier
};

struct DecryptOptions {
  Strategy strategy = Strategy::combined;
  /// Estimated revocations per epoch; drives the frontier level.
  std::uint64_t revocation_budget = 0;
};

/// Frontier level for a budget: ceil(log2(4 * budget * h)), capped at depth.
unsigned frontier_level(std::uint64_t budget, unsigned hashes, unsigned depth);

class Decryptor {
 public:
  Decryptor(const RevokedKey& key, Strategy strategy, const ggm::FrontierTable* frontier);
  std::optional<Bytes> decrypt(const Ciphertext& ct, const Tag& tag);

 private:
  std::optional<crypto::Block> leaf(std::uint64_t position);

  const RevokedKey* key_;
  Strategy strategy_;
  const ggm::FrontierTable* frontier_;
  std::optional<ggm::GreedyDeriver> greedy_;
};

struct Sealed {
  Ciphertext ct;
  Tag tag;
};

/// Serial reference implementation.
std::vector<std::optional<Bytes>> decrypt_batch_serial(const RevokedKey& key,
                                                       std::span<const Sealed> items,
                                                       const DecryptOptions& options = {});
/// OpenMP kernel; each thread keeps its own greedy stack. Same output as the
/// serial version, element for element.
std::vector<std::optional<Bytes>> decrypt_batch_parallel(const RevokedKey& key,
                                                         std::span<const Sealed> items,
                                                         const DecryptOptions& options = {});

}  // namespace ddse::sre
