#pragma once

#include <cstdint>
#include <vector>

#include "ddse/bytes.hpp"
#include "ddse/crypto.hpp"

namespace ddse::bloom {

struct Sizing {
  std::uint64_t bits;
  unsigned hashes;

  friend bool operator==(const Sizing&, const Sizing&) = default;
};

/// b = ceil(-n ln p / (ln 2)^2), h = ceil((b / n) ln 2).
Sizing size_for(std::uint64_t n, double p);

// Fixed-capacity Bloom filter. The h indices of x are
// g_i(x) = (h1 + i*h2) mod b where (h1, h2) come from HMAC-SHA256(seed, x).
class BloomFilter {
 public:
  /// gen: requires bits >= hashes >= 1 and hashes <= 255.
  BloomFilter(std::uint64_t bits, unsigned hashes, const crypto::Key& seed);

  /// upd
  void insert(ByteView x);
  /// check
  bool contains(ByteView x) const;
  /// The h hash positions of x, in hash-index order (may repeat).
  std::vector<std::uint64_t> positions(ByteView x) const;

  bool test(std::uint64_t bit) const { return bits_[bit >> 3] >> (bit & 7) & 1; }
  void set(std::uint64_t bit) { bits_[bit >> 3] |= static_cast<std::uint8_t>(1u << (bit & 7)); }

  std::uint64_t bit_len() const { return bit_len_; }
  unsigned hash_count() const { return hashes_; }
  const crypto::Key& seed() const { return seed_; }
  std::uint64_t popcount() const;
  /// Indices of all set bits, ascending.
  std::vector<std::uint64_t> set_bits() const;
  /// Storage size of the bit array in bytes.
  std::size_t byte_size() const { return bits_.size(); }

  /// [b:8][h:1][seed:16][bit array, ceil(b/8) bytes, bit i at byte i/8, LSB first].
  Bytes encode() const;
  void encode_to(ByteWriter& w) const;
  static BloomFilter decode(ByteReader& r);
  static BloomFilter decode(ByteView b);

  friend bool operator==(const BloomFilter&, const BloomFilter&) = default;

 private:
  std::uint64_t bit_len_;
  unsigned hashes_;
  crypto::Key seed_;
  std::vector<std::uint8_t> bits_;
};

}  // namespace ddse::bloom
