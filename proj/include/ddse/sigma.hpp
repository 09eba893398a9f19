#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "ddse/bytes.hpp"
#include "ddse/crypto.hpp"
#include "ddse/ggm.hpp"

// Forward-private append-only DSE in the style of DIANA. Each label gets its
// own GGM tree; the c-th upload for a label lands at H(leaf_c). A search
// hands the server a key constrained to [0, c), from which it re-derives the
// addresses of exactly the entries uploaded so far. Until then, update
// addresses are unlinkable to the label.
namespace ddse::sigma {

using Address = crypto::Digest;

inline constexpr unsigned kDefaultDepth = 20;

struct UpdateToken {
  Address address{};
  Bytes payload;
};

struct SearchToken {
  crypto::Digest label_id{};
  ggm::DelegatedKey constrained;

  /// [label_id:32][DelegatedKey encoding]
  Bytes encode() const;
  void encode_to(ByteWriter& w) const;
  static SearchToken decode(ByteReader& r);
  static SearchToken decode(ByteView b);

  friend bool operator==(const SearchToken&, const SearchToken&) = default;
};

Address address_of(const crypto::Block& leaf);

/// Server side: the addresses of every entry a token covers, in upload order.
std::vector<Address> expand_addresses(const SearchToken& token);

// Client state σ plus K_Σ.
class Client {
 public:
  Client(const crypto::Key& master, unsigned depth = kDefaultDepth);
  virtual ~Client() = default;
  Client(const Client&) = default;
  Client& operator=(const Client&) = default;

  static Client setup(crypto::RandomSource& rng, unsigned depth = kDefaultDepth);

  /// Emits the token for the next entry under `label` and bumps its counter.
  /// Throws ProtocolError once the label's tree is exhausted.
  UpdateToken update(ByteView label, Bytes payload);
  SearchToken search_token(ByteView label) const;

  std::uint64_t counter(ByteView label) const;
  std::size_t label_count() const { return counters_.size(); }
  unsigned depth() const { return depth_; }

  void encode_to(ByteWriter& w) const;
  static Client decode(ByteReader& r);

 protected:
  virtual Address derive_address(ByteView label, std::uint64_t counter, const crypto::Block& leaf) const;

 private:
  ggm::Root label_root(ByteView label) const;

  crypto::Key master_;
  unsigned depth_;
  std::map<Bytes, std::uint64_t> counters_;
};

// Plain in-memory EDB for using Σ_add on its own.
using Store = std::map<Address, Bytes>;

/// Inserts the token; throws ProtocolError on an address collision.
void apply(Store& store, UpdateToken token);
/// Every payload the token covers, in upload order. Missing entries are skipped.
std::vector<Bytes> search(const Store& store, const SearchToken& token);

}  // namespace ddse::sigma
