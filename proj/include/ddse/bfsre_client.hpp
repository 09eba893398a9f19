#pragma once

#include <map>
#include <memory>
#include <optional>
#include <set>

#include "ddse/bfsre_protocol.hpp"
#include "ddse/bloom.hpp"
#include "ddse/crypto.hpp"
#include "ddse/sigma.hpp"
#include "ddse/sre.hpp"

namespace ddse::bfsre {

enum class Op : std::uint8_t { add = 0, del = 1 };

struct SchemeConfig {
  // Distinct State B.
  std::uint64_t distinct_capacity = std::uint64_t{1} << 20;
  double distinct_fp = 1e-5;
  // Per-keyword SRE domain: sized for `revocation_budget` revoked tags per
  // epoch at accidental-revocation rate `revocation_fp`.
  std::uint64_t revocation_budget = 1024;
  double revocation_fp = 1e-3;
  /// Estimated per-keyword budgets; keywords listed here get their own
  /// domain size instead of the default.
  std::map<Bytes, std::uint64_t> keyword_budgets;
  unsigned sigma_depth = sigma::kDefaultDepth;
  /// Values up to this many bytes produce equal-length retrievals.
  std::size_t value_width = 32;
  /// Track deleted (w, v) pairs and refuse to add them again.
  bool reject_readd_after_delete = false;

  std::uint64_t budget_for(ByteView keyword) const;
  sre::Params sre_params_for(ByteView keyword) const;

  void encode_to(ByteWriter& w) const;
  static SchemeConfig decode(ByteReader& r);
};

// The Distinct State B, shareable between several scheme instances.
struct DistinctState {
  bloom::BloomFilter filter;
  std::uint64_t capacity;
  std::uint64_t inserted = 0;

  static std::shared_ptr<DistinctState> create(std::uint64_t capacity, double fp,
                                               crypto::RandomSource& rng);
  void encode_to(ByteWriter& w) const;
  static std::shared_ptr<DistinctState> decode(ByteReader& r);
};

struct KeywordState {
  sre::MasterKey msk;      // MSK[w], with D[w] = msk.revoked
  std::uint64_t epoch = 0;         // C[w]
  std::uint64_t update_count = 1;  // UpCnt[w]
  std::uint64_t epoch_revocations = 0;
};

/// Raised by search_token for a keyword that was never updated.
class UnknownKeyword : public ProtocolError {
 public:
  UnknownKeyword() : ProtocolError("keyword has no search epoch (never updated)") {}
};

// Client state and the client halves of Update and Search. Not thread-safe;
// one instance serves one logical session.
class Client {
 public:
  /// Fresh keys and a private Distinct State sized from the config.
  static Client setup(const SchemeConfig& config,
                      std::shared_ptr<crypto::RandomSource> rng = crypto::system_random());
  /// Fresh keys over an existing (possibly shared) Distinct State.
  static Client setup(const SchemeConfig& config, std::shared_ptr<DistinctState> distinct,
                      std::shared_ptr<crypto::RandomSource> rng = crypto::system_random());

  /// Returns the message to upload, or nothing for a deletion.
  std::optional<UpdateMessage> update(Op op, ByteView keyword, ByteView value);

  /// Builds the search request for the keyword's current epoch and rotates
  /// the epoch. Throws UnknownKeyword if the keyword was never updated.
  SearchRequest search_token(ByteView keyword);

  struct Value {
    Bytes value;
    std::uint64_t count;  // the cnt bound into the retrieval
  };
  /// Decrypts every retrieval; throws ProtocolError if one fails to open.
  std::vector<Value> open(const SearchResponse& response) const;
  /// Distinct values, in response order.
  std::vector<Bytes> finalize(const SearchResponse& response) const;

  // Convenience wrappers driving an endpoint.
  void update(Op op, ByteView keyword, ByteView value, ServerEndpoint& server);
  std::vector<Bytes> search(ByteView keyword, ServerEndpoint& server);

  CacheToken cache_token(ByteView keyword) const;
  /// F(K_t, w || v || cnt); cnt = 0 is the real tag.
  sre::Tag tag(ByteView keyword, ByteView value, std::uint64_t count) const;

  const SchemeConfig& config() const { return config_; }
  const DistinctState& distinct() const { return *distinct_; }
  std::shared_ptr<DistinctState> shared_distinct() const { return distinct_; }
  const KeywordState* keyword(ByteView w) const;
  std::size_t keyword_count() const { return keywords_.size(); }
  const sigma::Client& sigma() const { return sigma_; }
  /// Bytes of client-side secret state, including the Distinct State when
  /// `with_distinct` is set.
  std::size_t storage_bytes(bool with_distinct = true) const;

  /// Serializes everything except the RNG. The Distinct State is included
  /// only if `with_distinct`; otherwise decode() must be handed one.
  void encode_to(ByteWriter& w, bool with_distinct = true) const;
  static Client decode(ByteReader& r, std::shared_ptr<DistinctState> distinct = nullptr,
                       std::shared_ptr<crypto::RandomSource> rng = crypto::system_random());

 private:
  Client(SchemeConfig config, std::shared_ptr<DistinctState> distinct,
         std::shared_ptr<crypto::RandomSource> rng, sigma::Client sigma);

  Bytes label(ByteView keyword, std::uint64_t epoch) const;
  Bytes retrieval(ByteView value, std::uint64_t count);
  void revoke(KeywordState& ks, ByteView keyword, const sre::Tag& tag);

  SchemeConfig config_;
  std::shared_ptr<DistinctState> distinct_;
  std::shared_ptr<crypto::RandomSource> rng_;
  crypto::Key search_key_{};     // K_s
  crypto::Key tag_key_{};        // K_t
  crypto::Key retrieval_key_{};  // K_c
  sigma::Client sigma_;
  std::map<Bytes, KeywordState> keywords_;
  std::set<sre::Tag> deleted_;  // real tags of deleted pairs, if tracked
};

}  // namespace ddse::bfsre
