#pragma once

#include <map>
#include <random>
#include <string>
#include <vector>

#include "ddse/bfsre_client.hpp"
#include "ddse/sigma.hpp"

// Leakage audit: records what the server sees, computes the leakage
// patterns from the oracle side, and runs the DwVH game and the
// forward-privacy structural check.
namespace ddse::audit {

struct Step {
  enum Kind : std::uint8_t { update, search };
  Kind kind = update;
  bfsre::Op op = bfsre::Op::add;
  Bytes keyword;
  Bytes value;

  static Step add(std::string_view w, std::string_view v) { return {update, bfsre::Op::add, to_bytes(w), to_bytes(v)}; }
  static Step del(std::string_view w, std::string_view v) { return {update, bfsre::Op::del, to_bytes(w), to_bytes(v)}; }
  static Step find(std::string_view w) { return {search, bfsre::Op::add, to_bytes(w), {}}; }
};

using Workload = std::vector<Step>;

struct Event {
  std::uint64_t u = 0;  // timestamp, 1-based
  Step::Kind kind = Step::update;
  // Server-visible: the frames exchanged. A deletion sends nothing.
  Bytes request;
  Bytes response;
  /// Sum of retrieval sizes the client received.
  std::size_t result_bytes = 0;
  // Oracle side, never shown to the server.
  Step step;
  std::vector<Bytes> results;  // distinct values the client decrypted
};

struct Transcript {
  std::vector<Event> events;

  std::size_t update_count() const;
  std::size_t search_count() const;
  /// Raw frames hex-encoded, one per line: "<u> <kind> <dir> <hex>".
  std::string dump() const;
};

/// Runs the workload through a fresh BF-SRE client and in-memory server.
/// Searches on never-updated keywords record an empty result.
Transcript record(const Workload& workload, const bfsre::SchemeConfig& config, std::uint64_t seed);

/// Runs only the update steps through a Σ_add client, each with a fresh
/// random payload of `payload_bytes`.
Transcript record_sigma(const Workload& workload, sigma::Client& client, std::uint64_t seed,
                        std::size_t payload_bytes = 64);

struct KeywordPatterns {
  Bytes keyword;
  std::vector<std::uint64_t> sp;      // timestamps of searches on w
  std::vector<std::uint64_t> update;  // Update(w)
  std::vector<std::pair<std::uint64_t, Bytes>> time_dts;  // TimeDTS(w) at the end
  std::size_t ulen = 0;
  std::size_t drlen = 0;
};

struct LeakageReport {
  std::map<Bytes, KeywordPatterns> keywords;
  /// drlen(w) at the time of each search, in search order.
  std::vector<std::size_t> search_drlen;
  /// qeq over searches in order.
  std::vector<std::vector<bool>> qeq;

  /// One JSON object per line, one record per pattern per keyword, then
  /// one line per search with its drlen and the qeq row.
  std::string to_lines() const;
};

LeakageReport compute_patterns(const Transcript& t);

struct Verdict {
  bool pass = true;
  std::vector<std::string> reasons;

  void fail(std::string why) {
    pass = false;
    reasons.push_back(std::move(why));
  }
};

struct SignatureEntry {
  std::uint64_t distinct = 0;  // l(w)
  std::uint64_t total = 0;     // t(w)
};
using Signature = std::map<Bytes, SignatureEntry>;

/// Throws InvalidArgument unless both signatures cover the same keywords,
/// l_0(w) = l_1(w), l_b(w) < t_b(w) <= n and the totals sum to n.
void check_signatures(std::uint64_t n, const Signature& s0, const Signature& s1);

/// A random pair satisfying check_signatures(n, ...) over at most
/// `max_keywords` keywords. Needs n >= 2.
std::pair<Signature, Signature> random_signatures(std::uint64_t n, std::uint64_t max_keywords,
                                                  std::mt19937_64& rng);

/// The Prepare stage: keyword-major, value-minor, every distinct value once
/// and the t(w) - l(w) repeats spread round-robin over the values.
Workload prepare_workload(const Signature& s);

struct GameResult {
  Verdict verdict;
  Transcript transcripts[2];
  /// |Update(w)| per keyword for b = 0 and b = 1; reported, not judged.
  std::map<Bytes, std::pair<std::size_t, std::size_t>> update_cardinality;
};

/// PASS iff every search step returns the same cardinality and payload
/// bytes under both signatures and every update message has the same size.
GameResult dwvh_game(std::uint64_t n, const Signature& s0, const Signature& s1, const Workload& script,
                     const bfsre::SchemeConfig& config, std::uint64_t seed);

/// The forward-privacy structural check over the update events:
///  - update addresses are pairwise distinct;
///  - update frames with equal payload sizes have equal lengths;
///  - no frame contains a keyword of 8+ bytes, and no two addresses share an
///    8-byte window (which a keyword-derived address component would cause);
///  - with `renamed` (the same workload, keywords replaced byte for byte),
///    the frame-length sequences agree.
Verdict fp_check(const Transcript& t, const Transcript* renamed = nullptr);

/// Replaces every keyword by an equal-length, injective byte substitution.
Workload rename_keywords(const Workload& w);

// Σ_add with a deliberately broken address derivation that embeds the
// label. Exists to show that fp_check catches it.
class KeywordEmbeddingSigma final : public sigma::Client {
 public:
  using sigma::Client::Client;

 protected:
  sigma::Address derive_address(ByteView label, std::uint64_t counter, const crypto::Block& leaf) const override;
};

}  // namespace ddse::audit
