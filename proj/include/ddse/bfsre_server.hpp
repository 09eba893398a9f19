#pragma once

#include <map>
#include <vector>

#include "ddse/bfsre_protocol.hpp"

// Server half of the BF-SRE search: filter the epoch's Σ_add list through
// the revoked SRE key, purge what no longer decrypts, and merge with the
// cached results of earlier epochs.
namespace ddse::bfsre {

struct CacheEntry {
  sre::Tag tag{};
  Bytes retrieval;

  friend bool operator==(const CacheEntry&, const CacheEntry&) = default;
};

struct EncryptedDatabase {
  std::map<sigma::Address, Bytes> main;
  std::map<CacheToken, std::vector<CacheEntry>> cache;

  friend bool operator==(const EncryptedDatabase&, const EncryptedDatabase&) = default;
};

struct ServerOptions {
  sre::DecryptOptions decrypt{};
  /// Lists at least this long are decrypted with the OpenMP kernel.
  std::size_t parallel_threshold = 64;
};

struct SearchOutcome {
  SearchResponse response;
  std::vector<sigma::Address> purged;
  std::vector<CacheEntry> cache;  // new EDB_cache[tkn]
};

/// Read-only part of a search; safe to run under a shared lock.
SearchOutcome evaluate_search(const SearchRequest& req, const EncryptedDatabase& edb,
                              const ServerOptions& options = {});
/// Applies the purge and cache write of an evaluated search.
void commit_search(EncryptedDatabase& edb, const CacheToken& tkn, const SearchOutcome& outcome);

/// Throws ProtocolError on an address collision.
void apply_update(EncryptedDatabase& edb, const UpdateMessage& msg);

SearchResponse search_server(const SearchRequest& req, EncryptedDatabase& edb,
                             const ServerOptions& options = {});

// Unsynchronized in-memory endpoint.
class MemoryServer final : public ServerEndpoint {
 public:
  explicit MemoryServer(ServerOptions options = {}) : options_(options) {}

  void update(const UpdateMessage& msg) override { apply_update(edb_, msg); }
  SearchResponse search(const SearchRequest& req) override { return search_server(req, edb_, options_); }

  const EncryptedDatabase& edb() const { return edb_; }
  EncryptedDatabase& edb() { return edb_; }

 private:
  ServerOptions options_;
  EncryptedDatabase edb_;
};

}  // namespace ddse::bfsre
