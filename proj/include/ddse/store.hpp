#pragma once

#include <filesystem>
#include <shared_mutex>

#include "ddse/bfsre_server.hpp"

// Persistent server store: an append-only, CRC-checked record log with an
// optional snapshot beside it (<log>.snap). Replay is idempotent, so a crash
// between writing a snapshot and truncating the log is harmless.
namespace ddse::store {

enum class RecordType : std::uint8_t { put = 1, del = 2, cache_put = 3 };

struct RecoveryInfo {
  bool from_snapshot = false;
  std::size_t records = 0;          // log records replayed
  std::uint64_t valid_bytes = 0;    // log prefix that parsed cleanly
  std::uint64_t discarded_bytes = 0;
};

struct Recovered {
  bfsre::EncryptedDatabase edb;
  RecoveryInfo info;
};

/// Rebuilds the maps from the snapshot and the longest valid log prefix.
/// A missing or empty log is an empty store.
Recovered recover(const std::filesystem::path& log);

/// One log record, framed as [len:4][crc32:4][type:1][body]; len counts
/// type and body, the checksum covers the same bytes.
Bytes encode_record(RecordType type, ByteView body);

struct StoreOptions {
  bool fsync = false;
  /// Write a snapshot and truncate the log after this many records; 0 never.
  std::size_t snapshot_every = 0;
};

class StoreLog {
 public:
  /// Opens the log for appending after `valid_bytes`, dropping anything
  /// beyond (a torn tail found by recover).
  StoreLog(std::filesystem::path path, StoreOptions options, std::uint64_t valid_bytes);
  ~StoreLog();
  StoreLog(const StoreLog&) = delete;
  StoreLog& operator=(const StoreLog&) = delete;

  void put(const sigma::Address& a, ByteView payload);
  void del(const sigma::Address& a);
  void cache_put(const bfsre::CacheToken& tkn, const std::vector<bfsre::CacheEntry>& entries);
  /// Writes buffered records; the store acknowledges only after this returns.
  void commit();
  void snapshot(const bfsre::EncryptedDatabase& edb);

  bool snapshot_due() const {
    return options_.snapshot_every != 0 && since_snapshot_ >= options_.snapshot_every;
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  void truncate_to_header();

  std::filesystem::path path_;
  StoreOptions options_;
  int fd_ = -1;
  Bytes pending_;
  std::size_t since_snapshot_ = 0;
};

std::filesystem::path snapshot_path(const std::filesystem::path& log);

/// Thread-safe server endpoint. Searches evaluate under a shared lock;
/// updates, purges and cache writes serialize on the writer lock and reach
/// the log before the call returns.
class EdbServer final : public bfsre::ServerEndpoint {
 public:
  explicit EdbServer(bfsre::ServerOptions options = {});
  EdbServer(const std::filesystem::path& log, StoreOptions store_options, bfsre::ServerOptions options = {});

  void update(const bfsre::UpdateMessage& msg) override;
  bfsre::SearchResponse search(const bfsre::SearchRequest& req) override;

  bfsre::EncryptedDatabase copy() const;
  const RecoveryInfo& recovery() const { return recovery_; }
  void checkpoint();

 private:
  bfsre::ServerOptions options_;
  mutable std::shared_mutex mu_;
  bfsre::EncryptedDatabase edb_;
  std::unique_ptr<StoreLog> log_;
  RecoveryInfo recovery_;
};

}  // namespace ddse::store
