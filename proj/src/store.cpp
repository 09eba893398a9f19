#include "ddse/store.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <algorithm>
#include <cerrno>
#include <cstring>
#include <fstream>
#include <iterator>
#include <mutex>

#include "ddse/error.hpp"

namespace ddse::store {

namespace fs = std::filesystem;

namespace {

constexpr std::string_view kLogMagic{"DDSELOG\x01", 8};
constexpr std::string_view kSnapMagic{"DDSESNP\x01", 8};

[[noreturn]] void io_fail(const std::string& what, const fs::path& p) {
  throw StorageError(what + " " + p.string() + ": " + std::strerror(errno));
}

Bytes read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) return {};
  return Bytes(std::istreambuf_iterator<char>(in), {});
}

void write_all(int fd, ByteView b, const fs::path& p) {
  while (!b.empty()) {
    const ssize_t w = ::write(fd, b.data(), b.size());
    if (w < 0) {
      if (errno == EINTR) continue;
      io_fail("write to", p);
    }
    b = b.subspan(static_cast<std::size_t>(w));
  }
}

void encode_entries(ByteWriter& w, const std::vector<bfsre::CacheEntry>& entries) {
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto& e : entries) {
    w.raw(e.tag);
    w.blob(e.retrieval);
  }
}

std::vector<bfsre::CacheEntry> decode_entries(ByteReader& r) {
  const auto n = r.u32();
  if (n > r.remaining() / 20) throw DecodeError("cache entry count exceeds record");
  std::vector<bfsre::CacheEntry> out(n);
  for (auto& e : out) {
    r.fixed(e.tag);
    e.retrieval = to_owned(r.blob());
  }
  return out;
}

// Replay is idempotent: PUT overwrites and DEL tolerates a missing key.
void apply_record(bfsre::EncryptedDatabase& edb, RecordType type, ByteView body) {
  ByteReader r(body);
  switch (type) {
    case RecordType::put: {
      sigma::Address a;
      r.fixed(a);
      edb.main[a] = to_owned(r.blob());
      break;
    }
    case RecordType::del: {
      sigma::Address a;
      r.fixed(a);
      edb.main.erase(a);
      break;
    }
    case RecordType::cache_put: {
      bfsre::CacheToken t;
      r.fixed(t);
      auto entries = decode_entries(r);
      if (entries.empty())
        edb.cache.erase(t);
      else
        edb.cache[t] = std::move(entries);
      break;
    }
    default:
      throw DecodeError("unknown record type");
  }
  r.expect_done();
}

Bytes encode_snapshot(const bfsre::EncryptedDatabase& edb) {
  ByteWriter body;
  body.u64(edb.main.size());
  for (const auto& [a, p] : edb.main) body.raw(a).blob(p);
  body.u64(edb.cache.size());
  for (const auto& [t, entries] : edb.cache) {
    body.raw(t);
    encode_entries(body, entries);
  }
  ByteWriter out;
  out.raw(view(kSnapMagic));
  out.u32(crypto::crc32(body.bytes()));
  out.blob(body.bytes());
  return std::move(out).take();
}

bfsre::EncryptedDatabase decode_snapshot(ByteView b) {
  ByteReader outer(b);
  if (!std::ranges::equal(outer.raw(kSnapMagic.size()), view(kSnapMagic))) throw DecodeError("not a store snapshot");
  const auto crc = outer.u32();
  const Bytes body = to_owned(outer.blob());
  outer.expect_done();
  if (crypto::crc32(body) != crc) throw DecodeError("snapshot checksum mismatch");
  ByteReader r(body);
  bfsre::EncryptedDatabase edb;
  for (auto n = r.u64(); n > 0; --n) {
    sigma::Address a;
    r.fixed(a);
    edb.main[a] = to_owned(r.blob());
  }
  for (auto n = r.u64(); n > 0; --n) {
    bfsre::CacheToken t;
    r.fixed(t);
    edb.cache[t] = decode_entries(r);
  }
  r.expect_done();
  return edb;
}

}  // namespace

fs::path snapshot_path(const fs::path& log) { return fs::path(log.string() + ".snap"); }

Bytes encode_record(RecordType type, ByteView body) {
  ByteWriter inner;
  inner.u8(static_cast<std::uint8_t>(type)).raw(body);
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(inner.bytes().size()));
  w.u32(crypto::crc32(inner.bytes()));
  w.raw(inner.bytes());
  return std::move(w).take();
}

Recovered recover(const fs::path& log) {
  Recovered out;
  if (const auto snap = snapshot_path(log); fs::exists(snap)) {
    try {
      out.edb = decode_snapshot(read_file(snap));
    } catch (const DecodeError& e) {
      throw StorageError("corrupt snapshot " + snap.string() + ": " + e.what());
    }
    out.info.from_snapshot = true;
  }

  const Bytes data = read_file(log);
  if (data.empty()) return out;
  if (data.size() < kLogMagic.size() || !std::ranges::equal(ByteView(data).first(kLogMagic.size()), view(kLogMagic)))
    throw StorageError(log.string() + " is not a store log");

  std::size_t pos = kLogMagic.size();
  while (data.size() - pos >= 9) {
    ByteReader h(ByteView(data).subspan(pos, 8));
    const auto len = h.u32();
    const auto crc = h.u32();
    if (len == 0 || len > data.size() - pos - 8) break;  // torn tail
    const ByteView rec = ByteView(data).subspan(pos + 8, len);
    if (crypto::crc32(rec) != crc) break;
    try {
      apply_record(out.edb, static_cast<RecordType>(rec[0]), rec.subspan(1));
    } catch (const DecodeError&) {
      break;
    }
    pos += 8 + len;
    ++out.info.records;
  }
  out.info.valid_bytes = pos;
  out.info.discarded_bytes = data.size() - pos;
  return out;
}

StoreLog::StoreLog(fs::path path, StoreOptions options, std::uint64_t valid_bytes)
    : path_(std::move(path)), options_(options) {
  fd_ = ::open(path_.c_str(), O_RDWR | O_CREAT | O_CLOEXEC, 0600);
  if (fd_ < 0) io_fail("cannot open", path_);
  if (valid_bytes < kLogMagic.size()) {
    truncate_to_header();
  } else if (::ftruncate(fd_, static_cast<off_t>(valid_bytes)) != 0 ||
             ::lseek(fd_, 0, SEEK_END) < 0) {
    io_fail("cannot trim", path_);
  }
}

StoreLog::~StoreLog() {
  if (fd_ >= 0) ::close(fd_);
}

void StoreLog::truncate_to_header() {
  if (::ftruncate(fd_, 0) != 0 || ::lseek(fd_, 0, SEEK_SET) < 0) io_fail("cannot truncate", path_);
  write_all(fd_, view(kLogMagic), path_);
  if (options_.fsync && ::fsync(fd_) != 0) io_fail("fsync failed on", path_);
}

void StoreLog::put(const sigma::Address& a, ByteView payload) {
  ByteWriter w;
  w.raw(a).blob(payload);
  const auto rec = encode_record(RecordType::put, w.bytes());
  pending_.insert(pending_.end(), rec.begin(), rec.end());
  ++since_snapshot_;
}

void StoreLog::del(const sigma::Address& a) {
  const auto rec = encode_record(RecordType::del, a);
  pending_.insert(pending_.end(), rec.begin(), rec.end());
  ++since_snapshot_;
}

void StoreLog::cache_put(const bfsre::CacheToken& tkn, const std::vector<bfsre::CacheEntry>& entries) {
  ByteWriter w;
  w.raw(tkn);
  encode_entries(w, entries);
  const auto rec = encode_record(RecordType::cache_put, w.bytes());
  pending_.insert(pending_.end(), rec.begin(), rec.end());
  ++since_snapshot_;
}

void StoreLog::commit() {
  if (pending_.empty()) return;
  Bytes out;
  out.swap(pending_);
  write_all(fd_, out, path_);
  if (options_.fsync && ::fdatasync(fd_) != 0) io_fail("fsync failed on", path_);
}

void StoreLog::snapshot(const bfsre::EncryptedDatabase& edb) {
  commit();
  const auto snap = snapshot_path(path_);
  const fs::path tmp = snap.string() + ".tmp";
  const int fd = ::open(tmp.c_str(), O_WRONLY | O_CREAT | O_TRUNC | O_CLOEXEC, 0600);
  if (fd < 0) io_fail("cannot create", tmp);
  try {
    write_all(fd, encode_snapshot(edb), tmp);
    if (::fsync(fd) != 0) io_fail("fsync failed on", tmp);
  } catch (...) {
    ::close(fd);
    throw;
  }
  ::close(fd);
  fs::rename(tmp, snap);
  truncate_to_header();
  since_snapshot_ = 0;
}

EdbServer::EdbServer(bfsre::ServerOptions options) : options_(options) {}

EdbServer::EdbServer(const fs::path& log, StoreOptions store_options, bfsre::ServerOptions options)
    : options_(options) {
  auto rec = recover(log);
  edb_ = std::move(rec.edb);
  recovery_ = rec.info;
  log_ = std::make_unique<StoreLog>(log, store_options, rec.info.valid_bytes);
}

void EdbServer::update(const bfsre::UpdateMessage& msg) {
  std::unique_lock lock(mu_);
  if (edb_.main.contains(msg.address)) throw ProtocolError("address collision in encrypted store");
  if (log_) {
    log_->put(msg.address, msg.payload);
    log_->commit();
  }
  edb_.main.emplace(msg.address, msg.payload);
  if (log_ && log_->snapshot_due()) log_->snapshot(edb_);
}

bfsre::SearchResponse EdbServer::search(const bfsre::SearchRequest& req) {
  bfsre::SearchOutcome outcome;
  {
    std::shared_lock lock(mu_);
    outcome = bfsre::evaluate_search(req, edb_, options_);
  }
  std::unique_lock lock(mu_);
  if (log_) {
    for (const auto& a : outcome.purged) log_->del(a);
    log_->cache_put(req.tkn, outcome.cache);
    log_->commit();
  }
  bfsre::commit_search(edb_, req.tkn, outcome);
  if (log_ && log_->snapshot_due()) log_->snapshot(edb_);
  return std::move(outcome.response);
}

bfsre::EncryptedDatabase EdbServer::copy() const {
  std::shared_lock lock(mu_);
  return edb_;
}

void EdbServer::checkpoint() {
  std::unique_lock lock(mu_);
  if (log_) log_->snapshot(edb_);
}

}  // namespace ddse::store
