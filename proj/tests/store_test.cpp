#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

#include "ddse/bfsre_client.hpp"
#include "ddse/net.hpp"
#include "ddse/store.hpp"
#include "oracles.hpp"

using namespace ddse;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("ddse-store-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  static inline int counter = 0;
};

sigma::Address addr(std::uint8_t i) {
  sigma::Address a{};
  a[0] = i;
  a[31] = 0xa5;
  return a;
}

bfsre::SchemeConfig small_config() {
  bfsre::SchemeConfig c;
  c.distinct_capacity = 4096;
  c.revocation_budget = 64;
  c.sigma_depth = 12;
  return c;
}

struct RunningServer {
  bfsre::ServerEndpoint& endpoint;
  net::TcpServer server;
  std::thread thread;
  explicit RunningServer(bfsre::ServerEndpoint& ep) : endpoint(ep), server(ep, {"127.0.0.1", 0}) {
    thread = std::thread([this] { server.run(); });
  }
  ~RunningServer() {
    server.stop();
    thread.join();
  }
  net::HostPort where() const { return {"127.0.0.1", server.port()}; }
};

}  // namespace

TEST_CASE("frame encoding") {
  const wire::Frame f{wire::MsgType::search, to_bytes("body")};
  const auto bytes = wire::encode(f);
  CHECK(bytes.size() == wire::frame_size(4));
  CHECK(to_hex(ByteView(bytes).first(5)) == "0000000503");
  CHECK(wire::decode(bytes) == f);

  auto bad = bytes;
  bad[4] = 9;
  CHECK_THROWS_AS(wire::decode(bad), DecodeError);
  CHECK_THROWS_AS(wire::decode(ByteView(bytes).first(7)), DecodeError);
  CHECK_THROWS_AS(wire::decode(from_hex("0000000001")), DecodeError);
  CHECK_THROWS_AS(wire::decode(from_hex("0400000102")), DecodeError);
}

TEST_CASE("recovery of empty and clean stores") {
  TempDir dir;
  const auto log = dir.path / "edb.log";
  CHECK(store::recover(log).edb == bfsre::EncryptedDatabase{});
  std::ofstream(log).close();
  CHECK(store::recover(log).edb == bfsre::EncryptedDatabase{});

  bfsre::EncryptedDatabase expected;
  {
    store::StoreLog w(log, {}, 0);
    for (std::uint8_t i = 0; i < 5; ++i) {
      w.put(addr(i), to_bytes("payload" + std::to_string(i)));
      expected.main[addr(i)] = to_bytes("payload" + std::to_string(i));
    }
    w.del(addr(2));
    expected.main.erase(addr(2));
    std::vector<bfsre::CacheEntry> entries{{sre::Tag{1}, to_bytes("r1")}, {sre::Tag{2}, to_bytes("r2")}};
    w.cache_put(bfsre::CacheToken{7}, entries);
    expected.cache[bfsre::CacheToken{7}] = entries;
    w.commit();
  }
  const auto rec = store::recover(log);
  CHECK(rec.edb == expected);
  CHECK(rec.info.records == 7);
  CHECK(rec.info.discarded_bytes == 0);
}

TEST_CASE("fault injection: a log cut anywhere replays exactly its complete records") {
  TempDir dir;
  const auto log = dir.path / "edb.log";
  std::mt19937_64 rng(3);

  // Random op script and, independently, the state after each prefix.
  std::vector<bfsre::EncryptedDatabase> after{{}};
  std::vector<std::size_t> ends;
  {
    store::StoreLog w(log, {}, 0);
    bfsre::EncryptedDatabase m;
    for (int i = 0; i < 40; ++i) {
      const auto a = addr(static_cast<std::uint8_t>(rng() % 12));
      if (rng() % 3 == 0) {
        w.del(a);
        m.main.erase(a);
      } else if (rng() % 4 == 0) {
        std::vector<bfsre::CacheEntry> e{{sre::Tag{static_cast<std::uint8_t>(i)}, oracle::random_bytes(rng, 48)}};
        w.cache_put(bfsre::CacheToken{static_cast<std::uint8_t>(i % 3)}, e);
        m.cache[bfsre::CacheToken{static_cast<std::uint8_t>(i % 3)}] = e;
      } else {
        auto p = oracle::random_bytes(rng, 1 + rng() % 100);
        w.put(a, p);
        m.main[a] = p;
      }
      w.commit();
      after.push_back(m);
      ends.push_back(fs::file_size(log));
    }
  }
  std::ifstream in(log, std::ios::binary);
  const Bytes full(std::istreambuf_iterator<char>(in), {});
  const auto cut = dir.path / "cut.log";
  for (std::size_t len = 8; len <= full.size(); ++len) {
    std::ofstream(cut, std::ios::binary | std::ios::trunc).write(reinterpret_cast<const char*>(full.data()), len);
    const auto k = static_cast<std::size_t>(std::upper_bound(ends.begin(), ends.end(), len) - ends.begin());
    const auto rec = store::recover(cut);
    REQUIRE(rec.info.records == k);
    CHECK(rec.edb == after[k]);
  }

  SUBCASE("checksum mismatch stops at the last valid record, and appends resume there") {
    auto corrupt = full;
    corrupt[ends[9] + 10] ^= 0x40;  // inside record 11
    std::ofstream(cut, std::ios::binary | std::ios::trunc).write(reinterpret_cast<const char*>(corrupt.data()), corrupt.size());
    auto rec = store::recover(cut);
    CHECK(rec.info.records == 10);
    CHECK(rec.edb == after[10]);
    {
      store::StoreLog w(cut, {}, rec.info.valid_bytes);
      w.put(addr(200), to_bytes("fresh"));
      w.commit();
    }
    rec = store::recover(cut);
    CHECK(rec.info.records == 11);
    CHECK(rec.edb.main.at(addr(200)) == to_bytes("fresh"));
  }
}

TEST_CASE("bad log header is a storage error") {
  TempDir dir;
  std::ofstream(dir.path / "x.log") << "not a log at all";
  CHECK_THROWS_AS(store::recover(dir.path / "x.log"), StorageError);
}

TEST_CASE("durable server: updates, purges and snapshots survive restart") {
  TempDir dir;
  const auto log = dir.path / "edb.log";
  auto client = bfsre::Client::setup(small_config(), std::make_shared<crypto::SeededRandom>(1));
  bfsre::EncryptedDatabase before;
  {
    store::EdbServer server(log, {.fsync = false, .snapshot_every = 7});
    for (int i = 0; i < 6; ++i) client.update(bfsre::Op::add, view("w"), view("v" + std::to_string(i % 3)), server);
    client.update(bfsre::Op::add, view("x"), view("y"), server);
    client.update(bfsre::Op::del, view("w"), view("v1"), server);
    CHECK(client.search(view("w"), server).size() == 2);
    before = server.copy();
    CHECK(before.main.size() == 3);  // 2 real w entries + x
  }
  CHECK(fs::exists(store::snapshot_path(log)));
  store::EdbServer restarted(log, {});
  CHECK(restarted.recovery().from_snapshot);
  CHECK(restarted.copy() == before);
  client.update(bfsre::Op::add, view("w"), view("v9"), restarted);
  CHECK(client.search(view("w"), restarted).size() == 3);

  SUBCASE("crash between snapshot and log truncation replays idempotently") {
    const auto state = restarted.copy();
    store::StoreLog w(dir.path / "other.log", {}, 0);
    for (const auto& [a, p] : state.main) w.put(a, p);
    w.del(addr(0));
    w.snapshot(state);
    for (const auto& [a, p] : state.main) w.put(a, p);
    w.commit();
    CHECK(store::recover(dir.path / "other.log").edb.main == state.main);
  }
}

TEST_CASE("server protocol over a socket") {
  store::EdbServer server;
  RunningServer running(server);

  net::RemoteEndpoint remote(running.where());
  ByteWriter hello;
  hello.u32(wire::kProtocolVersion);
  const auto reply = remote.exchange({wire::MsgType::hello, std::move(hello).take()});
  CHECK(reply.type == wire::MsgType::hello);

  // Collision: ERROR but the connection survives.
  bfsre::UpdateMessage m{addr(1), to_bytes("p")};
  remote.update(m);
  CHECK_THROWS_AS(remote.update(m), ProtocolError);
  CHECK(remote.exchange({wire::MsgType::update, bfsre::UpdateMessage{addr(2), {}}.encode()}).type == wire::MsgType::result);

  SUBCASE("malformed body closes the connection") {
    net::RemoteEndpoint other(running.where());
    CHECK(other.exchange({wire::MsgType::search, to_bytes("junk")}).type == wire::MsgType::error);
    CHECK_THROWS(other.exchange({wire::MsgType::hello, {}}));
  }
  SUBCASE("oversize frame is refused") {
    net::RemoteEndpoint other(running.where());
    // Header claiming 64 MiB + 1 body bytes; the body is never sent.
    const auto r = other.exchange_raw(from_hex("0400000201"));
    REQUIRE(r.has_value());
    CHECK(r->type == wire::MsgType::error);
  }
}

TEST_CASE("RESULT bodies are identical in-process and over the socket") {
  std::mt19937_64 rng(17);
  oracle::CapturedWarnings quiet;
  store::EdbServer over_wire;
  RunningServer running(over_wire);
  net::RemoteEndpoint remote(running.where());
  bfsre::MemoryServer local;

  auto a = bfsre::Client::setup(small_config(), std::make_shared<crypto::SeededRandom>(5));
  auto b = bfsre::Client::setup(small_config(), std::make_shared<crypto::SeededRandom>(5));
  for (int step = 0; step < 300; ++step) {
    const auto w = "k" + std::to_string(rng() % 5);
    const auto v = "v" + std::to_string(rng() % 9);
    if (rng() % 6 == 0 && a.keyword(view(w))) {
      const auto local_body = local.search(a.search_token(view(w))).encode();
      const auto remote_body = remote.search_raw(b.search_token(view(w)));
      REQUIRE(local_body == remote_body);
      CHECK(remote.last_reply_bytes() == wire::frame_size(local_body.size()));
    } else {
      const auto op = rng() % 5 == 0 ? bfsre::Op::del : bfsre::Op::add;
      auto ma = a.update(op, view(w), view(v));
      auto mb = b.update(op, view(w), view(v));
      REQUIRE(ma.has_value() == mb.has_value());
      if (ma) {
        CHECK(*ma == *mb);
        local.update(*ma);
        remote.update(*mb);
      }
    }
  }
}
