#include <doctest.h>

#include <random>
#include <set>

#include "ddse/bfsre_client.hpp"
#include "ddse/bfsre_server.hpp"
#include "oracles.hpp"

using namespace ddse;
using bfsre::Op;

namespace {

bfsre::SchemeConfig small_config() {
  bfsre::SchemeConfig c;
  c.distinct_capacity = 4096;
  c.distinct_fp = 1e-6;
  c.revocation_budget = 64;
  c.revocation_fp = 1e-4;
  c.sigma_depth = 12;
  return c;
}

std::set<std::string> as_set(const std::vector<Bytes>& values) {
  std::set<std::string> out;
  for (const auto& v : values) out.insert(to_string(v));
  return out;
}

struct Fixture {
  bfsre::Client client = bfsre::Client::setup(small_config(), std::make_shared<crypto::SeededRandom>(1));
  bfsre::MemoryServer server;

  void add(const char* w, const char* v) { client.update(Op::add, view(w), view(v), server); }
  void del(const char* w, const char* v) { client.update(Op::del, view(w), view(v), server); }
  std::set<std::string> search(const char* w) { return as_set(client.search(view(w), server)); }
};

}  // namespace

TEST_CASE("setup") {
  auto client = bfsre::Client::setup(bfsre::SchemeConfig{}, std::make_shared<crypto::SeededRandom>(1));
  CHECK(client.distinct().filter.popcount() == 0);
  CHECK(client.distinct().filter.bit_len() == 25126656);
  CHECK(client.distinct().filter.byte_size() == doctest::Approx(3.14e6).epsilon(0.01));
  CHECK_THROWS_AS(client.search_token(view("w")), bfsre::UnknownKeyword);

  auto bad = small_config();
  bad.distinct_fp = 1.5;
  CHECK_THROWS_AS(bfsre::Client::setup(bad), InvalidArgument);
}

TEST_CASE("update: first occurrence gets the real tag, repeats a revoked dummy") {
  Fixture f;
  auto m1 = f.client.update(Op::add, view("w"), view("v"));
  auto m2 = f.client.update(Op::add, view("w"), view("v"));
  REQUIRE(m1);
  REQUIRE(m2);
  const auto e1 = bfsre::Entry::decode(m1->payload);
  const auto e2 = bfsre::Entry::decode(m2->payload);
  CHECK(e1.tag == f.client.tag(view("w"), view("v"), 0));
  CHECK(e2.tag == f.client.tag(view("w"), view("v"), 2));
  const auto* ks = f.client.keyword(view("w"));
  REQUIRE(ks);
  CHECK(ks->update_count == 3);
  CHECK(ks->msk.revoked.contains(e2.tag));
  CHECK_FALSE(ks->msk.revoked.contains(e1.tag));

  auto m3 = f.client.update(Op::add, view("w"), view("v2"));
  CHECK(bfsre::Entry::decode(m3->payload).tag == f.client.tag(view("w"), view("v2"), 0));

  // Deletion uploads nothing and revokes the real tag.
  CHECK_FALSE(f.client.update(Op::del, view("w"), view("v2")).has_value());
  CHECK(f.client.keyword(view("w"))->msk.revoked.contains(f.client.tag(view("w"), view("v2"), 0)));
}

TEST_CASE("update messages have a fixed size for values within the width") {
  Fixture f;
  std::set<std::size_t> sizes;
  sizes.insert(f.client.update(Op::add, view("w"), view("a"))->encode().size());
  sizes.insert(f.client.update(Op::add, view("w"), view("a"))->encode().size());
  sizes.insert(f.client.update(Op::add, view("a much longer keyword"), view("0123456789abcdef0123456789"))->encode().size());
  CHECK(sizes.size() == 1);
}

TEST_CASE("search token and epoch rotation") {
  Fixture f;
  f.add("w", "a");
  f.add("w", "b");
  const auto r1 = f.client.search_token(view("w"));
  CHECK(r1.revoked.punctured.coverage() == r1.revoked.revoked.bit_len());
  CHECK(r1.sigma.constrained.coverage() == 2);
  CHECK(f.client.keyword(view("w"))->epoch == 1);
  CHECK(f.client.keyword(view("w"))->msk.revoked.popcount() == 0);
  f.add("w", "c");
  const auto r2 = f.client.search_token(view("w"));
  CHECK(r2.tkn == r1.tkn);
  CHECK(r2.sigma.constrained.coverage() == 1);
  CHECK(r2.sigma.label_id != r1.sigma.label_id);
  CHECK(bfsre::SearchRequest::decode(r2.encode()).encode() == r2.encode());
}

TEST_CASE("server filtering, purge and cache") {
  Fixture f;
  f.add("w", "v1");
  f.add("w", "v1");
  f.add("w", "v2");
  CHECK(f.server.edb().main.size() == 3);
  const auto resp = f.server.search(f.client.search_token(view("w")));
  CHECK(resp.retrievals.size() == 2);
  CHECK(f.server.edb().main.size() == 2);  // the dummy is purged
  CHECK(as_set(f.client.finalize(resp)) == std::set<std::string>{"v1", "v2"});

  // No interim updates: everything comes from the cache.
  const auto again = f.server.search(f.client.search_token(view("w")));
  CHECK(again.retrievals == resp.retrievals);

  f.add("w", "v3");
  CHECK(f.search("w") == std::set<std::string>{"v1", "v2", "v3"});
  CHECK(bfsre::SearchResponse::decode(resp.encode()) == resp);
}

TEST_CASE("deletion, including after the value was cached") {
  Fixture f;
  f.add("w", "a");
  f.del("w", "a");
  CHECK(f.search("w").empty());
  CHECK(f.server.edb().main.empty());

  f.add("w", "b");
  f.add("w", "c");
  CHECK(f.search("w") == std::set<std::string>{"b", "c"});
  f.del("w", "b");
  CHECK(f.search("w") == std::set<std::string>{"c"});
  CHECK(f.search("w") == std::set<std::string>{"c"});
}

TEST_CASE("finalize") {
  Fixture f;
  CHECK(f.client.finalize(bfsre::SearchResponse{}).empty());
  f.add("w", "x");
  auto resp = f.server.search(f.client.search_token(view("w")));
  resp.retrievals[0][20] ^= 1;
  CHECK_THROWS_AS(f.client.open(resp), ProtocolError);
}

TEST_CASE("re-add after delete") {
  SUBCASE("protocol-literal: the value is unrecoverable") {
    Fixture f;
    f.add("w", "a");
    f.del("w", "a");
    f.add("w", "a");
    CHECK(f.search("w").empty());
  }
  SUBCASE("rejected when tracking deletions") {
    auto cfg = small_config();
    cfg.reject_readd_after_delete = true;
    auto client = bfsre::Client::setup(cfg, std::make_shared<crypto::SeededRandom>(2));
    client.update(Op::add, view("w"), view("a"));
    client.update(Op::del, view("w"), view("a"));
    CHECK_THROWS_AS(client.update(Op::add, view("w"), view("a")), ProtocolError);
  }
}

TEST_CASE("warnings for deletes of unknown pairs and over-budget revocations") {
  std::vector<std::string> seen;
  auto prev = set_warning_sink([&](const std::string& m) { seen.push_back(m); });
  auto cfg = small_config();
  cfg.keyword_budgets[to_bytes("hot")] = 2;
  auto client = bfsre::Client::setup(cfg, std::make_shared<crypto::SeededRandom>(3));
  client.update(Op::del, view("w"), view("never"));
  CHECK(seen.size() == 1);
  for (int i = 0; i < 4; ++i) client.update(Op::add, view("hot"), view("x"));
  CHECK(seen.size() == 2);
  set_warning_sink(prev);
  CHECK(client.keyword(view("hot"))->msk.sk.depth() < client.keyword(view("w"))->msk.sk.depth());
}

TEST_CASE("distinct search matches the plaintext oracle on random workloads") {
  std::mt19937_64 rng(11);
  for (int round = 0; round < 30; ++round) {
    auto client = bfsre::Client::setup(small_config(), std::make_shared<crypto::SeededRandom>(round));
    bfsre::MemoryServer server;
    oracle::PlainTable plain;
    std::set<std::pair<std::string, std::string>> deleted;
    for (int step = 0; step < 120; ++step) {
      const std::string w = "kw" + std::to_string(rng() % 4);
      const std::string v = "val" + std::to_string(rng() % 8);
      const auto dice = rng() % 10;
      if (dice < 6) {
        if (deleted.count({w, v})) continue;
        client.update(Op::add, view(w), view(v), server);
        plain.add(w, v);
      } else if (dice < 8) {
        if (!plain.distinct(w).count(v)) continue;
        client.update(Op::del, view(w), view(v), server);
        plain.del(w, v);
        deleted.insert({w, v});
      } else if (client.keyword(view(w))) {
        CHECK(as_set(client.search(view(w), server)) == plain.distinct(w));
      }
    }
    for (int k = 0; k < 4; ++k) {
      const std::string w = "kw" + std::to_string(k);
      if (client.keyword(view(w))) CHECK(as_set(client.search(view(w), server)) == plain.distinct(w));
    }
  }
}

TEST_CASE("response size depends only on the distinct count") {
  auto run = [](int copies) {
    auto client = bfsre::Client::setup(small_config(), std::make_shared<crypto::SeededRandom>(5));
    bfsre::MemoryServer server;
    for (int v = 0; v < 7; ++v)
      for (int c = 0; c < (v % 2 ? copies : 1); ++c)
        client.update(Op::add, view("w"), view("value-" + std::to_string(v)), server);
    return server.search(client.search_token(view("w"))).encode().size();
  };
  CHECK(run(1) == run(10));
}

TEST_CASE("client state round-trips") {
  Fixture f;
  f.add("w", "a");
  f.add("w", "a");
  f.add("x", "b");
  (void)f.search("x");
  ByteWriter w;
  f.client.encode_to(w);
  ByteReader r(w.bytes());
  auto copy = bfsre::Client::decode(r, nullptr, std::make_shared<crypto::SeededRandom>(9));
  CHECK(r.done());
  CHECK(copy.keyword_count() == 2);
  CHECK(copy.storage_bytes() == f.client.storage_bytes());
  copy.update(Op::add, view("w"), view("c"), f.server);
  CHECK(as_set(copy.search(view("w"), f.server)) == std::set<std::string>{"a", "c"});
  CHECK(as_set(copy.search(view("x"), f.server)) == std::set<std::string>{"b"});
}
