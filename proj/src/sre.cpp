#include "ddse/sre.hpp"

#include <bit>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace ddse::sre {
namespace {

constexpr std::array<std::uint8_t, 8> kMagic = {'D', 'D', 'S', 'E', 'S', 'R', 'E', 1};

Bytes frame(ByteView message) {
  ByteWriter w(12 + message.size());
  w.raw(kMagic).u32(static_cast<std::uint32_t>(message.size())).raw(message);
  return std::move(w).take();
}

std::optional<Bytes> unframe(const Bytes& plain) {
  if (plain.size() < 12 || !std::equal(kMagic.begin(), kMagic.end(), plain.begin())) return std::nullopt;
  ByteReader r(plain);
  r.raw(kMagic.size());
  const auto len = r.u32();
  if (len != r.remaining()) return std::nullopt;
  return Bytes(plain.begin() + 12, plain.end());
}

unsigned log2_exact(std::uint64_t b) {
  if (b < 2 || !std::has_single_bit(b)) throw InvalidArgument("SRE domain must be a power of two >= 2");
  return static_cast<unsigned>(std::countr_zero(b));
}

std::optional<Bytes> open_component(const Component& c, const crypto::Block& leaf) {
  return unframe(crypto::aes_ctr(leaf, c.nonce, c.body));
}

}  // namespace

Params params_for_budget(std::uint64_t revocations, double p) {
  const auto s = bloom::size_for(std::max<std::uint64_t>(revocations, 1), p);
  const std::uint64_t domain = std::bit_ceil(std::max<std::uint64_t>(s.bits, 2));
  return {domain, static_cast<unsigned>(std::min<std::uint64_t>(s.hashes, domain))};
}

MasterKey kgen(crypto::RandomSource& rng, const Params& params) {
  const unsigned depth = log2_exact(params.domain);
  if (params.hashes < 1 || params.hashes > params.domain)
    throw InvalidArgument("SRE requires 1 <= h <= b");
  return {ggm::Root(rng.key(), depth), bloom::BloomFilter(params.domain, params.hashes, rng.key())};
}

void Ciphertext::encode_to(ByteWriter& w) const {
  w.u8(static_cast<std::uint8_t>(components.size()));
  for (const auto& c : components) w.raw(c.nonce).blob(c.body);
}

Bytes Ciphertext::encode() const {
  ByteWriter w;
  encode_to(w);
  return std::move(w).take();
}

Ciphertext Ciphertext::decode(ByteReader& r) {
  Ciphertext ct;
  ct.components.resize(r.u8());
  for (auto& c : ct.components) {
    r.fixed(c.nonce);
    auto body = r.blob();
    c.body.assign(body.begin(), body.end());
  }
  return ct;
}

Ciphertext Ciphertext::decode(ByteView b) {
  ByteReader r(b);
  auto ct = decode(r);
  r.expect_done();
  return ct;
}

Ciphertext enc(const MasterKey& msk, ByteView message, const Tag& tag, crypto::RandomSource& rng) {
  const Bytes plain = frame(message);
  Ciphertext ct;
  ct.components.reserve(msk.revoked.hash_count());
  for (auto pos : msk.revoked.positions(tag)) {
    Component c;
    c.nonce = rng.nonce();
    c.body = crypto::aes_ctr(ggm::eval(msk.sk, pos), c.nonce, plain);
    ct.components.push_back(std::move(c));
  }
  return ct;
}

bloom::BloomFilter comp(bloom::BloomFilter revoked, const Tag& tag) {
  revoked.insert(tag);
  return revoked;
}

void RevokedKey::encode_to(ByteWriter& w) const {
  punctured.encode_to(w);
  revoked.encode_to(w);
}

Bytes RevokedKey::encode() const {
  ByteWriter w;
  encode_to(w);
  return std::move(w).take();
}

RevokedKey RevokedKey::decode(ByteReader& r) {
  auto punctured = ggm::DelegatedKey::decode(r);
  auto revoked = bloom::BloomFilter::decode(r);
  if (punctured.depth() >= 64 || (std::uint64_t{1} << punctured.depth()) != revoked.bit_len())
    throw DecodeError("revoked key depth does not match its filter");
  return {std::move(punctured), std::move(revoked)};
}

RevokedKey RevokedKey::decode(ByteView b) {
  ByteReader r(b);
  auto k = decode(r);
  r.expect_done();
  return k;
}

RevokedKey ck_rev(const ggm::Root& sk, const bloom::BloomFilter& revoked) {
  if (sk.domain_size() != revoked.bit_len())
    throw InvalidArgument("SRE key depth does not match the revocation filter");
  const auto set = revoked.set_bits();
  return {ggm::puncture(sk, set), revoked};
}

std::optional<Bytes> dec(const RevokedKey& key, const Ciphertext& ct, const Tag& tag) {
  if (ct.components.size() != key.revoked.hash_count()) return std::nullopt;
  const auto positions = key.revoked.positions(tag);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    if (auto leaf = key.punctured.eval(positions[i])) return open_component(ct.components[i], *leaf);
  }
  return std::nullopt;
}

unsigned frontier_level(std::uint64_t budget, unsigned hashes, unsigned depth) {
  const std::uint64_t target = std::max<std::uint64_t>(4 * std::max<std::uint64_t>(budget, 1) * hashes, 1);
  const auto level = static_cast<unsigned>(std::bit_width(target - 1));
  return std::min(level, depth);
}

Decryptor::Decryptor(const RevokedKey& key, Strategy strategy, const ggm::FrontierTable* frontier)
    : key_(&key), strategy_(strategy), frontier_(frontier) {
  if ((strategy == Strategy::precomputed || strategy == Strategy::combined) && !frontier)
    throw InvalidArgument("precomputed strategies need a frontier table");
  if (strategy == Strategy::greedy) greedy_.emplace(key.punctured);
  if (strategy == Strategy::combined) greedy_.emplace(key.punctured, frontier);
}

std::optional<crypto::Block> Decryptor::leaf(std::uint64_t position) {
  switch (strategy_) {
    case Strategy::baseline: return key_->punctured.eval(position);
    case Strategy::precomputed: return frontier_->eval(position);
    case Strategy::greedy:
    case Strategy::combined: return greedy_->eval(position);
  }
  return std::nullopt;
}

std::optional<Bytes> Decryptor::decrypt(const Ciphertext& ct, const Tag& tag) {
  if (ct.components.size() != key_->revoked.hash_count()) return std::nullopt;
  const auto positions = key_->revoked.positions(tag);
  for (std::size_t i = 0; i < positions.size(); ++i) {
    // Coverage check first so the greedy stack only grows on real use.
    if (!key_->punctured.covers(positions[i])) continue;
    if (auto leaf_key = leaf(positions[i])) return open_component(ct.components[i], *leaf_key);
    return std::nullopt;
  }
  return std::nullopt;
}

namespace {

std::optional<ggm::FrontierTable> make_frontier(const RevokedKey& key, const DecryptOptions& options) {
  if (options.strategy != Strategy::precomputed && options.strategy != Strategy::combined)
    return std::nullopt;
  return ggm::FrontierTable(key.punctured, frontier_level(options.revocation_budget,
                                                          key.revoked.hash_count(),
                                                          key.punctured.depth()));
}

}  // namespace

std::vector<std::optional<Bytes>> decrypt_batch_serial(const RevokedKey& key,
                                                       std::span<const Sealed> items,
                                                       const DecryptOptions& options) {
  const auto frontier = make_frontier(key, options);
  Decryptor d(key, options.strategy, frontier ? &*frontier : nullptr);
  std::vector<std::optional<Bytes>> out(items.size());
  for (std::size_t i = 0; i < items.size(); ++i) out[i] = d.decrypt(items[i].ct, items[i].tag);
  return out;
}

std::vector<std::optional<Bytes>> decrypt_batch_parallel(const RevokedKey& key,
                                                         std::span<const Sealed> items,
                                                         const DecryptOptions& options) {
  const auto frontier = make_frontier(key, options);
  const auto* table = frontier ? &*frontier : nullptr;
  std::vector<std::optional<Bytes>> out(items.size());
  const auto n = static_cast<std::ptrdiff_t>(items.size());
#pragma omp parallel
  {
    Decryptor d(key, options.strategy, table);
#pragma omp for schedule(static)
    for (std::ptrdiff_t i = 0; i < n; ++i) out[i] = d.decrypt(items[i].ct, items[i].tag);
  }
  return out;
}

}  // namespace ddse::sre
