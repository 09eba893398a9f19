#include "ddse/sigma.hpp"

namespace ddse::sigma {
namespace {

Bytes tagged(std::string_view domain, ByteView label) {
  ByteWriter w;
  w.raw(view(domain)).blob(label);
  return std::move(w).take();
}

}  // namespace

void SearchToken::encode_to(ByteWriter& w) const {
  w.raw(label_id);
  constrained.encode_to(w);
}

Bytes SearchToken::encode() const {
  ByteWriter w;
  encode_to(w);
  return std::move(w).take();
}

SearchToken SearchToken::decode(ByteReader& r) {
  crypto::Digest id;
  r.fixed(id);
  auto key = ggm::DelegatedKey::decode(r);
  if (key.kind() != ggm::KeyKind::range) throw DecodeError("search token must carry a range key");
  return {id, std::move(key)};
}

SearchToken SearchToken::decode(ByteView b) {
  ByteReader r(b);
  auto t = decode(r);
  r.expect_done();
  return t;
}

Address address_of(const crypto::Block& leaf) {
  return crypto::hmac_sha256(leaf, view("addr"));
}

std::vector<Address> expand_addresses(const SearchToken& token) {
  const auto& key = token.constrained;
  std::vector<Address> out;
  out.reserve(key.coverage());
  for (const auto& node : key.nodes()) {
    std::vector<crypto::Block> layer{node.seed};
    for (unsigned len = node.prefix_len; len < key.depth(); ++len) {
      std::vector<crypto::Block> next;
      next.reserve(layer.size() * 2);
      for (const auto& s : layer) {
        auto [l, r] = crypto::prg_expand(s);
        next.push_back(l);
        next.push_back(r);
      }
      layer = std::move(next);
    }
    for (const auto& leaf : layer) out.push_back(address_of(leaf));
  }
  return out;
}

Client::Client(const crypto::Key& master, unsigned depth) : master_(master), depth_(depth) {
  if (depth < 1 || depth > ggm::kMaxDepth) throw InvalidArgument("Σ_add depth must be in [1, 32]");
}

Client Client::setup(crypto::RandomSource& rng, unsigned depth) { return Client(rng.key(), depth); }

ggm::Root Client::label_root(ByteView label) const {
  return ggm::Root(crypto::prf(master_, tagged("root", label)), depth_);
}

Address Client::derive_address(ByteView, std::uint64_t, const crypto::Block& leaf) const {
  return address_of(leaf);
}

UpdateToken Client::update(ByteView label, Bytes payload) {
  auto& c = counters_[Bytes(label.begin(), label.end())];
  if (c >= (std::uint64_t{1} << depth_)) throw ProtocolError("Σ_add label exhausted its update tree");
  const auto leaf = ggm::eval(label_root(label), c);
  UpdateToken t{derive_address(label, c, leaf), std::move(payload)};
  ++c;
  return t;
}

SearchToken Client::search_token(ByteView label) const {
  return {crypto::hmac_sha256(master_, tagged("id", label)),
          ggm::constrain_range(label_root(label), counter(label))};
}

std::uint64_t Client::counter(ByteView label) const {
  auto it = counters_.find(Bytes(label.begin(), label.end()));
  return it == counters_.end() ? 0 : it->second;
}

void Client::encode_to(ByteWriter& w) const {
  w.raw(master_).u8(static_cast<std::uint8_t>(depth_)).u32(static_cast<std::uint32_t>(counters_.size()));
  for (const auto& [label, c] : counters_) w.blob(label).u64(c);
}

Client Client::decode(ByteReader& r) {
  crypto::Key master;
  r.fixed(master);
  const unsigned depth = r.u8();
  Client c(master, depth);
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto label = r.blob();
    c.counters_[Bytes(label.begin(), label.end())] = r.u64();
  }
  return c;
}

void apply(Store& store, UpdateToken token) {
  auto [it, inserted] = store.try_emplace(token.address, std::move(token.payload));
  if (!inserted) throw ProtocolError("Σ_add address collision");
}

std::vector<Bytes> search(const Store& store, const SearchToken& token) {
  std::vector<Bytes> out;
  for (const auto& a : expand_addresses(token)) {
    if (auto it = store.find(a); it != store.end()) out.push_back(it->second);
  }
  return out;
}

}  // namespace ddse::sigma
