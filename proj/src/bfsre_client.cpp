#include "ddse/bfsre_client.hpp"

#include <bit>
#include <string>

namespace ddse::bfsre {
namespace {

Bytes keyword_value(ByteView w, ByteView v, std::uint64_t count) {
  ByteWriter out;
  out.blob(w).blob(v).u64(count);
  return std::move(out).take();
}

std::size_t padded_width(std::size_t len, std::size_t width) {
  if (len <= width) return width;
  return (len + 15) / 16 * 16;
}

}  // namespace

std::uint64_t SchemeConfig::budget_for(ByteView keyword) const {
  auto it = keyword_budgets.find(Bytes(keyword.begin(), keyword.end()));
  return it == keyword_budgets.end() ? revocation_budget : it->second;
}

sre::Params SchemeConfig::sre_params_for(ByteView keyword) const {
  return sre::params_for_budget(budget_for(keyword), revocation_fp);
}

void SchemeConfig::encode_to(ByteWriter& w) const {
  auto bits = [](double d) { return std::bit_cast<std::uint64_t>(d); };
  w.u64(distinct_capacity).u64(bits(distinct_fp)).u64(revocation_budget).u64(bits(revocation_fp));
  w.u32(static_cast<std::uint32_t>(keyword_budgets.size()));
  for (const auto& [k, b] : keyword_budgets) w.blob(k).u64(b);
  w.u8(static_cast<std::uint8_t>(sigma_depth)).u32(static_cast<std::uint32_t>(value_width));
  w.u8(reject_readd_after_delete ? 1 : 0);
}

SchemeConfig SchemeConfig::decode(ByteReader& r) {
  SchemeConfig c;
  c.distinct_capacity = r.u64();
  c.distinct_fp = std::bit_cast<double>(r.u64());
  c.revocation_budget = r.u64();
  c.revocation_fp = std::bit_cast<double>(r.u64());
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto k = r.blob();
    c.keyword_budgets[Bytes(k.begin(), k.end())] = r.u64();
  }
  c.sigma_depth = r.u8();
  c.value_width = r.u32();
  c.reject_readd_after_delete = r.u8() != 0;
  return c;
}

std::shared_ptr<DistinctState> DistinctState::create(std::uint64_t capacity, double fp,
                                                     crypto::RandomSource& rng) {
  const auto s = bloom::size_for(capacity, fp);
  return std::make_shared<DistinctState>(DistinctState{bloom::BloomFilter(s.bits, s.hashes, rng.key()), capacity});
}

void DistinctState::encode_to(ByteWriter& w) const {
  w.u64(capacity).u64(inserted);
  filter.encode_to(w);
}

std::shared_ptr<DistinctState> DistinctState::decode(ByteReader& r) {
  const auto capacity = r.u64();
  const auto inserted = r.u64();
  auto filter = bloom::BloomFilter::decode(r);
  return std::make_shared<DistinctState>(DistinctState{std::move(filter), capacity, inserted});
}

Client::Client(SchemeConfig config, std::shared_ptr<DistinctState> distinct,
               std::shared_ptr<crypto::RandomSource> rng, sigma::Client sigma)
    : config_(std::move(config)), distinct_(std::move(distinct)), rng_(std::move(rng)), sigma_(std::move(sigma)) {
  if (!distinct_ || !rng_) throw InvalidArgument("client needs a Distinct State and an RNG");
}

Client Client::setup(const SchemeConfig& config, std::shared_ptr<crypto::RandomSource> rng) {
  auto distinct = DistinctState::create(config.distinct_capacity, config.distinct_fp, *rng);
  return setup(config, std::move(distinct), std::move(rng));
}

Client Client::setup(const SchemeConfig& config, std::shared_ptr<DistinctState> distinct,
                     std::shared_ptr<crypto::RandomSource> rng) {
  // Validate the SRE sizing once up front rather than at the first update.
  (void)sre::params_for_budget(config.revocation_budget, config.revocation_fp);
  auto sigma = sigma::Client::setup(*rng, config.sigma_depth);
  Client c(config, std::move(distinct), rng, std::move(sigma));
  c.search_key_ = rng->key();
  c.tag_key_ = rng->key();
  c.retrieval_key_ = rng->key();
  return c;
}

sre::Tag Client::tag(ByteView keyword, ByteView value, std::uint64_t count) const {
  return crypto::prf(tag_key_, keyword_value(keyword, value, count));
}

CacheToken Client::cache_token(ByteView keyword) const {
  ByteWriter w;
  w.raw(view("tkn")).blob(keyword);
  return crypto::hmac_sha256(search_key_, w.bytes());
}

Bytes Client::label(ByteView keyword, std::uint64_t epoch) const {
  ByteWriter w;
  w.raw(view("label")).blob(keyword).u64(epoch);
  auto d = crypto::hmac_sha256(search_key_, w.bytes());
  return Bytes(d.begin(), d.end());
}

Bytes Client::retrieval(ByteView value, std::uint64_t count) {
  if (value.size() > UINT16_MAX) throw InvalidArgument("value longer than 65535 bytes");
  const std::size_t width = padded_width(value.size(), config_.value_width);
  ByteWriter w(2 + width + 8);
  w.u16(static_cast<std::uint16_t>(value.size())).raw(value);
  for (std::size_t i = value.size(); i < width; ++i) w.u8(0);
  w.u64(count);
  return crypto::aead_seal(retrieval_key_, rng_->nonce(), w.bytes());
}

void Client::revoke(KeywordState& ks, ByteView keyword, const sre::Tag& t) {
  ks.msk.revoked.insert(t);
  if (++ks.epoch_revocations == config_.budget_for(keyword) + 1)
    warn("revocations on keyword exceed its budget d_max = " + std::to_string(config_.budget_for(keyword)));
}

std::optional<UpdateMessage> Client::update(Op op, ByteView keyword, ByteView value) {
  const Bytes key(keyword.begin(), keyword.end());
  auto it = keywords_.find(key);
  if (it == keywords_.end()) {
    it = keywords_.emplace(key, KeywordState{sre::kgen(*rng_, config_.sre_params_for(keyword))}).first;
  }
  KeywordState& ks = it->second;
  const std::uint64_t cnt = ks.update_count;
  const sre::Tag real = tag(keyword, value, 0);
  const sre::Tag dummy = tag(keyword, value, cnt);
  const Bytes s = retrieval(value, cnt);

  std::optional<UpdateMessage> msg;
  if (op == Op::add) {
    if (config_.reject_readd_after_delete && deleted_.contains(real))
      throw ProtocolError("re-adding a deleted (keyword, value) pair is disabled");
    const bool repeated = distinct_->filter.contains(real);
    const sre::Tag& t = repeated ? dummy : real;
    if (!repeated) {
      distinct_->filter.insert(real);
      if (++distinct_->inserted == distinct_->capacity + 1)
        warn("Distinct State holds more entries than its design capacity");
    }
    Entry e{sre::enc(ks.msk, s, t, *rng_), t};
    auto token = sigma_.update(label(keyword, ks.epoch), e.encode());
    msg = UpdateMessage{token.address, std::move(token.payload)};
    if (repeated) revoke(ks, keyword, dummy);
  } else {
    if (!distinct_->filter.contains(real)) warn("delete of a (keyword, value) pair that was never added");
    revoke(ks, keyword, real);
    if (config_.reject_readd_after_delete) deleted_.insert(real);
  }
  ks.update_count = cnt + 1;
  return msg;
}

SearchRequest Client::search_token(ByteView keyword) {
  auto it = keywords_.find(Bytes(keyword.begin(), keyword.end()));
  if (it == keywords_.end()) throw UnknownKeyword();
  KeywordState& ks = it->second;
  SearchRequest req{cache_token(keyword), sre::ck_rev(ks.msk.sk, ks.msk.revoked),
                    sigma_.search_token(label(keyword, ks.epoch))};
  ks.msk = sre::kgen(*rng_, config_.sre_params_for(keyword));
  ks.epoch += 1;
  ks.epoch_revocations = 0;
  return req;
}

std::vector<Client::Value> Client::open(const SearchResponse& response) const {
  std::vector<Value> out;
  out.reserve(response.retrievals.size());
  for (const auto& s : response.retrievals) {
    auto plain = crypto::aead_open(retrieval_key_, s);
    if (!plain) throw ProtocolError("retrieval failed authentication");
    try {
      ByteReader r(*plain);
      const auto len = r.u16();
      auto v = r.raw(len);
      r.raw(padded_width(len, config_.value_width) - len);
      const auto cnt = r.u64();
      r.expect_done();
      out.push_back({Bytes(v.begin(), v.end()), cnt});
    } catch (const DecodeError&) {
      throw ProtocolError("malformed retrieval plaintext");
    }
  }
  return out;
}

std::vector<Bytes> Client::finalize(const SearchResponse& response) const {
  std::vector<Bytes> out;
  for (auto& v : open(response)) out.push_back(std::move(v.value));
  return out;
}

void Client::update(Op op, ByteView keyword, ByteView value, ServerEndpoint& server) {
  if (auto msg = update(op, keyword, value)) server.update(*msg);
}

std::vector<Bytes> Client::search(ByteView keyword, ServerEndpoint& server) {
  return finalize(server.search(search_token(keyword)));
}

const KeywordState* Client::keyword(ByteView w) const {
  auto it = keywords_.find(Bytes(w.begin(), w.end()));
  return it == keywords_.end() ? nullptr : &it->second;
}

std::size_t Client::storage_bytes(bool with_distinct) const {
  std::size_t total = 3 * crypto::kLambdaBytes + crypto::kLambdaBytes;  // K_s, K_t, K_c, K_Σ
  for (const auto& [w, ks] : keywords_)
    total += w.size() + crypto::kLambdaBytes + ks.msk.revoked.byte_size() + 3 * sizeof(std::uint64_t);
  total += sigma_.label_count() * (32 + sizeof(std::uint64_t));
  if (with_distinct) total += distinct_->filter.byte_size();
  total += deleted_.size() * sizeof(sre::Tag);
  return total;
}

void Client::encode_to(ByteWriter& w, bool with_distinct) const {
  config_.encode_to(w);
  w.raw(search_key_).raw(tag_key_).raw(retrieval_key_);
  sigma_.encode_to(w);
  w.u32(static_cast<std::uint32_t>(keywords_.size()));
  for (const auto& [kw, ks] : keywords_) {
    w.blob(kw).raw(ks.msk.sk.seed()).u8(static_cast<std::uint8_t>(ks.msk.sk.depth()));
    ks.msk.revoked.encode_to(w);
    w.u64(ks.epoch).u64(ks.update_count).u64(ks.epoch_revocations);
  }
  w.u8(with_distinct ? 1 : 0);
  if (with_distinct) distinct_->encode_to(w);
  w.u32(static_cast<std::uint32_t>(deleted_.size()));
  for (const auto& t : deleted_) w.raw(t);
}

Client Client::decode(ByteReader& r, std::shared_ptr<DistinctState> distinct,
                      std::shared_ptr<crypto::RandomSource> rng) {
  auto config = SchemeConfig::decode(r);
  crypto::Key ks, kt, kc;
  r.fixed(ks);
  r.fixed(kt);
  r.fixed(kc);
  auto sigma = sigma::Client::decode(r);
  std::map<Bytes, KeywordState> keywords;
  const auto n = r.u32();
  for (std::uint32_t i = 0; i < n; ++i) {
    auto kw = r.blob();
    crypto::Block seed;
    r.fixed(seed);
    const unsigned depth = r.u8();
    auto revoked = bloom::BloomFilter::decode(r);
    KeywordState st{sre::MasterKey{ggm::Root(seed, depth), std::move(revoked)}};
    st.epoch = r.u64();
    st.update_count = r.u64();
    st.epoch_revocations = r.u64();
    keywords.emplace(Bytes(kw.begin(), kw.end()), std::move(st));
  }
  if (r.u8()) {
    auto own = DistinctState::decode(r);
    if (!distinct) distinct = std::move(own);
  }
  if (!distinct) throw DecodeError("client state carries no Distinct State and none was supplied");
  Client c(std::move(config), std::move(distinct), std::move(rng), std::move(sigma));
  c.search_key_ = ks;
  c.tag_key_ = kt;
  c.retrieval_key_ = kc;
  c.keywords_ = std::move(keywords);
  for (auto n = r.u32(); n > 0; --n) {
    sre::Tag t;
    r.fixed(t);
    c.deleted_.insert(t);
  }
  return c;
}

}  // namespace ddse::bfsre
