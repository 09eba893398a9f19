#include "ddse/bfsre_protocol.hpp"

namespace ddse::bfsre {

Bytes Entry::encode() const {
  ByteWriter w;
  ct.encode_to(w);
  w.raw(tag);
  return std::move(w).take();
}

Entry Entry::decode(ByteView b) {
  ByteReader r(b);
  Entry e;
  e.ct = sre::Ciphertext::decode(r);
  r.fixed(e.tag);
  r.expect_done();
  return e;
}

Bytes UpdateMessage::encode() const {
  ByteWriter w(36 + payload.size());
  w.raw(address).blob(payload);
  return std::move(w).take();
}

UpdateMessage UpdateMessage::decode(ByteView b) {
  ByteReader r(b);
  UpdateMessage m;
  r.fixed(m.address);
  auto p = r.blob();
  m.payload.assign(p.begin(), p.end());
  r.expect_done();
  return m;
}

Bytes SearchRequest::encode() const {
  ByteWriter w;
  w.raw(tkn);
  revoked.encode_to(w);
  sigma.encode_to(w);
  return std::move(w).take();
}

SearchRequest SearchRequest::decode(ByteView b) {
  ByteReader r(b);
  CacheToken tkn;
  r.fixed(tkn);
  auto revoked = sre::RevokedKey::decode(r);
  auto sigma = sigma::SearchToken::decode(r);
  r.expect_done();
  return {tkn, std::move(revoked), std::move(sigma)};
}

Bytes SearchResponse::encode() const {
  ByteWriter w;
  w.u32(static_cast<std::uint32_t>(retrievals.size()));
  for (const auto& s : retrievals) w.blob(s);
  return std::move(w).take();
}

SearchResponse SearchResponse::decode(ByteView b) {
  ByteReader r(b);
  SearchResponse resp;
  const auto n = r.u32();
  if (n > r.remaining() / 4) throw DecodeError("response count exceeds input");
  resp.retrievals.reserve(n);
  for (std::uint32_t i = 0; i < n; ++i) {
    auto s = r.blob();
    resp.retrievals.emplace_back(s.begin(), s.end());
  }
  r.expect_done();
  return resp;
}

}  // namespace ddse::bfsre
