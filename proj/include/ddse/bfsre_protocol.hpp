#pragma once

#include <vector>

#include "ddse/bytes.hpp"
#include "ddse/sigma.hpp"
#include "ddse/sre.hpp"

// Messages exchanged between the BF-SRE client and the server. Everything
// here is server-visible; no client secret appears in these types.
namespace ddse::bfsre {

/// tkn = F(K_s, w), the cache token.
using CacheToken = crypto::Digest;

/// What Σ_add stores per upload: the SRE ciphertext and its (real or dummy) tag.
struct Entry {
  sre::Ciphertext ct;
  sre::Tag tag{};

  /// SreCiphertext encoding || tag:16
  Bytes encode() const;
  static Entry decode(ByteView b);
};

struct UpdateMessage {
  sigma::Address address{};
  Bytes payload;

  /// [address:32][len:4][payload]
  Bytes encode() const;
  static UpdateMessage decode(ByteView b);

  friend bool operator==(const UpdateMessage&, const UpdateMessage&) = default;
};

struct SearchRequest {
  CacheToken tkn{};
  sre::RevokedKey revoked;
  sigma::SearchToken sigma;

  /// [tkn:32][RevokedKey][SearchTokenSigma]
  Bytes encode() const;
  static SearchRequest decode(ByteView b);
};

struct SearchResponse {
  std::vector<Bytes> retrievals;

  /// [count:4][(len:4, bytes)*]
  Bytes encode() const;
  static SearchResponse decode(ByteView b);

  friend bool operator==(const SearchResponse&, const SearchResponse&) = default;
};

// Anything that can execute the server half of the protocol: the in-memory
// server, the persistent store, or a socket connection to either.
class ServerEndpoint {
 public:
  virtual ~ServerEndpoint() = default;
  virtual void update(const UpdateMessage& msg) = 0;
  virtual SearchResponse search(const SearchRequest& req) = 0;
};

}  // namespace ddse::bfsre
