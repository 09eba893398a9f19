#include "ddse/bfsre_server.hpp"

#include <set>

namespace ddse::bfsre {

SearchOutcome evaluate_search(const SearchRequest& req, const EncryptedDatabase& edb,
                              const ServerOptions& options) {
  SearchOutcome out;

  // The epoch list L, in upload order.
  std::vector<sigma::Address> addresses;
  std::vector<sre::Sealed> items;
  for (const auto& a : sigma::expand_addresses(req.sigma)) {
    auto it = edb.main.find(a);
    if (it == edb.main.end()) continue;
    try {
      auto e = Entry::decode(it->second);
      addresses.push_back(a);
      items.push_back({std::move(e.ct), e.tag});
    } catch (const DecodeError&) {
      out.purged.push_back(a);
    }
  }

  const auto& filter = req.revoked.revoked;
  sre::DecryptOptions dopt = options.decrypt;
  // Without a configured budget, estimate the revoked-tag count from D.
  if (dopt.revocation_budget == 0) dopt.revocation_budget = filter.popcount() / filter.hash_count();
  const auto plain = items.size() >= options.parallel_threshold
                         ? sre::decrypt_batch_parallel(req.revoked, items, dopt)
                         : sre::decrypt_batch_serial(req.revoked, items, dopt);

  // OV: earlier results whose tag has not been revoked since.
  std::set<sre::Tag> seen;
  if (auto it = edb.cache.find(req.tkn); it != edb.cache.end()) {
    for (const auto& c : it->second) {
      if (req.revoked.revoked.contains(c.tag) || !seen.insert(c.tag).second) continue;
      out.cache.push_back(c);
    }
  }
  // NV
  for (std::size_t j = 0; j < items.size(); ++j) {
    if (!plain[j]) {
      out.purged.push_back(addresses[j]);
      continue;
    }
    if (!seen.insert(items[j].tag).second) continue;
    out.cache.push_back({items[j].tag, *plain[j]});
  }

  out.response.retrievals.reserve(out.cache.size());
  for (const auto& c : out.cache) out.response.retrievals.push_back(c.retrieval);
  return out;
}

void commit_search(EncryptedDatabase& edb, const CacheToken& tkn, const SearchOutcome& outcome) {
  for (const auto& a : outcome.purged) edb.main.erase(a);
  if (outcome.cache.empty())
    edb.cache.erase(tkn);
  else
    edb.cache[tkn] = outcome.cache;
}

void apply_update(EncryptedDatabase& edb, const UpdateMessage& msg) {
  auto [it, inserted] = edb.main.try_emplace(msg.address, msg.payload);
  if (!inserted) throw ProtocolError("address collision in encrypted store");
}

SearchResponse search_server(const SearchRequest& req, EncryptedDatabase& edb, const ServerOptions& options) {
  auto outcome = evaluate_search(req, edb, options);
  commit_search(edb, req.tkn, outcome);
  return std::move(outcome.response);
}

}  // namespace ddse::bfsre
