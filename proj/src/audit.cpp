#include "ddse/audit.hpp"

#include <json.hpp>
#include <set>
#include <sstream>

#include "ddse/bfsre_server.hpp"
#include "ddse/wire.hpp"

namespace ddse::audit {

namespace {

using json = nlohmann::json;

constexpr std::size_t kWindow = 8;

std::string text(ByteView b) { return to_string(b); }

// Address and payload size of an UPDATE frame.
std::pair<sigma::Address, std::size_t> parse_update(ByteView frame) {
  const auto f = wire::decode(frame);
  const auto msg = bfsre::UpdateMessage::decode(f.body);
  return {msg.address, msg.payload.size()};
}

}  // namespace

std::size_t Transcript::update_count() const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [](const Event& e) { return e.kind == Step::update; }));
}

std::size_t Transcript::search_count() const { return events.size() - update_count(); }

std::string Transcript::dump() const {
  std::ostringstream out;
  for (const auto& e : events) {
    const char* kind = e.kind == Step::update ? "update" : "search";
    out << e.u << ' ' << kind << " c2s " << to_hex(e.request) << '\n';
    if (!e.response.empty()) out << e.u << ' ' << kind << " s2c " << to_hex(e.response) << '\n';
  }
  return out.str();
}

Transcript record(const Workload& workload, const bfsre::SchemeConfig& config, std::uint64_t seed) {
  auto client = bfsre::Client::setup(config, std::make_shared<crypto::SeededRandom>(seed));
  bfsre::MemoryServer server;
  Transcript t;
  std::uint64_t u = 0;
  for (const auto& step : workload) {
    Event e;
    e.u = ++u;
    e.kind = step.kind;
    e.step = step;
    if (step.kind == Step::update) {
      if (auto msg = client.update(step.op, step.keyword, step.value)) {
        e.request = wire::encode({wire::MsgType::update, msg->encode()});
        server.update(*msg);
        e.response = wire::encode({wire::MsgType::result, {}});
      }
    } else if (client.keyword(step.keyword)) {
      const auto req = client.search_token(step.keyword);
      e.request = wire::encode({wire::MsgType::search, req.encode()});
      const auto resp = server.search(req);
      e.response = wire::encode({wire::MsgType::result, resp.encode()});
      for (const auto& r : resp.retrievals) e.result_bytes += r.size();
      e.results = client.finalize(resp);
    }
    t.events.push_back(std::move(e));
  }
  return t;
}

Transcript record_sigma(const Workload& workload, sigma::Client& client, std::uint64_t seed,
                        std::size_t payload_bytes) {
  crypto::SeededRandom rng(seed);
  Transcript t;
  std::uint64_t u = 0;
  for (const auto& step : workload) {
    if (step.kind != Step::update) continue;
    Event e;
    e.u = ++u;
    e.step = step;
    Bytes payload(payload_bytes);
    rng.fill(payload);
    const auto tok = client.update(step.keyword, std::move(payload));
    e.request = wire::encode({wire::MsgType::update, bfsre::UpdateMessage{tok.address, tok.payload}.encode()});
    t.events.push_back(std::move(e));
  }
  return t;
}

LeakageReport compute_patterns(const Transcript& t) {
  LeakageReport rep;
  // Per keyword: value -> timestamp of its first add, and the values ever
  // deleted (a later add of those is a repeat, never a new entry).
  std::map<Bytes, std::map<Bytes, std::uint64_t>> first_add;
  std::map<Bytes, std::set<Bytes>> deleted;
  auto drlen_of = [&](const Bytes& w) {
    std::size_t n = 0;
    for (const auto& [v, u] : first_add[w]) n += !deleted[w].contains(v);
    return n;
  };

  std::vector<Bytes> searched;
  for (const auto& e : t.events) {
    auto& kp = rep.keywords[e.step.keyword];
    kp.keyword = e.step.keyword;
    if (e.kind == Step::update) {
      kp.update.push_back(e.u);
      if (e.step.op == bfsre::Op::add)
        first_add[e.step.keyword].try_emplace(e.step.value, e.u);
      else
        deleted[e.step.keyword].insert(e.step.value);
    } else {
      kp.sp.push_back(e.u);
      rep.search_drlen.push_back(drlen_of(e.step.keyword));
      searched.push_back(e.step.keyword);
    }
  }
  for (auto& [w, kp] : rep.keywords) {
    for (const auto& [v, u] : first_add[w])
      if (!deleted[w].contains(v)) kp.time_dts.emplace_back(u, v);
    std::sort(kp.time_dts.begin(), kp.time_dts.end());
    kp.ulen = kp.update.size();
    kp.drlen = kp.time_dts.size();
  }
  rep.qeq.assign(searched.size(), std::vector<bool>(searched.size()));
  for (std::size_t i = 0; i < searched.size(); ++i)
    for (std::size_t j = 0; j < searched.size(); ++j) rep.qeq[i][j] = searched[i] == searched[j];
  return rep;
}

std::string LeakageReport::to_lines() const {
  std::ostringstream out;
  for (const auto& [w, kp] : keywords) {
    const auto kw = text(w);
    out << json{{"keyword", kw}, {"pattern", "sp"}, {"value", kp.sp}}.dump() << '\n';
    out << json{{"keyword", kw}, {"pattern", "Update"}, {"value", kp.update}}.dump() << '\n';
    json dts = json::array();
    for (const auto& [u, v] : kp.time_dts) dts.push_back({u, text(v)});
    out << json{{"keyword", kw}, {"pattern", "TimeDTS"}, {"value", dts}}.dump() << '\n';
    out << json{{"keyword", kw}, {"pattern", "ulen"}, {"value", kp.ulen}}.dump() << '\n';
    out << json{{"keyword", kw}, {"pattern", "drlen"}, {"value", kp.drlen}}.dump() << '\n';
  }
  for (std::size_t i = 0; i < search_drlen.size(); ++i) {
    std::vector<int> row(qeq[i].begin(), qeq[i].end());
    out << json{{"search", i + 1}, {"drlen", search_drlen[i]}, {"qeq", row}}.dump() << '\n';
  }
  return out.str();
}

void check_signatures(std::uint64_t n, const Signature& s0, const Signature& s1) {
  if (n < 1) throw InvalidArgument("n must be at least 1");
  if (s0.size() != s1.size()) throw InvalidArgument("signatures cover different keyword sets");
  std::uint64_t sum0 = 0, sum1 = 0;
  for (const auto& [w, e0] : s0) {
    auto it = s1.find(w);
    if (it == s1.end()) throw InvalidArgument("keyword '" + text(w) + "' missing from S1");
    const auto& e1 = it->second;
    if (e0.distinct != e1.distinct) throw InvalidArgument("l_0(w) != l_1(w) for '" + text(w) + "'");
    for (const auto& e : {e0, e1}) {
      if (e.distinct < 1) throw InvalidArgument("l(w) must be at least 1");
      if (!(e.distinct < e.total && e.total <= n))
        throw InvalidArgument("need l(w) < t(w) <= n for '" + text(w) + "'");
    }
    sum0 += e0.total;
    sum1 += e1.total;
  }
  if (sum0 != n || sum1 != n) throw InvalidArgument("t_b(w) must sum to n");
}

std::pair<Signature, Signature> random_signatures(std::uint64_t n, std::uint64_t max_keywords,
                                                  std::mt19937_64& rng) {
  if (n < 2 || max_keywords < 1) throw InvalidArgument("need n >= 2 and at least one keyword");
  const auto k = std::uniform_int_distribution<std::uint64_t>(1, std::min(max_keywords, n / 2))(rng);
  const auto max_l = n / k - 1;  // leaves room for l(w) + 1 <= t(w) on every keyword
  std::vector<std::uint64_t> l(k);
  std::uint64_t floor_sum = 0;
  for (auto& x : l) {
    x = std::uniform_int_distribution<std::uint64_t>(1, max_l)(rng);
    floor_sum += x + 1;
  }
  std::pair<Signature, Signature> out;
  for (auto* sig : {&out.first, &out.second}) {
    std::vector<std::uint64_t> t(k);
    for (std::size_t i = 0; i < k; ++i) t[i] = l[i] + 1;
    std::uniform_int_distribution<std::size_t> pick(0, k - 1);
    for (auto r = n - floor_sum; r > 0; --r) ++t[pick(rng)];
    for (std::size_t i = 0; i < k; ++i) {
      char name[32];
      std::snprintf(name, sizeof name, "sig-kw-%03zu", i);
      (*sig)[to_bytes(name)] = {l[i], t[i]};
    }
  }
  return out;
}

Workload prepare_workload(const Signature& s) {
  Workload w;
  for (const auto& [kw, e] : s) {
    const auto extra = e.total - e.distinct;
    for (std::uint64_t j = 0; j < e.distinct; ++j) {
      char value[24];
      std::snprintf(value, sizeof value, "value-%08llu", static_cast<unsigned long long>(j));
      const auto copies = 1 + extra / e.distinct + (j < extra % e.distinct ? 1 : 0);
      for (std::uint64_t c = 0; c < copies; ++c) w.push_back(Step::add(text(kw), value));
    }
  }
  return w;
}

GameResult dwvh_game(std::uint64_t n, const Signature& s0, const Signature& s1, const Workload& script,
                     const bfsre::SchemeConfig& config, std::uint64_t seed) {
  check_signatures(n, s0, s1);
  GameResult g;
  const Signature* sig[2] = {&s0, &s1};
  for (int b = 0; b < 2; ++b) {
    auto wl = prepare_workload(*sig[b]);
    wl.insert(wl.end(), script.begin(), script.end());
    g.transcripts[b] = record(wl, config, seed);
  }
  const auto& t0 = g.transcripts[0].events;
  const auto& t1 = g.transcripts[1].events;
  if (t0.size() != t1.size()) g.verdict.fail("transcripts differ in length");
  for (std::size_t i = 0; i < std::min(t0.size(), t1.size()); ++i) {
    const auto& a = t0[i];
    const auto& b = t1[i];
    const auto at = "step " + std::to_string(a.u);
    if (a.kind != b.kind) {
      g.verdict.fail(at + ": step kinds differ");
    } else if (a.kind == Step::update) {
      if (a.request.size() != b.request.size()) g.verdict.fail(at + ": update message sizes differ");
    } else {
      if (a.results.size() != b.results.size())
        g.verdict.fail(at + ": result cardinality " + std::to_string(a.results.size()) + " vs " +
                       std::to_string(b.results.size()));
      if (a.result_bytes != b.result_bytes || a.response.size() != b.response.size())
        g.verdict.fail(at + ": result payload bytes differ");
    }
  }
  for (int b = 0; b < 2; ++b) {
    for (const auto& [w, kp] : compute_patterns(g.transcripts[b]).keywords) {
      auto& slot = g.update_cardinality[w];
      (b == 0 ? slot.first : slot.second) = kp.ulen;
    }
  }
  return g;
}

Verdict fp_check(const Transcript& t, const Transcript* renamed) {
  Verdict v;
  std::set<sigma::Address> addresses;
  std::map<std::size_t, std::size_t> length_for_payload;
  std::map<Bytes, std::uint64_t> windows;  // 8-byte address window -> first timestamp
  std::set<Bytes> keywords;
  for (const auto& e : t.events)
    if (e.step.keyword.size() >= kWindow) keywords.insert(e.step.keyword);

  for (const auto& e : t.events) {
    if (e.kind != Step::update || e.request.empty()) continue;
    const auto at = "update " + std::to_string(e.u);
    sigma::Address a;
    std::size_t payload = 0;
    try {
      std::tie(a, payload) = parse_update(e.request);
    } catch (const Error& err) {
      v.fail(at + ": unparseable frame (" + err.what() + ")");
      continue;
    }
    if (!addresses.insert(a).second) v.fail(at + ": repeated address");
    auto [it, fresh] = length_for_payload.try_emplace(payload, e.request.size());
    if (!fresh && it->second != e.request.size()) v.fail(at + ": frame length varies for equal payload size");
    for (const auto& kw : keywords)
      if (contains(e.request, kw)) v.fail(at + ": frame contains the keyword '" + text(kw) + "'");
    std::set<Bytes> own;
    for (std::size_t i = 0; i + kWindow <= a.size(); ++i) {
      Bytes win(a.begin() + static_cast<std::ptrdiff_t>(i), a.begin() + static_cast<std::ptrdiff_t>(i + kWindow));
      if (!own.insert(win).second) continue;
      auto [wit, first] = windows.try_emplace(win, e.u);
      if (!first) {
        v.fail(at + ": address shares bytes with update " + std::to_string(wit->second));
        break;
      }
    }
  }
  if (renamed) {
    std::vector<std::size_t> a, b;
    for (const auto& e : t.events)
      if (e.kind == Step::update) a.push_back(e.request.size());
    for (const auto& e : renamed->events)
      if (e.kind == Step::update) b.push_back(e.request.size());
    if (a != b) v.fail("frame-length sequence depends on keyword bytes");
  }
  return v;
}

Workload rename_keywords(const Workload& w) {
  Workload out = w;
  for (auto& s : out)
    for (auto& c : s.keyword) c = static_cast<std::uint8_t>(c ^ 0x5a);
  return out;
}

sigma::Address KeywordEmbeddingSigma::derive_address(ByteView label, std::uint64_t counter,
                                                     const crypto::Block& leaf) const {
  auto a = sigma::Client::derive_address(label, counter, leaf);
  // The first 16 bytes are the label, zero-padded or truncated.
  std::fill_n(a.begin(), 16, 0);
  std::copy_n(label.begin(), std::min<std::size_t>(label.size(), 16), a.begin());
  return a;
}

}  // namespace ddse::audit
