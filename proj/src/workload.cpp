#include "ddse/workload.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <json.hpp>
#include <random>
#include <sstream>
#include <thread>

#include "ddse/net.hpp"
#include "ddse/store.hpp"

namespace ddse::workload {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

// Independent deterministic stream per purpose.
std::mt19937_64 stream(std::uint64_t seed, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(purpose)};
  return std::mt19937_64(seq);
}

// Forwards to a shared endpoint without owning it.
class Borrowed final : public bfsre::ServerEndpoint {
 public:
  explicit Borrowed(bfsre::ServerEndpoint& inner) : inner_(inner) {}
  void update(const bfsre::UpdateMessage& m) override { inner_.update(m); }
  bfsre::SearchResponse search(const bfsre::SearchRequest& r) override { return inner_.search(r); }

 private:
  bfsre::ServerEndpoint& inner_;
};

std::size_t reply_bytes(bfsre::ServerEndpoint& ep, const bfsre::SearchResponse& resp) {
  if (auto* remote = dynamic_cast<net::RemoteEndpoint*>(&ep)) return remote->last_reply_bytes();
  return wire::frame_size(resp.encode().size());
}

}  // namespace

void WorkloadSpec::validate() const {
  if (keywords < 1) throw InvalidArgument("keyword space W must be at least 1");
  if (pairs < 1) throw InvalidArgument("pair count N must be at least 1");
  if (!(duplicate_ratio >= 0 && duplicate_ratio < 1)) throw InvalidArgument("duplicate ratio must lie in [0, 1)");
  if (!(delete_fraction >= 0 && delete_fraction < 1)) throw InvalidArgument("delete fraction must lie in [0, 1)");
  if (distribution == Distribution::zipf && !(zipf_s > 0)) throw InvalidArgument("zipf exponent must be positive");
}

std::uint64_t WorkloadSpec::distinct_pairs() const {
  const auto d = static_cast<std::uint64_t>(std::llround(static_cast<double>(pairs) * (1 - duplicate_ratio)));
  return std::clamp<std::uint64_t>(d, 1, pairs);
}

std::string WorkloadSpec::describe() const {
  std::ostringstream out;
  out << "W=" << keywords << " N=" << pairs << " rho=" << duplicate_ratio << " dist="
      << (distribution == Distribution::uniform ? "uniform" : "zipf:" + std::to_string(zipf_s))
      << " delta=" << delete_fraction << " seed=" << seed;
  return out.str();
}

void parse_distribution(std::string_view s, WorkloadSpec& spec) {
  if (s == "uniform") {
    spec.distribution = Distribution::uniform;
    return;
  }
  if (s.substr(0, 4) == "zipf") {
    spec.distribution = Distribution::zipf;
    if (s.size() > 4) {
      if (s[4] != ':') throw InvalidArgument("expected zipf:S");
      try {
        std::size_t used = 0;
        const std::string num(s.substr(5));
        spec.zipf_s = std::stod(num, &used);
        if (used != num.size()) throw InvalidArgument("bad zipf exponent");
      } catch (const std::logic_error&) {
        throw InvalidArgument("bad zipf exponent in '" + std::string(s) + "'");
      }
    }
    return;
  }
  throw InvalidArgument("distribution must be uniform or zipf[:S]");
}

std::string keyword_name(std::uint64_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "kw%04llu", static_cast<unsigned long long>(i));
  return buf;
}

std::string value_name(std::uint64_t i) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "v%08llu", static_cast<unsigned long long>(i));
  return buf;
}

audit::Workload generate(const WorkloadSpec& spec) {
  spec.validate();
  const auto distinct = spec.distinct_pairs();

  std::vector<double> weights(spec.keywords, 1.0);
  if (spec.distribution == Distribution::zipf)
    for (std::uint64_t k = 0; k < spec.keywords; ++k) weights[k] = 1.0 / std::pow(static_cast<double>(k + 1), spec.zipf_s);
  std::discrete_distribution<std::uint64_t> pick_keyword(weights.begin(), weights.end());

  auto structure = stream(spec.seed, 1);
  std::vector<std::uint64_t> next_value(spec.keywords, 0);
  std::vector<std::pair<std::uint64_t, std::uint64_t>> pairs;  // (keyword, value index)
  pairs.reserve(distinct);
  for (std::uint64_t i = 0; i < distinct; ++i) {
    const auto k = pick_keyword(structure);
    pairs.emplace_back(k, next_value[k]++);
  }

  audit::Workload out;
  out.reserve(spec.pairs + distinct);
  for (const auto& [k, v] : pairs) out.push_back(audit::Step::add(keyword_name(k), value_name(v)));

  auto dups = stream(spec.seed, 2);
  std::uniform_int_distribution<std::size_t> pick_pair(0, pairs.size() - 1);
  const auto first_dup = out.size();
  for (std::uint64_t i = distinct; i < spec.pairs; ++i) {
    const auto& [k, v] = pairs[pick_pair(dups)];
    out.push_back(audit::Step::add(keyword_name(k), value_name(v)));
  }
  std::shuffle(out.begin() + static_cast<std::ptrdiff_t>(first_dup), out.end(), dups);

  auto dels = stream(spec.seed, 3);
  const auto n_del = static_cast<std::size_t>(std::llround(spec.delete_fraction * static_cast<double>(distinct)));
  std::vector<std::size_t> order(pairs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::shuffle(order.begin(), order.end(), dels);
  for (std::size_t i = 0; i < n_del; ++i) {
    const auto& [k, v] = pairs[order[i]];
    out.push_back(audit::Step::del(keyword_name(k), value_name(v)));
  }
  return out;
}

std::string BenchReport::to_lines() const {
  using json = nlohmann::json;
  std::ostringstream out;
  out << json{{"record", "summary"},
              {"workload", spec.describe()},
              {"client_storage_bytes", client_storage_bytes},
              {"server_entries", server_entries},
              {"update_s", total_update_s},
              {"search_s", total_search_s}}
             .dump()
      << '\n';
  for (const auto& b : buckets) {
    out << json{{"record", "bucket"},
                {"volume_lo", b.volume_lo},
                {"volume_hi", b.volume_hi},
                {"keywords", b.keywords},
                {"search_ms", b.search_ms},
                {"response_bytes", b.response_bytes},
                {"distinct", b.distinct},
                {"update_us", b.update_us}}
               .dump()
        << '\n';
  }
  return out.str();
}

BenchReport run_bench(const WorkloadSpec& spec, const BenchOptions& options) {
  const auto wl = generate(spec);
  BenchReport rep;
  rep.spec = spec;

  std::unique_ptr<store::EdbServer> local;
  auto connect = options.connect;
  if (!connect) {
    local = std::make_unique<store::EdbServer>();
    connect = [&] { return std::make_unique<Borrowed>(*local); };
  }
  auto client = bfsre::Client::setup(options.config, std::make_shared<crypto::SeededRandom>(spec.seed));

  struct PerKeyword {
    std::uint64_t adds = 0;
    double update_s = 0;
    std::size_t updates = 0;
    double search_s = 0;
    std::size_t bytes = 0;
    std::size_t distinct = 0;
  };
  std::vector<PerKeyword> kw(spec.keywords);
  auto index_of = [](ByteView w) { return std::stoull(to_string(w).substr(2)); };

  {
    auto ep = connect();
    const auto t_all = Clock::now();
    for (const auto& s : wl) {
      auto& k = kw[index_of(s.keyword)];
      const auto t0 = Clock::now();
      client.update(s.op, s.keyword, s.value, *ep);
      k.update_s += seconds_since(t0);
      ++k.updates;
      k.adds += s.op == bfsre::Op::add;
    }
    rep.total_update_s = seconds_since(t_all);
  }

  // Tokens are made serially (the client is single-threaded); the server
  // round trips run concurrently on independent endpoints.
  std::vector<std::uint64_t> targets;
  std::vector<bfsre::SearchRequest> requests;
  std::vector<bfsre::SearchResponse> responses;
  const auto t_search = Clock::now();
  for (std::uint64_t i = 0; i < spec.keywords; ++i) {
    if (kw[i].updates == 0) continue;
    const auto t0 = Clock::now();
    requests.push_back(client.search_token(view(keyword_name(i))));
    kw[i].search_s += seconds_since(t0);
    targets.push_back(i);
  }
  responses.resize(requests.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    auto ep = connect();
    for (std::size_t j; (j = next.fetch_add(1)) < requests.size();) {
      const auto t0 = Clock::now();
      responses[j] = ep->search(requests[j]);
      kw[targets[j]].search_s += seconds_since(t0);
      kw[targets[j]].bytes = reply_bytes(*ep, responses[j]);
    }
  };
  const unsigned threads = std::max(1u, std::min<unsigned>(options.parallel, static_cast<unsigned>(requests.size())));
  std::vector<std::thread> pool;
  for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();
  for (std::size_t j = 0; j < requests.size(); ++j) {
    const auto t0 = Clock::now();
    kw[targets[j]].distinct = client.finalize(responses[j]).size();
    kw[targets[j]].search_s += seconds_since(t0);
  }
  rep.total_search_s = seconds_since(t_search);

  for (std::uint64_t i = 0; i < spec.keywords; ++i)
    if (kw[i].updates) rep.per_keyword.emplace_back(kw[i].bytes, kw[i].distinct);

  // Power-of-two volume buckets.
  std::map<std::uint64_t, BucketRow> buckets;
  std::map<std::uint64_t, std::size_t> updates_in;
  for (const auto& k : kw) {
    if (k.updates == 0) continue;
    const auto lo = std::bit_floor(std::max<std::uint64_t>(k.adds, 1));
    auto& b = buckets[lo];
    b.volume_lo = lo;
    b.volume_hi = lo * 2;
    ++b.keywords;
    b.search_ms += k.search_s * 1e3;
    b.response_bytes += static_cast<double>(k.bytes);
    b.distinct += static_cast<double>(k.distinct);
    b.update_us += k.update_s * 1e6;
    updates_in[lo] += k.updates;
  }
  for (auto& [lo, b] : buckets) {
    const auto n = static_cast<double>(b.keywords);
    b.search_ms /= n;
    b.response_bytes /= n;
    b.distinct /= n;
    b.update_us /= static_cast<double>(updates_in[lo]);
    rep.buckets.push_back(b);
  }
  rep.client_storage_bytes = client.storage_bytes();
  if (local) rep.server_entries = local->copy().main.size();
  return rep;
}

}  // namespace ddse::workload
