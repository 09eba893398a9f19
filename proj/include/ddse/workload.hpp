#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "ddse/audit.hpp"
#include "ddse/bfsre_client.hpp"

// Synthetic workloads and the benchmark harness.
namespace ddse::workload {

enum class Distribution { uniform, zipf };

struct WorkloadSpec {
  std::uint64_t keywords = 10;  // W
  std::uint64_t pairs = 100;    // N, total add operations
  double duplicate_ratio = 0;   // ρ
  Distribution distribution = Distribution::uniform;
  double zipf_s = 1.0;
  double delete_fraction = 0;  // δ, of the distinct pairs
  std::uint64_t seed = 1;

  /// Throws InvalidArgument unless W >= 1, N >= 1, 0 <= ρ, δ < 1, s > 0.
  void validate() const;
  /// round(N (1 - ρ)), at least 1.
  std::uint64_t distinct_pairs() const;
  std::string describe() const;
};

/// Parses "uniform" or "zipf" / "zipf:S".
void parse_distribution(std::string_view s, WorkloadSpec& spec);

/// Deterministic in `spec`. The distinct pairs depend only on W, the
/// distribution, distinct_pairs() and the seed; duplicates and deletions are
/// drawn from separate streams, so two specs with the same distinct count
/// share their distinct structure. Layout: distinct adds, then shuffled
/// duplicate adds, then deletions. Values are fixed-width "v%08d".
audit::Workload generate(const WorkloadSpec& spec);

std::string keyword_name(std::uint64_t i);
std::string value_name(std::uint64_t i);

struct BucketRow {
  std::uint64_t volume_lo = 0, volume_hi = 0;  // [lo, hi) updates per keyword
  std::size_t keywords = 0;
  double search_ms = 0;                  // mean per keyword
  double response_bytes = 0;             // mean RESULT frame size
  double distinct = 0;                   // mean result cardinality
  double update_us = 0;                  // mean per update on these keywords
};

struct BenchReport {
  WorkloadSpec spec;
  std::vector<BucketRow> buckets;
  std::size_t client_storage_bytes = 0;
  std::size_t server_entries = 0;
  double total_update_s = 0;
  double total_search_s = 0;
  /// Per keyword (in keyword order): response frame bytes and distinct count.
  std::vector<std::pair<std::size_t, std::size_t>> per_keyword;

  /// JSON lines: one summary record, then one per bucket.
  std::string to_lines() const;
};

struct BenchOptions {
  bfsre::SchemeConfig config;
  /// Concurrent searches; each worker gets its own endpoint.
  unsigned parallel = 1;
  /// Makes an endpoint for one worker; the default runs an in-process store.
  std::function<std::unique_ptr<bfsre::ServerEndpoint>()> connect;
};

/// Runs the workload's updates, then searches every keyword once.
BenchReport run_bench(const WorkloadSpec& spec, const BenchOptions& options);

}  // namespace ddse::workload
