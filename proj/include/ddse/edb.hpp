#pragma once

#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <shared_mutex>

#include "ddse/bfsre_client.hpp"
#include "ddse/query.hpp"

// The encrypted-database layer: a registry of BF-SRE instances, one per
// (table, keyword column, value column), and the executors for the planned
// statements.
namespace ddse::edb {

enum class ValueOrder : std::uint8_t { numeric = 0, lexicographic = 1 };

const char* order_name(ValueOrder o);
ValueOrder parse_order(std::string_view s);

/// Numeric order compares values as decimal integers, placing anything
/// non-numeric after all numbers in byte order.
bool value_less(ValueOrder order, ByteView a, ByteView b);

struct ValueLess {
  ValueOrder order = ValueOrder::lexicographic;
  bool operator()(const Bytes& a, const Bytes& b) const { return value_less(order, a, b); }
};

struct TableSchema {
  std::string name;
  std::string keyword_column;
  std::string value_column;
  ValueOrder value_order = ValueOrder::lexicographic;

  std::string key() const { return name + "/" + keyword_column + "/" + value_column; }
};

// d: per keyword, value -> multiplicity in value order.
class QuantityVector {
 public:
  using Counts = std::map<Bytes, std::uint64_t, ValueLess>;

  explicit QuantityVector(ValueOrder order = ValueOrder::lexicographic) : order_(order) {}

  void insert(ByteView w, ByteView v);
  /// Drops the dimension; returns false if it was absent.
  bool erase(ByteView w, ByteView v);
  const Counts* find(ByteView w) const;
  std::size_t keyword_count() const { return d_.size(); }
  std::size_t storage_bytes() const;

  void encode_to(ByteWriter& w) const;
  static QuantityVector decode(ByteReader& r, ValueOrder order);

  friend bool operator==(const QuantityVector& a, const QuantityVector& b) { return a.d_ == b.d_; }

 private:
  ValueOrder order_;
  std::map<Bytes, Counts> d_;
};

struct Instance {
  TableSchema schema;
  bfsre::Client client;
  QuantityVector quantities;
  std::mutex mu;  // serializes execution on this instance

  Instance(TableSchema s, bfsre::Client c)
      : schema(std::move(s)), client(std::move(c)), quantities(schema.value_order) {}
};

// Instances share the registry's Distinct State.
class Registry {
 public:
  Registry(bfsre::SchemeConfig defaults, std::shared_ptr<crypto::RandomSource> rng = crypto::system_random());

  /// Throws InvalidArgument if the triple is already registered.
  Instance& register_table(const TableSchema& schema, std::optional<std::uint64_t> revocation_budget = {});
  Instance* find(std::string_view table, std::string_view keyword_column, std::string_view value_column);
  bool has_table(std::string_view table) const;
  std::vector<const Instance*> instances() const;

  const bfsre::SchemeConfig& defaults() const { return defaults_; }
  const bfsre::DistinctState& distinct() const { return *distinct_; }
  std::size_t storage_bytes() const;

  /// One line per instance: table, keyword column, value column, order,
  /// BF capacity and rate, d_max.
  std::string manifest() const;

  void encode_to(ByteWriter& w) const;
  static std::unique_ptr<Registry> decode(ByteReader& r,
                                          std::shared_ptr<crypto::RandomSource> rng = crypto::system_random());

 private:
  Registry(bfsre::SchemeConfig defaults, std::shared_ptr<crypto::RandomSource> rng,
           std::shared_ptr<bfsre::DistinctState> distinct);

  bfsre::SchemeConfig defaults_;
  std::shared_ptr<crypto::RandomSource> rng_;
  std::shared_ptr<bfsre::DistinctState> distinct_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::unique_ptr<Instance>> instances_;
};

/// Looks up the instance a plan addresses; throws InvalidArgument for
/// unknown tables or columns.
Instance& instance_for(Registry& reg, const std::string& table, const query::ColumnRef& key,
                       const query::ColumnRef& value);

void exec_insert(const query::Plan& plan, Registry& reg, bfsre::ServerEndpoint& server);
void exec_delete(const query::Plan& plan, Registry& reg, bfsre::ServerEndpoint& server);
/// Distinct values in value order.
std::vector<Bytes> exec_select_distinct(const query::Plan& plan, Registry& reg, bfsre::ServerEndpoint& server);
/// Values with multiplicities restored, in value order. Throws
/// IntegrityError if the distinct result and d[w] disagree.
std::vector<Bytes> exec_select(const query::Plan& plan, Registry& reg, bfsre::ServerEndpoint& server);
std::vector<Bytes> exec_join(const query::Plan& plan, Registry& reg, bfsre::ServerEndpoint& server);

/// Dispatches on plan.syn; updates return no rows.
std::vector<Bytes> execute(const query::Plan& plan, Registry& reg, bfsre::ServerEndpoint& server);

}  // namespace ddse::edb
