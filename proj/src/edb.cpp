#include "ddse/edb.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace ddse::edb {

namespace {

// Sign and digit span of a decimal integer, or nullopt.
struct Decimal {
  bool negative;
  std::string_view digits;  // leading zeros stripped
};

std::optional<Decimal> as_decimal(ByteView b) {
  std::string_view s(reinterpret_cast<const char*>(b.data()), b.size());
  bool neg = false;
  if (!s.empty() && (s[0] == '-' || s[0] == '+')) {
    neg = s[0] == '-';
    s.remove_prefix(1);
  }
  if (s.empty() || !std::all_of(s.begin(), s.end(), [](char c) { return std::isdigit(static_cast<unsigned char>(c)); }))
    return std::nullopt;
  while (s.size() > 1 && s[0] == '0') s.remove_prefix(1);
  if (s == "0") neg = false;
  return Decimal{neg, s};
}

int compare_magnitude(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return a.size() < b.size() ? -1 : 1;
  return a.compare(b) < 0 ? -1 : (a == b ? 0 : 1);
}

bool valid_identifier(std::string_view s) {
  if (s.empty() || !(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_')) return false;
  return std::all_of(s.begin(), s.end(), [](char c) { return std::isalnum(static_cast<unsigned char>(c)) || c == '_'; });
}

Instance& lookup(Registry& reg, const std::string& table, const std::string& key, const std::string& value) {
  if (auto* in = reg.find(table, key, value)) return *in;
  if (!reg.has_table(table)) throw InvalidArgument("unknown table '" + table + "'");
  throw InvalidArgument("no instance of table '" + table + "' with keyword column '" + key + "' and value column '" +
                        value + "'");
}

// Distinct search on one instance; the caller holds its mutex.
std::vector<Bytes> distinct_locked(Instance& in, ByteView w, bfsre::ServerEndpoint& server) {
  if (!in.client.keyword(w)) return {};
  auto values = in.client.search(w, server);
  std::sort(values.begin(), values.end(), ValueLess{in.schema.value_order});
  return values;
}

std::vector<Bytes> select_locked(Instance& in, ByteView w, bfsre::ServerEndpoint& server) {
  const auto distinct = distinct_locked(in, w, server);
  const auto* counts = in.quantities.find(w);
  const std::size_t expected = counts ? counts->size() : 0;
  if (distinct.size() != expected)
    throw IntegrityError("distinct result has " + std::to_string(distinct.size()) + " values but d[w] has " +
                         std::to_string(expected));
  std::vector<Bytes> out;
  if (!counts) return out;
  auto it = counts->begin();
  for (const auto& v : distinct) {
    if (it->first != v) throw IntegrityError("distinct result and d[w] disagree on value '" + to_string(v) + "'");
    out.insert(out.end(), it->second, v);
    ++it;
  }
  return out;
}

}  // namespace

const char* order_name(ValueOrder o) { return o == ValueOrder::numeric ? "numeric" : "lexicographic"; }

ValueOrder parse_order(std::string_view s) {
  if (s == "numeric") return ValueOrder::numeric;
  if (s == "lexicographic") return ValueOrder::lexicographic;
  throw InvalidArgument("value order must be numeric or lexicographic, got '" + std::string(s) + "'");
}

bool value_less(ValueOrder order, ByteView a, ByteView b) {
  const auto bytewise = [&] { return std::lexicographical_compare(a.begin(), a.end(), b.begin(), b.end()); };
  if (order == ValueOrder::lexicographic) return bytewise();
  const auto da = as_decimal(a), db = as_decimal(b);
  if (!da || !db) {
    if (da.has_value() != db.has_value()) return da.has_value();
    return bytewise();
  }
  if (da->negative != db->negative) return da->negative;
  const int c = compare_magnitude(da->digits, db->digits);
  if (c != 0) return da->negative ? c > 0 : c < 0;
  return bytewise();  // "007" and "7" stay distinct values
}

void QuantityVector::insert(ByteView w, ByteView v) {
  auto [it, _] = d_.try_emplace(to_owned(w), Counts(ValueLess{order_}));
  ++it->second[to_owned(v)];
}

bool QuantityVector::erase(ByteView w, ByteView v) {
  auto it = d_.find(to_owned(w));
  if (it == d_.end() || it->second.erase(to_owned(v)) == 0) return false;
  if (it->second.empty()) d_.erase(it);
  return true;
}

const QuantityVector::Counts* QuantityVector::find(ByteView w) const {
  auto it = d_.find(to_owned(w));
  return it == d_.end() ? nullptr : &it->second;
}

std::size_t QuantityVector::storage_bytes() const {
  std::size_t total = 0;
  for (const auto& [w, counts] : d_) {
    total += w.size();
    for (const auto& [v, c] : counts) total += v.size() + sizeof c;
  }
  return total;
}

void QuantityVector::encode_to(ByteWriter& w) const {
  w.u32(static_cast<std::uint32_t>(d_.size()));
  for (const auto& [kw, counts] : d_) {
    w.blob(kw).u32(static_cast<std::uint32_t>(counts.size()));
    for (const auto& [v, c] : counts) w.blob(v).u64(c);
  }
}

QuantityVector QuantityVector::decode(ByteReader& r, ValueOrder order) {
  QuantityVector q(order);
  for (auto n = r.u32(); n > 0; --n) {
    const auto kw = to_owned(r.blob());
    Counts counts{ValueLess{order}};
    for (auto m = r.u32(); m > 0; --m) {
      auto v = to_owned(r.blob());
      const auto c = r.u64();
      if (c == 0) throw DecodeError("zero multiplicity in quantity vector");
      counts.emplace(std::move(v), c);
    }
    if (counts.empty()) throw DecodeError("empty dimension in quantity vector");
    q.d_.emplace(kw, std::move(counts));
  }
  return q;
}

Registry::Registry(bfsre::SchemeConfig defaults, std::shared_ptr<crypto::RandomSource> rng)
    : defaults_(std::move(defaults)), rng_(std::move(rng)) {
  distinct_ = bfsre::DistinctState::create(defaults_.distinct_capacity, defaults_.distinct_fp, *rng_);
}

Instance& Registry::register_table(const TableSchema& schema, std::optional<std::uint64_t> revocation_budget) {
  for (const auto* s : {&schema.name, &schema.keyword_column, &schema.value_column})
    if (!valid_identifier(*s)) throw InvalidArgument("'" + *s + "' is not a valid identifier");
  if (schema.keyword_column == schema.value_column)
    throw InvalidArgument("keyword and value columns must differ");
  auto config = defaults_;
  if (revocation_budget) config.revocation_budget = *revocation_budget;
  std::unique_lock lock(mu_);
  if (instances_.contains(schema.key())) throw InvalidArgument("instance " + schema.key() + " is already registered");
  auto in = std::make_unique<Instance>(schema, bfsre::Client::setup(config, distinct_, rng_));
  auto& ref = *in;
  instances_.emplace(schema.key(), std::move(in));
  return ref;
}

Instance* Registry::find(std::string_view table, std::string_view keyword_column, std::string_view value_column) {
  std::shared_lock lock(mu_);
  const auto key = TableSchema{std::string(table), std::string(keyword_column), std::string(value_column)}.key();
  auto it = instances_.find(key);
  return it == instances_.end() ? nullptr : it->second.get();
}

bool Registry::has_table(std::string_view table) const {
  std::shared_lock lock(mu_);
  return std::any_of(instances_.begin(), instances_.end(),
                     [&](const auto& kv) { return kv.second->schema.name == table; });
}

std::vector<const Instance*> Registry::instances() const {
  std::shared_lock lock(mu_);
  std::vector<const Instance*> out;
  for (const auto& [_, in] : instances_) out.push_back(in.get());
  return out;
}

std::size_t Registry::storage_bytes() const {
  std::shared_lock lock(mu_);
  std::size_t total = distinct_->filter.byte_size();
  for (const auto& [_, in] : instances_) total += in->client.storage_bytes(false) + in->quantities.storage_bytes();
  return total;
}

std::string Registry::manifest() const {
  std::ostringstream out;
  out.precision(6);
  for (const auto* in : instances()) {
    const auto& c = in->client.config();
    out << "table=" << in->schema.name << " keyword=" << in->schema.keyword_column
        << " value=" << in->schema.value_column << " order=" << order_name(in->schema.value_order)
        << " bf_n=" << c.distinct_capacity << " bf_p=" << c.distinct_fp << " dmax=" << c.revocation_budget << '\n';
  }
  return out.str();
}

void Registry::encode_to(ByteWriter& w) const {
  std::shared_lock lock(mu_);
  defaults_.encode_to(w);
  distinct_->encode_to(w);
  w.u32(static_cast<std::uint32_t>(instances_.size()));
  for (const auto& [_, in] : instances_) {
    w.blob(view(in->schema.name)).blob(view(in->schema.keyword_column)).blob(view(in->schema.value_column));
    w.u8(static_cast<std::uint8_t>(in->schema.value_order));
    in->client.encode_to(w, false);
    in->quantities.encode_to(w);
  }
}

std::unique_ptr<Registry> Registry::decode(ByteReader& r, std::shared_ptr<crypto::RandomSource> rng) {
  auto defaults = bfsre::SchemeConfig::decode(r);
  auto distinct = bfsre::DistinctState::decode(r);
  std::unique_ptr<Registry> reg(new Registry(std::move(defaults), rng, distinct));
  for (auto n = r.u32(); n > 0; --n) {
    TableSchema s;
    s.name = to_string(r.blob());
    s.keyword_column = to_string(r.blob());
    s.value_column = to_string(r.blob());
    const auto order = r.u8();
    if (order > 1) throw DecodeError("bad value order");
    s.value_order = static_cast<ValueOrder>(order);
    auto client = bfsre::Client::decode(r, distinct, rng);
    auto in = std::make_unique<Instance>(s, std::move(client));
    in->quantities = QuantityVector::decode(r, s.value_order);
    reg->instances_.emplace(s.key(), std::move(in));
  }
  return reg;
}

Registry::Registry(bfsre::SchemeConfig defaults, std::shared_ptr<crypto::RandomSource> rng,
                   std::shared_ptr<bfsre::DistinctState> distinct)
    : defaults_(std::move(defaults)), rng_(std::move(rng)), distinct_(std::move(distinct)) {}

Instance& instance_for(Registry& reg, const std::string& table, const query::ColumnRef& key,
                       const query::ColumnRef& value) {
  return lookup(reg, table, key.column, value.column);
}

void exec_insert(const query::Plan& plan, Registry& reg, bfsre::ServerEndpoint& server) {
  auto& in = instance_for(reg, plan.table, plan.key, plan.value);
  std::lock_guard lock(in.mu);
  in.client.update(bfsre::Op::add, plan.keyword, plan.literal, server);
  in.quantities.insert(plan.keyword, plan.literal);
}

void exec_delete(const query::Plan& plan, Registry& reg, bfsre::ServerEndpoint& server) {
  auto& in = instance_for(reg, plan.table, plan.key, plan.value);
  std::lock_guard lock(in.mu);
  in.client.update(bfsre::Op::del, plan.keyword, plan.literal, server);
  in.quantities.erase(plan.keyword, plan.literal);
}

std::vector<Bytes> exec_select_distinct(const query::Plan& plan, Registry& reg, bfsre::ServerEndpoint& server) {
  auto& in = instance_for(reg, plan.table, plan.key, plan.value);
  std::lock_guard lock(in.mu);
  return distinct_locked(in, plan.keyword, server);
}

std::vector<Bytes> exec_select(const query::Plan& plan, Registry& reg, bfsre::ServerEndpoint& server) {
  auto& in = instance_for(reg, plan.table, plan.key, plan.value);
  std::lock_guard lock(in.mu);
  return select_locked(in, plan.keyword, server);
}

std::vector<Bytes> exec_join(const query::Plan& plan, Registry& reg, bfsre::ServerEndpoint& server) {
  auto& first = instance_for(reg, plan.table, plan.key, plan.value);
  auto& second = instance_for(reg, plan.table2, plan.key2, plan.value2);
  std::vector<Bytes> stage1;
  {
    std::lock_guard lock(first.mu);
    stage1 = select_locked(first, plan.keyword, server);
  }
  // stage1 is sorted, so equal foreign keys are adjacent: search each once
  // and repeat its segment once per occurrence.
  std::vector<Bytes> out;
  std::lock_guard lock(second.mu);
  for (std::size_t i = 0; i < stage1.size();) {
    std::size_t j = i;
    while (j < stage1.size() && stage1[j] == stage1[i]) ++j;
    const auto segment = select_locked(second, stage1[i], server);
    for (; i < j; ++i) out.insert(out.end(), segment.begin(), segment.end());
  }
  return out;
}

std::vector<Bytes> execute(const query::Plan& plan, Registry& reg, bfsre::ServerEndpoint& server) {
  switch (plan.syn) {
    case query::Syn::ins:
      exec_insert(plan, reg, server);
      return {};
    case query::Syn::del:
      exec_delete(plan, reg, server);
      return {};
    case query::Syn::dsrch:
      return exec_select_distinct(plan, reg, server);
    case query::Syn::srch:
      return exec_select(plan, reg, server);
    case query::Syn::join:
      return exec_join(plan, reg, server);
  }
  return {};
}

}  // namespace ddse::edb
