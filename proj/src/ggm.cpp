#include "ddse/ggm.hpp"

#include <algorithm>

namespace ddse::ggm {
namespace {

void check_depth(unsigned depth) {
  if (depth < 1 || depth > kMaxDepth) throw InvalidArgument("GGM depth must be in [1, 32]");
}

void check_index(unsigned depth, std::uint64_t index) {
  if (index >> depth) throw InvalidArgument("index outside GGM domain");
}

// Emits the maximal subtrees of `seed`'s subtree that `keep` accepts.
// `keep(first, count)` returns 1 for fully inside, 0 for fully outside,
// -1 for mixed.
template <typename Classify>
void cover(const Block& seed, std::uint64_t prefix, unsigned len, unsigned depth,
           const Classify& classify, std::vector<Node>& out) {
  const std::uint64_t first = prefix << (depth - len);
  const std::uint64_t count = std::uint64_t{1} << (depth - len);
  const int c = classify(first, count);
  if (c == 1) {
    out.push_back({static_cast<std::uint8_t>(len), static_cast<std::uint32_t>(prefix), seed});
    return;
  }
  if (c == 0 || len == depth) return;
  auto [left, right] = crypto::prg_expand(seed);
  cover(left, prefix << 1, len + 1, depth, classify, out);
  cover(right, prefix << 1 | 1, len + 1, depth, classify, out);
}

}  // namespace

Root::Root(const Block& seed, unsigned depth) : seed_(seed), depth_(depth) { check_depth(depth); }

Block eval(const Root& root, std::uint64_t index) {
  check_index(root.depth(), index);
  return derive(Node{0, 0, root.seed()}, root.depth(), index);
}

Block derive(const Node& node, unsigned depth, std::uint64_t index) {
  Block seed = node.seed;
  for (int bit = static_cast<int>(depth) - node.prefix_len - 1; bit >= 0; --bit)
    seed = crypto::prg_child(seed, (index >> bit) & 1);
  return seed;
}

DelegatedKey::DelegatedKey(KeyKind kind, unsigned depth, std::vector<Node> nodes)
    : kind_(kind), depth_(depth), nodes_(std::move(nodes)) {
  check_depth(depth);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const auto& n = nodes_[i];
    if (n.prefix_len > depth || (std::uint64_t{n.prefix} >> n.prefix_len) != 0)
      throw InvalidArgument("delegated node outside the tree");
    if (i > 0) {
      const auto& p = nodes_[i - 1];
      if (p.first_leaf(depth) + p.leaf_count(depth) > n.first_leaf(depth))
        throw InvalidArgument("delegated nodes must be ascending and prefix-free");
    }
  }
}

const Node* DelegatedKey::find(std::uint64_t index) const {
  check_index(depth_, index);
  auto it = std::upper_bound(nodes_.begin(), nodes_.end(), index,
                             [this](std::uint64_t i, const Node& n) { return i < n.first_leaf(depth_); });
  if (it == nodes_.begin()) return nullptr;
  --it;
  return it->contains(depth_, index) ? &*it : nullptr;
}

std::optional<Block> DelegatedKey::eval(std::uint64_t index) const {
  const Node* n = find(index);
  if (!n) return std::nullopt;
  return derive(*n, depth_, index);
}

std::uint64_t DelegatedKey::coverage() const {
  std::uint64_t total = 0;
  for (const auto& n : nodes_) total += n.leaf_count(depth_);
  return total;
}

void DelegatedKey::encode_to(ByteWriter& w) const {
  w.u8(static_cast<std::uint8_t>(kind_)).u8(static_cast<std::uint8_t>(depth_));
  w.u32(static_cast<std::uint32_t>(nodes_.size()));
  for (const auto& n : nodes_) w.u8(n.prefix_len).u32(n.prefix).raw(n.seed);
}

Bytes DelegatedKey::encode() const {
  ByteWriter w(6 + nodes_.size() * 21);
  encode_to(w);
  return std::move(w).take();
}

DelegatedKey DelegatedKey::decode(ByteReader& r) {
  const auto kind = r.u8();
  if (kind > static_cast<std::uint8_t>(KeyKind::range)) throw DecodeError("unknown delegated key kind");
  const unsigned depth = r.u8();
  const std::uint32_t count = r.u32();
  if (count > r.remaining() / 21) throw DecodeError("delegated key node count exceeds input");
  std::vector<Node> nodes(count);
  for (auto& n : nodes) {
    n.prefix_len = r.u8();
    n.prefix = r.u32();
    r.fixed(n.seed);
  }
  try {
    return DelegatedKey(static_cast<KeyKind>(kind), depth, std::move(nodes));
  } catch (const InvalidArgument& e) {
    throw DecodeError(e.what());
  }
}

DelegatedKey DelegatedKey::decode(ByteView b) {
  ByteReader r(b);
  auto key = decode(r);
  r.expect_done();
  return key;
}

DelegatedKey puncture(const Root& root, std::span<const std::uint64_t> indices) {
  std::vector<std::uint64_t> excluded(indices.begin(), indices.end());
  for (auto i : excluded) check_index(root.depth(), i);
  std::sort(excluded.begin(), excluded.end());
  excluded.erase(std::unique(excluded.begin(), excluded.end()), excluded.end());

  auto classify = [&](std::uint64_t first, std::uint64_t count) {
    auto lo = std::lower_bound(excluded.begin(), excluded.end(), first);
    auto hi = std::lower_bound(lo, excluded.end(), first + count);
    const auto n = static_cast<std::uint64_t>(hi - lo);
    if (n == 0) return 1;
    return n == count ? 0 : -1;
  };
  std::vector<Node> nodes;
  cover(root.seed(), 0, 0, root.depth(), classify, nodes);
  return DelegatedKey(KeyKind::punctured, root.depth(), std::move(nodes));
}

DelegatedKey constrain_range(const Root& root, std::uint64_t count) {
  if (count > root.domain_size()) throw InvalidArgument("range bound exceeds GGM domain");
  auto classify = [count](std::uint64_t first, std::uint64_t n) {
    if (first + n <= count) return 1;
    return first >= count ? 0 : -1;
  };
  std::vector<Node> nodes;
  cover(root.seed(), 0, 0, root.depth(), classify, nodes);
  return DelegatedKey(KeyKind::range, root.depth(), std::move(nodes));
}

FrontierTable::FrontierTable(const DelegatedKey& key, unsigned level)
    : key_(&key), level_(std::min(level, key.depth())) {
  const std::size_t slots = std::size_t{1} << level_;
  seeds_.resize(slots);
  present_.assign(slots, false);
  for (const auto& n : key.nodes()) {
    if (n.prefix_len > level_) continue;
    // Expand n breadth-first down to the frontier level.
    std::vector<Block> layer{n.seed};
    for (unsigned len = n.prefix_len; len < level_; ++len) {
      std::vector<Block> next;
      next.reserve(layer.size() * 2);
      for (const auto& s : layer) {
        auto [left, right] = crypto::prg_expand(s);
        next.push_back(left);
        next.push_back(right);
      }
      layer = std::move(next);
    }
    const std::uint64_t first = std::uint64_t{n.prefix} << (level_ - n.prefix_len);
    for (std::size_t i = 0; i < layer.size(); ++i) {
      seeds_[first + i] = layer[i];
      present_[first + i] = true;
    }
  }
}

std::optional<Node> FrontierTable::source(std::uint64_t index) const {
  const std::uint64_t slot = index >> (key_->depth() - level_);
  if (present_[slot])
    return Node{static_cast<std::uint8_t>(level_), static_cast<std::uint32_t>(slot), seeds_[slot]};
  if (const Node* n = key_->find(index)) return *n;
  return std::nullopt;
}

std::optional<Block> FrontierTable::eval(std::uint64_t index) const {
  auto n = source(index);
  if (!n) return std::nullopt;
  return derive(*n, key_->depth(), index);
}

GreedyDeriver::GreedyDeriver(const DelegatedKey& key, const FrontierTable* frontier)
    : key_(&key), frontier_(frontier) {}

Block GreedyDeriver::walk(Node node, std::uint64_t index) {
  const unsigned depth = key_->depth();
  while (node.prefix_len < depth) {
    auto [left, right] = crypto::prg_expand(node.seed);
    const unsigned next_len = node.prefix_len + 1u;
    const bool go_right = (index >> (depth - next_len)) & 1;
    const std::uint32_t child = node.prefix << 1 | (go_right ? 1u : 0u);
    if (stack_.size() < kMaxStack)
      stack_.push_back({static_cast<std::uint8_t>(next_len), child ^ 1u, go_right ? left : right});
    node = {static_cast<std::uint8_t>(next_len), child, go_right ? right : left};
  }
  return node.seed;
}

std::optional<Block> GreedyDeriver::eval(std::uint64_t index) {
  check_index(key_->depth(), index);
  const unsigned depth = key_->depth();
  for (auto it = stack_.rbegin(); it != stack_.rend(); ++it) {
    if (!it->contains(depth, index)) continue;
    Node node = *it;
    stack_.erase(std::next(it).base());
    ++hits_;
    return walk(node, index);
  }
  std::optional<Node> node;
  if (frontier_) {
    node = frontier_->source(index);
  } else if (const Node* n = key_->find(index)) {
    node = *n;
  }
  if (!node) return std::nullopt;
  return walk(*node, index);
}

}  // namespace ddse::ggm
