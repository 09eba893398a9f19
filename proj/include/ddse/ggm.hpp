#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "ddse/bytes.hpp"
#include "ddse/crypto.hpp"

// GGM-tree PRF over the domain [0, 2^depth). Leaves are reached by walking
// the length-doubling PRG from the root, most significant index bit first.
// Delegated keys hold a prefix-free set of inner-node seeds and can evaluate
// exactly the leaves below those nodes.
namespace ddse::ggm {

using crypto::Block;

inline constexpr unsigned kMaxDepth = 32;

class Root {
 public:
  /// gen_root: depth must lie in [1, 32].
  Root(const Block& seed, unsigned depth);

  const Block& seed() const { return seed_; }
  unsigned depth() const { return depth_; }
  std::uint64_t domain_size() const { return std::uint64_t{1} << depth_; }

  friend bool operator==(const Root&, const Root&) = default;

 private:
  Block seed_;
  unsigned depth_;
};

Block eval(const Root& root, std::uint64_t index);

/// Inner node: the top `prefix_len` bits of every leaf below it equal `prefix`.
struct Node {
  std::uint8_t prefix_len = 0;
  std::uint32_t prefix = 0;
  Block seed{};

  std::uint64_t first_leaf(unsigned depth) const {
    return std::uint64_t{prefix} << (depth - prefix_len);
  }
  std::uint64_t leaf_count(unsigned depth) const { return std::uint64_t{1} << (depth - prefix_len); }
  bool contains(unsigned depth, std::uint64_t index) const {
    return (index >> (depth - prefix_len)) == prefix;
  }

  friend bool operator==(const Node&, const Node&) = default;
};

/// Walks from `node` down to leaf `index`; the node must contain the index.
Block derive(const Node& node, unsigned depth, std::uint64_t index);

enum class KeyKind : std::uint8_t { punctured = 0, range = 1 };

class DelegatedKey {
 public:
  DelegatedKey(KeyKind kind, unsigned depth, std::vector<Node> nodes);

  KeyKind kind() const { return kind_; }
  unsigned depth() const { return depth_; }
  std::span<const Node> nodes() const { return nodes_; }

  /// eval_delegated: the leaf value, or nullopt when the index is not covered.
  std::optional<Block> eval(std::uint64_t index) const;
  const Node* find(std::uint64_t index) const;
  bool covers(std::uint64_t index) const { return find(index) != nullptr; }
  /// Number of leaves the key can evaluate.
  std::uint64_t coverage() const;

  /// [kind:1][depth:1][count:4][(prefix_len:1, prefix:4, seed:16)*], nodes
  /// ascending by first covered leaf.
  Bytes encode() const;
  void encode_to(ByteWriter& w) const;
  static DelegatedKey decode(ByteReader& r);
  static DelegatedKey decode(ByteView b);

  friend bool operator==(const DelegatedKey&, const DelegatedKey&) = default;

 private:
  KeyKind kind_;
  unsigned depth_;
  std::vector<Node> nodes_;
};

/// Key covering every leaf except `indices` (duplicates allowed).
DelegatedKey puncture(const Root& root, std::span<const std::uint64_t> indices);

/// Key covering exactly [0, count) with at most `depth` nodes.
DelegatedKey constrain_range(const Root& root, std::uint64_t count);

// Dense table of covered sub-keys at a fixed tree level, computed once per
// delegated key so each leaf only needs `depth - level` PRG steps.
class FrontierTable {
 public:
  FrontierTable(const DelegatedKey& key, unsigned level);

  unsigned level() const { return level_; }
  /// The frontier node above `index` if it is fully covered, else the
  /// delegated key's own node (below the frontier), else nullopt.
  std::optional<Node> source(std::uint64_t index) const;
  std::optional<Block> eval(std::uint64_t index) const;

 private:
  const DelegatedKey* key_;
  unsigned level_;
  std::vector<Block> seeds_;
  std::vector<bool> present_;
};

// Keeps the unused siblings produced while walking down to a leaf on a
// stack, and tries them first on the next request. Used sub-keys are
// dropped; the derivatives of the one that served the request are pushed.
class GreedyDeriver {
 public:
  explicit GreedyDeriver(const DelegatedKey& key, const FrontierTable* frontier = nullptr);

  std::optional<Block> eval(std::uint64_t index);
  std::size_t stack_size() const { return stack_.size(); }
  std::size_t hits() const { return hits_; }

  static constexpr std::size_t kMaxStack = 1 << 14;

 private:
  Block walk(Node node, std::uint64_t index);

  const DelegatedKey* key_;
  const FrontierTable* frontier_;
  std::vector<Node> stack_;
  std::size_t hits_ = 0;
};

}  // namespace ddse::ggm
