#pragma once

// Bi-dimensional coordinate tree: two ordered trees (top and left) that give
// every cell a pair of root paths, plus the tree and bi-tree distances.

#include <algorithm>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tableweave/common.hpp"

namespace tableweave {

/// Root path: child index at each depth. Empty path is the root.
using TreeCoordinate = std::vector<int>;

/// Coordinate extended to exactly L levels; absent levels hold kSentinel.
using PaddedCoordinate = std::array<int, kTreeDepth>;
inline constexpr int kSentinel = -1;
inline constexpr PaddedCoordinate kRootPadded = {kSentinel, kSentinel, kSentinel, kSentinel};

inline PaddedCoordinate pad_coordinate(const TreeCoordinate& path) {
  if (path.size() > static_cast<std::size_t>(kTreeDepth)) {
    throw StructureError("coordinate of length " + std::to_string(path.size()) +
                         " exceeds the maximum tree depth " + std::to_string(kTreeDepth));
  }
  PaddedCoordinate out = kRootPadded;
  for (std::size_t i = 0; i < path.size(); ++i) out[i] = path[i];
  return out;
}

inline TreeCoordinate unpad_coordinate(const PaddedCoordinate& padded) {
  TreeCoordinate out;
  for (int v : padded) {
    if (v == kSentinel) break;
    out.push_back(v);
  }
  return out;
}

/// Number of shared leading entries; the depth of the lowest common ancestor.
inline int common_prefix(const TreeCoordinate& a, const TreeCoordinate& b) {
  std::size_t k = 0;
  while (k < a.size() && k < b.size() && a[k] == b[k]) ++k;
  return static_cast<int>(k);
}

/// Directed tree with ordered children. Node 0 is the root. Append-only.
class OrderedTree {
public:
  struct Node {
    int parent = -1;
    int depth = 0;
    int child_index = -1;  // position among the parent's children
    std::vector<int> children;
  };

  OrderedTree() { nodes_.push_back(Node{}); }

  static constexpr int root() { return 0; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }

  int add_child(int parent) {
    Node& p = nodes_.at(static_cast<std::size_t>(parent));
    Node child;
    child.parent = parent;
    child.depth = p.depth + 1;
    child.child_index = static_cast<int>(p.children.size());
    const int id = static_cast<int>(nodes_.size());
    p.children.push_back(id);
    nodes_.push_back(std::move(child));
    return id;
  }

  TreeCoordinate path(int id) const {
    TreeCoordinate out(static_cast<std::size_t>(node(id).depth));
    for (int cur = id; cur != root(); cur = node(cur).parent) {
      out[static_cast<std::size_t>(node(cur).depth - 1)] = node(cur).child_index;
    }
    return out;
  }

  std::optional<int> find(const TreeCoordinate& path) const {
    int cur = root();
    for (int idx : path) {
      const auto& ch = node(cur).children;
      if (idx < 0 || static_cast<std::size_t>(idx) >= ch.size()) return std::nullopt;
      cur = ch[static_cast<std::size_t>(idx)];
    }
    return cur;
  }

  /// Steps on the shortest undirected path between two nodes.
  int distance(int a, int b) const {
    int steps = 0;
    while (node(a).depth > node(b).depth) { a = node(a).parent; ++steps; }
    while (node(b).depth > node(a).depth) { b = node(b).parent; ++steps; }
    while (a != b) {
      a = node(a).parent;
      b = node(b).parent;
      steps += 2;
    }
    return steps;
  }

  int max_depth() const {
    int d = 0;
    for (const Node& n : nodes_) d = std::max(d, n.depth);
    return d;
  }

  /// Throws StructureError when depth exceeds L or a node at depth i has more
  /// than G_i children.
  void check_bounds(const std::string& label) const {
    for (std::size_t id = 0; id < nodes_.size(); ++id) {
      const Node& n = nodes_[id];
      if (n.depth > kTreeDepth) {
        throw StructureError(label + " tree is deeper than " + std::to_string(kTreeDepth) +
                             " levels");
      }
      if (!n.children.empty() &&
          (n.depth >= kTreeDepth ||
           n.children.size() > static_cast<std::size_t>(kMaxDegree[static_cast<std::size_t>(n.depth)]))) {
        throw StructureError(label + " tree node at depth " + std::to_string(n.depth) + " has " +
                             std::to_string(n.children.size()) + " children; at most " +
                             std::to_string(n.depth < kTreeDepth ? kMaxDegree[static_cast<std::size_t>(n.depth)] : 0) +
                             " are supported");
      }
    }
  }

private:
  std::vector<Node> nodes_;
};

/// Distance between two coordinates of the same tree:
/// depth(a) + depth(b) - 2 * depth(lca). Throws if either is not in the tree.
inline int tree_distance(const OrderedTree& tree, const TreeCoordinate& a, const TreeCoordinate& b) {
  const auto na = tree.find(a);
  const auto nb = tree.find(b);
  if (!na || !nb) throw StructureError("coordinate does not belong to the tree");
  return static_cast<int>(a.size() + b.size()) - 2 * common_prefix(a, b);
}

struct CellRef {
  int row = 0;
  int col = 0;
  bool operator==(const CellRef&) const = default;
};

/// A sequence-level position: a table cell, or any context text (nullopt).
using TablePosition = std::optional<CellRef>;

struct CoordinatePair {
  TreeCoordinate top;
  TreeCoordinate left;
};

class BiTree {
public:
  BiTree(OrderedTree top, OrderedTree left, int n_rows, int n_cols,
         std::vector<std::pair<int, int>> cell_nodes)
      : top_(std::move(top)),
        left_(std::move(left)),
        n_rows_(n_rows),
        n_cols_(n_cols),
        cell_nodes_(std::move(cell_nodes)) {
    if (cell_nodes_.size() != static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols)) {
      throw StructureError("bi-tree cell map does not cover the grid");
    }
    top_.check_bounds("top");
    left_.check_bounds("left");
    padded_.reserve(cell_nodes_.size());
    for (auto [t, l] : cell_nodes_) {
      padded_.emplace_back(pad_coordinate(top_.path(t)), pad_coordinate(left_.path(l)));
    }
  }

  const OrderedTree& top() const { return top_; }
  const OrderedTree& left() const { return left_; }
  int n_rows() const { return n_rows_; }
  int n_cols() const { return n_cols_; }

  std::pair<int, int> nodes_of(int row, int col) const { return cell_nodes_[flat(row, col)]; }

  CoordinatePair coordinate_of(int row, int col) const {
    auto [t, l] = nodes_of(row, col);
    return {top_.path(t), left_.path(l)};
  }

  const std::pair<PaddedCoordinate, PaddedCoordinate>& padded_of(int row, int col) const {
    return padded_[flat(row, col)];
  }

  int distance(CellRef a, CellRef b) const {
    auto [ta, la] = nodes_of(a.row, a.col);
    auto [tb, lb] = nodes_of(b.row, b.col);
    return top_.distance(ta, tb) + left_.distance(la, lb);
  }

private:
  std::size_t flat(int row, int col) const {
    if (row < 0 || col < 0 || row >= n_rows_ || col >= n_cols_) {
      throw Error("cell (" + std::to_string(row) + "," + std::to_string(col) +
                  ") is outside the bi-tree grid");
    }
    return static_cast<std::size_t>(row) * static_cast<std::size_t>(n_cols_) +
           static_cast<std::size_t>(col);
  }

  OrderedTree top_;
  OrderedTree left_;
  int n_rows_;
  int n_cols_;
  std::vector<std::pair<int, int>> cell_nodes_;
  std::vector<std::pair<PaddedCoordinate, PaddedCoordinate>> padded_;
};

inline CoordinatePair coordinate_of(const BiTree& bt, int row, int col) {
  return bt.coordinate_of(row, col);
}

/// Sum of top and left tree distances; context text is at distance 0 from
/// every position.
inline int bitree_distance(const BiTree& bt, TablePosition a, TablePosition b) {
  if (!a || !b) return 0;
  return bt.distance(*a, *b);
}

/// Header-free layout: the top root has one child per column and the left
/// root one child per row, so distances reduce to 0 / 2 / 4.
inline BiTree flat_bitree(int n_rows, int n_cols) {
  if (n_rows <= 0 || n_cols <= 0) throw Error("flat bi-tree needs positive dimensions");
  OrderedTree top;
  OrderedTree left;
  std::vector<int> col_nodes;
  std::vector<int> row_nodes;
  for (int c = 0; c < n_cols; ++c) col_nodes.push_back(top.add_child(OrderedTree::root()));
  for (int r = 0; r < n_rows; ++r) row_nodes.push_back(left.add_child(OrderedTree::root()));
  std::vector<std::pair<int, int>> cells;
  for (int r = 0; r < n_rows; ++r) {
    for (int c = 0; c < n_cols; ++c) {
      cells.emplace_back(col_nodes[static_cast<std::size_t>(c)], row_nodes[static_cast<std::size_t>(r)]);
    }
  }
  return BiTree(std::move(top), std::move(left), n_rows, n_cols, std::move(cells));
}

}  // namespace tableweave
