#pragma once

// Header hierarchy extraction: merged cells shape the top tree, indentation
// shapes the left tree, and SUM/AVERAGE aggregation formulas override both.
// build_bitree() composes the extracted trees into a BiTree.

#include <algorithm>
#include <cctype>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableweave/bitree.hpp"
#include "tableweave/table.hpp"

namespace tableweave {

/// Non-fatal extraction event. Streamed as one JSON object per line by the CLI.
struct Warning {
  std::string code;
  std::string message;
  int row = -1;
  int col = -1;
};

inline nlohmann::json to_json(const Warning& w) {
  return {{"warning", w.code}, {"message", w.message}, {"row", w.row}, {"col", w.col}};
}

// ---------------------------------------------------------------------------
// Formulas

enum class AggregateFunction { sum, average };

struct FormulaRef {
  AggregateFunction function = AggregateFunction::sum;
  int r0 = 0;
  int c0 = 0;
  int r1 = 0;
  int c1 = 0;
  bool operator==(const FormulaRef&) const = default;
};

namespace detail {

inline std::string upper(std::string_view s) {
  std::string out(s);
  for (char& ch : out) ch = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  return out;
}

// Parses "B2", "$B$2", "aa10" into zero-based (row, col).
inline std::optional<std::pair<int, int>> parse_a1(std::string_view s) {
  std::size_t i = 0;
  if (i < s.size() && s[i] == '$') ++i;
  long col = 0;
  std::size_t letters = 0;
  while (i < s.size() && std::isalpha(static_cast<unsigned char>(s[i]))) {
    col = col * 26 + (std::toupper(static_cast<unsigned char>(s[i])) - 'A' + 1);
    ++i;
    if (++letters > 3) return std::nullopt;
  }
  if (letters == 0) return std::nullopt;
  if (i < s.size() && s[i] == '$') ++i;
  long row = 0;
  std::size_t digits = 0;
  while (i < s.size() && std::isdigit(static_cast<unsigned char>(s[i]))) {
    row = row * 10 + (s[i] - '0');
    ++i;
    if (++digits > 7) return std::nullopt;
  }
  if (digits == 0 || i != s.size() || row < 1) return std::nullopt;
  return std::pair<int, int>{static_cast<int>(row - 1), static_cast<int>(col - 1)};
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

}  // namespace detail

/// Recognizes "=FN(A1)" and "=FN(A1:B2)" with FN in {SUM, AVERAGE}. Anything
/// else yields nullopt.
inline std::optional<FormulaRef> parse_formula(std::string_view text) {
  std::string_view s = detail::trim(text);
  if (s.empty() || s.front() != '=') return std::nullopt;
  s.remove_prefix(1);
  const auto open = s.find('(');
  if (open == std::string_view::npos || s.back() != ')') return std::nullopt;
  const std::string fn = detail::upper(detail::trim(s.substr(0, open)));
  FormulaRef ref;
  if (fn == "SUM") {
    ref.function = AggregateFunction::sum;
  } else if (fn == "AVERAGE") {
    ref.function = AggregateFunction::average;
  } else {
    return std::nullopt;
  }
  const std::string_view args = detail::trim(s.substr(open + 1, s.size() - open - 2));
  const auto colon = args.find(':');
  std::optional<std::pair<int, int>> a;
  std::optional<std::pair<int, int>> b;
  if (colon == std::string_view::npos) {
    a = detail::parse_a1(args);
    b = a;
  } else {
    a = detail::parse_a1(detail::trim(args.substr(0, colon)));
    b = detail::parse_a1(detail::trim(args.substr(colon + 1)));
  }
  if (!a || !b) return std::nullopt;
  ref.r0 = std::min(a->first, b->first);
  ref.r1 = std::max(a->first, b->first);
  ref.c0 = std::min(a->second, b->second);
  ref.c1 = std::max(a->second, b->second);
  return ref;
}

/// Zero-based (row, col) to "B2" notation.
inline std::string a1_name(int row, int col) {
  std::string letters;
  for (int c = col + 1; c > 0; c = (c - 1) / 26) {
    letters.insert(letters.begin(), static_cast<char>('A' + (c - 1) % 26));
  }
  return letters + std::to_string(row + 1);
}

// ---------------------------------------------------------------------------
// Header trees

enum class Orientation { top, left };

struct HeaderNode {
  int parent = -1;
  std::vector<int> children;
  /// Data columns (top tree) or data rows (left tree) this node stands for.
  std::vector<int> owned;
  int anchor_row = -1;
  int anchor_col = -1;
};

class HeaderTree {
public:
  explicit HeaderTree(Orientation o) : orientation_(o) { nodes_.emplace_back(); }

  Orientation orientation() const { return orientation_; }
  static constexpr int root() { return 0; }
  const std::vector<HeaderNode>& nodes() const { return nodes_; }
  const HeaderNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }

  int add_child(int parent, int anchor_row = -1, int anchor_col = -1) {
    HeaderNode n;
    n.parent = parent;
    n.anchor_row = anchor_row;
    n.anchor_col = anchor_col;
    const int id = static_cast<int>(nodes_.size());
    nodes_.push_back(std::move(n));
    nodes_[static_cast<std::size_t>(parent)].children.push_back(id);
    return id;
  }

  void add_owned(int id, int index) { nodes_.at(static_cast<std::size_t>(id)).owned.push_back(index); }

  int depth(int id) const {
    int d = 0;
    for (int cur = id; cur != root(); cur = node(cur).parent) ++d;
    return d;
  }

  int max_depth() const {
    int d = 0;
    for (std::size_t i = 0; i < nodes_.size(); ++i) d = std::max(d, depth(static_cast<int>(i)));
    return d;
  }

  /// Height of the subtree below id (0 for a leaf).
  int height(int id) const {
    int h = 0;
    for (int ch : node(id).children) h = std::max(h, 1 + height(ch));
    return h;
  }

  bool is_ancestor(int ancestor, int id) const {
    for (int cur = id; cur != -1; cur = node(cur).parent) {
      if (cur == ancestor) return true;
    }
    return false;
  }

  std::vector<int> subtree_owned(int id) const {
    std::vector<int> out = node(id).owned;
    for (int ch : node(id).children) {
      auto sub = subtree_owned(ch);
      out.insert(out.end(), sub.begin(), sub.end());
    }
    return out;
  }

  /// Node standing for a data row/column, or -1.
  int owner_of(int index) const {
    for (std::size_t i = 0; i < nodes_.size(); ++i) {
      const auto& o = nodes_[i].owned;
      if (std::find(o.begin(), o.end(), index) != o.end()) return static_cast<int>(i);
    }
    return -1;
  }

  /// Moves `id` (with its subtree) under `new_parent`, then orders the new
  /// parent's children by the smallest index each subtree owns.
  void reparent(int id, int new_parent) {
    auto& old_children = nodes_[static_cast<std::size_t>(node(id).parent)].children;
    old_children.erase(std::remove(old_children.begin(), old_children.end(), id), old_children.end());
    nodes_[static_cast<std::size_t>(id)].parent = new_parent;
    auto& ch = nodes_[static_cast<std::size_t>(new_parent)].children;
    ch.push_back(id);
    std::stable_sort(ch.begin(), ch.end(), [this](int a, int b) { return min_owned(a) < min_owned(b); });
  }

  /// Ordered structural fingerprint; equal fingerprints mean isomorphic
  /// ordered trees with identical coverage.
  std::string canonical(int id = root()) const {
    std::string s = "(";
    std::vector<int> owned = node(id).owned;
    std::sort(owned.begin(), owned.end());
    for (std::size_t i = 0; i < owned.size(); ++i) s += (i ? "," : "") + std::to_string(owned[i]);
    for (int ch : node(id).children) s += canonical(ch);
    return s + ")";
  }

  /// Every expected index owned exactly once; depth within L.
  bool satisfies_invariants(const std::vector<int>& expected) const {
    std::vector<int> all = subtree_owned(root());
    std::sort(all.begin(), all.end());
    std::vector<int> want = expected;
    std::sort(want.begin(), want.end());
    return all == want && max_depth() <= kTreeDepth;
  }

private:
  int min_owned(int id) const {
    auto o = subtree_owned(id);
    return o.empty() ? std::numeric_limits<int>::max() : *std::min_element(o.begin(), o.end());
  }

  Orientation orientation_;
  std::vector<HeaderNode> nodes_;
};

inline nlohmann::json to_json(const HeaderTree& tree, int id = HeaderTree::root()) {
  const HeaderNode& n = tree.node(id);
  nlohmann::json j;
  j["owned"] = n.owned;
  if (n.anchor_row >= 0) j["anchor"] = a1_name(n.anchor_row, n.anchor_col);
  j["children"] = nlohmann::json::array();
  for (int ch : n.children) j["children"].push_back(to_json(tree, ch));
  return j;
}

namespace detail {

inline void require_regions(const Table& t) {
  if (t.top_header_rows >= t.n_rows()) {
    throw StructureError("top header covers every row; no data rows remain");
  }
  if (t.left_header_cols >= t.n_cols()) {
    throw StructureError("left header covers every column; no data columns remain");
  }
}

inline void require_depth(const HeaderTree& tree, const char* label) {
  if (tree.max_depth() > kTreeDepth) {
    throw StructureError(std::string(label) + " header is deeper than " +
                         std::to_string(kTreeDepth) + " levels");
  }
}

}  // namespace detail

/// One root child per data column.
inline HeaderTree flat_header_tree(const Table& t, Orientation o) {
  HeaderTree tree(o);
  if (o == Orientation::top) {
    for (int c = t.left_header_cols; c < t.n_cols(); ++c) tree.add_owned(tree.add_child(HeaderTree::root()), c);
  } else {
    for (int r = t.top_header_rows; r < t.n_rows(); ++r) tree.add_owned(tree.add_child(HeaderTree::root()), r);
  }
  return tree;
}

/// Top tree from merged regions: each header cell becomes a child of the
/// nearest header cell above it whose column span contains it.
inline HeaderTree extract_top_tree(const Table& t) {
  detail::require_regions(t);
  if (t.top_header_rows == 0) return flat_header_tree(t, Orientation::top);
  const int header_rows = t.top_header_rows;
  const int first_col = t.left_header_cols;
  HeaderTree tree(Orientation::top);
  struct Span {
    int node, c0, c1, bottom;
  };
  std::vector<Span> spans;  // in creation order, so later entries are deeper
  for (int h = 0; h < header_rows; ++h) {
    for (int c = first_col; c < t.n_cols(); ++c) {
      if (!t.is_anchor(h, c)) continue;
      const CellFeatures& cell = t.at(h, c);
      int parent = HeaderTree::root();
      for (auto it = spans.rbegin(); it != spans.rend(); ++it) {
        if (it->c0 <= c && c <= it->c1 && it->bottom < h) {
          parent = it->node;
          break;
        }
      }
      const int id = tree.add_child(parent, h, c);
      spans.push_back({id, c, c + cell.merged_cols - 1, std::min(h + cell.merged_rows - 1, header_rows - 1)});
    }
  }
  for (int c = first_col; c < t.n_cols(); ++c) {
    int owner = -1;
    int owner_depth = -1;
    for (const Span& s : spans) {
      if (s.c0 <= c && c <= s.c1 && tree.depth(s.node) > owner_depth) {
        owner = s.node;
        owner_depth = tree.depth(s.node);
      }
    }
    if (owner < 0) owner = tree.add_child(HeaderTree::root());
    tree.add_owned(owner, c);
  }
  detail::require_depth(tree, "top");
  return tree;
}

/// Leading-whitespace indentation: one level per tab or per four spaces.
inline int whitespace_indent(std::string_view text) {
  int tabs = 0;
  int spaces = 0;
  for (char ch : text) {
    if (ch == '\t') {
      ++tabs;
    } else if (ch == ' ') {
      ++spaces;
    } else {
      break;
    }
  }
  return tabs + spaces / 4;
}

struct LeftHeaderLevel {
  int level = 0;
  int anchor_col = -1;  // -1 when the row's header cells are all blank
};

/// Indentation level of a data row's header: the larger of the indent
/// evidence (explicit attribute if present, else whitespace) and the column
/// offset of the first non-blank header cell.
inline LeftHeaderLevel left_header_level(const Table& t, int row) {
  for (int k = 0; k < t.left_header_cols; ++k) {
    const CellFeatures& anchor = t.anchor_of(row, k);
    if (anchor.row != row) continue;  // belongs to a row above
    if (detail::trim(anchor.text).empty()) continue;
    const int indent = anchor.indent_level ? *anchor.indent_level : whitespace_indent(anchor.text);
    return {std::max(indent, k), anchor.col};
  }
  return {};
}

/// Left tree from indentation: a row at level k+1 becomes the child of the
/// nearest preceding row at level k.
inline HeaderTree extract_left_tree(const Table& t, std::vector<Warning>* warnings = nullptr) {
  detail::require_regions(t);
  if (t.left_header_cols == 0) return flat_header_tree(t, Orientation::left);
  HeaderTree tree(Orientation::left);
  std::vector<int> stack;  // stack[k] = most recent node at level k
  int previous = -1;
  for (int r = t.top_header_rows; r < t.n_rows(); ++r) {
    LeftHeaderLevel lv = left_header_level(t, r);
    int level = lv.level;
    if (level > previous + 1) {
      if (warnings) {
        warnings->push_back({"level_jump",
                             "indentation jumps from level " + std::to_string(previous) + " to " +
                                 std::to_string(level) + "; treated as +1",
                             r, lv.anchor_col});
      }
      level = previous + 1;
    }
    if (level >= kTreeDepth) {
      throw StructureError("left header is deeper than " + std::to_string(kTreeDepth) +
                           " levels at row " + std::to_string(r));
    }
    stack.resize(static_cast<std::size_t>(level));
    const int parent = level == 0 ? HeaderTree::root() : stack.back();
    const int id = tree.add_child(parent, lv.anchor_col >= 0 ? r : -1, lv.anchor_col);
    tree.add_owned(id, r);
    stack.push_back(id);
    previous = level;
  }
  return tree;
}

/// Aggregation edges found in the data region: target index aggregates the
/// contiguous indices [first, last].
struct AggregationEdge {
  int target = 0;
  int first = 0;
  int last = 0;
};

/// Rows (left) or columns (top) whose every data cell carries the same
/// aggregation over the same contiguous run of other rows/columns, each cell
/// referencing its own column (row).
inline std::vector<AggregationEdge> find_aggregations(const Table& t, Orientation o) {
  std::vector<AggregationEdge> edges;
  const bool rows = o == Orientation::left;
  const int outer_begin = rows ? t.top_header_rows : t.left_header_cols;
  const int outer_end = rows ? t.n_rows() : t.n_cols();
  const int inner_begin = rows ? t.left_header_cols : t.top_header_rows;
  const int inner_end = rows ? t.n_cols() : t.n_rows();
  for (int k = outer_begin; k < outer_end; ++k) {
    std::optional<FormulaRef> pattern;
    bool ok = inner_begin < inner_end;
    for (int j = inner_begin; j < inner_end && ok; ++j) {
      const int r = rows ? k : j;
      const int c = rows ? j : k;
      if (!t.is_anchor(r, c)) continue;
      const CellFeatures& cell = t.at(r, c);
      const auto ref = cell.formula_text ? parse_formula(*cell.formula_text) : std::nullopt;
      if (!ref) {
        ok = false;
        break;
      }
      // Must aggregate along its own column (rows) or own row (columns).
      const bool own_line = rows ? (ref->c0 == c && ref->c1 == c) : (ref->r0 == r && ref->r1 == r);
      if (!own_line) {
        ok = false;
        break;
      }
      if (!pattern) {
        pattern = ref;
      } else {
        const bool same = pattern->function == ref->function &&
                          (rows ? (pattern->r0 == ref->r0 && pattern->r1 == ref->r1)
                                : (pattern->c0 == ref->c0 && pattern->c1 == ref->c1));
        if (!same) ok = false;
      }
    }
    if (!ok || !pattern) continue;
    const int first = rows ? pattern->r0 : pattern->c0;
    const int last = rows ? pattern->r1 : pattern->c1;
    if (first < outer_begin || last >= outer_end) continue;
    edges.push_back({k, first, last});
  }
  return edges;
}

/// Re-parents aggregated rows/columns under the aggregating row/column's
/// node. Formula edges take priority over the existing structure. Cyclic or
/// too-deep edges are skipped with a warning.
inline HeaderTree apply_formula_hierarchy(HeaderTree tree, const Table& t,
                                          std::vector<Warning>* warnings = nullptr) {
  const bool rows = tree.orientation() == Orientation::left;
  for (const AggregationEdge& e : find_aggregations(t, tree.orientation())) {
    const int wr = rows ? e.target : -1;
    const int wc = rows ? -1 : e.target;
    auto warn = [&](const char* code, const std::string& msg) {
      if (warnings) warnings->push_back({code, msg, wr, wc});
    };
    if (e.first <= e.target && e.target <= e.last) {
      warn("cyclic_aggregation", "aggregation references its own line; edge ignored");
      continue;
    }
    const int target = tree.owner_of(e.target);
    if (target < 0) continue;
    std::set<int> referenced;
    for (int i = e.first; i <= e.last; ++i) referenced.insert(i);
    auto within = [&](int id) {
      for (int i : tree.subtree_owned(id)) {
        if (!referenced.count(i)) return false;
      }
      return true;
    };
    std::vector<int> moved;
    for (int i = e.first; i <= e.last; ++i) {
      int n = tree.owner_of(i);
      if (n < 0) continue;
      while (true) {
        const int p = tree.node(n).parent;
        if (p == HeaderTree::root() || p == target || !within(p)) break;
        n = p;
      }
      if (std::find(moved.begin(), moved.end(), n) == moved.end()) moved.push_back(n);
    }
    bool cyclic = false;
    bool too_deep = false;
    const int target_depth = tree.depth(target);
    for (int n : moved) {
      if (tree.is_ancestor(n, target)) cyclic = true;
      if (target_depth + 1 + tree.height(n) > kTreeDepth) too_deep = true;
    }
    if (cyclic) {
      warn("cyclic_aggregation", "aggregation would place a node under its own descendant; edge ignored");
      continue;
    }
    if (too_deep) {
      warn("aggregation_depth", "aggregation would exceed the maximum header depth; edge ignored");
      continue;
    }
    for (int n : moved) {
      if (tree.node(n).parent != target) tree.reparent(n, target);
    }
  }
  return tree;
}

namespace detail {

inline void append_subtree(const HeaderTree& src, int src_id, OrderedTree& dst, int dst_parent,
                           std::vector<int>& map) {
  for (int ch : src.node(src_id).children) {
    const int id = dst.add_child(dst_parent);
    map[static_cast<std::size_t>(ch)] = id;
    append_subtree(src, ch, dst, id, map);
  }
}

inline std::vector<int> virtual_chain(OrderedTree& tree, int length) {
  std::vector<int> chain;
  int cur = OrderedTree::root();
  for (int k = 0; k < length; ++k) {
    cur = tree.add_child(cur);
    chain.push_back(cur);
  }
  return chain;
}

}  // namespace detail

struct ExtractedTrees {
  HeaderTree top{Orientation::top};
  HeaderTree left{Orientation::left};
};

/// Both header trees after formula re-parenting.
inline ExtractedTrees extract_trees(const Table& t, std::vector<Warning>* warnings = nullptr) {
  ExtractedTrees out;
  out.top = apply_formula_hierarchy(extract_top_tree(t), t, warnings);
  out.left = apply_formula_hierarchy(extract_left_tree(t, warnings), t, warnings);
  return out;
}

/// Composes extracted header trees into a bi-tree. Cells of the left header
/// take their top coordinate from a chain under top-root child 0 (one level
/// per header column); top-header cells take their left coordinate from the
/// symmetric chain under left-root child 0.
inline BiTree build_bitree(const Table& t, const ExtractedTrees& trees) {
  detail::require_regions(t);
  const int header_rows = t.top_header_rows;
  const int header_cols = t.left_header_cols;
  if (header_rows > kTreeDepth || header_cols > kTreeDepth) {
    throw StructureError("header regions deeper than " + std::to_string(kTreeDepth) +
                         " levels are not supported");
  }
  OrderedTree top;
  OrderedTree left;
  const std::vector<int> top_chain = detail::virtual_chain(top, header_cols);
  const std::vector<int> left_chain = detail::virtual_chain(left, header_rows);
  std::vector<int> top_map(trees.top.nodes().size(), -1);
  std::vector<int> left_map(trees.left.nodes().size(), -1);
  detail::append_subtree(trees.top, HeaderTree::root(), top, OrderedTree::root(), top_map);
  detail::append_subtree(trees.left, HeaderTree::root(), left, OrderedTree::root(), left_map);

  std::vector<int> col_owner(static_cast<std::size_t>(t.n_cols()), -1);
  std::vector<int> row_owner(static_cast<std::size_t>(t.n_rows()), -1);
  std::vector<int> top_anchor_node(static_cast<std::size_t>(t.n_rows() * t.n_cols()), -1);
  for (std::size_t i = 0; i < trees.top.nodes().size(); ++i) {
    const HeaderNode& n = trees.top.nodes()[i];
    for (int c : n.owned) col_owner[static_cast<std::size_t>(c)] = top_map[i];
    if (n.anchor_row >= 0) top_anchor_node[t.index(n.anchor_row, n.anchor_col)] = top_map[i];
  }
  for (std::size_t i = 0; i < trees.left.nodes().size(); ++i) {
    for (int r : trees.left.nodes()[i].owned) row_owner[static_cast<std::size_t>(r)] = left_map[i];
  }

  std::vector<std::pair<int, int>> cells;
  cells.reserve(static_cast<std::size_t>(t.n_rows() * t.n_cols()));
  for (int r = 0; r < t.n_rows(); ++r) {
    for (int c = 0; c < t.n_cols(); ++c) {
      const CellFeatures& a = t.anchor_of(r, c);
      int top_node = -1;
      if (a.col < header_cols) {
        top_node = top_chain[static_cast<std::size_t>(a.col)];
      } else if (a.row < header_rows) {
        top_node = top_anchor_node[t.index(a.row, a.col)];
        if (top_node < 0) top_node = col_owner[static_cast<std::size_t>(a.col)];
      } else {
        top_node = col_owner[static_cast<std::size_t>(a.col)];
      }
      const int left_node = a.row < header_rows ? left_chain[static_cast<std::size_t>(a.row)]
                                                 : row_owner[static_cast<std::size_t>(a.row)];
      if (top_node < 0 || left_node < 0) {
        throw StructureError("cell " + a1_name(r, c) + " has no node in the header trees");
      }
      cells.emplace_back(top_node, left_node);
    }
  }
  return BiTree(std::move(top), std::move(left), t.n_rows(), t.n_cols(), std::move(cells));
}

inline BiTree build_bitree(const Table& t, std::vector<Warning>* warnings = nullptr) {
  return build_bitree(t, extract_trees(t, warnings));
}

inline nlohmann::json to_json(const OrderedTree& tree) {
  nlohmann::json nodes = nlohmann::json::array();
  for (std::size_t i = 0; i < tree.size(); ++i) {
    nodes.push_back({{"id", i}, {"path", tree.path(static_cast<int>(i))},
                     {"children", tree.node(static_cast<int>(i)).children}});
  }
  return nodes;
}

/// Inspection report: nodes of both trees, per-cell coordinate pairs and,
/// optionally, the full row-major cell-by-cell distance matrix.
inline nlohmann::json bitree_report(const BiTree& bt, bool with_distances) {
  nlohmann::json j;
  j["n_rows"] = bt.n_rows();
  j["n_cols"] = bt.n_cols();
  j["top_nodes"] = to_json(bt.top());
  j["left_nodes"] = to_json(bt.left());
  nlohmann::json cells = nlohmann::json::array();
  for (int r = 0; r < bt.n_rows(); ++r) {
    for (int c = 0; c < bt.n_cols(); ++c) {
      const CoordinatePair p = bt.coordinate_of(r, c);
      cells.push_back({{"row", r}, {"col", c}, {"name", a1_name(r, c)}, {"top", p.top}, {"left", p.left}});
    }
  }
  j["cells"] = std::move(cells);
  if (with_distances) {
    const int n = bt.n_rows() * bt.n_cols();
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < n; ++i) {
      std::vector<int> row;
      row.reserve(static_cast<std::size_t>(n));
      for (int k = 0; k < n; ++k) {
        row.push_back(bt.distance({i / bt.n_cols(), i % bt.n_cols()}, {k / bt.n_cols(), k % bt.n_cols()}));
      }
      rows.push_back(std::move(row));
    }
    j["distances"] = std::move(rows);
  }
  return j;
}

}  // namespace tableweave
