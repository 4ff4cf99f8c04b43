#pragma once

// Shared builders and reference implementations for the test programs.

#include <algorithm>
#include <cmath>
#include <functional>
#include <queue>
#include <string>
#include <vector>

#include "tableweave/bitree.hpp"
#include "tableweave/common.hpp"
#include "tableweave/model.hpp"
#include "tableweave/table.hpp"
#include "tableweave/tokenizer.hpp"

namespace twtest {

using namespace tableweave;

inline CellFeatures& put(Table& t, int r, int c, const std::string& text) {
  auto& cell = t.at(r, c);
  cell.text = text;
  return cell;
}

/// Cancer statistics layout: two top header rows with "Incidence" and
/// "Mortality" merged over Males/Females, one left header column whose
/// groups are marked by indentation. Cell names in A1 notation:
/// A6 "Urinary tract" parents A7, A8; A9 "Respiratory" parents A10, A11.
inline Table worked_example_table() {
  Table t(11, 5);
  t.top_header_rows = 2;
  t.left_header_cols = 1;
  t.context = {"estimated new cases and deaths by sex", "cancer statistics for selected sites"};
  auto& corner = put(t, 0, 0, "Site");
  corner.merged_rows = 2;
  auto& inc = put(t, 0, 1, "Incidence");
  inc.merged_cols = 2;
  auto& mort = put(t, 0, 3, "Mortality");
  mort.merged_cols = 2;
  put(t, 1, 1, "Males");
  put(t, 1, 2, "Females");
  put(t, 1, 3, "Males");
  put(t, 1, 4, "Females");
  const std::vector<std::pair<std::string, int>> left = {
      {"Oral cavity", 0}, {"Tongue", 1},    {"Mouth", 1},       {"Urinary tract", 0},
      {"Kidney etc.", 1}, {"Bladder", 1},   {"Respiratory", 0}, {"Larynx", 1},
      {"Lung", 1}};
  for (std::size_t i = 0; i < left.size(); ++i) {
    auto& cell = put(t, 2 + static_cast<int>(i), 0, left[i].first);
    cell.indent_level = left[i].second;
  }
  const long values[9][4] = {{37160, 16870, 8890, 3320},     {12200, 4590, 2010, 910},
                             {14380, 8160, 4900, 1880},     {112770, 47390, 27000, 12480},
                             {44120, 29020, 9190, 5000},     {68650, 18370, 17810, 7480},
                             {124320, 107170, 89560, 71030}, {10110, 2590, 3030, 850},
                             {114210, 104580, 86530, 70180}};
  for (int r = 0; r < 9; ++r) {
    for (int c = 0; c < 4; ++c) put(t, 2 + r, 1 + c, std::to_string(values[r][c]));
  }
  put(t, 7, 3, "148,270");
  t.rebuild_index();
  return t;
}

/// Random ordered tree with depth <= max_depth and at most max_nodes nodes.
inline OrderedTree random_tree(Rng& rng, int max_depth, int max_nodes) {
  OrderedTree tree;
  const int target = 1 + static_cast<int>(rng.below(static_cast<std::size_t>(max_nodes)));
  while (static_cast<int>(tree.size()) < target) {
    const int parent = static_cast<int>(rng.below(tree.size()));
    if (tree.node(parent).depth >= max_depth) continue;
    tree.add_child(parent);
  }
  return tree;
}

/// All-pairs shortest paths on the undirected tree graph by breadth-first search.
inline std::vector<std::vector<int>> bfs_distances(const OrderedTree& tree) {
  const int n = static_cast<int>(tree.size());
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(n));
  for (int i = 1; i < n; ++i) {
    adj[static_cast<std::size_t>(i)].push_back(tree.node(i).parent);
    adj[static_cast<std::size_t>(tree.node(i).parent)].push_back(i);
  }
  std::vector<std::vector<int>> dist(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(n), -1));
  for (int s = 0; s < n; ++s) {
    auto& d = dist[static_cast<std::size_t>(s)];
    std::queue<int> q;
    q.push(s);
    d[static_cast<std::size_t>(s)] = 0;
    while (!q.empty()) {
      const int u = q.front();
      q.pop();
      for (int v : adj[static_cast<std::size_t>(u)]) {
        if (d[static_cast<std::size_t>(v)] < 0) {
          d[static_cast<std::size_t>(v)] = d[static_cast<std::size_t>(u)] + 1;
          q.push(v);
        }
      }
    }
  }
  return dist;
}

/// Bi-tree over random top and left trees with each cell mapped to a random node.
inline BiTree random_bitree(Rng& rng, int max_depth, int max_nodes, int n_rows, int n_cols) {
  OrderedTree top = random_tree(rng, max_depth, max_nodes);
  OrderedTree left = random_tree(rng, max_depth, max_nodes);
  std::vector<std::pair<int, int>> cells;
  for (int i = 0; i < n_rows * n_cols; ++i) {
    cells.emplace_back(static_cast<int>(rng.below(top.size())), static_cast<int>(rng.below(left.size())));
  }
  return BiTree(std::move(top), std::move(left), n_rows, n_cols, std::move(cells));
}

/// Vocabulary with every word of the given texts plus the base alphabet.
inline Vocabulary vocabulary_for(const std::vector<std::string>& texts) { return build_vocabulary(texts, 5000); }

inline std::vector<std::string> table_texts(const Table& t) {
  std::vector<std::string> out = t.context;
  for (const auto& c : t.cells()) out.push_back(c.text);
  return out;
}

/// Worst relative error between analytic gradients (already in p.grad) and
/// central differences of `loss` at `probes` random entries of each parameter.
struct GradCheck {
  std::string worst_param;
  double worst = 0.0;
  int checked = 0;
};

inline double relative_error(double analytic, double numeric) {
  const double scale = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
  return std::abs(analytic - numeric) / scale;
}

inline GradCheck check_gradients(const std::vector<Parameter*>& params, const std::function<double()>& loss,
                                 int probes, std::uint64_t seed, double step = 1e-4) {
  GradCheck out;
  Rng rng(seed);
  for (Parameter* p : params) {
    // Lookup tables get sparse gradients; probe mostly where they are live.
    std::vector<Eigen::Index> live;
    for (Eigen::Index i = 0; i < p->grad.size(); ++i) {
      if (p->grad.data()[i] != 0.0) live.push_back(i);
    }
    for (int k = 0; k < probes; ++k) {
      const auto i = !live.empty() && k + 1 < probes
                         ? live[rng.below(live.size())]
                         : static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(p->value.size())));
      double& x = p->value.data()[i];
      const double x0 = x;
      x = x0 + step;
      const double up = loss();
      x = x0 - step;
      const double down = loss();
      x = x0;
      const double err = relative_error(p->grad.data()[i], (up - down) / (2 * step));
      ++out.checked;
      if (err > out.worst) {
        out.worst = err;
        out.worst_param = p->name;
      }
    }
  }
  return out;
}

}  // namespace twtest
