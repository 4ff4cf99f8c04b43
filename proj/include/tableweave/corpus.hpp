#pragma once

// Synthetic corpus: flat and hierarchical tables over a handful of topic
// domains, with context text, cell and table type labels, and the header
// trees each table was generated from.

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableweave/header_extract.hpp"
#include "tableweave/table.hpp"
#include "tableweave/tokenizer.hpp"

namespace tableweave {

struct Topic {
  std::string name;
  std::string title;
  std::string corner;
  std::vector<std::string> columns;
  std::vector<std::pair<std::string, std::vector<std::string>>> column_groups;
  std::vector<std::pair<std::string, std::vector<std::string>>> row_groups;
  std::vector<std::string> rows;
  std::vector<std::string> items;
  std::vector<std::string> attributes;
  std::vector<std::string> sentences;
  std::string note;
};

inline const std::vector<Topic>& topics() {
  static const std::vector<Topic> all = {
      {"finance",
       "quarterly revenue and cost report",
       "segment",
       {"revenue", "cost", "margin", "tax", "dividend", "assets"},
       {{"income", {"domestic", "export"}}, {"expense", {"labor", "materials"}}, {"capital", {"equity", "debt"}}},
       {{"banking", {"loans", "deposits", "cards"}},
        {"insurance", {"life", "property", "health cover"}},
        {"investment", {"bonds", "stocks", "funds"}}},
       {"north branch", "south branch", "east branch", "west branch", "head office", "online unit"},
       {"acme bank", "harbor trust", "summit capital", "crest finance", "pioneer fund"},
       {"ticker", "founded", "chairman", "auditor", "exchange", "employees"},
       {"the bank reported higher revenue this quarter", "operating margin improved on lower funding cost",
        "dividend payments were approved by the board", "tax expense rose with earnings growth",
        "investors welcomed the stronger capital position"},
       "note amounts in thousands of dollars"},
      {"education",
       "school enrollment and graduation statistics",
       "district",
       {"students", "teachers", "graduates", "classes", "dropouts", "scholarships"},
       {{"primary", {"boys", "girls"}}, {"secondary", {"day", "boarding"}}, {"tertiary", {"public", "private"}}},
       {{"elementary", {"grade one", "grade two", "grade three"}},
        {"middle school", {"grade six", "grade seven", "grade eight"}},
        {"high school", {"freshman", "sophomore", "senior"}}},
       {"riverside", "hillcrest", "lakeview", "oakwood", "maple ridge", "pine valley"},
       {"lincoln academy", "jefferson college", "westfield school", "brookside institute", "oxford prep"},
       {"principal", "campus", "mascot", "curriculum", "accreditation", "enrollment"},
       {"enrollment in public schools grew this academic year", "graduation rates rose across every district",
        "teachers reported smaller class sizes", "scholarships helped more students finish school",
        "the ministry published new curriculum guidelines"},
       "note enrollment counted at the start of term"},
      {"health",
       "hospital admissions and patient outcomes",
       "ward",
       {"admissions", "discharges", "beds", "nurses", "surgeries", "visits"},
       {{"inpatient", {"adult", "child"}}, {"outpatient", {"clinic", "emergency"}}, {"staff", {"doctors", "nurses"}}},
       {{"cardiology", {"heart failure", "arrhythmia", "bypass"}},
        {"oncology", {"radiation", "chemotherapy", "screening"}},
        {"pediatrics", {"neonatal", "infant care", "vaccination"}}},
       {"general ward", "maternity", "intensive care", "surgery unit", "rehabilitation", "psychiatry"},
       {"mercy hospital", "st luke clinic", "valley medical", "unity health", "riverside care"},
       {"director", "beds", "specialty", "founded", "accreditation", "ambulances"},
       {"hospital admissions increased during the winter season", "patient outcomes improved after new treatment",
        "nurses handled more emergency visits than last year", "surgery waiting lists fell in most wards",
        "the clinic expanded its vaccination program"},
       "note figures exclude day patients"},
      {"transport",
       "passenger traffic by route and mode",
       "route",
       {"passengers", "trips", "delays", "fares", "vehicles", "distance"},
       {{"rail", {"commuter", "intercity"}}, {"road", {"bus", "coach"}}, {"air", {"domestic flights", "international"}}},
       {{"metro lines", {"red line", "blue line", "green line"}},
        {"bus network", {"express", "local", "night bus"}},
        {"ferry services", {"harbor", "island", "river"}}},
       {"airport link", "central station", "downtown loop", "harbor route", "ring road", "valley line"},
       {"city metro", "coastal rail", "skyway air", "bluebird bus", "harbor ferry"},
       {"operator", "fleet", "depot", "founded", "gauge", "ridership"},
       {"passenger traffic rose on every commuter route", "delays fell after the new timetable",
        "fares were frozen for the coming year", "the operator added vehicles to busy lines",
        "ridership on night services doubled"},
       "note trips counted per direction"},
      {"energy",
       "electricity generation by source",
       "plant",
       {"output", "capacity", "emissions", "fuel", "outages", "demand"},
       {{"renewable", {"solar", "wind"}}, {"fossil", {"coal", "gas"}}, {"other", {"nuclear", "hydro"}}},
       {{"solar farms", {"desert array", "rooftop program", "floating panels"}},
        {"wind parks", {"offshore", "ridge turbines", "coastal turbines"}},
        {"thermal plants", {"coal unit", "gas turbine", "biomass boiler"}}},
       {"northern grid", "southern grid", "eastern grid", "western grid", "island grid", "interconnector"},
       {"sunpeak power", "gale energy", "terra grid", "volt utility", "brightwater hydro"},
       {"operator", "megawatts", "commissioned", "fuel type", "grid", "owner"},
       {"electricity generation from wind reached a record", "solar capacity expanded across the region",
        "emissions from coal plants declined", "grid outages were fewer than expected",
        "demand peaked during the summer heat"},
       "note output in megawatt hours"},
      {"agriculture",
       "crop production and harvest yields",
       "farm",
       {"yield", "acreage", "harvest", "rainfall", "fertilizer", "exports"},
       {{"grains", {"wheat", "corn"}}, {"produce", {"apples", "tomatoes"}}, {"livestock", {"cattle", "poultry"}}},
       {{"cereal crops", {"barley", "oats", "rye"}},
        {"orchards", {"pears", "cherries", "plums"}},
        {"dairy", {"milk", "cheese", "butter"}}},
       {"north valley", "river plain", "highland", "coastal farm", "dry plateau", "delta region"},
       {"green acres", "sunny fields", "golden harvest", "meadow farms", "prairie coop"},
       {"owner", "hectares", "crops", "irrigation", "soil", "cooperative"},
       {"crop yields improved after steady rainfall", "wheat harvest exceeded the seasonal forecast",
        "farmers reduced fertilizer use this season", "exports of grain rose sharply",
        "the cooperative invested in irrigation"},
       "note yields in tonnes per hectare"},
      {"sports",
       "league standings and player statistics",
       "team",
       {"wins", "losses", "goals", "points", "assists", "attendance"},
       {{"home", {"home wins", "home losses"}}, {"away", {"away wins", "away losses"}}, {"season", {"games", "draws"}}},
       {{"eastern conference", {"falcons", "tigers", "wolves"}},
        {"western conference", {"eagles", "bears", "sharks"}},
        {"central division", {"hawks", "lions", "panthers"}}},
       {"first half", "second half", "playoffs", "preseason", "cup games", "friendlies"},
       {"city rovers", "united athletic", "harbor stars", "valley rangers", "metro kings"},
       {"coach", "stadium", "founded", "captain", "league", "colors"},
       {"the league standings tightened after the weekend", "the striker scored twice in the final",
        "attendance grew at every stadium", "the coach praised the defense",
        "fans celebrated the playoff victory"},
       "note points awarded three per win"},
      {"retail",
       "store sales and inventory summary",
       "store",
       {"sales", "returns", "inventory", "customers", "orders", "discounts"},
       {{"online", {"web", "mobile"}}, {"in store", {"counter", "self checkout"}}, {"wholesale", {"bulk", "resale"}}},
       {{"clothing", {"shirts", "shoes", "jackets"}},
        {"electronics", {"phones", "laptops", "cameras"}},
        {"groceries", {"bakery", "produce aisle", "frozen food"}}},
       {"mall outlet", "downtown store", "airport shop", "suburb store", "outlet park", "web shop"},
       {"bright mart", "corner shop", "mega store", "urban outfitters", "fresh market"},
       {"manager", "opened", "floor area", "parking", "hours", "franchise"},
       {"store sales grew during the holiday season", "online orders overtook counter sales",
        "returns dropped after the new policy", "inventory levels were reduced",
        "customers responded well to seasonal discounts"},
       "note sales net of returns"},
  };
  return all;
}

enum class TableType { relational, entity, matrix, list, non_data };

inline const char* type_label(TableType t) {
  switch (t) {
    case TableType::relational: return "R";
    case TableType::entity: return "E";
    case TableType::matrix: return "M";
    case TableType::list: return "L";
    case TableType::non_data: return "ND";
  }
  return "ND";
}

enum class IndentEncoding { attribute, spaces, tabs, column_offset };

struct GeneratedTable {
  Table table;
  TableType type = TableType::relational;
  int topic = 0;
  std::map<std::pair<int, int>, std::string> cell_labels;  // CTC, general taxonomy
  HeaderTree expected_top{Orientation::top};
  HeaderTree expected_left{Orientation::left};
  bool hierarchical = false;
  bool formula_hierarchy = false;
};

namespace detail {

inline CellFeatures& put(Table& t, int r, int c, const std::string& text) {
  CellFeatures& cell = t.at(r, c);
  cell.text = text;
  return cell;
}

template <class T>
const T& pick(const std::vector<T>& v, Rng& rng) {
  return v[rng.below(v.size())];
}

/// Ordered random subset of size k.
inline std::vector<std::size_t> ordered_subset(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  rng.shuffle(idx);
  idx.resize(std::min(k, n));
  std::sort(idx.begin(), idx.end());
  return idx;
}

inline std::vector<std::string> make_context(const Topic& tp, Rng& rng) {
  std::vector<std::string> ctx = {tp.title};
  const auto chosen = ordered_subset(tp.sentences.size(), 2 + rng.below(2), rng);
  for (std::size_t i : chosen) ctx.push_back(tp.sentences[i]);
  return ctx;
}

/// Value whose leading digit follows the data row, whose magnitude follows
/// the data column, and whose last digit is the data column mod 10.
inline long cell_value(int data_row, int data_col, Rng& rng) {
  long scale = 10;
  for (int k = 0; k < data_col % 3; ++k) scale *= 10;
  const long middle = static_cast<long>(rng.below(static_cast<std::size_t>(scale / 10)));
  return (1 + data_row % 9) * scale + middle * 10 + data_col % 10;
}

inline void flat_trees(GeneratedTable& g) {
  g.expected_top = flat_header_tree(g.table, Orientation::top);
  g.expected_left = flat_header_tree(g.table, Orientation::left);
}

inline void bold_header_row(Table& t, int r) {
  for (int c = 0; c < t.n_cols(); ++c) {
    if (!t.is_anchor(r, c)) continue;
    t.at(r, c).is_bold = true;
    t.at(r, c).border_bottom = true;
  }
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Matrix tables

/// One left-header row of a matrix table.
struct RowPlan {
  enum class Kind { data, heading, total, notes };
  Kind kind = Kind::data;
  std::string label;
  int level = 0;
  int parent = -1;           // plan index of the tree parent, -1 for the root
  int sum_first = -1;        // plan indices aggregated by a formula row
  int sum_last = -1;
};

struct MatrixOptions {
  int top_rows = 1;          // 1 or 2
  int left_cols = 1;         // 1 or 2; 2 encodes levels by column offset
  IndentEncoding encoding = IndentEncoding::attribute;
  bool formula_only = false;
  bool notes = false;
  /// Indented groups whose members are aggregated by a later total row:
  /// formulas override indentation.
  bool conflict = false;
};

namespace detail {

inline std::string indent_text(const std::string& label, int level, IndentEncoding enc) {
  if (enc == IndentEncoding::spaces) return std::string(static_cast<std::size_t>(4 * level), ' ') + label;
  if (enc == IndentEncoding::tabs) return std::string(static_cast<std::size_t>(level), '\t') + label;
  return label;
}

inline std::vector<RowPlan> plan_rows(const Topic& tp, const MatrixOptions& o, Rng& rng) {
  std::vector<RowPlan> plan;
  auto push = [&](RowPlan p) {
    plan.push_back(std::move(p));
    return static_cast<int>(plan.size()) - 1;
  };
  if (o.conflict) {
    // Heading at level 0, members indented below it, then a total row at
    // level 0 that aggregates the members.
    const auto& grp = pick(tp.row_groups, rng);
    const int head = push({RowPlan::Kind::heading, grp.first, 0, -1});
    const int first = static_cast<int>(plan.size());
    for (const auto& child : grp.second) push({RowPlan::Kind::data, child, 1, head});
    const int last = static_cast<int>(plan.size()) - 1;
    const int total = push({RowPlan::Kind::total, "total " + grp.first, 0, -1, first, last});
    for (int i = first; i <= last; ++i) plan[static_cast<std::size_t>(i)].parent = total;
    for (int i = first; i <= last; ++i) plan[static_cast<std::size_t>(i)].level = 1;
    for (const auto i : ordered_subset(tp.rows.size(), 2, rng)) push({RowPlan::Kind::data, tp.rows[i], 0, -1});
  } else if (o.formula_only) {
    const auto labels = ordered_subset(tp.rows.size(), 4 + rng.below(3), rng);
    std::size_t next = 0;
    for (int run = 0; run < 2 && next < labels.size(); ++run) {
      const std::size_t len = std::min<std::size_t>(2 + rng.below(2), labels.size() - next);
      const int first = static_cast<int>(plan.size());
      for (std::size_t k = 0; k < len; ++k) push({RowPlan::Kind::data, tp.rows[labels[next++]], 0, -1});
      const int last = static_cast<int>(plan.size()) - 1;
      if (last - first + 1 < 2) break;
      const int total = push({RowPlan::Kind::total, run == 0 ? "subtotal" : "total", 0, -1, first, last});
      for (int i = first; i <= last; ++i) plan[static_cast<std::size_t>(i)].parent = total;
    }
  } else {
    const bool deep_ok = o.left_cols == 1;
    const auto groups = ordered_subset(tp.row_groups.size(), 2 + rng.below(2), rng);
    for (std::size_t gi : groups) {
      const auto& grp = tp.row_groups[gi];
      const bool deep = deep_ok && rng.bernoulli(0.3);
      const int head = push({RowPlan::Kind::heading, grp.first, 0, -1});
      const auto kids = ordered_subset(grp.second.size(), 2 + rng.below(2), rng);
      const int kid_first = static_cast<int>(plan.size());
      for (std::size_t k = 0; k < kids.size(); ++k) {
        const int kid = push({RowPlan::Kind::data, grp.second[kids[k]], 1, head});
        if (deep && k == 0) {
          plan[static_cast<std::size_t>(kid)].kind = RowPlan::Kind::heading;
          const int gfirst = static_cast<int>(plan.size());
          push({RowPlan::Kind::data, "urban", 2, kid});
          push({RowPlan::Kind::data, "rural", 2, kid});
          plan[static_cast<std::size_t>(kid)].sum_first = gfirst;
          plan[static_cast<std::size_t>(kid)].sum_last = gfirst + 1;
        }
      }
      const int kid_last = static_cast<int>(plan.size()) - 1;
      if (!deep && rng.bernoulli(0.5)) {
        plan[static_cast<std::size_t>(head)].sum_first = kid_first;
        plan[static_cast<std::size_t>(head)].sum_last = kid_last;
      }
    }
  }
  if (o.notes) push({RowPlan::Kind::notes, tp.note, 0, -1});
  return plan;
}

}  // namespace detail

inline GeneratedTable generate_matrix(int topic, const MatrixOptions& o, Rng& rng) {
  const Topic& tp = topics()[static_cast<std::size_t>(topic)];
  // Top header layout.
  std::vector<std::string> leaves;
  std::vector<std::pair<std::string, int>> groups;  // label, leaf count
  if (o.top_rows == 1) {
    for (std::size_t i : detail::ordered_subset(tp.columns.size(), 3 + rng.below(3), rng)) leaves.push_back(tp.columns[i]);
  } else {
    for (std::size_t i : detail::ordered_subset(tp.column_groups.size(), 2, rng)) {
      groups.emplace_back(tp.column_groups[i].first, 2);
      for (const auto& leaf : tp.column_groups[i].second) leaves.push_back(leaf);
    }
  }
  const auto plan = detail::plan_rows(tp, o, rng);
  const int hr = o.top_rows;
  const int hc = o.left_cols;
  const int n_data_cols = static_cast<int>(leaves.size());
  GeneratedTable g;
  g.type = TableType::matrix;
  g.topic = topic;
  g.hierarchical = true;
  g.formula_hierarchy = o.formula_only || o.conflict;
  Table t(hr + static_cast<int>(plan.size()), hc + n_data_cols);
  t.top_header_rows = hr;
  t.left_header_cols = hc;
  t.context = detail::make_context(tp, rng);

  // Corner.
  auto& corner = detail::put(t, 0, 0, tp.corner);
  corner.merged_rows = hr;
  corner.merged_cols = hc;
  corner.is_bold = true;
  g.cell_labels[{0, 0}] = "MD";

  // Top header and its tree.
  HeaderTree top(Orientation::top);
  if (hr == 1) {
    for (int k = 0; k < n_data_cols; ++k) {
      detail::put(t, 0, hc + k, leaves[static_cast<std::size_t>(k)]);
      g.cell_labels[{0, hc + k}] = "TA";
      top.add_owned(top.add_child(HeaderTree::root(), 0, hc + k), hc + k);
    }
  } else {
    int c = hc;
    for (const auto& [label, count] : groups) {
      auto& cell = detail::put(t, 0, c, label);
      cell.merged_cols = count;
      g.cell_labels[{0, c}] = "TA";
      const int node = top.add_child(HeaderTree::root(), 0, c);
      for (int k = 0; k < count; ++k, ++c) {
        detail::put(t, 1, c, leaves[static_cast<std::size_t>(c - hc)]);
        g.cell_labels[{1, c}] = "TA";
        top.add_owned(top.add_child(node, 1, c), c);
      }
    }
  }
  t.rebuild_index();
  for (int r = 0; r < hr; ++r) detail::bold_header_row(t, r);

  // Left header rows and their tree.
  HeaderTree left(Orientation::left);
  std::vector<int> node_of(plan.size(), -1);
  // A row's tree parent is created before the row itself, so a total row
  // takes the place of its first member among its siblings, as formula
  // re-parenting leaves it.
  std::function<int(int)> ensure_node = [&](int i) -> int {
    auto& slot = node_of[static_cast<std::size_t>(i)];
    if (slot >= 0) return slot;
    const RowPlan& p = plan[static_cast<std::size_t>(i)];
    const int parent = p.parent < 0 ? HeaderTree::root() : ensure_node(p.parent);
    const int id = left.add_child(parent, hr + i, 0);
    left.add_owned(id, hr + i);
    node_of[static_cast<std::size_t>(i)] = id;
    return id;
  };
  for (std::size_t i = 0; i < plan.size(); ++i) ensure_node(static_cast<int>(i));

  std::vector<std::vector<long>> values(plan.size(), std::vector<long>(static_cast<std::size_t>(n_data_cols), 0));
  int data_row = 0;
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const RowPlan& p = plan[i];
    const int r = hr + static_cast<int>(i);
    if (p.kind == RowPlan::Kind::notes) {
      auto& cell = detail::put(t, r, 0, p.label);
      cell.merged_cols = t.n_cols();
      g.cell_labels[{r, 0}] = "N";
      continue;
    }
    const int level = p.level;
    const int col = hc == 2 ? std::min(level, 1) : 0;
    auto& label = detail::put(t, r, col, detail::indent_text(p.label, hc == 2 ? 0 : level,
                                                            hc == 2 ? IndentEncoding::column_offset : o.encoding));
    if (hc == 1 && o.encoding == IndentEncoding::attribute && level > 0) label.indent_level = level;
    if (p.kind == RowPlan::Kind::total || p.kind == RowPlan::Kind::heading) label.is_bold = true;
    g.cell_labels[{r, col}] = "LA";
    if (p.kind == RowPlan::Kind::data) {
      for (int k = 0; k < n_data_cols; ++k) values[i][static_cast<std::size_t>(k)] = detail::cell_value(data_row, k, rng);
      ++data_row;
    }
  }
  t.rebuild_index();
  // Aggregates, deepest first so nested sums see their members' values.
  std::function<long(std::size_t, int)> value_of = [&](std::size_t i, int k) -> long {
    const RowPlan& p = plan[i];
    if (p.sum_first < 0) return values[i][static_cast<std::size_t>(k)];
    long s = 0;
    for (int m = p.sum_first; m <= p.sum_last; ++m) {
      const RowPlan& q = plan[static_cast<std::size_t>(m)];
      if (q.level == p.level + 1 || p.kind == RowPlan::Kind::total) s += value_of(static_cast<std::size_t>(m), k);
    }
    return s;
  };
  for (std::size_t i = 0; i < plan.size(); ++i) {
    const RowPlan& p = plan[i];
    const int r = hr + static_cast<int>(i);
    if (p.kind == RowPlan::Kind::notes) continue;
    if (p.kind == RowPlan::Kind::heading && p.sum_first < 0) continue;  // heading without data
    for (int k = 0; k < n_data_cols; ++k) {
      const int c = hc + k;
      auto& cell = detail::put(t, r, c, std::to_string(value_of(i, k)));
      if (p.sum_first >= 0) {
        cell.formula_text = "=SUM(" + a1_name(hr + p.sum_first, c) + ":" + a1_name(hr + p.sum_last, c) + ")";
        cell.has_formula = true;
        g.cell_labels[{r, c}] = "B";
      } else {
        g.cell_labels[{r, c}] = "D";
      }
    }
  }
  g.table = std::move(t);
  g.expected_top = std::move(top);
  g.expected_left = std::move(left);
  return g;
}

// ---------------------------------------------------------------------------
// Flat table types

inline GeneratedTable generate_relational(int topic, Rng& rng) {
  const Topic& tp = topics()[static_cast<std::size_t>(topic)];
  const auto cols = detail::ordered_subset(tp.columns.size(), 3 + rng.below(2), rng);
  const auto items = detail::ordered_subset(tp.items.size(), 4 + rng.below(2), rng);
  GeneratedTable g;
  g.type = TableType::relational;
  g.topic = topic;
  Table t(1 + static_cast<int>(items.size()), 1 + static_cast<int>(cols.size()));
  t.top_header_rows = 1;
  t.left_header_cols = 0;
  t.context = detail::make_context(tp, rng);
  detail::put(t, 0, 0, "name");
  g.cell_labels[{0, 0}] = "TA";
  for (std::size_t k = 0; k < cols.size(); ++k) {
    detail::put(t, 0, 1 + static_cast<int>(k), tp.columns[cols[k]]);
    g.cell_labels[{0, 1 + static_cast<int>(k)}] = "TA";
  }
  detail::bold_header_row(t, 0);
  for (std::size_t i = 0; i < items.size(); ++i) {
    const int r = 1 + static_cast<int>(i);
    detail::put(t, r, 0, tp.items[items[i]]);
    g.cell_labels[{r, 0}] = "D";
    for (std::size_t k = 0; k < cols.size(); ++k) {
      detail::put(t, r, 1 + static_cast<int>(k), std::to_string(detail::cell_value(static_cast<int>(i), static_cast<int>(k), rng)));
      g.cell_labels[{r, 1 + static_cast<int>(k)}] = "D";
    }
  }
  g.table = std::move(t);
  detail::flat_trees(g);
  return g;
}

inline GeneratedTable generate_entity(int topic, Rng& rng) {
  const Topic& tp = topics()[static_cast<std::size_t>(topic)];
  const auto attrs = detail::ordered_subset(tp.attributes.size(), 4 + rng.below(2), rng);
  const auto items = detail::ordered_subset(tp.items.size(), 3, rng);
  GeneratedTable g;
  g.type = TableType::entity;
  g.topic = topic;
  Table t(static_cast<int>(attrs.size()), 1 + static_cast<int>(items.size()));
  t.top_header_rows = 0;
  t.left_header_cols = 1;
  t.context = detail::make_context(tp, rng);
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    const int r = static_cast<int>(i);
    auto& cell = detail::put(t, r, 0, tp.attributes[attrs[i]]);
    cell.is_bold = true;
    cell.border_right = true;
    g.cell_labels[{r, 0}] = "LA";
    for (std::size_t k = 0; k < items.size(); ++k) {
      const int c = 1 + static_cast<int>(k);
      const std::string text = (i + k) % 2 == 0 ? tp.items[(items[k] + i) % tp.items.size()]
                                                : std::to_string(detail::cell_value(r, c, rng));
      detail::put(t, r, c, text);
      g.cell_labels[{r, c}] = "D";
    }
  }
  g.table = std::move(t);
  detail::flat_trees(g);
  return g;
}

inline GeneratedTable generate_list(int topic, Rng& rng) {
  const Topic& tp = topics()[static_cast<std::size_t>(topic)];
  static const std::vector<std::string> heads = {"item", "category", "description", "status", "source"};
  const auto cols = detail::ordered_subset(heads.size(), 4, rng);
  const int n_rows = 4 + static_cast<int>(rng.below(3));
  GeneratedTable g;
  g.type = TableType::list;
  g.topic = topic;
  Table t(1 + n_rows, static_cast<int>(cols.size()));
  t.top_header_rows = 1;
  t.left_header_cols = 0;
  t.context = detail::make_context(tp, rng);
  for (std::size_t k = 0; k < cols.size(); ++k) {
    detail::put(t, 0, static_cast<int>(k), heads[cols[k]]);
    g.cell_labels[{0, static_cast<int>(k)}] = "TA";
  }
  detail::bold_header_row(t, 0);
  for (int r = 1; r <= n_rows; ++r) {
    for (int c = 0; c < t.n_cols(); ++c) {
      std::string text;
      switch (c % 3) {
        case 0: text = detail::pick(tp.items, rng); break;
        case 1: text = detail::pick(tp.rows, rng); break;
        default: text = detail::pick(tp.attributes, rng); break;
      }
      detail::put(t, r, c, text);
      g.cell_labels[{r, c}] = "D";
    }
  }
  g.table = std::move(t);
  detail::flat_trees(g);
  return g;
}

inline GeneratedTable generate_non_data(int topic, Rng& rng) {
  const Topic& tp = topics()[static_cast<std::size_t>(topic)];
  static const std::vector<std::string> nav = {"home", "about us", "services", "contact", "login", "search"};
  static const std::vector<std::string> body = {"click here", "read more", "next page", "back to top",
                                                "subscribe", "privacy policy", "sitemap", ""};
  const int n_cols = 4 + static_cast<int>(rng.below(2));
  const int n_rows = 4 + static_cast<int>(rng.below(2));
  GeneratedTable g;
  g.type = TableType::non_data;
  g.topic = topic;
  Table t(n_rows, n_cols);
  t.top_header_rows = 1;
  t.left_header_cols = 0;
  t.context = detail::make_context(tp, rng);
  const auto navs = detail::ordered_subset(nav.size(), static_cast<std::size_t>(n_cols), rng);
  for (int c = 0; c < n_cols; ++c) {
    auto& cell = detail::put(t, 0, c, nav[navs[static_cast<std::size_t>(c)]]);
    cell.bg_is_white = false;
    cell.font_is_black = false;
  }
  for (int r = 1; r < n_rows; ++r) {
    for (int c = 0; c < n_cols; ++c) {
      // Each column cycles through the link list from an offset set by its header.
      const std::size_t k = (navs[static_cast<std::size_t>(c)] + static_cast<std::size_t>(r) - 1) % body.size();
      auto& cell = detail::put(t, r, c, body[k]);
      cell.bg_is_white = rng.bernoulli(0.5);
    }
  }
  g.table = std::move(t);
  detail::flat_trees(g);
  return g;
}

/// One table of a random type; matrix tables make up about 40%.
inline GeneratedTable generate_table(Rng& rng) {
  const int topic = static_cast<int>(rng.below(topics().size()));
  const double u = rng.uniform();
  if (u < 0.4) {
    MatrixOptions o;
    o.top_rows = rng.bernoulli(0.5) ? 1 : 2;
    o.left_cols = rng.bernoulli(0.25) ? 2 : 1;
    o.encoding = static_cast<IndentEncoding>(rng.below(3));
    o.formula_only = rng.bernoulli(0.3);
    o.notes = rng.bernoulli(0.5);
    return generate_matrix(topic, o, rng);
  }
  if (u < 0.55) return generate_relational(topic, rng);
  if (u < 0.7) return generate_entity(topic, rng);
  if (u < 0.85) return generate_list(topic, rng);
  return generate_non_data(topic, rng);
}

inline std::vector<GeneratedTable> generate_corpus(int n_tables, std::uint64_t seed) {
  std::vector<GeneratedTable> out;
  out.reserve(static_cast<std::size_t>(std::max(n_tables, 0)));
  for (int i = 0; i < n_tables; ++i) {
    Rng rng(mix_seed(seed, static_cast<std::uint64_t>(i)));
    out.push_back(generate_table(rng));
  }
  return out;
}

/// Indented members that a later total row aggregates; the formula decides
/// the expected left tree.
inline GeneratedTable generate_formula_conflict(std::uint64_t seed) {
  Rng rng(seed);
  MatrixOptions o;
  o.conflict = true;
  o.encoding = static_cast<IndentEncoding>(rng.below(3));
  o.notes = rng.bernoulli(0.5);
  return generate_matrix(static_cast<int>(rng.below(topics().size())), o, rng);
}

/// True when both extracted header trees equal the generating trees.
inline bool round_trips(const GeneratedTable& g) {
  const ExtractedTrees got = extract_trees(g.table);
  return got.top.canonical() == g.expected_top.canonical() && got.left.canonical() == g.expected_left.canonical();
}

// ---------------------------------------------------------------------------
// Files

inline std::string table_file_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "tables/table_%05d.json", i);
  return buf;
}

/// Every non-numeric text of the corpus, for vocabulary building.
inline std::vector<std::string> corpus_texts(const std::vector<GeneratedTable>& corpus) {
  std::vector<std::string> texts;
  for (const auto& g : corpus) {
    for (const auto& c : g.table.context) texts.push_back(c);
    for (const auto& cell : g.table.cells()) {
      if (!cell.text.empty() && !parse_numeral(cell.text)) texts.push_back(cell.text);
    }
  }
  return texts;
}

/// Writes tables/*.json, labels_ctc.json, labels_ttc.json, corpus.json and
/// vocab.txt under dir.
inline void write_corpus(const std::string& dir, const std::vector<GeneratedTable>& corpus) {
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(dir) / "tables");
  nlohmann::json ctc = nlohmann::json::object();
  nlohmann::json ttc = nlohmann::json::object();
  nlohmann::json index = nlohmann::json::array();
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const auto& g = corpus[i];
    const std::string name = table_file_name(static_cast<int>(i));
    std::ofstream(fs::path(dir) / name) << table_to_json(g.table).dump(1) << '\n';
    if (g.type != TableType::non_data) {
      nlohmann::json cells = nlohmann::json::object();
      for (const auto& [rc, label] : g.cell_labels) {
        cells[std::to_string(rc.first) + "," + std::to_string(rc.second)] = label;
      }
      ctc[name] = {{"cell_labels", cells}};
    }
    ttc[name] = {{"table_label", type_label(g.type)}};
    index.push_back({{"file", name},
                     {"topic", topics()[static_cast<std::size_t>(g.topic)].name},
                     {"type", type_label(g.type)}});
  }
  std::ofstream(fs::path(dir) / "labels_ctc.json") << ctc.dump(1) << '\n';
  std::ofstream(fs::path(dir) / "labels_ttc.json") << ttc.dump(1) << '\n';
  std::ofstream(fs::path(dir) / "corpus.json") << index.dump(1) << '\n';
  std::ofstream vocab(fs::path(dir) / "vocab.txt");
  build_vocabulary(corpus_texts(corpus), 2000).save(vocab);
}

}  // namespace tableweave
