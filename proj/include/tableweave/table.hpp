#pragma once

// Table representation, JSON ingestion, corpus filtering and the per-cell
// format schema.

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableweave/common.hpp"

namespace tableweave {

struct CellFeatures {
  std::string text;
  int row = 0;
  int col = 0;
  int merged_rows = 1;
  int merged_cols = 1;
  bool has_formula = false;
  std::optional<std::string> formula_text;
  bool is_date = false;
  bool is_bold = false;
  bool bg_is_white = true;
  bool font_is_black = true;
  bool border_top = false;
  bool border_bottom = false;
  bool border_left = false;
  bool border_right = false;
  std::optional<int> indent_level;

  bool operator==(const CellFeatures&) const = default;

  bool is_default_content() const {
    return text.empty() && merged_rows == 1 && merged_cols == 1 && !has_formula && !is_date &&
           !is_bold && bg_is_white && font_is_black && !border_top && !border_bottom &&
           !border_left && !border_right && !indent_level.has_value();
  }
};

using FormatVector = std::array<int, kFormatFeatures>;

/// Upper bound (inclusive) of every entry of a format vector.
inline constexpr FormatVector kFormatUpperBounds = {kMaxSpanFeature, kMaxSpanFeature, 1, 1, 1, 1,
                                                    1, 1, 1, 1, 1};

/// Order: merged rows, merged cols (both clipped to [1, 8]), date, formula,
/// bold, white background, black font, borders top/bottom/left/right.
inline FormatVector format_vector(const CellFeatures& c) {
  auto clip = [](int v) { return std::clamp(v, 1, kMaxSpanFeature); };
  return {clip(c.merged_rows), clip(c.merged_cols), c.is_date ? 1 : 0, c.has_formula ? 1 : 0,
          c.is_bold ? 1 : 0,   c.bg_is_white ? 1 : 0, c.font_is_black ? 1 : 0,
          c.border_top ? 1 : 0, c.border_bottom ? 1 : 0, c.border_left ? 1 : 0,
          c.border_right ? 1 : 0};
}

class Table {
public:
  Table() = default;

  Table(int n_rows, int n_cols) : n_rows_(n_rows), n_cols_(n_cols) {
    if (n_rows <= 0 || n_cols <= 0) throw ParseError("table dimensions must be positive");
    cells_.resize(static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols));
    for (int r = 0; r < n_rows; ++r) {
      for (int c = 0; c < n_cols; ++c) {
        at(r, c).row = r;
        at(r, c).col = c;
      }
    }
    anchors_.resize(cells_.size());
    rebuild_index();
  }

  int n_rows() const { return n_rows_; }
  int n_cols() const { return n_cols_; }
  int top_header_rows = 1;
  int left_header_cols = 1;
  std::vector<std::string> context;

  CellFeatures& at(int r, int c) { return cells_[index(r, c)]; }
  const CellFeatures& at(int r, int c) const { return cells_[index(r, c)]; }
  const std::vector<CellFeatures>& cells() const { return cells_; }

  bool in_grid(int r, int c) const { return r >= 0 && c >= 0 && r < n_rows_ && c < n_cols_; }

  std::size_t index(int r, int c) const {
    if (!in_grid(r, c)) {
      throw Error("cell (" + std::to_string(r) + "," + std::to_string(c) + ") is outside the " +
                  std::to_string(n_rows_) + "x" + std::to_string(n_cols_) + " grid");
    }
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(n_cols_) +
           static_cast<std::size_t>(c);
  }

  /// Flat index of the merge anchor covering (r, c); the cell itself when unmerged.
  std::size_t anchor_index(int r, int c) const { return anchors_[index(r, c)]; }
  bool is_anchor(int r, int c) const { return anchor_index(r, c) == index(r, c); }
  const CellFeatures& anchor_of(int r, int c) const { return cells_[anchor_index(r, c)]; }

  bool is_header(int r, int c) const { return r < top_header_rows || c < left_header_cols; }

  /// Recomputes the merge coverage map. Throws ParseError when merges leave
  /// the grid or overlap.
  void rebuild_index() {
    std::fill(anchors_.begin(), anchors_.end(), kNoAnchor);
    for (int r = 0; r < n_rows_; ++r) {
      for (int c = 0; c < n_cols_; ++c) {
        const CellFeatures& cell = at(r, c);
        if (cell.merged_rows < 1 || cell.merged_cols < 1) {
          throw ParseError("cell (" + std::to_string(r) + "," + std::to_string(c) +
                           "): merge spans must be positive");
        }
        if (r + cell.merged_rows > n_rows_ || c + cell.merged_cols > n_cols_) {
          throw ParseError("cell (" + std::to_string(r) + "," + std::to_string(c) +
                           "): merged region leaves the grid");
        }
      }
    }
    for (int r = 0; r < n_rows_; ++r) {
      for (int c = 0; c < n_cols_; ++c) {
        const std::size_t self = index(r, c);
        if (anchors_[self] != kNoAnchor && anchors_[self] != self) {
          // Covered by an earlier merge: it must not declare its own region.
          if (at(r, c).merged_rows > 1 || at(r, c).merged_cols > 1) {
            throw ParseError("overlapping merge at cell (" + std::to_string(r) + "," +
                             std::to_string(c) + ")");
          }
          continue;
        }
        const CellFeatures& cell = at(r, c);
        for (int dr = 0; dr < cell.merged_rows; ++dr) {
          for (int dc = 0; dc < cell.merged_cols; ++dc) {
            const std::size_t covered = index(r + dr, c + dc);
            if (anchors_[covered] != kNoAnchor) {
              throw ParseError("overlapping merge at cell (" + std::to_string(r + dr) + "," +
                               std::to_string(c + dc) + ")");
            }
            anchors_[covered] = self;
          }
        }
      }
    }
  }

  bool operator==(const Table& o) const {
    return n_rows_ == o.n_rows_ && n_cols_ == o.n_cols_ && top_header_rows == o.top_header_rows &&
           left_header_cols == o.left_header_cols && context == o.context && cells_ == o.cells_;
  }

private:
  static constexpr std::size_t kNoAnchor = static_cast<std::size_t>(-1);
  int n_rows_ = 0;
  int n_cols_ = 0;
  std::vector<CellFeatures> cells_;
  std::vector<std::size_t> anchors_;
};

namespace detail {

inline int json_flag(const nlohmann::json& cell, const char* key, int fallback, int r, int c) {
  if (!cell.contains(key)) return fallback;
  const auto& v = cell.at(key);
  if (!v.is_number_integer() || (v.get<int>() != 0 && v.get<int>() != 1)) {
    throw ParseError(std::string("cell (") + std::to_string(r) + "," + std::to_string(c) +
                     "): field '" + key + "' must be 0 or 1");
  }
  return v.get<int>();
}

inline int json_int(const nlohmann::json& obj, const char* key) {
  if (!obj.contains(key) || !obj.at(key).is_number_integer()) {
    throw ParseError(std::string("missing or non-integer field '") + key + "'");
  }
  return obj.at(key).get<int>();
}

}  // namespace detail

/// Builds a table from the JSON interchange schema. Cells absent from the
/// list are empty default cells; missing header annotations fall back to one
/// header row and one header column.
inline Table parse_table(const nlohmann::json& doc) {
  if (!doc.is_object()) throw ParseError("table document must be a JSON object");
  const int n_rows = detail::json_int(doc, "n_rows");
  const int n_cols = detail::json_int(doc, "n_cols");
  if (n_rows <= 0 || n_cols <= 0) throw ParseError("n_rows and n_cols must be positive");
  Table t(n_rows, n_cols);
  t.top_header_rows = doc.contains("top_header_rows") ? detail::json_int(doc, "top_header_rows") : 1;
  t.left_header_cols =
      doc.contains("left_header_cols") ? detail::json_int(doc, "left_header_cols") : 1;
  if (t.top_header_rows < 0 || t.left_header_cols < 0) {
    throw ParseError("header sizes must be non-negative");
  }
  if (doc.contains("context")) {
    for (const auto& seg : doc.at("context")) {
      if (!seg.is_string()) throw ParseError("context entries must be strings");
      t.context.push_back(seg.get<std::string>());
    }
  }
  std::vector<bool> declared(static_cast<std::size_t>(n_rows) * static_cast<std::size_t>(n_cols));
  if (doc.contains("cells")) {
    if (!doc.at("cells").is_array()) throw ParseError("'cells' must be an array");
    for (const auto& jc : doc.at("cells")) {
      const int r = detail::json_int(jc, "row");
      const int c = detail::json_int(jc, "col");
      if (!t.in_grid(r, c)) {
        throw ParseError("cell (" + std::to_string(r) + "," + std::to_string(c) +
                         ") is outside the grid");
      }
      const std::size_t idx = t.index(r, c);
      if (declared[idx]) {
        throw ParseError("cell (" + std::to_string(r) + "," + std::to_string(c) +
                         ") declared twice");
      }
      declared[idx] = true;
      CellFeatures& cell = t.at(r, c);
      if (jc.contains("text")) {
        if (!jc.at("text").is_string()) throw ParseError("cell text must be a string");
        cell.text = jc.at("text").get<std::string>();
      }
      if (jc.contains("merged_rows")) cell.merged_rows = detail::json_int(jc, "merged_rows");
      if (jc.contains("merged_cols")) cell.merged_cols = detail::json_int(jc, "merged_cols");
      if (jc.contains("formula") && !jc.at("formula").is_null()) {
        cell.formula_text = jc.at("formula").get<std::string>();
        cell.has_formula = true;
      }
      cell.is_date = detail::json_flag(jc, "is_date", 0, r, c) != 0;
      cell.is_bold = detail::json_flag(jc, "bold", 0, r, c) != 0;
      cell.bg_is_white = detail::json_flag(jc, "bg_white", 1, r, c) != 0;
      cell.font_is_black = detail::json_flag(jc, "font_black", 1, r, c) != 0;
      if (jc.contains("borders")) {
        const auto& b = jc.at("borders");
        if (!b.is_array() || b.size() != 4) {
          throw ParseError("cell (" + std::to_string(r) + "," + std::to_string(c) +
                           "): borders must be four 0/1 flags");
        }
        std::array<bool, 4> flags{};
        for (std::size_t i = 0; i < 4; ++i) {
          if (!b[i].is_number_integer() || (b[i].get<int>() != 0 && b[i].get<int>() != 1)) {
            throw ParseError("cell (" + std::to_string(r) + "," + std::to_string(c) +
                             "): borders must be four 0/1 flags");
          }
          flags[i] = b[i].get<int>() == 1;
        }
        cell.border_top = flags[0];
        cell.border_bottom = flags[1];
        cell.border_left = flags[2];
        cell.border_right = flags[3];
      }
      if (jc.contains("indent")) {
        const int indent = detail::json_int(jc, "indent");
        if (indent < 0) throw ParseError("indent must be non-negative");
        cell.indent_level = indent;
      }
    }
  }
  // A declared cell inside another cell's merged region is an overlap even
  // when it carries no span of its own.
  t.rebuild_index();
  for (int r = 0; r < n_rows; ++r) {
    for (int c = 0; c < n_cols; ++c) {
      if (!t.is_anchor(r, c) && declared[t.index(r, c)]) {
        throw ParseError("overlapping merge at cell (" + std::to_string(r) + "," +
                         std::to_string(c) + ")");
      }
    }
  }
  return t;
}

inline Table parse_table(std::string_view json_text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("malformed JSON: ") + e.what());
  }
  return parse_table(doc);
}

inline nlohmann::json table_to_json(const Table& t) {
  nlohmann::json doc;
  doc["n_rows"] = t.n_rows();
  doc["n_cols"] = t.n_cols();
  doc["top_header_rows"] = t.top_header_rows;
  doc["left_header_cols"] = t.left_header_cols;
  doc["context"] = t.context;
  nlohmann::json cells = nlohmann::json::array();
  for (const CellFeatures& c : t.cells()) {
    if (c.is_default_content()) continue;
    nlohmann::json jc;
    jc["row"] = c.row;
    jc["col"] = c.col;
    jc["text"] = c.text;
    if (c.merged_rows != 1) jc["merged_rows"] = c.merged_rows;
    if (c.merged_cols != 1) jc["merged_cols"] = c.merged_cols;
    if (c.formula_text) jc["formula"] = *c.formula_text;
    if (c.is_date) jc["is_date"] = 1;
    if (c.is_bold) jc["bold"] = 1;
    if (!c.bg_is_white) jc["bg_white"] = 0;
    if (!c.font_is_black) jc["font_black"] = 0;
    if (c.border_top || c.border_bottom || c.border_left || c.border_right) {
      jc["borders"] = {c.border_top ? 1 : 0, c.border_bottom ? 1 : 0, c.border_left ? 1 : 0,
                       c.border_right ? 1 : 0};
    }
    if (c.indent_level) jc["indent"] = *c.indent_level;
    cells.push_back(std::move(jc));
  }
  doc["cells"] = std::move(cells);
  return doc;
}

struct FilterResult {
  bool accepted = true;
  std::string reason;  // empty when accepted
};

/// Corpus admission rules: size bounds, header depth bounds, and at least
/// one header region.
inline FilterResult filter_table(const Table& t) {
  if (t.n_rows() < 4) return {false, "rows < 4"};
  if (t.n_cols() < 4) return {false, "cols < 4"};
  if (t.n_rows() > 512) return {false, "rows > 512"};
  if (t.n_cols() > 128) return {false, "cols > 128"};
  if (t.top_header_rows > 5) return {false, "top header rows > 5"};
  if (t.left_header_cols > 5) return {false, "left header cols > 5"};
  if (t.top_header_rows == 0 && t.left_header_cols == 0) return {false, "no header"};
  return {};
}

}  // namespace tableweave
