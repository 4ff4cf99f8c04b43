#pragma once

// Input embedding: token + number + in-cell position + in-table position +
// format, all in R^H and summed per sequence position.

#include <string>
#include <vector>

#include "tableweave/autograd.hpp"
#include "tableweave/bitree.hpp"
#include "tableweave/model.hpp"
#include "tableweave/tokenizer.hpp"

namespace tableweave {

/// Row offset of tree level i inside the stacked level tables W_t / W_l.
inline constexpr int level_offset(int level) {
  int off = 0;
  for (int i = 0; i < level; ++i) off += kMaxDegree[static_cast<std::size_t>(i)];
  return off;
}

namespace detail {

inline std::vector<int> level_indices(const std::vector<PaddedCoordinate>& coords, int level, const char* label) {
  std::vector<int> idx(coords.size());
  const int bound = kMaxDegree[static_cast<std::size_t>(level)];
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const int v = coords[i][static_cast<std::size_t>(level)];
    if (v == kSentinel) {
      idx[i] = -1;
    } else if (v < 0 || v >= bound) {
      throw StructureError(std::string(label) + " coordinate entry " + std::to_string(v) + " at level " +
                           std::to_string(level) + " exceeds G = " + std::to_string(bound));
    } else {
      idx[i] = level_offset(level) + v;
    }
  }
  return idx;
}

inline void check_rowcol(const std::vector<int>& v, const char* label) {
  for (int x : v) {
    if (x < -1 || x >= kMaxRowCol) {
      throw StructureError(std::string(label) + " index " + std::to_string(x) + " exceeds " +
                           std::to_string(kMaxRowCol));
    }
  }
}

inline void one_hot_block(Matrix& m, Eigen::Index row, Eigen::Index start, int width, int index) {
  if (index >= 0 && index < width) m(row, start + index) = 1.0;
}

}  // namespace detail

/// In-table position block, n x H, laid out as
/// [top level 0..L-1 | left level 0..L-1 | column | row].
/// Implicit mode gathers learned level rows; sentinel levels and text
/// positions (row/col -1) contribute zero vectors.
template <class Weights>
Var embed_in_table(Tape& tape, Weights& w, const ModelConfig& cfg, const std::vector<PaddedCoordinate>& top,
                   const std::vector<PaddedCoordinate>& left, const std::vector<int>& rows,
                   const std::vector<int>& cols) {
  const std::size_t n = top.size();
  if (left.size() != n || rows.size() != n || cols.size() != n) throw Error("in-table embedding: length mismatch");
  detail::check_rowcol(rows, "row");
  detail::check_rowcol(cols, "column");
  if (cfg.tree_embedding == TreeEmbedding::implicit) {
    std::vector<Var> parts;
    for (int l = 0; l < kTreeDepth; ++l) {
      parts.push_back(gather_rows(bind(tape, w.tree_top), detail::level_indices(top, l, "top")));
    }
    for (int l = 0; l < kTreeDepth; ++l) {
      parts.push_back(gather_rows(bind(tape, w.tree_left), detail::level_indices(left, l, "left")));
    }
    parts.push_back(gather_rows(bind(tape, w.column), cols));
    parts.push_back(gather_rows(bind(tape, w.row), rows));
    return concat_cols(parts);
  }
  // Explicit mode: a fixed one-hot per level, truncated to the block width.
  Matrix out = Matrix::Zero(static_cast<Eigen::Index>(n), cfg.hidden);
  for (std::size_t i = 0; i < n; ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    for (int l = 0; l < kTreeDepth; ++l) {
      detail::level_indices({top[i]}, l, "top");
      detail::level_indices({left[i]}, l, "left");
      detail::one_hot_block(out, r, l * cfg.tree_dim, cfg.tree_dim, top[i][static_cast<std::size_t>(l)]);
      detail::one_hot_block(out, r, (kTreeDepth + l) * cfg.tree_dim, cfg.tree_dim,
                            left[i][static_cast<std::size_t>(l)]);
    }
    const Eigen::Index rc = 2 * kTreeDepth * cfg.tree_dim;
    detail::one_hot_block(out, r, rc, cfg.rowcol_dim, cols[i]);
    detail::one_hot_block(out, r, rc + cfg.rowcol_dim, cfg.rowcol_dim, rows[i]);
  }
  return tape.constant(std::move(out));
}

/// Concatenation of magnitude, precision, first- and last-digit embeddings.
template <class Weights>
Var embed_numbers(Tape& tape, Weights& w, const std::vector<NumberFeatures>& nf) {
  std::vector<int> mag, pre, fst, lst;
  for (const auto& f : nf) {
    for (int v : {f.magnitude, f.precision, f.first_digit, f.last_digit}) {
      if (v < 0 || v >= kNumberBuckets) throw Error("number feature out of range: " + std::to_string(v));
    }
    mag.push_back(f.magnitude);
    pre.push_back(f.precision);
    fst.push_back(f.first_digit);
    lst.push_back(f.last_digit);
  }
  return concat_cols({gather_rows(bind(tape, w.magnitude), mag), gather_rows(bind(tape, w.precision), pre),
                      gather_rows(bind(tape, w.first_digit), fst), gather_rows(bind(tape, w.last_digit), lst)});
}

template <class Weights>
Var embed_format(Tape& tape, Weights& w, const std::vector<FormatVector>& formats) {
  Matrix x(static_cast<Eigen::Index>(formats.size()), kFormatFeatures);
  for (std::size_t i = 0; i < formats.size(); ++i) {
    for (int k = 0; k < kFormatFeatures; ++k) {
      x(static_cast<Eigen::Index>(i), k) = formats[i][static_cast<std::size_t>(k)];
    }
  }
  return linear(tape.constant(std::move(x)), bind(tape, w.format), bind(tape, w.format_bias));
}

/// Full input embedding of a token sequence, n x H.
template <class Weights>
Var embed_sequence(Tape& tape, Weights& w, const ModelConfig& cfg, const TokenSequence& ts) {
  if (ts.size() == 0) throw Error("cannot embed an empty sequence");
  for (int id : ts.token_ids) {
    if (id < 0 || id >= cfg.vocab_size) throw Error("token id " + std::to_string(id) + " outside the vocabulary");
  }
  for (int p : ts.in_cell_pos) {
    if (p < 0 || p >= kInCellPositions) throw Error("in-cell position " + std::to_string(p) + " out of range");
  }
  Var tok = gather_rows(bind(tape, w.token), ts.token_ids);
  Var num = embed_numbers(tape, w, ts.numbers);
  Var pos = gather_rows(bind(tape, w.in_cell), ts.in_cell_pos);
  Var tab = embed_in_table(tape, w, cfg, ts.top, ts.left, ts.rows, ts.cols);
  Var fmt = embed_format(tape, w, ts.formats);
  return add_all({tok, num, pos, tab, fmt});
}

}  // namespace tableweave
