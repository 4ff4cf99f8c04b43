#pragma once

// Pre-training objectives: masked language modeling (MLM), cell-level cloze
// (CLC) and table context retrieval (TCR). Each builder rewrites a
// serialized sequence and returns the positions its loss reads.
//
// Build order for one example is TCR, then CLC, then MLM: TCR replaces the
// context text, CLC moves cell contents to the tail, and MLM masks whatever
// cell tokens remain.

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "tableweave/autograd.hpp"
#include "tableweave/table.hpp"
#include "tableweave/tokenizer.hpp"

namespace tableweave {

inline constexpr double kMlmCellRate = 0.15;
inline constexpr double kMlmWholeCellRate = 0.3;
inline constexpr double kClcBlankRate = 0.2;
inline constexpr double kClcHeaderWeight = 4.0;
inline constexpr int kTcrMaxPerKind = 3;

namespace detail {

/// Content positions (in-cell position > 0) of every cell group, keyed by the
/// position of the group's leading [SEP].
struct CellSpan {
  std::size_t lead = 0;
  std::vector<std::size_t> content;
  int cell_id = 0;
  int row = 0;
  int col = 0;
};

inline std::vector<CellSpan> cell_spans(const TokenSequence& ts) {
  std::vector<CellSpan> out;
  for (std::size_t start : ts.group_starts()) {
    if (ts.roles[start] != SegmentRole::cell) continue;
    CellSpan s;
    s.lead = start;
    s.cell_id = ts.cell_ids[start];
    s.row = ts.rows[start];
    s.col = ts.cols[start];
    for (std::size_t i = start + 1; i < ts.size() && ts.cell_ids[i] == s.cell_id && ts.roles[i] == SegmentRole::cell;
         ++i) {
      s.content.push_back(i);
    }
    out.push_back(std::move(s));
  }
  return out;
}

inline int next_tail_index(const TokenSequence& ts) {
  int next = 0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.roles[i] == SegmentRole::tail_text) next = std::max(next, -2 - ts.cell_ids[i] + 1);
  }
  return next;
}

/// Draws one index with probability proportional to weights[i] over `pool`.
inline std::size_t weighted_pick(const std::vector<std::size_t>& pool, const std::vector<double>& weights, Rng& rng) {
  double total = 0.0;
  for (std::size_t i : pool) total += weights[i];
  double u = rng.uniform() * total;
  for (std::size_t i : pool) {
    u -= weights[i];
    if (u < 0.0) return i;
  }
  return pool.back();
}

}  // namespace detail

// ---------------------------------------------------------------------------
// MLM

struct MlmBatch {
  std::vector<std::size_t> positions;  // masked sequence positions
  std::vector<int> targets;            // original token ids
  std::vector<int> selected_cells;     // cell ids
  std::vector<bool> whole_cell;        // per selected cell
};

/// Selects each cell with content independently with probability 0.15; a
/// selected cell has all its tokens masked with probability 0.3 and one
/// random token otherwise.
inline MlmBatch select_mlm(const TokenSequence& ts, std::uint64_t seed) {
  Rng rng(seed);
  MlmBatch b;
  for (const auto& span : detail::cell_spans(ts)) {
    if (span.content.empty()) continue;
    if (!rng.bernoulli(kMlmCellRate)) continue;
    const bool whole = rng.bernoulli(kMlmWholeCellRate);
    b.selected_cells.push_back(span.cell_id);
    b.whole_cell.push_back(whole);
    if (whole) {
      for (std::size_t p : span.content) b.positions.push_back(p);
    } else {
      b.positions.push_back(span.content[rng.below(span.content.size())]);
    }
  }
  for (std::size_t p : b.positions) b.targets.push_back(ts.token_ids[p]);
  return b;
}

/// Replaces masked inputs with [MASK] and not-a-number features.
inline TokenSequence apply_mlm(TokenSequence ts, const MlmBatch& b, int mask_id) {
  for (std::size_t p : b.positions) {
    ts.token_ids[p] = mask_id;
    ts.numbers[p] = kNotANumberFeatures;
  }
  return ts;
}

/// Mean cross-entropy of hidden[masked] * W_tok^T against the original ids.
inline Var mlm_loss(Var hidden, const MlmBatch& b, Var token_table) {
  std::vector<int> rows(b.positions.begin(), b.positions.end());
  return softmax_cross_entropy(matmul_nt(select_rows(hidden, rows), token_table), b.targets);
}

// ---------------------------------------------------------------------------
// CLC

enum class ClcStrategy { same_subtree, spread };

struct ClcBatch {
  std::vector<int> blanked_cells;             // cell ids, in sequence order
  std::vector<std::size_t> blank_positions;   // leading [SEP] of each blank
  std::vector<std::size_t> candidate_positions;  // leading [SEP] of each candidate, tail order
  std::vector<int> permutation;               // candidate slot -> blank index
  std::vector<int> answers;                   // blank index -> candidate slot
  ClcStrategy strategy = ClcStrategy::spread;
};

struct ClcResult {
  TokenSequence sequence;
  ClcBatch batch;
  std::vector<long> index_map;  // old position -> new position, -1 if moved to the tail
};

inline int clc_blank_count(std::size_t eligible) {
  const int k = static_cast<int>(std::lround(kClcBlankRate * static_cast<double>(eligible)));
  return std::clamp(k, 2, static_cast<int>(eligible));
}

/// Blanks about 20% of the cells with content (at least two). Header cells
/// weigh 4x data cells. With probability 1/2 the blanks come from one
/// subtree of a randomly chosen header tree; otherwise they are spread over
/// distinct rows and columns. Blanked cells keep their [SEP]; their contents
/// become shuffled candidates at the tail.
inline ClcResult select_clc(const TokenSequence& ts, const Table& t, std::uint64_t seed) {
  Rng rng(seed);
  const auto spans = detail::cell_spans(ts);
  std::vector<std::size_t> eligible;
  for (std::size_t i = 0; i < spans.size(); ++i) {
    if (!spans[i].content.empty()) eligible.push_back(i);
  }
  if (eligible.size() < 2) throw Error("cell-level cloze needs at least 2 cells with content");
  const int k = clc_blank_count(eligible.size());
  std::vector<double> weight(spans.size(), 0.0);
  for (std::size_t i : eligible) weight[i] = t.is_header(spans[i].row, spans[i].col) ? kClcHeaderWeight : 1.0;

  ClcBatch batch;
  std::vector<std::size_t> chosen;
  auto take_from = [&](std::vector<std::size_t> pool) {
    while (static_cast<int>(chosen.size()) < k && !pool.empty()) {
      const std::size_t pick = detail::weighted_pick(pool, weight, rng);
      chosen.push_back(pick);
      pool.erase(std::find(pool.begin(), pool.end(), pick));
    }
  };

  bool done = false;
  if (rng.bernoulli(0.5)) {
    // Pools of cells below each non-root node, per tree.
    const bool top_first = rng.bernoulli(0.5);
    for (int attempt = 0; attempt < 2 && !done; ++attempt) {
      const bool use_top = (attempt == 0) == top_first;
      std::map<std::vector<int>, std::vector<std::size_t>> pools;
      for (std::size_t i : eligible) {
        const auto coord = unpad_coordinate(use_top ? ts.top[spans[i].lead] : ts.left[spans[i].lead]);
        for (std::size_t len = 1; len <= coord.size(); ++len) {
          pools[std::vector<int>(coord.begin(), coord.begin() + static_cast<long>(len))].push_back(i);
        }
      }
      std::vector<const std::vector<std::size_t>*> options;
      for (const auto& [prefix, pool] : pools) {
        if (static_cast<int>(pool.size()) >= k) options.push_back(&pool);
      }
      if (!options.empty()) {
        take_from(*options[rng.below(options.size())]);
        batch.strategy = ClcStrategy::same_subtree;
        done = true;
      }
    }
  }
  if (!done) {
    batch.strategy = ClcStrategy::spread;
    std::set<int> rows_used;
    std::set<int> cols_used;
    std::vector<std::size_t> remaining = eligible;
    while (static_cast<int>(chosen.size()) < k) {
      std::vector<std::size_t> fresh;
      for (std::size_t i : remaining) {
        if (!rows_used.count(spans[i].row) && !cols_used.count(spans[i].col)) fresh.push_back(i);
      }
      const std::size_t pick = detail::weighted_pick(fresh.empty() ? remaining : fresh, weight, rng);
      chosen.push_back(pick);
      rows_used.insert(spans[pick].row);
      cols_used.insert(spans[pick].col);
      remaining.erase(std::find(remaining.begin(), remaining.end(), pick));
    }
  }
  std::sort(chosen.begin(), chosen.end());

  std::vector<bool> moved(ts.size(), false);
  for (std::size_t i : chosen) {
    for (std::size_t p : spans[i].content) moved[p] = true;
  }
  ClcResult out;
  out.index_map.assign(ts.size(), -1);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (moved[i]) continue;
    out.index_map[i] = static_cast<long>(out.sequence.size());
    out.sequence.push_from(ts, i);
  }
  for (std::size_t i : chosen) {
    batch.blanked_cells.push_back(spans[i].cell_id);
    batch.blank_positions.push_back(static_cast<std::size_t>(out.index_map[spans[i].lead]));
  }
  batch.permutation.resize(chosen.size());
  for (std::size_t j = 0; j < chosen.size(); ++j) batch.permutation[j] = static_cast<int>(j);
  rng.shuffle(batch.permutation);
  batch.answers.assign(chosen.size(), -1);
  int group = detail::next_tail_index(ts);
  const int sep = ts.token_ids[spans[chosen.front()].lead];
  for (std::size_t slot = 0; slot < chosen.size(); ++slot) {
    const int blank = batch.permutation[slot];
    const detail::CellSpan& span = spans[chosen[static_cast<std::size_t>(blank)]];
    batch.answers[static_cast<std::size_t>(blank)] = static_cast<int>(slot);
    batch.candidate_positions.push_back(out.sequence.size());
    TextTokens text;
    for (std::size_t p : span.content) {
      text.ids.push_back(ts.token_ids[p]);
      text.numbers.push_back(ts.numbers[p]);
    }
    out.sequence.push_text(sep, text, SegmentRole::tail_text, tail_group(group++));
  }
  out.batch = std::move(batch);
  return out;
}

/// Mean cross-entropy of scaled blank-candidate dot products.
inline Var clc_loss(Var hidden, const ClcBatch& b) {
  std::vector<int> blanks(b.blank_positions.begin(), b.blank_positions.end());
  std::vector<int> cands(b.candidate_positions.begin(), b.candidate_positions.end());
  const double inv = 1.0 / std::sqrt(static_cast<double>(hidden.cols()));
  Var logits = scale(matmul_nt(select_rows(hidden, blanks), select_rows(hidden, cands)), inv);
  return softmax_cross_entropy(logits, b.answers);
}

/// Fraction of blanks whose highest-scoring candidate is the right one.
inline double clc_accuracy(const Matrix& hidden, const ClcBatch& b) {
  if (b.blank_positions.empty()) return 0.0;
  int hits = 0;
  for (std::size_t i = 0; i < b.blank_positions.size(); ++i) {
    int best = 0;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < b.candidate_positions.size(); ++j) {
      const double s = hidden.row(static_cast<Eigen::Index>(b.blank_positions[i]))
                           .dot(hidden.row(static_cast<Eigen::Index>(b.candidate_positions[j])));
      if (s > best_score) {
        best_score = s;
        best = static_cast<int>(j);
      }
    }
    hits += best == b.answers[i];
  }
  return static_cast<double>(hits) / static_cast<double>(b.blank_positions.size());
}

// ---------------------------------------------------------------------------
// TCR

struct TcrSegment {
  int label = 0;  // 1 = from the table's own context
  long position = -1;  // leading token; -1 for the segment placed after [CLS]
  std::size_t source = 0;  // index into the own or foreign list
};

struct TcrBatch {
  std::vector<TcrSegment> segments;

  int positives() const {
    int n = 0;
    for (const auto& s : segments) n += s.label;
    return n;
  }
  int negatives() const { return static_cast<int>(segments.size()) - positives(); }

  /// Segments with a tail position; these are the ones scored.
  std::vector<const TcrSegment*> scored() const {
    std::vector<const TcrSegment*> out;
    for (const auto& s : segments) {
      if (s.position >= 0) out.push_back(&s);
    }
    return out;
  }
};

struct TcrResult {
  TokenSequence sequence;
  TcrBatch batch;
};

/// Drops the sequence's context text, puts one own segment after [CLS], and
/// appends up to two more own segments and up to three foreign ones at the
/// tail in random order. With no own segment the table gets no TCR batch.
inline TcrResult build_tcr(const TokenSequence& ts, const std::vector<TextTokens>& own,
                           const std::vector<TextTokens>& foreign, std::uint64_t seed) {
  Rng rng(seed);
  TcrResult out;
  if (ts.size() == 0 || ts.roles[0] != SegmentRole::cls_text) throw Error("sequence does not start with [CLS]");
  const int cls = ts.token_ids[0];
  int sep = -1;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.roles[i] == SegmentRole::cell && ts.in_cell_pos[i] == 0) {
      sep = ts.token_ids[i];
      break;
    }
  }
  std::vector<std::size_t> own_idx(own.size());
  std::vector<std::size_t> foreign_idx(foreign.size());
  for (std::size_t i = 0; i < own.size(); ++i) own_idx[i] = i;
  for (std::size_t i = 0; i < foreign.size(); ++i) foreign_idx[i] = i;
  rng.shuffle(own_idx);
  rng.shuffle(foreign_idx);
  own_idx.resize(std::min<std::size_t>(own_idx.size(), kTcrMaxPerKind));
  foreign_idx.resize(std::min<std::size_t>(foreign_idx.size(), kTcrMaxPerKind));
  if (own_idx.empty()) foreign_idx.clear();

  out.sequence.push_text(cls, own_idx.empty() ? TextTokens{} : own[own_idx[0]], SegmentRole::cls_text, kLeadGroup);
  if (!own_idx.empty()) out.batch.segments.push_back({1, -1, own_idx[0]});
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.roles[i] == SegmentRole::cell) out.sequence.push_from(ts, i);
  }
  std::vector<TcrSegment> tail;
  for (std::size_t j = 1; j < own_idx.size(); ++j) tail.push_back({1, 0, own_idx[j]});
  for (std::size_t j : foreign_idx) tail.push_back({0, 0, j});
  rng.shuffle(tail);
  if (sep < 0 && !tail.empty()) throw Error("sequence has no [SEP] token to lead tail segments");
  int group = 0;
  for (auto& s : tail) {
    s.position = static_cast<long>(out.sequence.size());
    out.sequence.push_text(sep, s.label ? own[s.source] : foreign[s.source], SegmentRole::tail_text,
                           tail_group(group++));
    out.batch.segments.push_back(s);
  }
  return out;
}

/// Applies a position remapping (e.g. from select_clc) to a TCR batch.
inline void remap(TcrBatch& b, const std::vector<long>& index_map) {
  for (auto& s : b.segments) {
    if (s.position >= 0) s.position = index_map.at(static_cast<std::size_t>(s.position));
  }
}

/// Logits h_seg W h_cls for the scored segments, m x 1.
inline Var tcr_logits(Var hidden, const TcrBatch& b, Var bilinear) {
  std::vector<int> rows;
  for (const auto* s : b.scored()) rows.push_back(static_cast<int>(s->position));
  return matmul_nt(matmul(select_rows(hidden, rows), bilinear), select_rows(hidden, {0}));
}

inline Var tcr_loss(Var hidden, const TcrBatch& b, Var bilinear) {
  std::vector<int> labels;
  for (const auto* s : b.scored()) labels.push_back(s->label);
  return bce_with_logits(tcr_logits(hidden, b, bilinear), labels);
}

/// Per-segment correctness of the logit sign, as (hits, total).
inline std::pair<int, int> tcr_hits(const Matrix& hidden, const TcrBatch& b, const Matrix& bilinear) {
  int hits = 0;
  int total = 0;
  const RowVector cls = hidden.row(0);
  for (const auto* s : b.scored()) {
    const double z = (hidden.row(s->position) * bilinear).dot(cls);
    hits += (z > 0.0) == (s->label == 1);
    ++total;
  }
  return {hits, total};
}

inline Var total_loss(Var mlm, Var clc, Var tcr) { return add(add(mlm, clc), tcr); }
inline double total_loss(double mlm, double clc, double tcr) { return mlm + clc + tcr; }

}  // namespace tableweave
