#pragma once

// Tree-restricted attention and the post-LN transformer stack.

#include <cmath>
#include <map>
#include <memory>
#include <vector>

#include "tableweave/autograd.hpp"
#include "tableweave/bitree.hpp"
#include "tableweave/embedder.hpp"
#include "tableweave/model.hpp"
#include "tableweave/tokenizer.hpp"

namespace tableweave {

/// Visibility between sequence positions.
///   - positions of one cell or one text segment see each other
///   - two cells see each other iff their bi-tree distance is <= d
///   - the leading segment ([CLS] and the first context text) sees every cell
///   - a tail segment sees only itself and [CLS]
/// The result is symmetric with a true diagonal.
inline Mask build_visibility(const TokenSequence& ts, const BiTree& bt, int d) {
  const auto n = static_cast<Eigen::Index>(ts.size());
  const auto starts = ts.group_starts();
  const std::size_t g = starts.size();
  std::vector<int> group_of(ts.size());
  for (std::size_t k = 0; k < g; ++k) {
    const std::size_t end = k + 1 < g ? starts[k + 1] : ts.size();
    for (std::size_t i = starts[k]; i < end; ++i) group_of[i] = static_cast<int>(k);
  }
  auto role = [&](std::size_t k) { return ts.roles[starts[k]]; };
  Mask gv = Mask::Constant(static_cast<Eigen::Index>(g), static_cast<Eigen::Index>(g), false);
  for (std::size_t a = 0; a < g; ++a) {
    for (std::size_t b = a; b < g; ++b) {
      bool vis = false;
      if (a == b) {
        vis = true;
      } else if (role(a) == SegmentRole::cell && role(b) == SegmentRole::cell) {
        const std::size_t ia = starts[a];
        const std::size_t ib = starts[b];
        if (ts.cell_ids[ia] == ts.cell_ids[ib]) {
          vis = true;
        } else if (d == kUnboundedDistance) {
          vis = true;
        } else {
          vis = bt.distance({ts.rows[ia], ts.cols[ia]}, {ts.rows[ib], ts.cols[ib]}) <= d;
        }
      } else if (role(a) == SegmentRole::cls_text || role(b) == SegmentRole::cls_text) {
        const SegmentRole other = role(a) == SegmentRole::cls_text ? role(b) : role(a);
        vis = other != SegmentRole::tail_text;
      }
      gv(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) = vis;
      gv(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(a)) = vis;
    }
  }
  Mask m(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < n; ++j) {
      m(i, j) = gv(group_of[static_cast<std::size_t>(i)], group_of[static_cast<std::size_t>(j)]);
    }
  }
  // [CLS] and each tail segment see each other.
  if (n > 0 && ts.roles[0] == SegmentRole::cls_text) {
    for (Eigen::Index j = 0; j < n; ++j) {
      if (ts.roles[static_cast<std::size_t>(j)] == SegmentRole::tail_text) {
        m(0, j) = true;
        m(j, 0) = true;
      }
    }
  }
  return m;
}

/// Scaled dot-product attention with masked logits set to -infinity before
/// the softmax.
inline Var attention(Var q, Var k, Var v, const std::shared_ptr<const Mask>& mask) {
  const double inv = 1.0 / std::sqrt(static_cast<double>(q.cols()));
  return matmul(masked_softmax(scale(matmul_nt(q, k), inv), mask), v);
}

/// Multi-head self-attention restricted by `mask`, output projection
/// included. x is n x H.
template <class Layer>
Var masked_attention(Var x, Layer& w, int heads, const std::shared_ptr<const Mask>& mask) {
  Tape& tape = *x.tape;
  const Eigen::Index h = x.cols();
  const Eigen::Index dh = h / heads;
  Var q = linear(x, bind(tape, w.wq), bind(tape, w.bq));
  Var k = linear(x, bind(tape, w.wk), bind(tape, w.bk));
  Var v = linear(x, bind(tape, w.wv), bind(tape, w.bv));
  std::vector<Var> outs;
  for (int a = 0; a < heads; ++a) {
    outs.push_back(attention(slice_cols(q, a * dh, dh), slice_cols(k, a * dh, dh), slice_cols(v, a * dh, dh), mask));
  }
  return linear(concat_cols(outs), bind(tape, w.wo), bind(tape, w.bo));
}

template <class Layer>
Var encoder_layer(Var x, Layer& w, int heads, const std::shared_ptr<const Mask>& mask) {
  Tape& tape = *x.tape;
  Var a = masked_attention(x, w, heads, mask);
  Var x1 = layer_norm(add(x, a), bind(tape, w.ln1_gain), bind(tape, w.ln1_shift));
  Var f = linear(gelu(linear(x1, bind(tape, w.w1), bind(tape, w.b1))), bind(tape, w.w2), bind(tape, w.b2));
  return layer_norm(add(x1, f), bind(tape, w.ln2_gain), bind(tape, w.ln2_shift));
}

/// Runs every encoder layer over an embedded sequence.
template <class Model>
Var encode(Var embedded, Model& m, const std::shared_ptr<const Mask>& mask) {
  if (mask->rows() != embedded.rows() || mask->cols() != embedded.rows()) throw Error("mask does not match sequence");
  Var x = embedded;
  for (auto& layer : m.layers) x = encoder_layer(x, layer, m.config.heads, mask);
  return x;
}

/// Embedding followed by the encoder, using the model's distance threshold.
template <class Model>
Var forward(Tape& tape, Model& m, const TokenSequence& ts, const BiTree& bt) {
  auto mask = std::make_shared<const Mask>(build_visibility(ts, bt, m.config.distance));
  return encode(embed_sequence(tape, m.embeddings, m.config, ts), m, mask);
}

/// Value-only forward pass.
inline Matrix hidden_states(const ModelState& m, const TokenSequence& ts, const BiTree& bt) {
  Tape tape;
  return forward(tape, m, ts, bt).value();
}

}  // namespace tableweave
