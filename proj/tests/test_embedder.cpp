#include <gtest/gtest.h>

#include "fixtures.hpp"
#include "tableweave/embedder.hpp"
#include "tableweave/header_extract.hpp"

using namespace twtest;

namespace {

ModelState toy_model(TreeEmbedding mode = TreeEmbedding::implicit) {
  ModelConfig cfg = ModelConfig::toy(50, 32, 1, 2);
  cfg.tree_embedding = mode;
  return init_model(cfg, 9);
}

Matrix in_table(ModelState& m, const std::vector<PaddedCoordinate>& top, const std::vector<PaddedCoordinate>& left,
                const std::vector<int>& rows, const std::vector<int>& cols) {
  Tape tape;
  return embed_in_table(tape, m.embeddings, m.config, top, left, rows, cols).value();
}

}  // namespace

TEST(Embedder, SentinelCoordinatesEmbedToZero) {
  ModelState m = toy_model();
  const Matrix e = in_table(m, {kRootPadded, kRootPadded}, {kRootPadded, kRootPadded}, {-1, -1}, {-1, -1});
  EXPECT_EQ(e.rows(), 2);
  EXPECT_EQ(e.cols(), 32);
  EXPECT_EQ(e.cwiseAbs().maxCoeff(), 0.0);
}

TEST(Embedder, LevelBlocksAreLocal) {
  ModelState m = toy_model();
  const int d = m.config.tree_dim;
  const Matrix e = in_table(m, {pad_coordinate({1, 2}), pad_coordinate({1, 3})}, {kRootPadded, kRootPadded},
                            {-1, -1}, {-1, -1});
  // Only the top level-1 block differs; level 0 is shared, deeper levels are zero.
  EXPECT_EQ((e.row(0).segment(0, d) - e.row(1).segment(0, d)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT((e.row(0).segment(d, d) - e.row(1).segment(d, d)).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_EQ(e.block(0, 2 * d, 2, e.cols() - 2 * d).cwiseAbs().maxCoeff(), 0.0);
  const Matrix rowcol = in_table(m, {kRootPadded}, {kRootPadded}, {3}, {5});
  const Eigen::Index rc = 2 * kTreeDepth * d;
  EXPECT_EQ(rowcol.row(0).segment(rc, m.config.rowcol_dim), m.embeddings.column.value.row(5));
  EXPECT_EQ(rowcol.row(0).segment(rc + m.config.rowcol_dim, m.config.rowcol_dim), m.embeddings.row.value.row(3));
}

TEST(Embedder, OutOfRangeCoordinatesThrow) {
  ModelState m = toy_model();
  EXPECT_THROW(in_table(m, {pad_coordinate({kMaxDegree[0]})}, {kRootPadded}, {0}, {0}), StructureError);
  EXPECT_THROW(in_table(m, {kRootPadded}, {kRootPadded}, {kMaxRowCol}, {0}), StructureError);
}

TEST(Embedder, NotANumberUsesReservedRow) {
  ModelState m = toy_model();
  Tape tape;
  const Matrix e = embed_numbers(tape, m.embeddings, {kNotANumberFeatures}).value();
  const int q = m.config.number_dim();
  EXPECT_EQ(e.row(0).segment(0, q), m.embeddings.magnitude.value.row(kNotANumber));
  EXPECT_EQ(e.row(0).segment(3 * q, q), m.embeddings.last_digit.value.row(kNotANumber));
  EXPECT_TRUE(e.allFinite());
}

TEST(Embedder, FormatEmbeddingIsAffine) {
  ModelState m = toy_model();
  auto embed = [&](const FormatVector& f) {
    Tape tape;
    return Matrix(embed_format(tape, m.embeddings, {f}).value());
  };
  const FormatVector a = {1, 2, 0, 1, 0, 1, 1, 0, 0, 0, 0};
  const FormatVector b = {2, 1, 1, 0, 1, 0, 0, 1, 1, 0, 1};
  FormatVector sum{};
  for (std::size_t i = 0; i < sum.size(); ++i) sum[i] = a[i] + b[i];
  const Matrix zero = embed(FormatVector{});
  EXPECT_LT((embed(sum) - embed(a) - embed(b) + zero).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(zero, m.embeddings.format_bias.value);
}

TEST(Embedder, SequenceEmbeddingIsTheComponentSum) {
  const Table t = worked_example_table();
  const Vocabulary v = vocabulary_for(table_texts(t));
  ModelState m = init_model(ModelConfig::toy(static_cast<int>(v.size()), 32, 1, 2), 4);
  const TokenSequence ts = serialize(tokenize_table(t, build_bitree(t), v), 0, 512);
  Tape tape;
  const Matrix all = embed_sequence(tape, m.embeddings, m.config, ts).value();
  Matrix sum = embed_numbers(tape, m.embeddings, ts.numbers).value();
  sum += embed_in_table(tape, m.embeddings, m.config, ts.top, ts.left, ts.rows, ts.cols).value();
  sum += embed_format(tape, m.embeddings, ts.formats).value();
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto r = static_cast<Eigen::Index>(i);
    sum.row(r) += m.embeddings.token.value.row(ts.token_ids[i]) + m.embeddings.in_cell.value.row(ts.in_cell_pos[i]);
  }
  EXPECT_LT((all - sum).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Embedder, ExplicitModeIsOneHotAndWeightFree) {
  ModelState m = toy_model(TreeEmbedding::explicit_onehot);
  Tape tape;
  const Var e = embed_in_table(tape, m.embeddings, m.config, {pad_coordinate({1, 0})}, {pad_coordinate({2})}, {0},
                               {1});
  const Matrix x = e.value();
  const int d = m.config.tree_dim;
  EXPECT_EQ(x(0, 1), 1.0);
  EXPECT_EQ(x(0, d + 0), 1.0);
  EXPECT_EQ(x(0, kTreeDepth * d + 2), 1.0);
  EXPECT_DOUBLE_EQ(x.sum(), 5.0);
}

TEST(Embedder, ExplicitModeHasNoTreeGradients) {
  const Table t = worked_example_table();
  const Vocabulary v = vocabulary_for(table_texts(t));
  ModelConfig cfg = ModelConfig::toy(static_cast<int>(v.size()), 32, 1, 2);
  cfg.tree_embedding = TreeEmbedding::explicit_onehot;
  ModelState m = init_model(cfg, 2);
  const TokenSequence ts = serialize(tokenize_table(t, build_bitree(t), v), 0, 512);
  Tape tape;
  const Var e = embed_sequence(tape, m.embeddings, m.config, ts);
  m.zero_grad();
  tape.backward(softmax_cross_entropy(e, std::vector<int>(ts.size(), 0)));
  EXPECT_GT(m.embeddings.token.grad.cwiseAbs().maxCoeff(), 0.0);
  for (const Parameter* p : {&m.embeddings.tree_top, &m.embeddings.tree_left, &m.embeddings.column, &m.embeddings.row}) {
    EXPECT_EQ(p->grad.cwiseAbs().maxCoeff(), 0.0) << p->name;
  }
}

TEST(Embedder, EmptySequenceIsRejected) {
  ModelState m = toy_model();
  Tape tape;
  EXPECT_THROW(embed_sequence(tape, m.embeddings, m.config, TokenSequence{}), Error);
}
