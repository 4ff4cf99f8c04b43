#include <gtest/gtest.h>

#include <sstream>

#include "fixtures.hpp"
#include "tableweave/header_extract.hpp"
#include "tableweave/tokenizer.hpp"

using namespace twtest;

namespace {

Vocabulary toy_vocabulary() {
  return Vocabulary({kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken, "play", "##ing"});
}

std::vector<std::string> pieces(std::string_view text, const Vocabulary& v) {
  std::vector<std::string> out;
  for (int id : wordpiece(text, v)) out.push_back(v.token(id));
  return out;
}

void expect_features(std::string_view token, int mag, int pre, int first, int last) {
  const NumberFeatures nf = number_features(token);
  EXPECT_EQ(nf.magnitude, mag) << token;
  EXPECT_EQ(nf.precision, pre) << token;
  EXPECT_EQ(nf.first_digit, first) << token;
  EXPECT_EQ(nf.last_digit, last) << token;
}

}  // namespace

TEST(Tokenizer, EmptyTextHasNoTokens) {
  EXPECT_TRUE(wordpiece("", toy_vocabulary()).empty());
  EXPECT_TRUE(wordpiece("   ", toy_vocabulary()).empty());
}

TEST(Tokenizer, GreedyLongestMatch) {
  const Vocabulary v = toy_vocabulary();
  EXPECT_EQ(pieces("playing", v), (std::vector<std::string>{"play", "##ing"}));
  EXPECT_EQ(pieces("Playing play", v), (std::vector<std::string>{"play", "##ing", "play"}));
}

TEST(Tokenizer, UnknownWordFallsBackToUnk) {
  const Vocabulary v = toy_vocabulary();
  EXPECT_EQ(pieces("zzz", v), (std::vector<std::string>{kUnkToken}));
  EXPECT_EQ(pieces("plays", v), (std::vector<std::string>{kUnkToken}));
}

TEST(Tokenizer, VocabularyRequiresSpecialTokens) {
  EXPECT_THROW(Vocabulary({"a", "b"}), Error);
  EXPECT_THROW(Vocabulary({kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken, "a", "a"}), Error);
}

TEST(Tokenizer, VocabularySaveLoad) {
  const Vocabulary v = build_vocabulary({"alpha beta", "beta gamma"}, 10, 200);
  EXPECT_EQ(v.size(), 200u);
  std::stringstream s;
  v.save(s);
  const Vocabulary back = Vocabulary::load(s);
  EXPECT_EQ(back.tokens(), v.tokens());
  EXPECT_GE(back.find("beta"), 0);
}

TEST(Tokenizer, NumberFeatures) {
  expect_features("148,270", 6, 0, 1, 0);
  expect_features("3.14", 1, 2, 3, 4);
  expect_features("7", 1, 0, 7, 7);
  expect_features("Bladder", kNotANumber, kNotANumber, kNotANumber, kNotANumber);
  expect_features("1,23", kNotANumber, kNotANumber, kNotANumber, kNotANumber);
}

TEST(Tokenizer, NumberFeaturesStayInRange) {
  Rng rng(3);
  for (int k = 0; k < 2000; ++k) {
    std::string s = std::to_string(rng.below(1000000000000ULL));
    if (rng.bernoulli(0.5)) s += "." + std::to_string(rng.below(1000000));
    const NumberFeatures nf = number_features(s);
    for (int f : {nf.magnitude, nf.precision, nf.first_digit, nf.last_digit}) {
      EXPECT_GE(f, 0);
      EXPECT_LT(f, kNumberBuckets);
    }
  }
}

TEST(Tokenizer, CellClasses) {
  CellFeatures c;
  EXPECT_EQ(classify_cell(c), CellClass::text_dominant);
  c.text = "148,270";
  EXPECT_EQ(classify_cell(c), CellClass::value_dominant);
  c.text = "$12 million";
  EXPECT_EQ(classify_cell(c), CellClass::value_dominant);
  c.text = "12 of many";
  EXPECT_EQ(classify_cell(c), CellClass::text_dominant);
  c.text = "Bladder";
  EXPECT_EQ(classify_cell(c), CellClass::text_dominant);
}

TEST(Tokenizer, LongCellIsTruncated) {
  std::string text;
  for (int i = 0; i < 20; ++i) text += "word ";
  const Vocabulary v = vocabulary_for({text});
  EXPECT_EQ(tokenize_text(text, v, kMaxCellTokens).size(), static_cast<std::size_t>(kMaxCellTokens));
}

TEST(Tokenizer, SequenceLengthMatchesCount) {
  Table t(4, 4);
  t.context = {"first context line", "second"};
  Rng rng(9);
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) {
      std::string text;
      const int words = static_cast<int>(rng.below(12));
      for (int w = 0; w < words; ++w) text += "w" + std::to_string(w) + " ";
      put(t, r, c, text);
    }
  }
  t.rebuild_index();
  const Vocabulary v = vocabulary_for(table_texts(t));
  const BiTree bt = build_bitree(t);
  std::size_t expected = 1 + 3 + (1 + 1);  // [CLS] + lead text, [SEP] + tail text
  for (const auto& cell : t.cells()) {
    expected += 1 + std::min<std::size_t>(split_whitespace(cell.text).size(), kMaxCellTokens);
  }
  SerializeOptions all;
  all.sample_data_cells = false;
  const TokenSequence ts = serialize(tokenize_table(t, bt, v), 1, 512, all);
  EXPECT_EQ(ts.size(), expected);
  EXPECT_EQ(ts.token_ids.front(), v.cls_id());
}

TEST(Tokenizer, CoordinatesComeFromTheBiTree) {
  const Table t = worked_example_table();
  const Vocabulary v = vocabulary_for(table_texts(t));
  const BiTree bt = build_bitree(t);
  const TokenSequence ts = serialize(tokenize_table(t, bt, v), 2, 512);
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.roles[i] != SegmentRole::cell) {
      EXPECT_EQ(ts.top[i], kRootPadded);
      EXPECT_EQ(ts.rows[i], -1);
      continue;
    }
    const CoordinatePair cp = coordinate_of(bt, ts.rows[i], ts.cols[i]);
    EXPECT_EQ(unpad_coordinate(ts.top[i]), cp.top);
    EXPECT_EQ(unpad_coordinate(ts.left[i]), cp.left);
    EXPECT_EQ(ts.formats[i], format_vector(t.at(ts.rows[i], ts.cols[i])));
  }
}

TEST(Tokenizer, HeadersAlwaysKept) {
  const Table t = worked_example_table();
  const Vocabulary v = vocabulary_for(table_texts(t));
  const BiTree bt = build_bitree(t);
  const TokenizedTable tt = tokenize_table(t, bt, v);
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const TokenSequence ts = serialize(tt, seed, 512);
    std::set<int> present(ts.cell_ids.begin(), ts.cell_ids.end());
    for (const auto& c : tt.cells) {
      if (c.header) ASSERT_TRUE(present.count(c.row * tt.n_cols + c.col)) << c.row << "," << c.col;
    }
  }
}

TEST(Tokenizer, MaxLengthIsRespected) {
  const Table t = worked_example_table();
  const Vocabulary v = vocabulary_for(table_texts(t));
  const BiTree bt = build_bitree(t);
  const TokenizedTable tt = tokenize_table(t, bt, v);
  for (int len : {44, 50, 64, 512}) {
    const TokenSequence ts = serialize(tt, 4, len);
    EXPECT_LE(ts.size(), static_cast<std::size_t>(len));
  }
  EXPECT_THROW(serialize(tt, 4, 43), Error);
}

TEST(Tokenizer, SerializationIsDeterministic) {
  const Table t = worked_example_table();
  const Vocabulary v = vocabulary_for(table_texts(t));
  const TokenizedTable tt = tokenize_table(t, build_bitree(t), v);
  EXPECT_EQ(serialize(tt, 17, 512).token_ids, serialize(tt, 17, 512).token_ids);
  EXPECT_EQ(to_json(serialize(tt, 17, 512)), to_json(serialize(tt, 17, 512)));
}

TEST(Tokenizer, InCellPositionsRestartPerCell) {
  const Table t = worked_example_table();
  const Vocabulary v = vocabulary_for(table_texts(t));
  const TokenSequence ts = serialize(tokenize_table(t, build_bitree(t), v), 0, 512);
  for (std::size_t s : ts.group_starts()) EXPECT_EQ(ts.in_cell_pos[s], 0);
  for (int p : ts.in_cell_pos) {
    EXPECT_GE(p, 0);
    EXPECT_LT(p, kInCellPositions);
  }
}
