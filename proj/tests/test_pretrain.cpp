#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "tableweave/corpus.hpp"
#include "tableweave/pretrain.hpp"

using namespace twtest;
namespace fs = std::filesystem;

namespace {

struct SmallCorpus {
  std::vector<GeneratedTable> generated = generate_corpus(24, 12);
  Vocabulary vocab = build_vocabulary(corpus_texts(generated), 2000);
  std::vector<CorpusTable> tables;

  SmallCorpus() {
    for (std::size_t i = 0; i < generated.size(); ++i) {
      const auto& g = generated[i];
      BiTree bt = build_bitree(g.table);
      TokenizedTable tt = tokenize_table(g.table, bt, vocab);
      tables.push_back(CorpusTable{table_file_name(static_cast<int>(i)), topics()[static_cast<std::size_t>(g.topic)].name,
                                   g.table, std::move(bt), std::move(tt)});
    }
  }
};

RunConfig tiny_config() {
  RunConfig c;
  c.hidden = 32;
  c.heads = 2;
  c.layers = 1;
  c.batch_size = 2;
  c.steps = 4;
  c.stage1_len = 128;
  c.stage2_len = 192;
  return c;
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("tableweave_test_" + name);
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST(Config, OverridesAndRejectsUnknownKeys) {
  RunConfig c;
  apply_config(c, nlohmann::json{{"steps", 7}, {"lr", 0.5}, {"distance", "inf"}, {"mode", "explicit"}, {"tcr", false}});
  EXPECT_EQ(c.steps, 7);
  EXPECT_EQ(c.lr, 0.5);
  EXPECT_EQ(c.distance, kUnboundedDistance);
  EXPECT_EQ(c.mode, TreeEmbedding::explicit_onehot);
  EXPECT_FALSE(c.tcr);
  EXPECT_THROW(apply_config(c, nlohmann::json{{"stepz", 1}}), ParseError);
  EXPECT_THROW(apply_config(c, nlohmann::json{{"mode", "other"}}), ParseError);
  EXPECT_THROW(apply_config(c, nlohmann::json{{"holdout", 1.0}}), ParseError);
  EXPECT_THROW(apply_config(c, nlohmann::json::array()), ParseError);
}

TEST(Config, FileErrorsAreReported) {
  const fs::path dir = scratch("config");
  fs::create_directories(dir);
  std::ofstream(dir / "bad.json") << "{\"steps\": \"many\"}";
  EXPECT_THROW(load_config((dir / "bad.json").string()), ParseError);
  EXPECT_THROW(load_config((dir / "missing.json").string()), Error);
  std::ofstream(dir / "good.json") << "{\"steps\": 3, \"hidden\": 32}";
  EXPECT_EQ(load_config((dir / "good.json").string()).hidden, 32);
  fs::remove_all(dir);
}

TEST(Config, ModelConfigValidation) {
  RunConfig c;
  c.hidden = 48;  // not a multiple of 32
  EXPECT_THROW(c.model_config(100), Error);
  c.hidden = 64;
  c.heads = 3;
  EXPECT_THROW(c.model_config(100), Error);
}

TEST(Corpus, GenerationIsDeterministic) {
  const auto a = generate_corpus(30, 4);
  const auto b = generate_corpus(30, 4);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    EXPECT_TRUE(a[i].table == b[i].table);
    EXPECT_EQ(a[i].cell_labels, b[i].cell_labels);
    EXPECT_EQ(a[i].type, b[i].type);
  }
  EXPECT_FALSE(generate_corpus(5, 4)[0].table == generate_corpus(5, 5)[0].table);
}

TEST(Corpus, GeneratedTablesPassTheFilter) {
  int types[5] = {0, 0, 0, 0, 0};
  for (const auto& g : generate_corpus(300, 6)) {
    const FilterResult f = filter_table(g.table);
    EXPECT_TRUE(f.accepted) << f.reason;
    EXPECT_NO_THROW(build_bitree(g.table));
    ++types[static_cast<int>(g.type)];
  }
  for (int n : types) EXPECT_GT(n, 10);
}

TEST(Corpus, WrittenCorpusLoadsBack) {
  const fs::path dir = scratch("corpus");
  const auto gen = generate_corpus(10, 3);
  write_corpus(dir.string(), gen);
  const Vocabulary v = Vocabulary::load_file((dir / "vocab.txt").string());
  std::vector<Warning> warnings;
  const auto corpus = load_corpus(dir.string(), v, &warnings);
  EXPECT_EQ(corpus.size(), gen.size());
  EXPECT_TRUE(warnings.empty());
  for (std::size_t i = 0; i < gen.size(); ++i) EXPECT_TRUE(corpus[i].table == gen[i].table);
  const auto ttc = load_labeled_set(dir.string(), (dir / "labels_ttc.json").string(), v, ttc_taxonomy());
  EXPECT_EQ(ttc.size(), gen.size());
  fs::remove_all(dir);
}

TEST(Pretrain, ZeroStepsLeaveTheInitialization) {
  SmallCorpus sc;
  RunConfig c = tiny_config();
  c.steps = 0;
  ModelState m = init_model(c.model_config(static_cast<int>(sc.vocab.size())), 5);
  const ModelState init = m;
  const PretrainResult r = pretrain(m, sc.tables, c, sc.vocab.mask_id());
  EXPECT_TRUE(r.log.empty());
  EXPECT_TRUE(same_weights(init, m));
}

TEST(Pretrain, DisabledObjectiveContributesZero) {
  SmallCorpus sc;
  RunConfig c = tiny_config();
  c.clc = false;
  ModelState m = init_model(c.model_config(static_cast<int>(sc.vocab.size())), 5);
  const PretrainResult r = pretrain(m, sc.tables, c, sc.vocab.mask_id());
  ASSERT_EQ(r.log.size(), 4u);
  for (const StepLog& s : r.log) {
    EXPECT_EQ(s.clc, 0.0);
    EXPECT_GT(s.mlm, 0.0);
    EXPECT_GT(s.tcr, 0.0);
    EXPECT_NEAR(s.total, s.mlm + s.tcr, 1e-12);
  }
}

TEST(Pretrain, StageLengthsSwitchHalfway) {
  SmallCorpus sc;
  RunConfig c = tiny_config();
  ModelState m = init_model(c.model_config(static_cast<int>(sc.vocab.size())), 5);
  const PretrainResult r = pretrain(m, sc.tables, c, sc.vocab.mask_id());
  for (const StepLog& s : r.log) EXPECT_LE(s.max_len, s.step < 2 ? 128 : 192);
  EXPECT_EQ(stage_length(c, 1), 128);
  EXPECT_EQ(stage_length(c, 2), 192);
}

TEST(Pretrain, RunsAreReproducible) {
  SmallCorpus sc;
  RunConfig c = tiny_config();
  ModelState a = init_model(c.model_config(static_cast<int>(sc.vocab.size())), 5);
  ModelState b = a;
  const PretrainResult ra = pretrain(a, sc.tables, c, sc.vocab.mask_id());
  const PretrainResult rb = pretrain(b, sc.tables, c, sc.vocab.mask_id());
  EXPECT_TRUE(same_weights(a, b));
  EXPECT_EQ(ra.log.back().total, rb.log.back().total);
  EXPECT_EQ(ra.heldout, rb.heldout);
}

TEST(Pretrain, HeldOutTablesAreNotTrained) {
  SmallCorpus sc;
  RunConfig c = tiny_config();
  ModelState m = init_model(c.model_config(static_cast<int>(sc.vocab.size())), 5);
  const PretrainResult r = pretrain(m, sc.tables, c, sc.vocab.mask_id());
  for (std::size_t h : r.heldout) EXPECT_EQ(std::count(r.train.begin(), r.train.end(), h), 0);
  EXPECT_EQ(r.train.size() + r.heldout.size(), sc.tables.size());
  EXPECT_FALSE(r.heldout.empty());
}

TEST(Pretrain, ExamplesApplyObjectivesInOrder) {
  SmallCorpus sc;
  const PretrainExample ex = make_example(sc.tables, 0, 3, 512, Toggles{}, sc.vocab.mask_id());
  // TCR segments still point at tail segments after the CLC rewrite.
  for (const auto* s : ex.tcr.scored()) {
    EXPECT_EQ(ex.sequence.roles[static_cast<std::size_t>(s->position)], SegmentRole::tail_text);
    EXPECT_EQ(ex.sequence.in_cell_pos[static_cast<std::size_t>(s->position)], 0);
  }
  for (std::size_t p : ex.clc.blank_positions) EXPECT_EQ(ex.sequence.roles[p], SegmentRole::cell);
  for (std::size_t p : ex.mlm.positions) EXPECT_EQ(ex.sequence.token_ids[p], sc.vocab.mask_id());
}

TEST(Checkpoint, RoundTrip) {
  SmallCorpus sc;
  ModelState m = init_model(tiny_config().model_config(static_cast<int>(sc.vocab.size())), 8);
  ensure_ctc_head(m, 6, 1);
  std::stringstream s;
  save_checkpoint(m, s, nlohmann::json{{"task", "ctc"}});
  const ModelState back = load_checkpoint(s);
  EXPECT_TRUE(same_weights(m, back));
  EXPECT_TRUE(back.ctc_head.has_value());
  EXPECT_FALSE(back.ttc_head.has_value());
  std::stringstream broken("not a checkpoint");
  EXPECT_THROW(load_checkpoint(broken), Error);
}
