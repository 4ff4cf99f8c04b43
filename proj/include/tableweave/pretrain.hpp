#pragma once

// Run configuration, corpus loading, and the two-stage pre-training loop.

#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableweave/encoder.hpp"
#include "tableweave/header_extract.hpp"
#include "tableweave/heads.hpp"
#include "tableweave/model.hpp"
#include "tableweave/objectives.hpp"
#include "tableweave/optim.hpp"
#include "tableweave/parallel.hpp"
#include "tableweave/tokenizer.hpp"

namespace tableweave {

struct RunConfig {
  // model
  int layers = 2;
  int hidden = 64;
  int heads = 4;
  int distance = 2;
  TreeEmbedding mode = TreeEmbedding::implicit;
  // data
  std::string corpus;
  std::string vocab;
  std::string checkpoint;
  std::string log;
  double holdout = 0.1;
  // schedule
  std::uint64_t seed = 0;
  int steps = 500;
  int batch_size = 32;
  double lr = 2e-3;
  double weight_decay = 0.01;
  int stage1_len = 256;
  int stage2_len = 512;
  // objective toggles
  bool mlm = true;
  bool clc = true;
  bool tcr = true;
  // fine-tuning
  int epochs = 4;
  std::string taxonomy = "general";
  int finetune_batch = 0;  // 0 picks the task default
  double finetune_lr = 8e-6;

  ModelConfig model_config(int vocab_size) const {
    ModelConfig c = ModelConfig::toy(vocab_size, hidden, layers, heads);
    c.distance = distance;
    c.tree_embedding = mode;
    c.validate();
    return c;
  }
};

/// Overrides fields from a flat JSON object; unknown keys are an error.
inline void apply_config(RunConfig& c, const nlohmann::json& j) {
  if (!j.is_object()) throw ParseError("config must be a JSON object");
  for (const auto& [key, v] : j.items()) {
    if (key == "layers") c.layers = v.get<int>();
    else if (key == "hidden") c.hidden = v.get<int>();
    else if (key == "heads") c.heads = v.get<int>();
    else if (key == "distance") c.distance = parse_distance(v);
    else if (key == "mode") {
      const auto m = v.get<std::string>();
      if (m != "implicit" && m != "explicit") throw ParseError("mode must be 'implicit' or 'explicit'");
      c.mode = m == "explicit" ? TreeEmbedding::explicit_onehot : TreeEmbedding::implicit;
    }
    else if (key == "corpus") c.corpus = v.get<std::string>();
    else if (key == "vocab") c.vocab = v.get<std::string>();
    else if (key == "checkpoint") c.checkpoint = v.get<std::string>();
    else if (key == "log") c.log = v.get<std::string>();
    else if (key == "holdout") c.holdout = v.get<double>();
    else if (key == "seed") c.seed = v.get<std::uint64_t>();
    else if (key == "steps") c.steps = v.get<int>();
    else if (key == "batch_size") c.batch_size = v.get<int>();
    else if (key == "lr") c.lr = v.get<double>();
    else if (key == "weight_decay") c.weight_decay = v.get<double>();
    else if (key == "stage1_len") c.stage1_len = v.get<int>();
    else if (key == "stage2_len") c.stage2_len = v.get<int>();
    else if (key == "mlm") c.mlm = v.get<bool>();
    else if (key == "clc") c.clc = v.get<bool>();
    else if (key == "tcr") c.tcr = v.get<bool>();
    else if (key == "epochs") c.epochs = v.get<int>();
    else if (key == "taxonomy") c.taxonomy = v.get<std::string>();
    else if (key == "finetune_batch") c.finetune_batch = v.get<int>();
    else if (key == "finetune_lr") c.finetune_lr = v.get<double>();
    else throw ParseError("unknown config key '" + key + "'");
  }
  if (c.steps < 0 || c.batch_size <= 0 || c.lr <= 0.0) throw ParseError("steps, batch_size and lr must be valid");
  if (c.holdout < 0.0 || c.holdout >= 1.0) throw ParseError("holdout must lie in [0, 1)");
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open config " + path);
  RunConfig c;
  try {
    apply_config(c, nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("bad config: ") + e.what());
  }
  return c;
}

// ---------------------------------------------------------------------------
// Corpus

struct CorpusTable {
  std::string file;
  std::string topic;
  Table table;
  BiTree bitree;
  TokenizedTable tokens;
};

inline Table load_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open table " + path);
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return parse_table(std::string_view(text));
}

/// Loads every table listed in corpus.json (or every tables/*.json when the
/// index is absent). Tables failing the filter or the tree build are skipped
/// and reported.
inline std::vector<CorpusTable> load_corpus(const std::string& dir, const Vocabulary& v,
                                            std::vector<Warning>* warnings = nullptr) {
  namespace fs = std::filesystem;
  std::vector<std::pair<std::string, std::string>> entries;  // file, topic
  const fs::path index = fs::path(dir) / "corpus.json";
  if (fs::exists(index)) {
    std::ifstream in(index);
    for (const auto& e : nlohmann::json::parse(in)) {
      entries.emplace_back(e.at("file").get<std::string>(), e.value("topic", e.at("file").get<std::string>()));
    }
  } else if (fs::exists(fs::path(dir) / "tables")) {
    std::vector<std::string> files;
    for (const auto& f : fs::directory_iterator(fs::path(dir) / "tables")) {
      if (f.path().extension() == ".json") files.push_back("tables/" + f.path().filename().string());
    }
    std::sort(files.begin(), files.end());
    for (auto& f : files) entries.emplace_back(f, f);
  }
  std::vector<CorpusTable> out;
  for (const auto& [file, topic] : entries) {
    try {
      Table t = load_table_file((fs::path(dir) / file).string());
      const FilterResult fr = filter_table(t);
      if (!fr.accepted) {
        if (warnings) warnings->push_back({"filtered", file + ": " + fr.reason, -1, -1});
        continue;
      }
      BiTree bt = build_bitree(t, warnings);
      TokenizedTable tt = tokenize_table(t, bt, v);
      out.push_back(CorpusTable{file, topic, std::move(t), std::move(bt), std::move(tt)});
    } catch (const Error& e) {
      if (warnings) warnings->push_back({"skipped", file + ": " + e.what(), -1, -1});
    }
  }
  if (out.empty()) throw Error("corpus " + dir + " has no usable tables");
  return out;
}

/// Labeled examples from a labels file keyed by table paths relative to
/// `dir`. Tables that fail to load, filter or build are skipped with a warning.
inline std::vector<Example> load_labeled_set(const std::string& dir, const std::string& labels_path,
                                             const Vocabulary& v, const Taxonomy& tax,
                                             std::vector<Warning>* warnings = nullptr) {
  namespace fs = std::filesystem;
  std::ifstream in(labels_path);
  if (!in) throw Error("cannot open labels " + labels_path);
  nlohmann::json labels;
  try {
    labels = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(labels_path + ": " + e.what());
  }
  if (!labels.is_object()) throw ParseError(labels_path + ": labels must be a JSON object");
  std::vector<Example> out;
  for (const auto& [file, entry] : labels.items()) {
    try {
      Table t = load_table_file((fs::path(dir) / file).string());
      const FilterResult fr = filter_table(t);
      if (!fr.accepted) {
        if (warnings) warnings->push_back({"filtered", file + ": " + fr.reason, -1, -1});
        continue;
      }
      Example ex = make_labeled_example(file, std::move(t), v);
      attach_labels(ex, entry, tax);
      out.push_back(std::move(ex));
    } catch (const Error& e) {
      if (warnings) warnings->push_back({"skipped", file + ": " + e.what(), -1, -1});
    }
  }
  if (out.empty()) throw Error("no usable labeled tables in " + labels_path);
  return out;
}

// ---------------------------------------------------------------------------
// Pre-training examples

struct Toggles {
  bool mlm = true;
  bool clc = true;
  bool tcr = true;
};

struct PretrainExample {
  TokenSequence sequence;
  MlmBatch mlm;
  ClcBatch clc;
  TcrBatch tcr;
};

/// Context segments of a table with a different topic, chosen at random;
/// empty when every table shares the topic.
inline const std::vector<TextTokens>* foreign_context(const std::vector<CorpusTable>& corpus, std::size_t self,
                                                      Rng& rng) {
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (corpus[i].topic != corpus[self].topic && !corpus[i].tokens.context.empty()) pool.push_back(i);
  }
  if (pool.empty()) return nullptr;
  return &corpus[pool[rng.below(pool.size())]].tokens.context;
}

/// Serializes one table and applies TCR, CLC and MLM in that order.
inline PretrainExample make_example(const std::vector<CorpusTable>& corpus, std::size_t index, std::uint64_t seed,
                                    int max_len, const Toggles& on, int mask_id) {
  const CorpusTable& ct = corpus[index];
  Rng rng(seed);
  SerializeOptions opts;
  opts.include_context = !on.tcr;
  PretrainExample ex;
  ex.sequence = serialize(ct.tokens, rng.next(), max_len, opts);
  const std::uint64_t tcr_seed = rng.next();
  const std::uint64_t clc_seed = rng.next();
  const std::uint64_t mlm_seed = rng.next();
  if (on.tcr) {
    static const std::vector<TextTokens> none;
    const auto* foreign = foreign_context(corpus, index, rng);
    TcrResult r = build_tcr(ex.sequence, ct.tokens.context, foreign ? *foreign : none, tcr_seed);
    ex.sequence = std::move(r.sequence);
    ex.tcr = std::move(r.batch);
  }
  if (on.clc) {
    std::size_t with_content = 0;
    for (const auto& s : detail::cell_spans(ex.sequence)) with_content += s.content.empty() ? 0 : 1;
    if (with_content >= 2) {
      ClcResult r = select_clc(ex.sequence, ct.table, clc_seed);
      remap(ex.tcr, r.index_map);
      ex.sequence = std::move(r.sequence);
      ex.clc = std::move(r.batch);
    }
  }
  if (on.mlm) {
    ex.mlm = select_mlm(ex.sequence, mlm_seed);
    ex.sequence = apply_mlm(std::move(ex.sequence), ex.mlm, mask_id);
  }
  return ex;
}

struct ObjectiveLosses {
  Var mlm;
  Var clc;
  Var tcr;
  Var total;
};

template <class Model>
ObjectiveLosses objective_losses(Tape& tape, Model& m, const PretrainExample& ex, const BiTree& bt) {
  Var h = forward(tape, m, ex.sequence, bt);
  ObjectiveLosses l;
  l.mlm = mlm_loss(h, ex.mlm, bind(tape, m.embeddings.token));
  l.clc = clc_loss(h, ex.clc);
  l.tcr = tcr_loss(h, ex.tcr, bind(tape, m.tcr_bilinear));
  l.total = total_loss(l.mlm, l.clc, l.tcr);
  return l;
}

// ---------------------------------------------------------------------------
// Training loop

struct StepLog {
  int step = 0;
  double mlm = 0.0;
  double clc = 0.0;
  double tcr = 0.0;
  double total = 0.0;
  int max_len = 0;
};

inline nlohmann::json to_json(const StepLog& s) {
  return {{"step", s.step}, {"l_mlm", s.mlm}, {"l_clc", s.clc}, {"l_tcr", s.tcr}, {"total", s.total}};
}

struct HeldOutScores {
  double clc_accuracy = 0.0;
  double tcr_accuracy = 0.0;
  long clc_blanks = 0;
  long tcr_segments = 0;
};

struct PretrainResult {
  std::vector<StepLog> log;
  std::vector<std::size_t> train;
  std::vector<std::size_t> heldout;
  HeldOutScores scores;
};

/// Sequence-length limit at a step: the first half of the run uses the
/// short stage, the rest the long one.
inline int stage_length(const RunConfig& c, int step) { return 2 * step < c.steps ? c.stage1_len : c.stage2_len; }

/// CLC and TCR accuracy on tables never trained on, `rounds` examples each.
inline HeldOutScores evaluate_heldout(const ModelState& m, const std::vector<CorpusTable>& corpus,
                                      const std::vector<std::size_t>& subset, int max_len, std::uint64_t seed,
                                      int mask_id, int rounds = 5) {
  struct Part {
    long clc_hits = 0, clc_total = 0, tcr_hits = 0, tcr_total = 0;
  };
  std::vector<Part> parts(subset.size() * static_cast<std::size_t>(rounds));
  parallel_for(parts.size(), [&](std::size_t k) {
    const std::size_t idx = subset[k / static_cast<std::size_t>(rounds)];
    const PretrainExample ex = make_example(corpus, idx, mix_seed(seed, k), max_len, Toggles{false, true, true}, mask_id);
    const Matrix h = hidden_states(m, ex.sequence, corpus[idx].bitree);
    Part& p = parts[k];
    if (!ex.clc.blank_positions.empty()) {
      const double acc = clc_accuracy(h, ex.clc);
      p.clc_total = static_cast<long>(ex.clc.blank_positions.size());
      p.clc_hits = std::lround(acc * static_cast<double>(p.clc_total));
    }
    const auto [hits, total] = tcr_hits(h, ex.tcr, m.tcr_bilinear.value);
    p.tcr_hits = hits;
    p.tcr_total = total;
  });
  HeldOutScores s;
  long ch = 0, th = 0;
  for (const auto& p : parts) {
    ch += p.clc_hits;
    s.clc_blanks += p.clc_total;
    th += p.tcr_hits;
    s.tcr_segments += p.tcr_total;
  }
  s.clc_accuracy = s.clc_blanks ? static_cast<double>(ch) / static_cast<double>(s.clc_blanks) : 0.0;
  s.tcr_accuracy = s.tcr_segments ? static_cast<double>(th) / static_cast<double>(s.tcr_segments) : 0.0;
  return s;
}

/// Pre-trains in place. `on_step` (optional) receives every step's log.
inline PretrainResult pretrain(ModelState& m, const std::vector<CorpusTable>& corpus, const RunConfig& c,
                               int mask_id, const std::function<void(const StepLog&)>& on_step = {}) {
  if (corpus.empty()) throw Error("corpus is empty");
  PretrainResult r;
  const Split split = table_split(corpus.size(), mix_seed(c.seed, 0x686f6c64), nullptr, 1.0 - c.holdout, 0.0);
  r.train = split.train;
  r.heldout = split.test;
  if (r.train.empty()) throw Error("no training tables after the hold-out split");
  const Toggles on{c.mlm, c.clc, c.tcr};
  AdamW opt(c.lr, c.weight_decay);
  Rng order_rng(mix_seed(c.seed, 0x6f726472));
  std::vector<std::size_t> order;
  std::size_t cursor = 0;
  for (int step = 0; step < c.steps; ++step) {
    const int max_len = stage_length(c, step);
    m.zero_grad();
    StepLog s;
    s.step = step;
    s.max_len = max_len;
    const double inv = 1.0 / static_cast<double>(c.batch_size);
    for (int b = 0; b < c.batch_size; ++b) {
      if (cursor >= order.size()) {
        order = r.train;
        order_rng.shuffle(order);
        cursor = 0;
      }
      const std::size_t idx = order[cursor++];
      const auto seed = mix_seed(c.seed, static_cast<std::uint64_t>(step) * 1009u + static_cast<std::uint64_t>(b));
      const PretrainExample ex = make_example(corpus, idx, seed, max_len, on, mask_id);
      Tape tape;
      ObjectiveLosses l = objective_losses(tape, m, ex, corpus[idx].bitree);
      std::vector<Var> parts;
      if (c.mlm) parts.push_back(l.mlm);
      if (c.clc) parts.push_back(l.clc);
      if (c.tcr) parts.push_back(l.tcr);
      if (!parts.empty()) tape.backward(scale(add_all(parts), inv));
      if (c.mlm) s.mlm += l.mlm.scalar() * inv;
      if (c.clc) s.clc += l.clc.scalar() * inv;
      if (c.tcr) s.tcr += l.tcr.scalar() * inv;
    }
    s.total = total_loss(s.mlm, s.clc, s.tcr);
    opt.step(m.parameters());
    r.log.push_back(s);
    if (on_step) on_step(s);
  }
  if (!r.heldout.empty()) {
    r.scores = evaluate_heldout(m, corpus, r.heldout, c.stage2_len, mix_seed(c.seed, 0x6576616c), mask_id);
  }
  return r;
}

}  // namespace tableweave
