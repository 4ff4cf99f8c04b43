#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "tableweave/corpus.hpp"
#include "tableweave/encoder.hpp"
#include "tableweave/heads.hpp"
#include "tableweave/pretrain.hpp"

namespace fs = std::filesystem;
namespace tw = tableweave;
using nlohmann::json;

namespace {

struct Common {
  std::uint64_t seed = 0;
  std::string config;
  bool pretty = false;
  CLI::Option* seed_opt = nullptr;
};

void add_common(CLI::App* cmd, Common& c) {
  c.seed_opt = cmd->add_option("--seed", c.seed, "Random seed");
  cmd->add_option("--config", c.config, "JSON config with flat RunConfig keys")->check(CLI::ExistingFile);
  cmd->add_flag("--pretty", c.pretty, "Human-readable output instead of JSON");
}

tw::RunConfig base_config(const Common& c) {
  tw::RunConfig cfg = c.config.empty() ? tw::RunConfig{} : tw::load_config(c.config);
  if (c.seed_opt->count() > 0) cfg.seed = c.seed;
  return cfg;
}

void report(const std::vector<tw::Warning>& warnings) {
  for (const auto& w : warnings) std::cerr << tw::to_json(w).dump() << '\n';
}

tw::Vocabulary load_vocab(const std::string& path, const std::string& corpus) {
  if (!path.empty()) return tw::Vocabulary::load_file(path);
  if (!corpus.empty() && fs::exists(fs::path(corpus) / "vocab.txt")) {
    return tw::Vocabulary::load_file((fs::path(corpus) / "vocab.txt").string());
  }
  return tw::Vocabulary(tw::base_vocabulary());
}

std::string distance_text(int d) { return d == tw::kUnboundedDistance ? "inf" : std::to_string(d); }

std::string path_text(const std::vector<int>& p) {
  std::string s = "<";
  for (std::size_t i = 0; i < p.size(); ++i) s += (i ? "," : "") + std::to_string(p[i]);
  return s + ">";
}

std::string token_text(const tw::Vocabulary& v, int id) {
  return id >= 0 && static_cast<std::size_t>(id) < v.size() ? v.token(id) : "?";
}

void print_metrics(const tw::Metrics& m) {
  std::printf("%-16s %9s %9s %9s %8s\n", "class", "precision", "recall", "f1", "support");
  for (std::size_t i = 0; i < m.classes.size(); ++i) {
    const auto& c = m.per_class[i];
    std::printf("%-16s %9.4f %9.4f %9.4f %8ld\n", m.classes[i].c_str(), c.precision, c.recall, c.f1, c.support);
  }
  std::printf("macro-F1 %.4f  accuracy %.4f\n", m.macro_f1, m.accuracy);
  for (const auto& e : m.empty_classes) std::printf("no gold instances: %s\n", e.c_str());
}

void emit(const json& j, bool pretty) { std::cout << (pretty ? j.dump(2) : j.dump()) << '\n'; }

// ---------------------------------------------------------------------------

struct InspectArgs {
  std::string table;
  bool trees = false;
  bool distances = false;
};

int run_inspect(const InspectArgs& a, const Common& c) {
  base_config(c);
  const tw::Table t = tw::load_table_file(a.table);
  std::vector<tw::Warning> warnings;
  const tw::FilterResult fr = tw::filter_table(t);
  const tw::ExtractedTrees trees = tw::extract_trees(t, &warnings);
  const tw::BiTree bt = tw::build_bitree(t, trees);
  report(warnings);
  if (c.pretty) {
    std::printf("%d x %d, filter %s%s%s\n", t.n_rows(), t.n_cols(), fr.accepted ? "accepted" : "rejected",
                fr.accepted ? "" : ": ", fr.reason.c_str());
    for (int r = 0; r < bt.n_rows(); ++r) {
      for (int col = 0; col < bt.n_cols(); ++col) {
        const auto p = bt.coordinate_of(r, col);
        std::printf("%-6s top %-12s left %-12s %s\n", tw::a1_name(r, col).c_str(), path_text(p.top).c_str(),
                    path_text(p.left).c_str(), t.at(r, col).text.c_str());
      }
    }
    if (a.trees) {
      std::printf("top tree  %s\n", tw::to_json(trees.top).dump().c_str());
      std::printf("left tree %s\n", tw::to_json(trees.left).dump().c_str());
    }
    if (a.distances) {
      const int n = bt.n_rows() * bt.n_cols();
      for (int i = 0; i < n; ++i) {
        for (int k = 0; k < n; ++k) {
          std::printf("%3d", bt.distance({i / bt.n_cols(), i % bt.n_cols()}, {k / bt.n_cols(), k % bt.n_cols()}));
        }
        std::printf("\n");
      }
    }
    return 0;
  }
  json j = tw::bitree_report(bt, a.distances);
  j["filter"] = {{"accepted", fr.accepted}, {"reason", fr.reason}};
  if (a.trees) {
    j["top_tree"] = tw::to_json(trees.top);
    j["left_tree"] = tw::to_json(trees.left);
  }
  emit(j, false);
  return 0;
}

struct SequenceArgs {
  std::string table;
  std::string vocab;
  std::string distance;
  int max_len = 512;
  bool sample = false;
};

struct Serialized {
  tw::BiTree bitree;
  tw::TokenSequence sequence;
};

Serialized table_sequence(const SequenceArgs& a, const tw::Vocabulary& v, std::uint64_t seed) {
  const tw::Table t = tw::load_table_file(a.table);
  std::vector<tw::Warning> warnings;
  tw::BiTree bt = tw::build_bitree(t, &warnings);
  report(warnings);
  tw::SerializeOptions opts;
  opts.sample_data_cells = a.sample;
  tw::TokenSequence ts = tw::serialize(t, bt, v, seed, a.max_len, opts);
  return {std::move(bt), std::move(ts)};
}

int run_tokenize(const SequenceArgs& a, const Common& c) {
  const tw::RunConfig cfg = base_config(c);
  const tw::Vocabulary v = load_vocab(a.vocab.empty() ? cfg.vocab : a.vocab, cfg.corpus);
  const tw::TokenSequence ts = table_sequence(a, v, cfg.seed).sequence;
  if (c.pretty) {
    std::printf("%4s %-16s %-9s %5s %4s %4s %-12s %-12s %s\n", "pos", "token", "role", "cell", "row", "col", "top",
                "left", "number");
    for (std::size_t i = 0; i < ts.size(); ++i) {
      const auto& n = ts.numbers[i];
      const char* role = ts.roles[i] == tw::SegmentRole::cls_text ? "cls_text"
                         : ts.roles[i] == tw::SegmentRole::cell   ? "cell"
                                                                  : "tail_text";
      std::printf("%4zu %-16s %-9s %5d %4d %4d %-12s %-12s %d,%d,%d,%d\n", i, token_text(v, ts.token_ids[i]).c_str(),
                  role, ts.cell_ids[i], ts.rows[i], ts.cols[i],
                  path_text({ts.top[i].begin(), ts.top[i].end()}).c_str(),
                  path_text({ts.left[i].begin(), ts.left[i].end()}).c_str(), n.magnitude, n.precision, n.first_digit,
                  n.last_digit);
    }
    return 0;
  }
  json j = tw::to_json(ts);
  std::vector<std::string> tokens;
  for (int id : ts.token_ids) tokens.push_back(token_text(v, id));
  j["tokens"] = tokens;
  emit(j, false);
  return 0;
}

int run_mask(const SequenceArgs& a, const Common& c) {
  const tw::RunConfig cfg = base_config(c);
  const int d = a.distance.empty() ? cfg.distance : tw::parse_distance(json(a.distance));
  if (d < 0) throw tw::Error("distance must be non-negative");
  const tw::Vocabulary v = load_vocab(a.vocab.empty() ? cfg.vocab : a.vocab, cfg.corpus);
  const auto [bt, ts] = table_sequence(a, v, cfg.seed);
  const tw::Mask m = tw::build_visibility(ts, bt, d);
  std::vector<std::string> rows;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::string row;
    for (Eigen::Index k = 0; k < m.cols(); ++k) row += m(i, k) ? '1' : '0';
    rows.push_back(std::move(row));
  }
  if (c.pretty) {
    for (std::size_t i = 0; i < rows.size(); ++i) {
      std::printf("%4zu %-12s %s\n", i, token_text(v, ts.token_ids[i]).c_str(), rows[i].c_str());
    }
    return 0;
  }
  std::vector<std::string> tokens;
  for (int id : ts.token_ids) tokens.push_back(token_text(v, id));
  emit({{"distance", distance_text(d)}, {"length", ts.size()}, {"tokens", tokens}, {"rows", rows}}, false);
  return 0;
}

struct GenArgs {
  std::string out;
  int n = 200;
};

int run_gen_corpus(const GenArgs& a, const Common& c) {
  const tw::RunConfig cfg = base_config(c);
  if (a.n <= 0) throw tw::Error("--n must be positive");
  const auto corpus = tw::generate_corpus(static_cast<std::size_t>(a.n), cfg.seed);
  tw::write_corpus(a.out, corpus);
  std::map<std::string, int> types;
  for (const auto& g : corpus) ++types[tw::type_label(g.type)];
  const tw::Vocabulary v = tw::Vocabulary::load_file((fs::path(a.out) / "vocab.txt").string());
  if (c.pretty) {
    std::printf("wrote %d tables to %s (vocabulary %zu)\n", a.n, a.out.c_str(), v.size());
    for (const auto& [k, n] : types) std::printf("  %-3s %d\n", k.c_str(), n);
    return 0;
  }
  emit({{"out", a.out}, {"tables", a.n}, {"types", types}, {"vocab_size", v.size()}, {"seed", cfg.seed}}, false);
  return 0;
}

struct PretrainArgs {
  std::string corpus, vocab, out, log, init, distance, mode;
  int steps = 0, batch_size = 0, layers = 0, hidden = 0, heads = 0;
  double lr = 0.0;
  bool no_mlm = false, no_clc = false, no_tcr = false;
  std::map<std::string, CLI::Option*> given;
};

bool set(const PretrainArgs& a, const char* name) {
  auto it = a.given.find(name);
  return it != a.given.end() && it->second->count() > 0;
}

int run_pretrain(const PretrainArgs& a, const Common& c) {
  tw::RunConfig cfg = base_config(c);
  if (set(a, "corpus")) cfg.corpus = a.corpus;
  if (set(a, "vocab")) cfg.vocab = a.vocab;
  if (set(a, "out")) cfg.checkpoint = a.out;
  if (set(a, "log")) cfg.log = a.log;
  if (set(a, "steps")) cfg.steps = a.steps;
  if (set(a, "batch-size")) cfg.batch_size = a.batch_size;
  if (set(a, "lr")) cfg.lr = a.lr;
  if (set(a, "layers")) cfg.layers = a.layers;
  if (set(a, "hidden")) cfg.hidden = a.hidden;
  if (set(a, "heads")) cfg.heads = a.heads;
  if (set(a, "distance")) cfg.distance = tw::parse_distance(json(a.distance));
  if (set(a, "mode")) cfg.mode = a.mode == "explicit" ? tw::TreeEmbedding::explicit_onehot : tw::TreeEmbedding::implicit;
  if (a.no_mlm) cfg.mlm = false;
  if (a.no_clc) cfg.clc = false;
  if (a.no_tcr) cfg.tcr = false;
  if (cfg.corpus.empty()) throw tw::Error("pretrain needs --corpus");
  if (cfg.steps < 0 || cfg.batch_size <= 0 || cfg.lr <= 0.0) throw tw::Error("steps, batch size and lr must be valid");

  const tw::Vocabulary v = load_vocab(cfg.vocab, cfg.corpus);
  std::vector<tw::Warning> warnings;
  const auto corpus = tw::load_corpus(cfg.corpus, v, &warnings);
  report(warnings);
  tw::ModelState m = a.init.empty() ? tw::init_model(cfg.model_config(static_cast<int>(v.size())), cfg.seed)
                                    : tw::load_checkpoint(a.init);
  if (m.config.vocab_size != static_cast<int>(v.size())) {
    throw tw::Error("checkpoint vocabulary size " + std::to_string(m.config.vocab_size) +
                    " does not match the vocabulary (" + std::to_string(v.size()) + ")");
  }
  std::ofstream log;
  if (!cfg.log.empty()) {
    log.open(cfg.log);
    if (!log) throw tw::Error("cannot write log " + cfg.log);
  }
  if (c.pretty) std::printf("%6s %10s %10s %10s %10s\n", "step", "l_mlm", "l_clc", "l_tcr", "total");
  const auto result = tw::pretrain(m, corpus, cfg, v.mask_id(), [&](const tw::StepLog& s) {
    const std::string line = tw::to_json(s).dump();
    if (log.is_open()) log << line << '\n';
    if (c.pretty) {
      std::printf("%6d %10.4f %10.4f %10.4f %10.4f\n", s.step, s.mlm, s.clc, s.tcr, s.total);
    } else {
      std::cout << line << '\n';
    }
  });
  if (!cfg.checkpoint.empty()) {
    tw::save_checkpoint(m, cfg.checkpoint, {{"vocab_size", v.size()}, {"steps", cfg.steps}, {"seed", cfg.seed}});
  }
  const json summary = {{"checkpoint", cfg.checkpoint},
                        {"train_tables", result.train.size()},
                        {"heldout_tables", result.heldout.size()},
                        {"heldout_clc_accuracy", result.scores.clc_accuracy},
                        {"heldout_tcr_accuracy", result.scores.tcr_accuracy},
                        {"heldout_clc_blanks", result.scores.clc_blanks},
                        {"heldout_tcr_segments", result.scores.tcr_segments}};
  if (c.pretty) {
    std::printf("held-out CLC accuracy %.4f over %ld blanks, TCR accuracy %.4f over %ld segments\n",
                result.scores.clc_accuracy, result.scores.clc_blanks, result.scores.tcr_accuracy,
                result.scores.tcr_segments);
  } else {
    std::cout << json{{"summary", summary}}.dump() << '\n';
  }
  return 0;
}

struct TaskArgs {
  std::string corpus, labels, vocab, checkpoint, out, taxonomy, task, subset = "test";
  int epochs = 0, batch_size = 0, max_len = 512;
  double lr = 0.0;
  CLI::Option* epochs_opt = nullptr;
  CLI::Option* lr_opt = nullptr;
  CLI::Option* batch_opt = nullptr;
};

tw::Task parse_task(const std::string& s) {
  if (s == "ctc") return tw::Task::ctc;
  if (s == "ttc") return tw::Task::ttc;
  throw tw::Error("task must be 'ctc' or 'ttc'");
}

std::string default_labels(const std::string& corpus, tw::Task task) {
  return (fs::path(corpus) / (task == tw::Task::ctc ? "labels_ctc.json" : "labels_ttc.json")).string();
}

tw::Taxonomy pick_taxonomy(const std::string& flag, const tw::RunConfig& cfg, tw::Task task) {
  if (task == tw::Task::ttc) return tw::ttc_taxonomy();
  return tw::taxonomy_by_name(flag.empty() ? cfg.taxonomy : flag);
}

int run_finetune(const TaskArgs& a, tw::Task task, const Common& c) {
  const tw::RunConfig cfg = base_config(c);
  const std::string corpus_dir = a.corpus.empty() ? cfg.corpus : a.corpus;
  if (corpus_dir.empty()) throw tw::Error("fine-tuning needs --corpus");
  const tw::Vocabulary v = load_vocab(a.vocab.empty() ? cfg.vocab : a.vocab, corpus_dir);
  const tw::Taxonomy tax = pick_taxonomy(a.taxonomy, cfg, task);
  std::vector<tw::Warning> warnings;
  const auto data =
      tw::load_labeled_set(corpus_dir, a.labels.empty() ? default_labels(corpus_dir, task) : a.labels, v, tax, &warnings);
  report(warnings);
  tw::ModelState m = a.checkpoint.empty() ? tw::init_model(cfg.model_config(static_cast<int>(v.size())), cfg.seed)
                                          : tw::load_checkpoint(a.checkpoint);
  if (m.config.vocab_size != static_cast<int>(v.size())) throw tw::Error("checkpoint and vocabulary sizes differ");

  tw::FinetuneOptions o = tw::default_finetune_options(task);
  o.seed = cfg.seed;
  o.max_len = a.max_len;
  o.epochs = a.epochs_opt->count() ? a.epochs : cfg.epochs;
  o.lr = a.lr_opt->count() ? a.lr : cfg.finetune_lr;
  if (a.batch_opt->count()) {
    o.batch_size = a.batch_size;
  } else if (cfg.finetune_batch > 0) {
    o.batch_size = cfg.finetune_batch;
  }
  if (o.epochs < 0 || o.lr <= 0.0 || o.batch_size <= 0) throw tw::Error("epochs, lr and batch size must be valid");

  const tw::FinetuneReport r = tw::run_finetune(m, data, tax, o);
  if (!a.out.empty()) {
    tw::save_checkpoint(m, a.out, {{"task", task == tw::Task::ctc ? "ctc" : "ttc"}, {"taxonomy", tax.name},
                                   {"seed", cfg.seed}});
  }
  if (c.pretty) {
    std::printf("%zu train / %zu valid / %zu test tables\n", r.split.train.size(), r.split.valid.size(),
                r.split.test.size());
    for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) std::printf("epoch %zu loss %.5f\n", e + 1, r.epoch_loss[e]);
    print_metrics(r.test);
    return 0;
  }
  emit({{"task", task == tw::Task::ctc ? "ctc" : "ttc"},
        {"taxonomy", tax.name},
        {"tables", data.size()},
        {"split", {{"train", r.split.train.size()}, {"valid", r.split.valid.size()}, {"test", r.split.test.size()}}},
        {"epoch_loss", r.epoch_loss},
        {"test", tw::to_json(r.test)},
        {"checkpoint", a.out}},
       false);
  return 0;
}

int run_eval(const TaskArgs& a, const Common& c) {
  const tw::RunConfig cfg = base_config(c);
  const tw::Task task = parse_task(a.task);
  const std::string corpus_dir = a.corpus.empty() ? cfg.corpus : a.corpus;
  if (corpus_dir.empty()) throw tw::Error("eval needs --corpus");
  std::string taxonomy = a.taxonomy;
  if (taxonomy.empty()) {
    std::ifstream in(a.checkpoint, std::ios::binary);
    const json manifest = tw::read_checkpoint_manifest(in);
    if (manifest.contains("extra") && manifest["extra"].contains("taxonomy")) {
      taxonomy = manifest["extra"]["taxonomy"].get<std::string>();
    }
  }
  const tw::Vocabulary v = load_vocab(a.vocab.empty() ? cfg.vocab : a.vocab, corpus_dir);
  const tw::Taxonomy tax = pick_taxonomy(taxonomy, cfg, task);
  std::vector<tw::Warning> warnings;
  const auto data =
      tw::load_labeled_set(corpus_dir, a.labels.empty() ? default_labels(corpus_dir, task) : a.labels, v, tax, &warnings);
  report(warnings);
  const tw::ModelState m = tw::load_checkpoint(a.checkpoint);
  if (m.config.vocab_size != static_cast<int>(v.size())) throw tw::Error("checkpoint and vocabulary sizes differ");
  const auto& head = task == tw::Task::ctc ? m.ctc_head : m.ttc_head;
  if (!head) throw tw::Error("checkpoint has no head for this task");
  if (head->classes() != tax.size()) throw tw::Error("head size does not match the taxonomy '" + tax.name + "'");

  std::vector<std::size_t> subset;
  if (a.subset == "all") {
    for (std::size_t i = 0; i < data.size(); ++i) subset.push_back(i);
  } else {
    const tw::Split s = tw::finetune_split(data, task, cfg.seed);
    subset = a.subset == "train" ? s.train : a.subset == "valid" ? s.valid : s.test;
  }
  const tw::Metrics metrics = tw::evaluate(m, data, subset, task, tax, a.max_len);
  if (c.pretty) {
    std::printf("%s on %zu %s tables\n", a.task.c_str(), subset.size(), a.subset.c_str());
    print_metrics(metrics);
    return 0;
  }
  json j = tw::to_json(metrics);
  j["task"] = a.task;
  j["subset"] = a.subset;
  j["tables"] = subset.size();
  emit(j, false);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"tableweave: tree-based table encoding, pre-training and fine-tuning"};
  app.require_subcommand(1);

  Common inspect_common, mask_common, tok_common, gen_common, pre_common, ctc_common, ttc_common, eval_common;

  InspectArgs inspect;
  auto* inspect_cmd = app.add_subcommand("inspect", "Header trees, coordinates and distances of a table");
  inspect_cmd->add_option("--table", inspect.table, "Table JSON file")->required()->check(CLI::ExistingFile);
  inspect_cmd->add_flag("--trees", inspect.trees, "Include the extracted header trees");
  inspect_cmd->add_flag("--distances", inspect.distances, "Include the cell-by-cell distance matrix");
  add_common(inspect_cmd, inspect_common);

  SequenceArgs mask;
  auto* mask_cmd = app.add_subcommand("mask", "Visibility matrix of a serialized table as 0/1 rows");
  mask_cmd->add_option("--table", mask.table, "Table JSON file")->required()->check(CLI::ExistingFile);
  mask_cmd->add_option("--distance", mask.distance, "Distance threshold, an integer or 'inf'");
  mask_cmd->add_option("--vocab", mask.vocab, "Vocabulary file");
  mask_cmd->add_option("--max-len", mask.max_len, "Maximum sequence length")->check(CLI::PositiveNumber);
  mask_cmd->add_flag("--sample", mask.sample, "Drop data cells at random as in pre-training");
  add_common(mask_cmd, mask_common);

  SequenceArgs tok;
  auto* tok_cmd = app.add_subcommand("tokenize", "Serialize a table into model inputs");
  tok_cmd->add_option("--table", tok.table, "Table JSON file")->required()->check(CLI::ExistingFile);
  tok_cmd->add_option("--vocab", tok.vocab, "Vocabulary file");
  tok_cmd->add_option("--max-len", tok.max_len, "Maximum sequence length")->check(CLI::PositiveNumber);
  tok_cmd->add_flag("--sample", tok.sample, "Drop data cells at random as in pre-training");
  add_common(tok_cmd, tok_common);

  GenArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-corpus", "Write a synthetic labeled table corpus");
  gen_cmd->add_option("--out", gen.out, "Output directory")->required();
  gen_cmd->add_option("--n", gen.n, "Number of tables");
  add_common(gen_cmd, gen_common);

  PretrainArgs pre;
  auto* pre_cmd = app.add_subcommand("pretrain", "Pre-train with MLM, CLC and TCR; one JSON line per step");
  pre.given["corpus"] = pre_cmd->add_option("--corpus", pre.corpus, "Corpus directory");
  pre.given["vocab"] = pre_cmd->add_option("--vocab", pre.vocab, "Vocabulary file (default: corpus/vocab.txt)");
  pre.given["out"] = pre_cmd->add_option("--out", pre.out, "Checkpoint to write");
  pre.given["log"] = pre_cmd->add_option("--log", pre.log, "Also write step logs to this file");
  pre.given["steps"] = pre_cmd->add_option("--steps", pre.steps, "Optimizer steps");
  pre.given["batch-size"] = pre_cmd->add_option("--batch-size", pre.batch_size, "Tables per step");
  pre.given["lr"] = pre_cmd->add_option("--lr", pre.lr, "Learning rate");
  pre.given["layers"] = pre_cmd->add_option("--layers", pre.layers, "Encoder layers");
  pre.given["hidden"] = pre_cmd->add_option("--hidden", pre.hidden, "Hidden size (a multiple of 32)");
  pre.given["heads"] = pre_cmd->add_option("--heads", pre.heads, "Attention heads");
  pre.given["distance"] = pre_cmd->add_option("--distance", pre.distance, "Tree attention threshold or 'inf'");
  pre.given["mode"] = pre_cmd->add_option("--mode", pre.mode, "Tree embedding")->check(CLI::IsMember({"implicit", "explicit"}));
  pre_cmd->add_option("--init", pre.init, "Start from this checkpoint")->check(CLI::ExistingFile);
  pre_cmd->add_flag("--no-mlm", pre.no_mlm, "Disable masked language modeling");
  pre_cmd->add_flag("--no-clc", pre.no_clc, "Disable cell-level cloze");
  pre_cmd->add_flag("--no-tcr", pre.no_tcr, "Disable table context retrieval");
  add_common(pre_cmd, pre_common);

  auto add_task_options = [](CLI::App* cmd, TaskArgs& t) {
    cmd->add_option("--corpus", t.corpus, "Corpus directory holding the tables");
    cmd->add_option("--labels", t.labels, "Labels file (default: the corpus labels for the task)");
    cmd->add_option("--vocab", t.vocab, "Vocabulary file (default: corpus/vocab.txt)");
    cmd->add_option("--max-len", t.max_len, "Maximum sequence length")->check(CLI::PositiveNumber);
    cmd->add_option("--taxonomy", t.taxonomy, "Cell taxonomy: general or header-fine");
  };

  TaskArgs ctc;
  auto* ctc_cmd = app.add_subcommand("finetune-ctc", "Fine-tune the cell type classification head");
  add_task_options(ctc_cmd, ctc);
  TaskArgs ttc;
  auto* ttc_cmd = app.add_subcommand("finetune-ttc", "Fine-tune the table type classification head");
  add_task_options(ttc_cmd, ttc);
  for (auto [cmd, t] : {std::pair{ctc_cmd, &ctc}, std::pair{ttc_cmd, &ttc}}) {
    cmd->add_option("--checkpoint", t->checkpoint, "Pre-trained checkpoint (default: fresh weights)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", t->out, "Checkpoint to write");
    t->epochs_opt = cmd->add_option("--epochs", t->epochs, "Training epochs");
    t->lr_opt = cmd->add_option("--lr", t->lr, "Learning rate");
    t->batch_opt = cmd->add_option("--batch-size", t->batch_size, "Tables per step");
  }
  add_common(ctc_cmd, ctc_common);
  add_common(ttc_cmd, ttc_common);

  TaskArgs ev;
  auto* eval_cmd = app.add_subcommand("eval", "Per-class and macro F1 of a fine-tuned checkpoint");
  add_task_options(eval_cmd, ev);
  eval_cmd->add_option("--task", ev.task, "ctc or ttc")->required()->check(CLI::IsMember({"ctc", "ttc"}));
  eval_cmd->add_option("--checkpoint", ev.checkpoint, "Fine-tuned checkpoint")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--subset", ev.subset, "Tables to score")->check(CLI::IsMember({"train", "valid", "test", "all"}));
  add_common(eval_cmd, eval_common);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << json{{"error", e.what()}}.dump() << '\n';
    CLI::App* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
    std::cerr << sub->help();
    return e.get_exit_code() == 0 ? 2 : e.get_exit_code();
  }

  try {
    if (*inspect_cmd) return run_inspect(inspect, inspect_common);
    if (*mask_cmd) return run_mask(mask, mask_common);
    if (*tok_cmd) return run_tokenize(tok, tok_common);
    if (*gen_cmd) return run_gen_corpus(gen, gen_common);
    if (*pre_cmd) return run_pretrain(pre, pre_common);
    if (*ctc_cmd) return run_finetune(ctc, tw::Task::ctc, ctc_common);
    if (*ttc_cmd) return run_finetune(ttc, tw::Task::ttc, ttc_common);
    if (*eval_cmd) return run_eval(ev, eval_common);
  } catch (const std::exception& e) {
    std::cerr << json{{"error", e.what()}}.dump() << '\n';
    return 1;
  }
  return 1;
}
