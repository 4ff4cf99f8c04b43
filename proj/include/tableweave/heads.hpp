#pragma once

// Cell type (CTC) and table type (TTC) classification heads, metrics, and
// the fine-tuning loop.

#include <algorithm>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableweave/autograd.hpp"
#include "tableweave/encoder.hpp"
#include "tableweave/header_extract.hpp"
#include "tableweave/model.hpp"
#include "tableweave/optim.hpp"
#include "tableweave/parallel.hpp"
#include "tableweave/tokenizer.hpp"

namespace tableweave {

enum class Task { ctc, ttc };

struct Taxonomy {
  std::string name;
  std::vector<std::string> classes;

  int size() const { return static_cast<int>(classes.size()); }

  int index(const std::string& label) const {
    auto it = std::find(classes.begin(), classes.end(), label);
    if (it == classes.end()) throw Error("label '" + label + "' is not in taxonomy " + name);
    return static_cast<int>(it - classes.begin());
  }
};

/// Metadata, notes, data, top attribute, left attribute, derived.
inline Taxonomy general_taxonomy() { return {"general", {"MD", "N", "D", "TA", "LA", "B"}}; }

inline Taxonomy header_fine_taxonomy() {
  return {"header-fine", {"IndexName", "Index", "ValueName", "Aggregation", "Other"}};
}

/// Relational, entity, matrix, list, non-data.
inline Taxonomy ttc_taxonomy() { return {"ttc", {"R", "E", "M", "L", "ND"}}; }

inline Taxonomy taxonomy_by_name(const std::string& name) {
  if (name == "general") return general_taxonomy();
  if (name == "header-fine") return header_fine_taxonomy();
  if (name == "ttc") return ttc_taxonomy();
  throw Error("unknown taxonomy '" + name + "'");
}

/// gelu(r W1 + b1) W2 + b2 for every row of r.
template <class Head>
Var head_logits(Var reps, Head& h) {
  Tape& tape = *reps.tape;
  if (reps.cols() != h.w1.value.rows()) throw Error("head input width does not match the head");
  return linear(gelu(linear(reps, bind(tape, h.w1), bind(tape, h.b1))), bind(tape, h.w2), bind(tape, h.b2));
}

template <class Head>
Var ctc_logits(Var cell_reps, Head& h) {
  return head_logits(cell_reps, h);
}

template <class Head>
Var ttc_logits(Var table_rep, Head& h) {
  if (table_rep.rows() != 1) throw Error("table representation must be a single row");
  return head_logits(table_rep, h);
}

// ---------------------------------------------------------------------------
// Metrics

struct ClassMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  long support = 0;
  long predicted = 0;
};

struct Metrics {
  std::vector<std::string> classes;
  std::vector<std::vector<long>> confusion;  // [gold][predicted]
  std::vector<ClassMetrics> per_class;
  double macro_f1 = 0.0;
  double accuracy = 0.0;
  std::vector<std::string> empty_classes;  // no gold instance; F1 taken as 0
};

/// Per-class precision, recall and F1 = 2PR/(P+R) from a confusion matrix.
/// Undefined ratios are 0; classes without gold instances score F1 = 0 and
/// are listed in empty_classes. Macro-F1 is the unweighted mean.
inline Metrics metrics_from_confusion(const std::vector<std::vector<long>>& confusion,
                                      const std::vector<std::string>& classes) {
  const std::size_t c = classes.size();
  if (confusion.size() != c) throw Error("confusion matrix does not match the class count");
  Metrics m;
  m.classes = classes;
  m.confusion = confusion;
  long correct = 0;
  long total = 0;
  for (std::size_t k = 0; k < c; ++k) {
    ClassMetrics cm;
    const long tp = confusion[k][k];
    for (std::size_t j = 0; j < c; ++j) {
      cm.support += confusion[k][j];
      cm.predicted += confusion[j][k];
    }
    cm.precision = cm.predicted > 0 ? static_cast<double>(tp) / static_cast<double>(cm.predicted) : 0.0;
    cm.recall = cm.support > 0 ? static_cast<double>(tp) / static_cast<double>(cm.support) : 0.0;
    cm.f1 = cm.precision + cm.recall > 0.0 ? 2.0 * cm.precision * cm.recall / (cm.precision + cm.recall) : 0.0;
    if (cm.support == 0) {
      cm.f1 = 0.0;
      m.empty_classes.push_back(classes[k]);
    }
    m.macro_f1 += cm.f1;
    correct += tp;
    total += cm.support;
    m.per_class.push_back(cm);
  }
  if (c > 0) m.macro_f1 /= static_cast<double>(c);
  m.accuracy = total > 0 ? static_cast<double>(correct) / static_cast<double>(total) : 0.0;
  return m;
}

inline Metrics compute_metrics(const std::vector<int>& gold, const std::vector<int>& predicted,
                               const std::vector<std::string>& classes) {
  if (gold.size() != predicted.size()) throw Error("gold and predicted label counts differ");
  std::vector<std::vector<long>> confusion(classes.size(), std::vector<long>(classes.size(), 0));
  for (std::size_t i = 0; i < gold.size(); ++i) {
    const auto g = static_cast<std::size_t>(gold[i]);
    const auto p = static_cast<std::size_t>(predicted[i]);
    if (g >= classes.size() || p >= classes.size()) throw Error("label index out of range");
    ++confusion[g][p];
  }
  return metrics_from_confusion(confusion, classes);
}

inline nlohmann::json to_json(const Metrics& m) {
  nlohmann::json per = nlohmann::json::object();
  for (std::size_t k = 0; k < m.classes.size(); ++k) {
    const auto& c = m.per_class[k];
    per[m.classes[k]] = {{"precision", c.precision},
                         {"recall", c.recall},
                         {"f1", c.f1},
                         {"support", c.support},
                         {"predicted", c.predicted}};
  }
  return {{"per_class", per},
          {"macro_f1", m.macro_f1},
          {"accuracy", m.accuracy},
          {"empty_classes", m.empty_classes},
          {"confusion", m.confusion}};
}

// ---------------------------------------------------------------------------
// Labeled examples

struct Example {
  std::string id;
  Table table;
  BiTree bitree;
  TokenizedTable tokens;
  std::map<std::pair<int, int>, int> cell_labels;  // anchor (row, col) -> class
  int table_label = -1;
};

inline Example make_labeled_example(std::string id, Table t, const Vocabulary& v) {
  BiTree bt = build_bitree(t);
  TokenizedTable tt = tokenize_table(t, bt, v);
  return Example{std::move(id), std::move(t), std::move(bt), std::move(tt), {}, -1};
}

inline std::pair<int, int> parse_cell_key(const std::string& key) {
  const auto comma = key.find(',');
  if (comma == std::string::npos) throw ParseError("cell label key '" + key + "' is not 'row,col'");
  try {
    return {std::stoi(key.substr(0, comma)), std::stoi(key.substr(comma + 1))};
  } catch (const std::exception&) {
    throw ParseError("cell label key '" + key + "' is not 'row,col'");
  }
}

/// Reads {"file": {"cell_labels": {"r,c": "class"}}} or
/// {"file": {"table_label": "class"}} entries into an example.
inline void attach_labels(Example& ex, const nlohmann::json& entry, const Taxonomy& tax) {
  if (entry.contains("cell_labels")) {
    for (const auto& [key, label] : entry.at("cell_labels").items()) {
      const auto rc = parse_cell_key(key);
      if (!ex.table.in_grid(rc.first, rc.second)) throw ParseError("labeled cell " + key + " is outside the table");
      ex.cell_labels[rc] = tax.index(label.get<std::string>());
    }
  }
  if (entry.contains("table_label")) ex.table_label = tax.index(entry.at("table_label").get<std::string>());
}

/// Sequence used for fine-tuning and evaluation: every cell, no sampling.
inline TokenSequence finetune_sequence(const Example& ex, int max_len) {
  SerializeOptions opts;
  opts.sample_data_cells = false;
  return serialize(ex.tokens, 0, max_len, opts);
}

/// Leading [SEP] positions of labeled cells present in the sequence, and
/// their labels.
inline std::pair<std::vector<int>, std::vector<int>> labeled_positions(const Example& ex, const TokenSequence& ts) {
  std::map<int, int> lead;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    if (ts.roles[i] == SegmentRole::cell && ts.in_cell_pos[i] == 0) lead.emplace(ts.cell_ids[i], static_cast<int>(i));
  }
  std::vector<int> pos;
  std::vector<int> labels;
  for (const auto& [rc, label] : ex.cell_labels) {
    auto it = lead.find(rc.first * ex.table.n_cols() + rc.second);
    if (it == lead.end()) continue;
    pos.push_back(it->second);
    labels.push_back(label);
  }
  return {pos, labels};
}

// ---------------------------------------------------------------------------
// Splits

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> valid;
  std::vector<std::size_t> test;
};

/// Table-wise split, 80/10/10 by default. With `strata`, each stratum is
/// split separately so every class reaches every part when it can.
inline Split table_split(std::size_t n, std::uint64_t seed, const std::vector<int>* strata = nullptr,
                         double train_frac = 0.8, double valid_frac = 0.1) {
  Rng rng(seed);
  std::map<int, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[strata ? (*strata)[i] : 0].push_back(i);
  Split s;
  for (auto& [key, idx] : groups) {
    rng.shuffle(idx);
    const auto m = idx.size();
    auto n_test = static_cast<std::size_t>(std::lround(static_cast<double>(m) * (1.0 - train_frac - valid_frac)));
    auto n_valid = static_cast<std::size_t>(std::lround(static_cast<double>(m) * valid_frac));
    if (m >= 3) {
      if (train_frac + valid_frac < 1.0) n_test = std::max<std::size_t>(n_test, 1);
      if (valid_frac > 0.0) n_valid = std::max<std::size_t>(n_valid, 1);
    }
    n_test = std::min(n_test, m);
    n_valid = std::min(n_valid, m - n_test);
    for (std::size_t i = 0; i < m; ++i) {
      if (i < n_test) {
        s.test.push_back(idx[i]);
      } else if (i < n_test + n_valid) {
        s.valid.push_back(idx[i]);
      } else {
        s.train.push_back(idx[i]);
      }
    }
  }
  for (auto* part : {&s.train, &s.valid, &s.test}) std::sort(part->begin(), part->end());
  return s;
}

// ---------------------------------------------------------------------------
// Training and evaluation

struct FinetuneOptions {
  Task task = Task::ctc;
  int epochs = 4;
  double lr = 8e-6;
  double weight_decay = 0.01;
  int batch_size = 4;  // 4 for CTC, 2 for TTC
  int max_len = 512;
  std::uint64_t seed = 0;
};

inline FinetuneOptions default_finetune_options(Task task) {
  FinetuneOptions o;
  o.task = task;
  o.batch_size = task == Task::ctc ? 4 : 2;
  return o;
}

/// Loss of one example; nullopt when it has nothing to score.
template <class Model>
std::optional<Var> example_loss(Tape& tape, Model& m, const Example& ex, Task task, int max_len) {
  const TokenSequence ts = finetune_sequence(ex, max_len);
  if (task == Task::ctc) {
    auto [pos, labels] = labeled_positions(ex, ts);
    if (pos.empty()) return std::nullopt;
    Var h = forward(tape, m, ts, ex.bitree);
    return softmax_cross_entropy(ctc_logits(select_rows(h, pos), *m.ctc_head), labels);
  }
  if (ex.table_label < 0) return std::nullopt;
  Var h = forward(tape, m, ts, ex.bitree);
  return softmax_cross_entropy(ttc_logits(select_rows(h, {0}), *m.ttc_head), {ex.table_label});
}

inline void ensure_head(ModelState& m, Task task, int classes, std::uint64_t seed) {
  if (task == Task::ctc) {
    ensure_ctc_head(m, classes, seed);
  } else {
    ensure_ttc_head(m, classes, seed);
  }
}

/// End-to-end training of every weight. Returns the mean loss per epoch.
inline std::vector<double> finetune(ModelState& m, const std::vector<Example>& data,
                                    const std::vector<std::size_t>& train, const FinetuneOptions& o) {
  if ((o.task == Task::ctc && !m.ctc_head) || (o.task == Task::ttc && !m.ttc_head)) {
    throw Error("model has no head for the fine-tuning task");
  }
  AdamW opt(o.lr, o.weight_decay);
  Rng rng(mix_seed(o.seed, 0x66696e65));
  std::vector<double> epoch_loss;
  std::vector<std::size_t> order = train;
  for (int e = 0; e < o.epochs; ++e) {
    rng.shuffle(order);
    double sum = 0.0;
    int count = 0;
    for (std::size_t b = 0; b < order.size(); b += static_cast<std::size_t>(o.batch_size)) {
      const std::size_t end = std::min(order.size(), b + static_cast<std::size_t>(o.batch_size));
      m.zero_grad();
      int used = 0;
      std::vector<double> losses;
      for (std::size_t i = b; i < end; ++i) {
        Tape tape;
        auto loss = example_loss(tape, m, data[order[i]], o.task, o.max_len);
        if (!loss) continue;
        tape.backward(*loss);
        losses.push_back(loss->scalar());
        ++used;
      }
      if (used == 0) continue;
      const double inv = 1.0 / static_cast<double>(used);
      for (Parameter* p : m.parameters()) p->grad *= inv;
      opt.step(m.parameters());
      for (double l : losses) sum += l;
      count += used;
    }
    epoch_loss.push_back(count > 0 ? sum / count : 0.0);
  }
  return epoch_loss;
}

struct Predictions {
  std::vector<int> gold;
  std::vector<int> predicted;
};

inline int argmax_row(const Matrix& logits, Eigen::Index row) {
  Eigen::Index best = 0;
  logits.row(row).maxCoeff(&best);
  return static_cast<int>(best);
}

/// Predictions over `subset`, computed in parallel with read-only weights.
inline Predictions predict(const ModelState& m, const std::vector<Example>& data, const std::vector<std::size_t>& subset,
                           Task task, int max_len) {
  std::vector<Predictions> parts(subset.size());
  parallel_for(subset.size(), [&](std::size_t k) {
    const Example& ex = data[subset[k]];
    const TokenSequence ts = finetune_sequence(ex, max_len);
    Tape tape;
    Predictions& out = parts[k];
    if (task == Task::ctc) {
      auto [pos, labels] = labeled_positions(ex, ts);
      if (pos.empty()) return;
      const Matrix logits = ctc_logits(select_rows(forward(tape, m, ts, ex.bitree), pos), *m.ctc_head).value();
      for (std::size_t i = 0; i < pos.size(); ++i) {
        out.gold.push_back(labels[i]);
        out.predicted.push_back(argmax_row(logits, static_cast<Eigen::Index>(i)));
      }
    } else if (ex.table_label >= 0) {
      const Matrix logits = ttc_logits(select_rows(forward(tape, m, ts, ex.bitree), {0}), *m.ttc_head).value();
      out.gold.push_back(ex.table_label);
      out.predicted.push_back(argmax_row(logits, 0));
    }
  });
  Predictions all;
  for (const auto& p : parts) {
    all.gold.insert(all.gold.end(), p.gold.begin(), p.gold.end());
    all.predicted.insert(all.predicted.end(), p.predicted.begin(), p.predicted.end());
  }
  return all;
}

inline Metrics evaluate(const ModelState& m, const std::vector<Example>& data, const std::vector<std::size_t>& subset,
                        Task task, const Taxonomy& tax, int max_len = 512) {
  const Predictions p = predict(m, data, subset, task, max_len);
  return compute_metrics(p.gold, p.predicted, tax.classes);
}

struct FinetuneReport {
  Split split;
  std::vector<double> epoch_loss;
  Metrics test;
};

/// Table-wise split of labeled examples, stratified by table label for TTC.
inline Split finetune_split(const std::vector<Example>& data, Task task, std::uint64_t seed) {
  if (task == Task::ctc) return table_split(data.size(), seed);
  std::vector<int> strata;
  for (const auto& ex : data) strata.push_back(ex.table_label);
  return table_split(data.size(), seed, &strata);
}

/// Split, head initialization, training on the train part, and test metrics.
inline FinetuneReport run_finetune(ModelState& m, const std::vector<Example>& data, const Taxonomy& tax,
                                   const FinetuneOptions& o) {
  FinetuneReport r;
  r.split = finetune_split(data, o.task, o.seed);
  ensure_head(m, o.task, tax.size(), mix_seed(o.seed, 0x68656164));
  r.epoch_loss = finetune(m, data, r.split.train, o);
  r.test = evaluate(m, data, r.split.test, o.task, tax, o.max_len);
  return r;
}

}  // namespace tableweave
