// Acceptance suite: one PASS/FAIL line per criterion, nonzero exit on any failure.

#include <cstdarg>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "fixtures.hpp"
#include "tableweave/corpus.hpp"
#include "tableweave/encoder.hpp"
#include "tableweave/header_extract.hpp"
#include "tableweave/heads.hpp"
#include "tableweave/pretrain.hpp"

using namespace twtest;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) { return std::chrono::duration<double>(Clock::now() - t0).count(); }

std::string fmt(const char* f, ...) __attribute__((format(printf, 1, 2)));
std::string fmt(const char* f, ...) {
  char buf[512];
  va_list ap;
  va_start(ap, f);
  std::vsnprintf(buf, sizeof buf, f, ap);
  va_end(ap);
  return buf;
}

std::vector<CorpusTable> in_memory_corpus(const std::vector<GeneratedTable>& gen, const Vocabulary& v) {
  std::vector<CorpusTable> out;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    const Table& t = gen[i].table;
    if (!filter_table(t).accepted) continue;
    BiTree bt = build_bitree(t);
    TokenizedTable tt = tokenize_table(t, bt, v);
    out.push_back(CorpusTable{table_file_name(static_cast<int>(i)), topics()[static_cast<std::size_t>(gen[i].topic)].name,
                              t, std::move(bt), std::move(tt)});
  }
  return out;
}

std::vector<Example> labeled_examples(const std::vector<GeneratedTable>& gen, const Vocabulary& v, Task task,
                                      const Taxonomy& tax) {
  std::vector<Example> out;
  for (std::size_t i = 0; i < gen.size(); ++i) {
    const auto& g = gen[i];
    if (task == Task::ctc && g.type == TableType::non_data) continue;
    Example ex = make_labeled_example(table_file_name(static_cast<int>(i)), g.table, v);
    if (task == Task::ctc) {
      for (const auto& [rc, label] : g.cell_labels) ex.cell_labels[rc] = tax.index(label);
    } else {
      ex.table_label = tax.index(type_label(g.type));
    }
    out.push_back(std::move(ex));
  }
  return out;
}

// ---------------------------------------------------------------------------

Outcome worked_example() {
  const auto t0 = Clock::now();
  const Table t = worked_example_table();
  const BiTree bt = build_bitree(t);
  const auto a6 = detail::parse_a1("A6").value();
  const auto d8 = detail::parse_a1("D8").value();
  const auto a8 = detail::parse_a1("A8").value();
  const auto a10 = detail::parse_a1("A10").value();
  const auto c2 = detail::parse_a1("C2").value();
  auto at = [](std::pair<int, int> rc) { return TablePosition(CellRef{rc.first, rc.second}); };
  const CoordinatePair ca6 = coordinate_of(bt, a6.first, a6.second);
  const CoordinatePair cd8 = coordinate_of(bt, d8.first, d8.second);
  const int d1 = bitree_distance(bt, at(a6), at(a8));
  const int d2 = bitree_distance(bt, at(a6), at(a10));
  const int d3 = bitree_distance(bt, at(a6), at(c2));
  const double secs = seconds_since(t0);
  const bool ok = ca6.left == TreeCoordinate{2} && cd8.top == TreeCoordinate{2, 0} &&
                  cd8.left == TreeCoordinate{2, 1} && d1 == 1 && d2 == 3 && d3 == 6 && secs < 1.0;
  return {ok, fmt("d(A6,A8)=%d d(A6,A10)=%d d(A6,C2)=%d, %.3f s", d1, d2, d3, secs)};
}

Outcome distance_oracle() {
  const auto t0 = Clock::now();
  Rng rng(20240601);
  long pairs = 0;
  long mismatches = 0;
  long asym = 0;
  for (int k = 0; k < 1000; ++k) {
    const BiTree bt = random_bitree(rng, 4, 64, 6, 6);
    for (const OrderedTree* tree : {&bt.top(), &bt.left()}) {
      const auto oracle = bfs_distances(*tree);
      const int n = static_cast<int>(tree->size());
      for (int a = 0; a < n; ++a) {
        const TreeCoordinate pa = tree->path(a);
        for (int b = 0; b < n; ++b) {
          ++pairs;
          if (tree_distance(*tree, pa, tree->path(b)) != oracle[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)]) {
            ++mismatches;
          }
        }
      }
    }
    for (int i = 0; i < 36; ++i) {
      const CellRef a{i / 6, i % 6};
      if (bt.distance(a, a) != 0) ++asym;
      for (int j = i + 1; j < 36; ++j) {
        const CellRef b{j / 6, j % 6};
        if (bt.distance(a, b) != bt.distance(b, a)) ++asym;
      }
    }
  }
  // Flat layouts: the direct constructor and extracted trees of relational tables.
  std::set<int> flat_values;
  for (int n = 1; n <= 12; ++n) {
    const BiTree bt = flat_bitree(n, 13 - n);
    for (int i = 0; i < n * (13 - n); ++i) {
      for (int j = 0; j < n * (13 - n); ++j) {
        flat_values.insert(bt.distance({i / (13 - n), i % (13 - n)}, {j / (13 - n), j % (13 - n)}));
      }
    }
  }
  for (int k = 0; k < 50; ++k) {
    Rng g(mix_seed(7, static_cast<std::uint64_t>(k)));
    const GeneratedTable gt = generate_relational(static_cast<int>(g.below(topics().size())), g);
    const BiTree bt = build_bitree(gt.table);
    for (int a = 0; a < gt.table.n_rows() * gt.table.n_cols(); ++a) {
      for (int b = 0; b < gt.table.n_rows() * gt.table.n_cols(); ++b) {
        flat_values.insert(bt.distance({a / gt.table.n_cols(), a % gt.table.n_cols()},
                                       {b / gt.table.n_cols(), b % gt.table.n_cols()}));
      }
    }
  }
  bool flat_ok = true;
  for (int v : flat_values) flat_ok = flat_ok && (v == 0 || v == 2 || v == 4);
  const double secs = seconds_since(t0);
  const bool ok = mismatches == 0 && asym == 0 && flat_ok && secs < 30.0;
  return {ok, fmt("%ld tree pairs, %ld mismatches, %ld symmetry/diagonal failures, flat values %s, %.2f s", pairs,
                  mismatches, asym, flat_ok ? "in {0,2,4}" : "OUTSIDE {0,2,4}", secs)};
}

Outcome visibility() {
  const Table wt = worked_example_table();
  const Vocabulary v = vocabulary_for(table_texts(wt));
  std::vector<std::pair<TokenSequence, BiTree>> cases;
  {
    const BiTree bt = build_bitree(wt);
    cases.emplace_back(serialize(tokenize_table(wt, bt, v), 3, 512), bt);
  }
  for (const auto& g : generate_corpus(12, 99)) {
    if (!filter_table(g.table).accepted) continue;
    const BiTree bt = build_bitree(g.table);
    const Vocabulary gv = vocabulary_for(table_texts(g.table));
    cases.emplace_back(serialize(tokenize_table(g.table, bt, gv), 5, 256), bt);
  }
  const std::vector<int> ds = {0, 1, 2, 3, 4, 6, 8, kUnboundedDistance};
  long structural = 0;
  for (const auto& [ts, bt] : cases) {
    Mask prev;
    for (std::size_t k = 0; k < ds.size(); ++k) {
      const Mask m = build_visibility(ts, bt, ds[k]);
      if (m != m.transpose()) ++structural;
      for (Eigen::Index i = 0; i < m.rows(); ++i) structural += m(i, i) ? 0 : 1;
      if (k > 0) {
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
          for (Eigen::Index j = 0; j < m.cols(); ++j) structural += prev(i, j) && !m(i, j) ? 1 : 0;
        }
      }
      prev = m;
    }
  }

  // Soundness: one attention layer, perturb an invisible input row.
  ModelState model = init_model(ModelConfig::toy(static_cast<int>(v.size()), 32, 2, 2), 11);
  const auto& [ts0, bt0] = cases.front();
  const auto mask = std::make_shared<const Mask>(build_visibility(ts0, bt0, 1));
  Rng rng(5);
  const auto n = static_cast<Eigen::Index>(ts0.size());
  Matrix x(n, 32);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  auto attend = [&](const Matrix& in) {
    Tape tape;
    return masked_attention(tape.constant(in), model.layers[0], 2, mask).value();
  };
  const Matrix base = attend(x);
  double sound_dev = 0.0;
  long sound_cases = 0;
  for (int trial = 0; trial < 40; ++trial) {
    const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(n)));
    std::vector<Eigen::Index> hidden;
    for (Eigen::Index j = 0; j < n; ++j) {
      if (!(*mask)(i, j)) hidden.push_back(j);
    }
    if (hidden.empty()) continue;
    Matrix y = x;
    for (Eigen::Index j : hidden) y.row(j) += RowVector::Constant(32, 3.0 + trial);
    sound_dev = std::max(sound_dev, (attend(y).row(i) - base.row(i)).cwiseAbs().maxCoeff());
    ++sound_cases;
  }

  // Receptive field: cells only, N layers, threshold D; a perturbation
  // farther than N*D never reaches, and some within N*D but beyond D does.
  double far_dev = 0.0;
  long far_cases = 0;
  long multi_hop = 0;
  for (const int d : {1, 2}) {
    for (const auto& [ts, bt] : cases) {
      std::vector<std::size_t> keep;
      for (std::size_t i = 0; i < ts.size(); ++i) {
        if (ts.roles[i] == SegmentRole::cell) keep.push_back(i);
      }
      const TokenSequence cells = ts.subsequence(keep);
      if (cells.size() < 2) continue;
      const auto m = static_cast<Eigen::Index>(cells.size());
      const auto cmask = std::make_shared<const Mask>(build_visibility(cells, bt, d));
      Matrix e(m, 32);
      for (Eigen::Index i = 0; i < e.size(); ++i) e.data()[i] = rng.normal();
      auto run = [&](const Matrix& in) {
        Tape tape;
        return encode(tape.constant(in), model, cmask).value();
      };
      const Matrix out = run(e);
      const int reach = static_cast<int>(model.layers.size()) * d;
      for (int trial = 0; trial < 6; ++trial) {
        const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::size_t>(m)));
        Matrix p = e;
        p.row(j) += RowVector::Constant(32, 1.5);
        const Matrix moved = run(p);
        for (Eigen::Index i = 0; i < m; ++i) {
          const int dist = bt.distance({cells.rows[static_cast<std::size_t>(i)], cells.cols[static_cast<std::size_t>(i)]},
                                       {cells.rows[static_cast<std::size_t>(j)], cells.cols[static_cast<std::size_t>(j)]});
          const double dev = (moved.row(i) - out.row(i)).cwiseAbs().maxCoeff();
          if (dist > reach) {
            far_dev = std::max(far_dev, dev);
            ++far_cases;
          } else if (dist > d && dev > 1e-9) {
            ++multi_hop;
          }
        }
      }
    }
  }
  const bool ok = structural == 0 && sound_cases > 0 && sound_dev < 1e-12 && far_cases > 0 && far_dev < 1e-12 &&
                  multi_hop > 0;
  return {ok, fmt("%zu sequences, %ld structural failures; soundness max dev %.1e over %ld rows; "
                  "beyond N*D max dev %.1e over %ld pairs, %ld multi-hop pairs reached",
                  cases.size(), structural, sound_dev, sound_cases, far_dev, far_cases, multi_hop)};
}

Outcome dimensions() {
  const Table t = worked_example_table();
  const Vocabulary v = vocabulary_for(table_texts(t));
  ModelConfig cfg = ModelConfig::reference(static_cast<int>(v.size()));
  const int in_table = 2 * kTreeDepth * cfg.tree_dim + 2 * cfg.rowcol_dim;
  cfg.layers = 0;  // embeddings only
  ModelState m = init_model(cfg, 1);
  const BiTree bt = build_bitree(t);
  const TokenSequence ts = serialize(tokenize_table(t, bt, v), 1, 512);
  Tape tape;
  const Var tab = embed_in_table(tape, m.embeddings, m.config, ts.top, ts.left, ts.rows, ts.cols);
  const Var num = embed_numbers(tape, m.embeddings, ts.numbers);
  const Var all = embed_sequence(tape, m.embeddings, m.config, ts);
  const auto len = static_cast<Eigen::Index>(ts.size());
  const bool ok = cfg.tree_dim == 72 && cfg.rowcol_dim == 96 && in_table == 768 && tab.cols() == 768 &&
                  m.embeddings.magnitude.value.cols() == cfg.hidden / 4 && num.cols() == 4 * (cfg.hidden / 4) &&
                  all.rows() == len && all.cols() == 768;
  return {ok, fmt("in-table 2*4*%d + 2*%d = %d (%ld cols), number 4*%ld = %ld, embedding %ld x %ld", cfg.tree_dim,
                  cfg.rowcol_dim, in_table, static_cast<long>(tab.cols()),
                  static_cast<long>(m.embeddings.magnitude.value.cols()), static_cast<long>(num.cols()),
                  static_cast<long>(all.rows()), static_cast<long>(all.cols()))};
}

Outcome gradients() {
  const auto t0 = Clock::now();
  const auto gen = generate_corpus(24, 31);
  std::vector<std::string> texts = corpus_texts(gen);
  const Table wt = worked_example_table();
  for (auto& s : table_texts(wt)) texts.push_back(s);
  const Vocabulary v = vocabulary_for(texts);
  std::vector<CorpusTable> corpus = in_memory_corpus(gen, v);
  {
    BiTree bt = build_bitree(wt);
    TokenizedTable tt = tokenize_table(wt, bt, v);
    corpus.insert(corpus.begin(), CorpusTable{"worked", "cancer", wt, std::move(bt), std::move(tt)});
  }
  ModelState m = init_model(ModelConfig::toy(static_cast<int>(v.size()), 32, 2, 2), 3);
  // Nonzero biases and shifts so that every group is exercised away from its init.
  Rng jitter(17);
  for (Parameter* p : m.parameters()) {
    for (Eigen::Index i = 0; i < p->value.size(); ++i) p->value.data()[i] += 0.05 * jitter.normal();
  }
  ensure_ctc_head(m, general_taxonomy().size(), 4);
  ensure_ttc_head(m, ttc_taxonomy().size(), 5);

  std::string report;
  double worst = 0.0;
  bool ok = true;
  auto run = [&](const std::string& name, const std::function<Var(Tape&)>& loss) {
    m.zero_grad();
    {
      Tape tape;
      tape.backward(loss(tape));
    }
    const GradCheck g = check_gradients(m.parameters(), [&] {
      Tape tape;
      return loss(tape).scalar();
    }, 8, 23);
    worst = std::max(worst, g.worst);
    ok = ok && g.worst < 1e-4;
    report += fmt("%s %.1e (%s) ", name.c_str(), g.worst, g.worst_param.c_str());
  };
  const PretrainExample mlm = make_example(corpus, 0, 41, 256, Toggles{true, false, false}, v.mask_id());
  const PretrainExample clc = make_example(corpus, 0, 42, 256, Toggles{false, true, false}, v.mask_id());
  const PretrainExample tcr = make_example(corpus, 0, 43, 256, Toggles{false, false, true}, v.mask_id());
  const BiTree& bt = corpus[0].bitree;
  run("MLM", [&](Tape& t) { return objective_losses(t, m, mlm, bt).mlm; });
  run("CLC", [&](Tape& t) { return objective_losses(t, m, clc, bt).clc; });
  run("TCR", [&](Tape& t) { return objective_losses(t, m, tcr, bt).tcr; });

  Example ex = make_labeled_example("worked", wt, v);
  const Taxonomy tax = general_taxonomy();
  for (int r = 0; r < wt.n_rows(); ++r) {
    for (int c = 0; c < wt.n_cols(); ++c) {
      if (!wt.at(r, c).text.empty()) ex.cell_labels[{r, c}] = r < 2 ? tax.index("MD") : c == 0 ? tax.index("LA") : tax.index("D");
    }
  }
  ex.table_label = ttc_taxonomy().index("M");
  run("CTC", [&](Tape& t) { return *example_loss(t, m, ex, Task::ctc, 256); });
  run("TTC", [&](Tape& t) { return *example_loss(t, m, ex, Task::ttc, 256); });
  const double secs = seconds_since(t0);
  ok = ok && secs < 300.0;
  return {ok, fmt("%zu weight groups; worst relative error %s; %.1f s", m.parameters().size(), report.c_str(), secs)};
}

Outcome sampling() {
  const auto t0 = Clock::now();
  Table t(10, 10);
  t.top_header_rows = 1;
  t.left_header_cols = 1;
  t.context = {"fixed sampling table", "second context line"};
  for (int c = 1; c < 10; ++c) put(t, 0, c, "col " + std::to_string(c));
  for (int r = 1; r < 10; ++r) put(t, r, 0, "row " + std::to_string(r));
  put(t, 0, 0, "key");
  for (int r = 1; r < 10; ++r) {
    for (int c = 1; c < 10; ++c) {
      put(t, r, c, (r + c) % 2 == 0 ? "alpha beta " + std::to_string(r) : std::to_string(r * 1000 + c * 7));
    }
  }
  t.rebuild_index();
  const Vocabulary v = vocabulary_for(table_texts(t));
  const BiTree bt = build_bitree(t);
  const TokenizedTable tt = tokenize_table(t, bt, v);
  SerializeOptions all;
  all.sample_data_cells = false;
  const TokenSequence full = serialize(tt, 0, 512, all);

  long eligible = 0, selected = 0, whole = 0, blanked = 0, clc_eligible = 0;
  long text_total = 0, text_dropped = 0, value_total = 0, value_dropped = 0;
  for (const auto& span : detail::cell_spans(full)) eligible += span.content.empty() ? 0 : 1;
  const int seeds = 10000;
  for (int s = 0; s < seeds; ++s) {
    const MlmBatch b = select_mlm(full, mix_seed(1, static_cast<std::uint64_t>(s)));
    selected += static_cast<long>(b.selected_cells.size());
    for (bool w : b.whole_cell) whole += w;
    const ClcResult c = select_clc(full, t, mix_seed(2, static_cast<std::uint64_t>(s)));
    blanked += static_cast<long>(c.batch.blanked_cells.size());
    clc_eligible += eligible;
    const TokenSequence ts = serialize(tt, mix_seed(3, static_cast<std::uint64_t>(s)), 512);
    std::set<int> present(ts.cell_ids.begin(), ts.cell_ids.end());
    for (const auto& cell : tt.cells) {
      if (cell.header) continue;
      const bool gone = !present.count(cell.row * tt.n_cols + cell.col);
      if (cell.cls == CellClass::value_dominant) {
        ++value_total;
        value_dropped += gone;
      } else {
        ++text_total;
        text_dropped += gone;
      }
    }
  }
  const double mlm_rate = static_cast<double>(selected) / (static_cast<double>(eligible) * seeds);
  const double whole_share = static_cast<double>(whole) / static_cast<double>(selected);
  const double blank_rate = static_cast<double>(blanked) / static_cast<double>(clc_eligible);
  const double text_rate = static_cast<double>(text_dropped) / static_cast<double>(text_total);
  const double value_rate = static_cast<double>(value_dropped) / static_cast<double>(value_total);
  const double secs = seconds_since(t0);
  const bool ok = eligible == 100 && std::abs(mlm_rate - 0.15) <= 0.01 && std::abs(whole_share - 0.30) <= 0.02 &&
                  std::abs(blank_rate - 0.20) <= 0.02 && std::abs(text_rate - 0.5) <= 0.02 &&
                  std::abs(value_rate - 0.9) <= 0.02 && secs < 120.0;
  return {ok, fmt("%ld cells; MLM %.4f whole %.4f CLC %.4f drop text %.4f value %.4f; %.1f s", eligible, mlm_rate,
                  whole_share, blank_rate, text_rate, value_rate, secs)};
}

Outcome loss_constants() {
  Tape tape;
  const int vocab = 1000;
  const int h = 8;
  Rng rng(3);
  Matrix table(vocab, h);
  for (Eigen::Index i = 0; i < table.size(); ++i) table.data()[i] = rng.normal();
  const Var hidden = tape.constant(Matrix::Zero(12, h));
  MlmBatch mb;
  mb.positions = {1, 4, 7};
  mb.targets = {5, 999, 0};
  const double mlm = mlm_loss(hidden, mb, tape.constant(table)).scalar();
  ClcBatch cb;
  cb.blank_positions = {1, 2, 3};
  cb.candidate_positions = {6, 7, 8, 9, 10};
  cb.answers = {2, 0, 4};
  const double clc = clc_loss(hidden, cb).scalar();
  TcrBatch tb;
  tb.segments = {{1, -1, 0}, {1, 5, 1}, {0, 8, 0}, {0, 9, 1}};
  Matrix w(h, h);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.normal();
  const double tcr = tcr_loss(hidden, tb, tape.constant(w)).scalar();
  const double e1 = std::abs(mlm - std::log(vocab));
  const double e2 = std::abs(clc - std::log(5.0));
  const double e3 = std::abs(tcr - std::log(2.0));
  const bool ok = e1 <= 1e-9 && e2 <= 1e-9 && e3 <= 1e-9;
  return {ok, fmt("MLM-ln(V) %.1e, CLC-ln(k) %.1e, TCR-ln2 %.1e", e1, e2, e3)};
}

struct PretrainState {
  std::optional<ModelState> model;
  Vocabulary vocab{base_vocabulary()};
};

Outcome toy_pretraining(PretrainState& out) {
  const auto t0 = Clock::now();
  RunConfig c;
  const auto gen = generate_corpus(200, c.seed);
  out.vocab = build_vocabulary(corpus_texts(gen), 2000);
  const std::vector<CorpusTable> corpus = in_memory_corpus(gen, out.vocab);
  ModelState m = init_model(c.model_config(static_cast<int>(out.vocab.size())), c.seed);
  const PretrainResult r = pretrain(m, corpus, c, out.vocab.mask_id());
  auto mean = [&](std::size_t a, std::size_t b, double StepLog::*f) {
    double s = 0.0;
    for (std::size_t i = a; i < b; ++i) s += r.log[i].*f;
    return s / static_cast<double>(b - a);
  };
  const std::size_t n = r.log.size();
  const std::size_t tail = std::min<std::size_t>(50, n);
  bool ok = n == static_cast<std::size_t>(c.steps);
  std::string detail;
  for (auto [name, f] : {std::pair{"MLM", &StepLog::mlm}, std::pair{"CLC", &StepLog::clc}, std::pair{"TCR", &StepLog::tcr}}) {
    const double first = mean(0, std::min<std::size_t>(10, n), f);
    const double last = mean(n - tail, n, f);
    ok = ok && last < 0.5 * first;
    detail += fmt("%s %.3f->%.3f (%.2f) ", name, first, last, last / first);
  }
  const double secs = seconds_since(t0);
  ok = ok && r.scores.clc_accuracy > 0.8 && r.scores.tcr_accuracy > 0.9 && secs < 1800.0;
  out.model = std::move(m);
  return {ok, detail + fmt("held-out CLC %.3f (%ld blanks) TCR %.3f (%ld segments); %zu tables, %.0f s",
                           r.scores.clc_accuracy, r.scores.clc_blanks, r.scores.tcr_accuracy, r.scores.tcr_segments,
                           corpus.size(), secs)};
}

Outcome finetuning(const PretrainState& pre) {
  const auto t0 = Clock::now();
  const auto gen = generate_corpus(400, 21);
  std::string detail;
  bool ok = true;
  for (const Task task : {Task::ctc, Task::ttc}) {
    const Taxonomy tax = task == Task::ctc ? general_taxonomy() : ttc_taxonomy();
    const std::vector<Example> data = labeled_examples(gen, pre.vocab, task, tax);
    ModelState m = pre.model ? *pre.model
                             : init_model(RunConfig{}.model_config(static_cast<int>(pre.vocab.size())), 1);
    FinetuneOptions o = default_finetune_options(task);
    o.epochs = 10;
    o.lr = 1e-3;
    const FinetuneReport r = run_finetune(m, data, tax, o);
    const double need = task == Task::ctc ? 0.95 : 0.90;
    ok = ok && r.test.macro_f1 >= need;
    detail += fmt("%s macro-F1 %.3f over %zu test tables; ", task == Task::ctc ? "CTC" : "TTC", r.test.macro_f1,
                  r.split.test.size());
  }
  const double secs = seconds_since(t0);
  ok = ok && secs < 1200.0;
  return {ok, detail + fmt("%.0f s", secs)};
}

Outcome extraction_round_trip() {
  int hierarchical = 0;
  int recovered = 0;
  for (std::uint64_t i = 0; hierarchical < 1000; ++i) {
    Rng rng(mix_seed(555, i));
    const GeneratedTable g = generate_table(rng);
    if (!g.hierarchical) continue;
    ++hierarchical;
    recovered += round_trips(g);
  }
  int conflicts = 0;
  int resolved = 0;
  for (std::uint64_t i = 0; i < 200; ++i) {
    const GeneratedTable g = generate_formula_conflict(mix_seed(777, i));
    ++conflicts;
    resolved += g.formula_hierarchy && round_trips(g);
  }
  const double rate = static_cast<double>(recovered) / hierarchical;
  const bool ok = rate >= 0.99 && resolved == conflicts;
  return {ok, fmt("%d/%d hierarchical tables recovered (%.3f), %d/%d formula conflicts resolved", recovered,
                  hierarchical, rate, resolved, conflicts)};
}

}  // namespace

int main() {
  PretrainState pre;
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"worked-example", worked_example},
      {"distance-oracle", distance_oracle},
      {"visibility", visibility},
      {"dimension-arithmetic", dimensions},
      {"gradient-checks", gradients},
      {"sampling-statistics", sampling},
      {"loss-constants", loss_constants},
      {"toy-pretraining", [&] { return toy_pretraining(pre); }},
      {"finetune-separability", [&] { return finetuning(pre); }},
      {"extraction-round-trip", extraction_round_trip},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Outcome o;
    try {
      o = fn();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += !o.pass;
    std::printf("%s %s: %s\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%zu criteria, %d failed\n", criteria.size(), failed);
  return failed == 0 ? 0 : 1;
}
