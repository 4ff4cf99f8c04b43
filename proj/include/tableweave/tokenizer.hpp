#pragma once

// WordPiece tokenization, number featurization, and flattening of a table
// into a TokenSequence (row-major cells behind a leading [CLS]).

#include <algorithm>
#include <cctype>
#include <fstream>
#include <istream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableweave/bitree.hpp"
#include "tableweave/table.hpp"

namespace tableweave {

inline constexpr const char* kPadToken = "[PAD]";
inline constexpr const char* kUnkToken = "[UNK]";
inline constexpr const char* kClsToken = "[CLS]";
inline constexpr const char* kSepToken = "[SEP]";
inline constexpr const char* kMaskToken = "[MASK]";
inline constexpr std::size_t kReferenceVocabSize = 30522;

class Vocabulary {
public:
  Vocabulary() = default;

  explicit Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
        throw ParseError("duplicate vocabulary token '" + tokens_[i] + "' at line " +
                         std::to_string(i + 1));
      }
    }
    pad_ = require(kPadToken);
    unk_ = require(kUnkToken);
    cls_ = require(kClsToken);
    sep_ = require(kSepToken);
    mask_ = require(kMaskToken);
  }

  /// One token per line; id = line index.
  static Vocabulary load(std::istream& in) {
    std::vector<std::string> tokens;
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      tokens.push_back(line);
    }
    return Vocabulary(std::move(tokens));
  }

  static Vocabulary load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open vocabulary file " + path);
    return load(in);
  }

  void save(std::ostream& out) const {
    for (const auto& t : tokens_) out << t << '\n';
  }

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(int id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const { return tokens_; }

  int find(std::string_view token) const {
    auto it = ids_.find(std::string(token));
    return it == ids_.end() ? -1 : it->second;
  }

  int pad_id() const { return pad_; }
  int unk_id() const { return unk_; }
  int cls_id() const { return cls_; }
  int sep_id() const { return sep_; }
  int mask_id() const { return mask_; }

private:
  int require(const char* token) const {
    const int id = find(token);
    if (id < 0) throw ParseError(std::string("vocabulary lacks special token ") + token);
    return id;
  }

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int pad_ = -1, unk_ = -1, cls_ = -1, sep_ = -1, mask_ = -1;
};

// ---------------------------------------------------------------------------
// Basic tokenization and WordPiece

inline bool is_ascii_punct(unsigned char ch) {
  return ch < 0x80 && std::ispunct(ch) != 0;
}

/// Lowercases ASCII, splits on whitespace and isolates ASCII punctuation.
/// Non-ASCII bytes are kept as word characters.
inline std::vector<std::string> basic_tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) out.push_back(std::move(cur));
    cur.clear();
  };
  for (char raw : text) {
    const auto ch = static_cast<unsigned char>(raw);
    if (ch < 0x80 && std::isspace(ch)) {
      flush();
    } else if (is_ascii_punct(ch)) {
      flush();
      out.emplace_back(1, raw);
    } else {
      cur.push_back(ch < 0x80 ? static_cast<char>(std::tolower(ch)) : raw);
    }
  }
  flush();
  return out;
}

inline constexpr std::size_t kMaxWordChars = 100;

/// Greedy longest-match-first over a single basic token.
inline std::vector<int> wordpiece_word(const std::string& word, const Vocabulary& v) {
  if (word.size() > kMaxWordChars) return {v.unk_id()};
  std::vector<int> pieces;
  std::size_t start = 0;
  while (start < word.size()) {
    std::size_t end = word.size();
    int found = -1;
    while (start < end) {
      std::string sub = word.substr(start, end - start);
      if (start > 0) sub = "##" + sub;
      found = v.find(sub);
      if (found >= 0) break;
      --end;
    }
    if (found < 0) return {v.unk_id()};
    pieces.push_back(found);
    start = end;
  }
  return pieces;
}

inline std::vector<int> wordpiece(std::string_view text, const Vocabulary& v) {
  std::vector<int> ids;
  for (const std::string& word : basic_tokenize(text)) {
    auto pieces = wordpiece_word(word, v);
    ids.insert(ids.end(), pieces.begin(), pieces.end());
  }
  return ids;
}

// ---------------------------------------------------------------------------
// Numbers

struct NumberFeatures {
  int magnitude = kNotANumber;
  int precision = kNotANumber;
  int first_digit = kNotANumber;
  int last_digit = kNotANumber;
  bool operator==(const NumberFeatures&) const = default;
  bool is_number() const { return magnitude != kNotANumber || first_digit != kNotANumber; }
};

inline constexpr NumberFeatures kNotANumberFeatures{};

/// Decimal numeral: optional sign, integer digits with optional "," thousand
/// groups, optional "." and fractional digits. Returns the integer and
/// fractional digit strings when `s` is a numeral.
inline bool parse_numeral(std::string_view s, std::string* int_digits = nullptr,
                          std::string* frac_digits = nullptr) {
  if (!s.empty() && (s.front() == '+' || s.front() == '-')) s.remove_prefix(1);
  if (s.empty()) return false;
  const auto dot = s.find('.');
  std::string_view ip = s.substr(0, dot);
  std::string_view fp = dot == std::string_view::npos ? std::string_view{} : s.substr(dot + 1);
  if (dot != std::string_view::npos && fp.empty()) return false;
  for (char ch : fp) {
    if (!std::isdigit(static_cast<unsigned char>(ch))) return false;
  }
  std::string digits;
  if (ip.find(',') != std::string_view::npos) {
    // 1-3 leading digits, then groups of exactly three.
    std::size_t first = ip.find(',');
    if (first == 0 || first > 3) return false;
    std::size_t pos = 0;
    bool leading = true;
    while (pos <= ip.size()) {
      const std::size_t next = ip.find(',', pos);
      const std::string_view group = ip.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
      if (!leading && group.size() != 3) return false;
      if (group.empty()) return false;
      for (char ch : group) {
        if (!std::isdigit(static_cast<unsigned char>(ch))) return false;
      }
      digits += group;
      leading = false;
      if (next == std::string_view::npos) break;
      pos = next + 1;
    }
  } else {
    for (char ch : ip) {
      if (!std::isdigit(static_cast<unsigned char>(ch))) return false;
    }
    digits = std::string(ip);
  }
  if (digits.empty() && fp.empty()) return false;
  if (int_digits) *int_digits = digits;
  if (frac_digits) *frac_digits = std::string(fp);
  return true;
}

/// Magnitude = integer digit count, precision = fractional digit count (both
/// clipped to 10), first/last digit of the full digit string; non-numerals map
/// to the reserved value 10 in all four slots.
inline NumberFeatures number_features(std::string_view token) {
  std::string ip;
  std::string fp;
  if (!parse_numeral(token, &ip, &fp)) return kNotANumberFeatures;
  const std::string all = ip + fp;
  NumberFeatures nf;
  nf.magnitude = std::min<int>(static_cast<int>(ip.size()), 10);
  nf.precision = std::min<int>(static_cast<int>(fp.size()), 10);
  nf.first_digit = all.front() - '0';
  nf.last_digit = all.back() - '0';
  return nf;
}

/// Splits leading currency symbols and trailing percent signs off a word.
inline std::vector<std::string> split_symbols(std::string_view word) {
  static const std::vector<std::string_view> kLeading = {"$", "\xC2\xA3", "\xE2\x82\xAC", "\xC2\xA5"};
  std::vector<std::string> out;
  bool changed = true;
  while (changed && !word.empty()) {
    changed = false;
    for (auto sym : kLeading) {
      if (word.size() > sym.size() && word.substr(0, sym.size()) == sym) {
        out.emplace_back(sym);
        word.remove_prefix(sym.size());
        changed = true;
      }
    }
  }
  std::size_t trailing = 0;
  while (word.size() > 1 && word.back() == '%') {
    word.remove_suffix(1);
    ++trailing;
  }
  if (!word.empty()) out.emplace_back(word);
  for (std::size_t i = 0; i < trailing; ++i) out.emplace_back("%");
  return out;
}

inline std::vector<std::string> split_whitespace(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string w;
  while (in >> w) out.push_back(w);
  return out;
}

enum class CellClass { text_dominant, value_dominant };

/// value_dominant iff at least half of the whitespace-separated words are
/// numerals (after removing currency/percent symbols); empty text is
/// text_dominant.
inline CellClass classify_cell(const CellFeatures& c) {
  const auto words = split_whitespace(c.text);
  if (words.empty()) return CellClass::text_dominant;
  std::size_t numeric = 0;
  for (const auto& w : words) {
    for (const auto& piece : split_symbols(w)) {
      if (parse_numeral(piece)) {
        ++numeric;
        break;
      }
    }
  }
  return 2 * numeric >= words.size() ? CellClass::value_dominant : CellClass::text_dominant;
}

struct TextTokens {
  std::vector<int> ids;
  std::vector<NumberFeatures> numbers;
  std::size_t size() const { return ids.size(); }
};

/// Word-level featurization: every subword of a numeral carries the numeral's
/// features. Truncated to `limit` tokens.
inline TextTokens tokenize_text(std::string_view text, const Vocabulary& v, std::size_t limit) {
  TextTokens out;
  for (const auto& word : split_whitespace(text)) {
    for (const auto& piece : split_symbols(word)) {
      const NumberFeatures nf = number_features(piece);
      for (int id : wordpiece(piece, v)) {
        if (out.size() >= limit) return out;
        out.ids.push_back(id);
        out.numbers.push_back(nf);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Sequences

enum class SegmentRole : std::uint8_t { cls_text, cell, tail_text };

inline constexpr int kLeadGroup = -1;
inline int tail_group(int k) { return -2 - k; }

/// Parallel per-position arrays describing a flattened table.
struct TokenSequence {
  std::vector<int> token_ids;
  std::vector<NumberFeatures> numbers;
  std::vector<int> in_cell_pos;
  std::vector<PaddedCoordinate> top;
  std::vector<PaddedCoordinate> left;
  std::vector<int> rows;  // -1 for text
  std::vector<int> cols;
  std::vector<FormatVector> formats;
  std::vector<SegmentRole> roles;
  std::vector<int> cell_ids;  // row * n_cols + col for cells; kLeadGroup / tail_group(k) for text

  std::size_t size() const { return token_ids.size(); }

  void push(int token, NumberFeatures nf, int pos, const PaddedCoordinate& t, const PaddedCoordinate& l,
            int row, int col, const FormatVector& fmt, SegmentRole role, int cell_id) {
    token_ids.push_back(token);
    numbers.push_back(nf);
    in_cell_pos.push_back(pos);
    top.push_back(t);
    left.push_back(l);
    rows.push_back(row);
    cols.push_back(col);
    formats.push_back(fmt);
    roles.push_back(role);
    cell_ids.push_back(cell_id);
  }

  void push_from(const TokenSequence& o, std::size_t i) {
    push(o.token_ids[i], o.numbers[i], o.in_cell_pos[i], o.top[i], o.left[i], o.rows[i], o.cols[i],
         o.formats[i], o.roles[i], o.cell_ids[i]);
  }

  /// Positions in `keep`, in the given order.
  TokenSequence subsequence(const std::vector<std::size_t>& keep) const {
    TokenSequence out;
    for (std::size_t i : keep) out.push_from(*this, i);
    return out;
  }

  /// Appends a text segment: leading token, then content at in-cell
  /// positions 1..n, root coordinates and an all-zero format vector.
  void push_text(int lead_token, const TextTokens& text, SegmentRole role, int group) {
    push(lead_token, kNotANumberFeatures, 0, kRootPadded, kRootPadded, -1, -1, FormatVector{}, role, group);
    for (std::size_t k = 0; k < text.size(); ++k) {
      push(text.ids[k], text.numbers[k], static_cast<int>(k) + 1, kRootPadded, kRootPadded, -1, -1,
           FormatVector{}, role, group);
    }
  }

  /// Leading position of every cell or segment group, in sequence order.
  std::vector<std::size_t> group_starts() const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < size(); ++i) {
      if (i == 0 || cell_ids[i] != cell_ids[i - 1] || roles[i] != roles[i - 1]) out.push_back(i);
    }
    return out;
  }
};

struct TokenizedCell {
  int row = 0;
  int col = 0;
  bool header = false;
  CellClass cls = CellClass::text_dominant;
  TextTokens tokens;
  FormatVector format{};
  PaddedCoordinate top = kRootPadded;
  PaddedCoordinate left = kRootPadded;
};

/// Per-cell tokens and coordinates, computed once per table and reused by
/// every seeded serialization.
struct TokenizedTable {
  int n_rows = 0;
  int n_cols = 0;
  std::vector<TokenizedCell> cells;  // merge anchors, row-major
  std::vector<TextTokens> context;   // truncated to kMaxTextTokens - 1 content tokens
  int cls_id = -1;
  int sep_id = -1;
};

inline TokenizedTable tokenize_table(const Table& t, const BiTree& bt, const Vocabulary& v) {
  if (bt.n_rows() != t.n_rows() || bt.n_cols() != t.n_cols()) {
    throw Error("bi-tree does not match table dimensions");
  }
  TokenizedTable tt;
  tt.n_rows = t.n_rows();
  tt.n_cols = t.n_cols();
  tt.cls_id = v.cls_id();
  tt.sep_id = v.sep_id();
  for (int r = 0; r < t.n_rows(); ++r) {
    for (int c = 0; c < t.n_cols(); ++c) {
      if (!t.is_anchor(r, c)) continue;
      const CellFeatures& cell = t.at(r, c);
      TokenizedCell tc;
      tc.row = r;
      tc.col = c;
      tc.header = t.is_header(r, c);
      tc.cls = classify_cell(cell);
      tc.tokens = tokenize_text(cell.text, v, kMaxCellTokens);
      tc.format = format_vector(cell);
      const auto& [top, left] = bt.padded_of(r, c);
      tc.top = top;
      tc.left = left;
      tt.cells.push_back(std::move(tc));
    }
  }
  for (const auto& seg : t.context) {
    tt.context.push_back(tokenize_text(seg, v, kMaxTextTokens - 1));
  }
  return tt;
}

inline void push_cell(TokenSequence& ts, const TokenizedCell& c, int n_cols, int sep_id) {
  const int id = c.row * n_cols + c.col;
  ts.push(sep_id, kNotANumberFeatures, 0, c.top, c.left, c.row, c.col, c.format, SegmentRole::cell, id);
  for (std::size_t k = 0; k < c.tokens.size(); ++k) {
    ts.push(c.tokens.ids[k], c.tokens.numbers[k], static_cast<int>(k) + 1, c.top, c.left, c.row, c.col,
            c.format, SegmentRole::cell, id);
  }
}

struct SerializeOptions {
  bool sample_data_cells = true;
  double text_drop_rate = 0.5;
  double value_drop_rate = 0.9;
  bool include_context = true;
};

/// [CLS] + first context segment, then kept cells row-major each behind a
/// [SEP], then remaining context segments behind [SEP]s. Data cells are
/// dropped at random by class; headers are always kept. A cell that would
/// cross max_len is dropped whole; tail segments fill whatever room is left.
inline TokenSequence serialize(const TokenizedTable& tt, std::uint64_t seed, int max_len,
                               const SerializeOptions& opts = {}) {
  if (max_len < 1) throw Error("max_len must be positive");
  Rng rng(seed);
  std::vector<bool> keep(tt.cells.size(), true);
  std::size_t header_total = 0;
  for (std::size_t i = 0; i < tt.cells.size(); ++i) {
    const TokenizedCell& c = tt.cells[i];
    if (c.header) {
      header_total += 1 + c.tokens.size();
      continue;
    }
    if (opts.sample_data_cells) {
      const double drop = c.cls == CellClass::value_dominant ? opts.value_drop_rate : opts.text_drop_rate;
      keep[i] = !rng.bernoulli(drop);
    }
  }
  TokenSequence ts;
  const bool has_lead = opts.include_context && !tt.context.empty();
  ts.push_text(tt.cls_id, has_lead ? tt.context[0] : TextTokens{}, SegmentRole::cls_text, kLeadGroup);
  if (ts.size() + header_total > static_cast<std::size_t>(max_len)) {
    throw Error("header cells alone need " + std::to_string(ts.size() + header_total) +
                " positions, more than max_len " + std::to_string(max_len));
  }
  std::size_t headers_left = header_total;
  for (std::size_t i = 0; i < tt.cells.size(); ++i) {
    const TokenizedCell& c = tt.cells[i];
    const std::size_t need = 1 + c.tokens.size();
    if (c.header) {
      push_cell(ts, c, tt.n_cols, tt.sep_id);
      headers_left -= need;
    } else if (keep[i] && ts.size() + headers_left + need <= static_cast<std::size_t>(max_len)) {
      push_cell(ts, c, tt.n_cols, tt.sep_id);
    }
  }
  if (opts.include_context) {
    for (std::size_t k = 1; k < tt.context.size(); ++k) {
      if (ts.size() + 1 + tt.context[k].size() > static_cast<std::size_t>(max_len)) continue;
      ts.push_text(tt.sep_id, tt.context[k], SegmentRole::tail_text, tail_group(static_cast<int>(k - 1)));
    }
  }
  return ts;
}

inline TokenSequence serialize(const Table& t, const BiTree& bt, const Vocabulary& v, std::uint64_t seed,
                               int max_len, const SerializeOptions& opts = {}) {
  return serialize(tokenize_table(t, bt, v), seed, max_len, opts);
}

inline nlohmann::json to_json(const TokenSequence& ts) {
  nlohmann::json j;
  j["token_id"] = ts.token_ids;
  nlohmann::json nums = nlohmann::json::array();
  for (const auto& n : ts.numbers) nums.push_back({n.magnitude, n.precision, n.first_digit, n.last_digit});
  j["number_features"] = std::move(nums);
  j["in_cell_pos"] = ts.in_cell_pos;
  j["top"] = ts.top;
  j["left"] = ts.left;
  j["row"] = ts.rows;
  j["col"] = ts.cols;
  j["format"] = ts.formats;
  std::vector<std::string> roles;
  for (auto r : ts.roles) {
    roles.emplace_back(r == SegmentRole::cls_text ? "cls_text" : r == SegmentRole::cell ? "cell" : "tail_text");
  }
  j["segment_role"] = roles;
  j["cell_id"] = ts.cell_ids;
  return j;
}

// ---------------------------------------------------------------------------
// Vocabulary building

/// Base vocabulary: special tokens, printable ASCII characters, and "##"
/// continuations of lowercase letters and digits. Any lowercased ASCII word
/// can be spelled from it.
inline std::vector<std::string> base_vocabulary() {
  std::vector<std::string> tokens = {kPadToken, kUnkToken, kClsToken, kSepToken, kMaskToken};
  for (int ch = 33; ch < 127; ++ch) {
    if (std::isupper(ch)) continue;
    tokens.emplace_back(1, static_cast<char>(ch));
  }
  for (int ch = 33; ch < 127; ++ch) {
    if (std::isupper(ch) || is_ascii_punct(static_cast<unsigned char>(ch))) continue;
    tokens.push_back(std::string("##") + static_cast<char>(ch));
  }
  return tokens;
}

/// Frequency-based stand-in for WordPiece training: the top_k most frequent
/// whole words of the corpus merged into the base vocabulary, optionally
/// padded with "[unusedN]" entries up to pad_to.
inline Vocabulary build_vocabulary(const std::vector<std::string>& texts, std::size_t top_k,
                                   std::size_t pad_to = 0) {
  std::map<std::string, std::size_t> counts;
  for (const auto& text : texts) {
    for (auto& w : basic_tokenize(text)) ++counts[w];
  }
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> tokens = base_vocabulary();
  std::unordered_map<std::string, bool> present;
  for (const auto& t : tokens) present[t] = true;
  std::size_t added = 0;
  for (const auto& [word, n] : ranked) {
    if (added >= top_k) break;
    if (present.count(word) || word.size() > kMaxWordChars) continue;
    tokens.push_back(word);
    present[word] = true;
    ++added;
  }
  for (std::size_t k = 0; tokens.size() < pad_to; ++k) {
    std::string filler = "[unused" + std::to_string(k) + "]";
    if (!present.count(filler)) tokens.push_back(std::move(filler));
  }
  return Vocabulary(std::move(tokens));
}

}  // namespace tableweave
