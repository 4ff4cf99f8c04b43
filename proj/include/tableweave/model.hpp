#pragma once

// Model configuration, trainable weight groups, initialization and the
// checkpoint container.

#include <bit>
#include <cstring>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "tableweave/autograd.hpp"
#include "tableweave/common.hpp"

namespace tableweave {

enum class TreeEmbedding { implicit, explicit_onehot };

struct ModelConfig {
  int vocab_size = static_cast<int>(30522);
  int hidden = 768;
  int layers = 12;
  int heads = 12;
  int feed_forward = 3072;
  int tree_dim = 72;    // d_TL, per tree level
  int rowcol_dim = 96;  // d_RC
  int distance = 2;     // visibility threshold D; kUnboundedDistance disables it
  TreeEmbedding tree_embedding = TreeEmbedding::implicit;

  /// BERT-base sized configuration.
  static ModelConfig reference(int vocab_size) {
    ModelConfig c;
    c.vocab_size = vocab_size;
    return c;
  }

  /// Desk-scale configuration; hidden must be a multiple of 32 so that the
  /// in-table embedding splits as 8 * (3H/32) + 2 * (H/8) = H.
  static ModelConfig toy(int vocab_size, int hidden = 64, int layers = 2, int heads = 4) {
    ModelConfig c;
    c.vocab_size = vocab_size;
    c.hidden = hidden;
    c.layers = layers;
    c.heads = heads;
    c.feed_forward = 4 * hidden;
    c.tree_dim = hidden * 3 / 32;
    c.rowcol_dim = hidden / 8;
    return c;
  }

  int number_dim() const { return hidden / 4; }

  void validate() const {
    if (vocab_size <= 0) throw Error("vocab_size must be positive");
    if (hidden <= 0 || hidden % 4 != 0) throw Error("hidden size must be a positive multiple of 4");
    if (heads <= 0 || hidden % heads != 0) throw Error("hidden size must be divisible by the head count");
    if (layers < 0 || feed_forward <= 0) throw Error("invalid layer or feed-forward size");
    if (2 * kTreeDepth * tree_dim + 2 * rowcol_dim != hidden) {
      throw Error("in-table embedding 2*L*d_TL + 2*d_RC = " + std::to_string(2 * kTreeDepth * tree_dim + 2 * rowcol_dim) +
                  " does not equal hidden size " + std::to_string(hidden));
    }
    if (distance < 0) throw Error("distance threshold must be non-negative");
  }

  bool operator==(const ModelConfig&) const = default;
};

inline nlohmann::json to_json(const ModelConfig& c) {
  return {{"vocab_size", c.vocab_size},
          {"hidden", c.hidden},
          {"layers", c.layers},
          {"heads", c.heads},
          {"feed_forward", c.feed_forward},
          {"tree_dim", c.tree_dim},
          {"rowcol_dim", c.rowcol_dim},
          {"distance", c.distance == kUnboundedDistance ? nlohmann::json("inf") : nlohmann::json(c.distance)},
          {"mode", c.tree_embedding == TreeEmbedding::implicit ? "implicit" : "explicit"}};
}

inline int parse_distance(const nlohmann::json& j) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf") return kUnboundedDistance;
    return std::stoi(j.get<std::string>());
  }
  return j.get<int>();
}

inline ModelConfig model_config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.vocab_size = j.at("vocab_size").get<int>();
  c.hidden = j.at("hidden").get<int>();
  c.layers = j.at("layers").get<int>();
  c.heads = j.at("heads").get<int>();
  c.feed_forward = j.at("feed_forward").get<int>();
  c.tree_dim = j.at("tree_dim").get<int>();
  c.rowcol_dim = j.at("rowcol_dim").get<int>();
  c.distance = parse_distance(j.at("distance"));
  c.tree_embedding = j.at("mode").get<std::string>() == "explicit" ? TreeEmbedding::explicit_onehot : TreeEmbedding::implicit;
  c.validate();
  return c;
}

struct EmbeddingWeights {
  Parameter token;        // V x H
  Parameter magnitude;    // 11 x H/4
  Parameter precision;    // 11 x H/4
  Parameter first_digit;  // 11 x H/4
  Parameter last_digit;   // 11 x H/4
  Parameter in_cell;      // I x H
  Parameter tree_top;     // sum(G) x d_TL
  Parameter tree_left;    // sum(G) x d_TL
  Parameter column;       // G_{L-1} x d_RC
  Parameter row;          // G_{L-1} x d_RC
  Parameter format;       // F x H
  Parameter format_bias;  // 1 x H
};

struct LayerWeights {
  Parameter wq, bq, wk, bk, wv, bv, wo, bo;
  Parameter ln1_gain, ln1_shift;
  Parameter w1, b1, w2, b2;
  Parameter ln2_gain, ln2_shift;
};

/// Two-layer classification head: logits = gelu(x W1 + b1) W2 + b2.
struct HeadWeights {
  Parameter w1, b1, w2, b2;
  int classes() const { return static_cast<int>(w2.value.cols()); }
};

struct ModelState {
  ModelConfig config;
  EmbeddingWeights embeddings;
  std::vector<LayerWeights> layers;
  Parameter tcr_bilinear;  // H x H
  std::optional<HeadWeights> ctc_head;
  std::optional<HeadWeights> ttc_head;

  template <class Fn>
  void for_each_parameter(Fn&& fn) {
    visit(*this, fn);
  }
  template <class Fn>
  void for_each_parameter(Fn&& fn) const {
    visit(*this, fn);
  }

  std::vector<Parameter*> parameters() {
    std::vector<Parameter*> out;
    for_each_parameter([&](Parameter& p) { out.push_back(&p); });
    return out;
  }

  Parameter* find(const std::string& name) {
    Parameter* hit = nullptr;
    for_each_parameter([&](Parameter& p) {
      if (p.name == name) hit = &p;
    });
    return hit;
  }

  void zero_grad() {
    for_each_parameter([](Parameter& p) { p.zero_grad(); });
  }

private:
  template <class Self, class Fn>
  static void visit(Self& s, Fn& fn) {
    auto& e = s.embeddings;
    for (auto* p : {&e.token, &e.magnitude, &e.precision, &e.first_digit, &e.last_digit, &e.in_cell, &e.tree_top,
                    &e.tree_left, &e.column, &e.row, &e.format, &e.format_bias}) {
      fn(*p);
    }
    for (auto& l : s.layers) {
      for (auto* p : {&l.wq, &l.bq, &l.wk, &l.bk, &l.wv, &l.bv, &l.wo, &l.bo, &l.ln1_gain, &l.ln1_shift, &l.w1, &l.b1,
                      &l.w2, &l.b2, &l.ln2_gain, &l.ln2_shift}) {
        fn(*p);
      }
    }
    fn(s.tcr_bilinear);
    for (auto* h : {&s.ctc_head, &s.ttc_head}) {
      if (*h) {
        for (auto* p : {&(*h)->w1, &(*h)->b1, &(*h)->w2, &(*h)->b2}) fn(*p);
      }
    }
  }
};

inline bool same_weights(const ModelState& a, const ModelState& b) {
  std::vector<const Parameter*> pa;
  std::vector<const Parameter*> pb;
  a.for_each_parameter([&](const Parameter& p) { pa.push_back(&p); });
  b.for_each_parameter([&](const Parameter& p) { pb.push_back(&p); });
  if (pa.size() != pb.size()) return false;
  for (std::size_t i = 0; i < pa.size(); ++i) {
    if (pa[i]->name != pb[i]->name || pa[i]->value.rows() != pb[i]->value.rows() ||
        pa[i]->value.cols() != pb[i]->value.cols()) {
      return false;
    }
    if (std::memcmp(pa[i]->value.data(), pb[i]->value.data(),
                    static_cast<std::size_t>(pa[i]->value.size()) * sizeof(double)) != 0) {
      return false;
    }
  }
  return true;
}

/// Zero-mean normal truncated at two standard deviations.
inline void truncated_normal(Matrix& m, Rng& rng, double stddev = 0.02) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    double x = rng.normal();
    while (std::abs(x) > 2.0) x = rng.normal();
    m.data()[i] = x * stddev;
  }
}

namespace detail {

inline Parameter weight(const std::string& name, Eigen::Index r, Eigen::Index c, Rng& rng) {
  Parameter p(name, r, c);
  truncated_normal(p.value, rng);
  return p;
}

inline Parameter bias(const std::string& name, Eigen::Index c) { return Parameter(name, 1, c, false); }

inline Parameter gain(const std::string& name, Eigen::Index c) {
  Parameter p(name, 1, c, false);
  p.value.setOnes();
  return p;
}

}  // namespace detail

inline HeadWeights make_head(const std::string& prefix, int hidden, int classes, Rng& rng) {
  HeadWeights h;
  h.w1 = detail::weight(prefix + ".w1", hidden, hidden, rng);
  h.b1 = detail::bias(prefix + ".b1", hidden);
  h.w2 = detail::weight(prefix + ".w2", hidden, classes, rng);
  h.b2 = detail::bias(prefix + ".b2", classes);
  return h;
}

inline ModelState init_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Rng rng(seed);
  ModelState m;
  m.config = cfg;
  const int h = cfg.hidden;
  auto& e = m.embeddings;
  e.token = detail::weight("emb.token", cfg.vocab_size, h, rng);
  e.magnitude = detail::weight("emb.magnitude", kNumberBuckets, cfg.number_dim(), rng);
  e.precision = detail::weight("emb.precision", kNumberBuckets, cfg.number_dim(), rng);
  e.first_digit = detail::weight("emb.first_digit", kNumberBuckets, cfg.number_dim(), rng);
  e.last_digit = detail::weight("emb.last_digit", kNumberBuckets, cfg.number_dim(), rng);
  e.in_cell = detail::weight("emb.in_cell", kInCellPositions, h, rng);
  e.tree_top = detail::weight("emb.tree_top", kTreeInputSize, cfg.tree_dim, rng);
  e.tree_left = detail::weight("emb.tree_left", kTreeInputSize, cfg.tree_dim, rng);
  e.column = detail::weight("emb.column", kMaxRowCol, cfg.rowcol_dim, rng);
  e.row = detail::weight("emb.row", kMaxRowCol, cfg.rowcol_dim, rng);
  e.format = detail::weight("emb.format", kFormatFeatures, h, rng);
  e.format_bias = detail::bias("emb.format_bias", h);
  for (int l = 0; l < cfg.layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    LayerWeights w;
    w.wq = detail::weight(p + "wq", h, h, rng);
    w.bq = detail::bias(p + "bq", h);
    w.wk = detail::weight(p + "wk", h, h, rng);
    w.bk = detail::bias(p + "bk", h);
    w.wv = detail::weight(p + "wv", h, h, rng);
    w.bv = detail::bias(p + "bv", h);
    w.wo = detail::weight(p + "wo", h, h, rng);
    w.bo = detail::bias(p + "bo", h);
    w.ln1_gain = detail::gain(p + "ln1_gain", h);
    w.ln1_shift = detail::bias(p + "ln1_shift", h);
    w.w1 = detail::weight(p + "w1", h, cfg.feed_forward, rng);
    w.b1 = detail::bias(p + "b1", cfg.feed_forward);
    w.w2 = detail::weight(p + "w2", cfg.feed_forward, h, rng);
    w.b2 = detail::bias(p + "b2", h);
    w.ln2_gain = detail::gain(p + "ln2_gain", h);
    w.ln2_shift = detail::bias(p + "ln2_shift", h);
    m.layers.push_back(std::move(w));
  }
  m.tcr_bilinear = detail::weight("tcr.bilinear", h, h, rng);
  return m;
}

inline void ensure_ctc_head(ModelState& m, int classes, std::uint64_t seed) {
  if (m.ctc_head && m.ctc_head->classes() == classes) return;
  Rng rng(seed);
  m.ctc_head = make_head("ctc", m.config.hidden, classes, rng);
}

inline void ensure_ttc_head(ModelState& m, int classes, std::uint64_t seed) {
  if (m.ttc_head && m.ttc_head->classes() == classes) return;
  Rng rng(seed);
  m.ttc_head = make_head("ttc", m.config.hidden, classes, rng);
}

// ---------------------------------------------------------------------------
// Checkpoints: "TWCKPT01", u64 manifest length, JSON manifest, then the
// arrays as little-endian 8-byte reals. Offsets in the manifest are bytes
// from the start of the data block.

inline constexpr char kCheckpointMagic[8] = {'T', 'W', 'C', 'K', 'P', 'T', '0', '1'};

namespace detail {

inline void write_u64_le(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF));
}

inline std::uint64_t read_u64_le(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int ch = in.get();
    if (ch == EOF) throw ParseError("truncated checkpoint header");
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(ch)) << (8 * i);
  }
  return v;
}

inline void write_f64_le(std::ostream& out, double d) {
  std::uint64_t bits;
  std::memcpy(&bits, &d, sizeof bits);
  write_u64_le(out, bits);
}

}  // namespace detail

inline void save_checkpoint(const ModelState& m, std::ostream& out, const nlohmann::json& extra = {}) {
  nlohmann::json manifest;
  manifest["config"] = to_json(m.config);
  manifest["format"] = "f64le";
  if (!extra.is_null()) manifest["extra"] = extra;
  nlohmann::json arrays = nlohmann::json::array();
  std::uint64_t offset = 0;
  m.for_each_parameter([&](const Parameter& p) {
    arrays.push_back({{"name", p.name}, {"shape", {p.value.rows(), p.value.cols()}}, {"offset", offset}});
    offset += static_cast<std::uint64_t>(p.value.size()) * 8;
  });
  manifest["arrays"] = std::move(arrays);
  const std::string text = manifest.dump();
  out.write(kCheckpointMagic, sizeof kCheckpointMagic);
  detail::write_u64_le(out, text.size());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  m.for_each_parameter([&](const Parameter& p) {
    for (Eigen::Index i = 0; i < p.value.size(); ++i) detail::write_f64_le(out, p.value.data()[i]);
  });
}

inline void save_checkpoint(const ModelState& m, const std::string& path, const nlohmann::json& extra = {}) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint " + path);
  save_checkpoint(m, out, extra);
}

inline nlohmann::json read_checkpoint_manifest(std::istream& in) {
  char magic[8];
  in.read(magic, 8);
  if (!in || std::memcmp(magic, kCheckpointMagic, 8) != 0) throw ParseError("not a checkpoint file");
  const std::uint64_t len = detail::read_u64_le(in);
  std::string text(len, '\0');
  in.read(text.data(), static_cast<std::streamsize>(len));
  if (!in) throw ParseError("truncated checkpoint manifest");
  return nlohmann::json::parse(text);
}

inline ModelState load_checkpoint(std::istream& in) {
  const nlohmann::json manifest = read_checkpoint_manifest(in);
  const ModelConfig cfg = model_config_from_json(manifest.at("config"));
  ModelState m = init_model(cfg, 0);
  std::map<std::string, nlohmann::json> entries;
  for (const auto& a : manifest.at("arrays")) entries[a.at("name").get<std::string>()] = a;
  auto head_classes = [&](const std::string& prefix) -> int {
    auto it = entries.find(prefix + ".w2");
    return it == entries.end() ? 0 : it->second.at("shape")[1].get<int>();
  };
  if (int c = head_classes("ctc")) ensure_ctc_head(m, c, 0);
  if (int c = head_classes("ttc")) ensure_ttc_head(m, c, 0);
  std::string data((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  m.for_each_parameter([&](Parameter& p) {
    auto it = entries.find(p.name);
    if (it == entries.end()) throw ParseError("checkpoint lacks array " + p.name);
    const auto& shape = it->second.at("shape");
    if (shape[0].get<Eigen::Index>() != p.value.rows() || shape[1].get<Eigen::Index>() != p.value.cols()) {
      throw ParseError("checkpoint array " + p.name + " has an unexpected shape");
    }
    const std::uint64_t off = it->second.at("offset").get<std::uint64_t>();
    if (off + static_cast<std::uint64_t>(p.value.size()) * 8 > data.size()) {
      throw ParseError("checkpoint array " + p.name + " is truncated");
    }
    for (Eigen::Index i = 0; i < p.value.size(); ++i) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(data[off + static_cast<std::uint64_t>(i) * 8 + b]))
                << (8 * b);
      }
      std::memcpy(&p.value.data()[i], &bits, sizeof bits);
    }
  });
  return m;
}

inline ModelState load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open checkpoint " + path);
  return load_checkpoint(in);
}

}  // namespace tableweave
