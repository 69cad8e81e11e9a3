#include "scriptalign/nn/transformer.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

#include "scriptalign/util.hpp"

namespace scriptalign::nn {

void ModelConfig::validate() const {
  if (hidden <= 0 || heads <= 0 || hidden % heads != 0) {
    throw InputError("hidden size must be a positive multiple of heads");
  }
  if (vocab <= 0) throw InputError("vocab size must be positive");
  if (encoder_layers < 1 || decoder_layers < 0) throw InputError("bad layer counts");
  if (max_seq_len < 2) throw InputError("max_seq_len too small");
  if (dropout < 0.0 || dropout >= 1.0) throw InputError("dropout must be in [0,1)");
}

ModelConfig ModelConfig::desk_scale(int vocab) {
  ModelConfig cfg;
  cfg.encoder_layers = 2;
  cfg.decoder_layers = 2;
  cfg.hidden = 64;
  cfg.heads = 4;
  cfg.max_seq_len = 128;
  cfg.vocab = vocab;
  cfg.dropout = 0.1;
  return cfg;
}

ModelConfig ModelConfig::paper_scale(int vocab) {
  ModelConfig cfg;
  cfg.encoder_layers = 6;
  cfg.decoder_layers = 6;
  cfg.hidden = 768;
  cfg.heads = 12;
  cfg.max_seq_len = 768;
  cfg.vocab = vocab;
  cfg.dropout = 0.1;
  return cfg;
}

std::string model_config_to_json(const ModelConfig& cfg) {
  nlohmann::json j;
  j["encoder_layers"] = cfg.encoder_layers;
  j["decoder_layers"] = cfg.decoder_layers;
  j["hidden"] = cfg.hidden;
  j["heads"] = cfg.heads;
  j["max_seq_len"] = cfg.max_seq_len;
  j["vocab"] = cfg.vocab;
  j["ffn"] = cfg.ffn;
  j["dropout"] = cfg.dropout;
  j["pos_labels"] = cfg.pos_labels;
  j["on_overlength"] = cfg.on_overlength == ModelConfig::Overlength::Truncate ? "truncate" : "reject";
  return j.dump();
}

ModelConfig model_config_from_json(const std::string& json_text) {
  auto j = nlohmann::json::parse(json_text);
  ModelConfig cfg;
  cfg.encoder_layers = j.value("encoder_layers", cfg.encoder_layers);
  cfg.decoder_layers = j.value("decoder_layers", cfg.decoder_layers);
  cfg.hidden = j.value("hidden", cfg.hidden);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.max_seq_len = j.value("max_seq_len", cfg.max_seq_len);
  cfg.vocab = j.value("vocab", cfg.vocab);
  cfg.ffn = j.value("ffn", cfg.ffn);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.pos_labels = j.value("pos_labels", cfg.pos_labels);
  cfg.on_overlength = j.value("on_overlength", std::string("reject")) == "truncate"
                          ? ModelConfig::Overlength::Truncate
                          : ModelConfig::Overlength::Reject;
  return cfg;
}

namespace {

Matrix randn(Eigen::Index rows, Eigen::Index cols, double stddev, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, stddev);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r)
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = dist(rng);
  return m;
}

}  // namespace

TransformerModel::TransformerModel(ModelConfig cfg, std::uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  std::mt19937_64 rng(init_seed);
  const int h = cfg_.hidden;
  const int f = cfg_.ffn_size();
  const double sd = 0.02;

  auto dense = [&](const std::string& name, int in, int out) {
    params_.create(name + ".w", randn(in, out, sd, rng));
    params_.create(name + ".b", Matrix::Zero(1, out));
  };
  auto lnorm = [&](const std::string& name) {
    params_.create(name + ".g", Matrix::Ones(1, h));
    params_.create(name + ".b", Matrix::Zero(1, h));
  };
  auto block = [&](const std::string& name) {
    dense(name + ".q", h, h);
    dense(name + ".k", h, h);
    dense(name + ".v", h, h);
    dense(name + ".o", h, h);
  };

  params_.create("emb.tok", randn(cfg_.vocab, h, sd, rng));
  params_.create("emb.pos", randn(cfg_.max_seq_len, h, sd, rng));
  lnorm("emb.ln");
  for (int i = 0; i < cfg_.encoder_layers; ++i) {
    std::string p = "enc" + std::to_string(i);
    block(p + ".attn");
    lnorm(p + ".ln1");
    dense(p + ".ffn1", h, f);
    dense(p + ".ffn2", f, h);
    lnorm(p + ".ln2");
  }
  for (int i = 0; i < cfg_.decoder_layers; ++i) {
    std::string p = "dec" + std::to_string(i);
    block(p + ".self");
    lnorm(p + ".ln1");
    block(p + ".cross");
    lnorm(p + ".ln2");
    dense(p + ".ffn1", h, f);
    dense(p + ".ffn2", f, h);
    lnorm(p + ".ln3");
  }
  params_.create("mlm.bias", Matrix::Zero(1, cfg_.vocab));
  dense("pos_head", h, cfg_.pos_labels);
}

Var TransformerModel::leaf(Tape& tape, const std::string& name) const {
  return tape.param(params_.get(name));
}

std::vector<int> TransformerModel::prepare_ids(const std::vector<int>& ids) const {
  for (int id : ids) {
    if (id < 0 || id >= cfg_.vocab) throw InputError("token id out of vocab range");
  }
  if (static_cast<int>(ids.size()) <= cfg_.max_seq_len) return ids;
  if (cfg_.on_overlength == ModelConfig::Overlength::Reject) {
    throw InputError("sequence length " + std::to_string(ids.size()) + " exceeds max " +
                     std::to_string(cfg_.max_seq_len));
  }
  return std::vector<int>(ids.begin(), ids.begin() + cfg_.max_seq_len);
}

Var TransformerModel::token_embeddings(Tape& tape, const std::vector<int>& ids) const {
  return tape.gather_rows(leaf(tape, "emb.tok"), ids);
}

Var TransformerModel::attention(Tape& tape, Var queries_src, Var keys_values_src,
                                const std::string& prefix, bool causal,
                                const std::vector<bool>* pad_mask, bool training,
                                std::mt19937_64* rng) const {
  const int h = cfg_.hidden;
  const int heads = cfg_.heads;
  const int dk = h / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dk));

  Var q = tape.add_rowvec(tape.matmul(queries_src, leaf(tape, prefix + ".q.w")),
                          leaf(tape, prefix + ".q.b"));
  Var k = tape.add_rowvec(tape.matmul(keys_values_src, leaf(tape, prefix + ".k.w")),
                          leaf(tape, prefix + ".k.b"));
  Var v = tape.add_rowvec(tape.matmul(keys_values_src, leaf(tape, prefix + ".v.w")),
                          leaf(tape, prefix + ".v.b"));

  const Eigen::Index q_len = tape.value(q).rows();
  const Eigen::Index k_len = tape.value(k).rows();
  Matrix additive = Matrix::Zero(q_len, k_len);
  if (causal) {
    for (Eigen::Index r = 0; r < q_len; ++r)
      for (Eigen::Index c = r + 1; c < k_len; ++c) additive(r, c) = -1e30;
  }
  if (pad_mask) {
    for (Eigen::Index c = 0; c < k_len; ++c) {
      if (c < static_cast<Eigen::Index>(pad_mask->size()) && (*pad_mask)[static_cast<size_t>(c)]) {
        for (Eigen::Index r = 0; r < q_len; ++r) additive(r, c) = -1e30;
      }
    }
  }

  std::vector<Var> contexts;
  contexts.reserve(static_cast<size_t>(heads));
  for (int head = 0; head < heads; ++head) {
    Var qh = tape.slice_cols(q, head * dk, dk);
    Var kh = tape.slice_cols(k, head * dk, dk);
    Var vh = tape.slice_cols(v, head * dk, dk);
    Var scores = tape.scale(tape.matmul_nt(qh, kh), scale);
    scores = tape.add_const_matrix(scores, additive);
    Var attn = tape.softmax_rows(scores);
    contexts.push_back(tape.matmul(attn, vh));
  }
  Var ctx = tape.concat_cols(contexts);
  Var out = tape.add_rowvec(tape.matmul(ctx, leaf(tape, prefix + ".o.w")),
                            leaf(tape, prefix + ".o.b"));
  if (training && rng) out = tape.dropout(out, cfg_.dropout, *rng);
  return out;
}

Var TransformerModel::encoder_layer(Tape& tape, Var x, int layer,
                                    const std::vector<bool>* pad_mask, bool training,
                                    std::mt19937_64* rng) const {
  std::string p = "enc" + std::to_string(layer);
  Var attn = attention(tape, x, x, p + ".attn", false, pad_mask, training, rng);
  x = tape.layer_norm(tape.add(x, attn), leaf(tape, p + ".ln1.g"), leaf(tape, p + ".ln1.b"));
  Var ff = tape.add_rowvec(tape.matmul(x, leaf(tape, p + ".ffn1.w")), leaf(tape, p + ".ffn1.b"));
  ff = tape.gelu(ff);
  ff = tape.add_rowvec(tape.matmul(ff, leaf(tape, p + ".ffn2.w")), leaf(tape, p + ".ffn2.b"));
  if (training && rng) ff = tape.dropout(ff, cfg_.dropout, *rng);
  return tape.layer_norm(tape.add(x, ff), leaf(tape, p + ".ln2.g"), leaf(tape, p + ".ln2.b"));
}

Var TransformerModel::encode_from_embeddings(Tape& tape, Var token_emb, bool training,
                                             std::mt19937_64* rng,
                                             const std::vector<bool>* pad_mask) const {
  const Eigen::Index len = tape.value(token_emb).rows();
  if (len > cfg_.max_seq_len) throw InputError("embedded sequence exceeds max length");
  std::vector<int> positions(static_cast<size_t>(len));
  for (Eigen::Index i = 0; i < len; ++i) positions[static_cast<size_t>(i)] = static_cast<int>(i);
  Var x = tape.add(token_emb, tape.gather_rows(leaf(tape, "emb.pos"), positions));
  x = tape.layer_norm(x, leaf(tape, "emb.ln.g"), leaf(tape, "emb.ln.b"));
  if (training && rng) x = tape.dropout(x, cfg_.dropout, *rng);
  for (int i = 0; i < cfg_.encoder_layers; ++i) {
    x = encoder_layer(tape, x, i, pad_mask, training, rng);
  }
  ++encoder_passes_;
  return x;
}

Var TransformerModel::encode(Tape& tape, const std::vector<int>& ids, bool training,
                             std::mt19937_64* rng, const std::vector<bool>* pad_mask) const {
  auto prepared = prepare_ids(ids);
  return encode_from_embeddings(tape, token_embeddings(tape, prepared), training, rng, pad_mask);
}

Var TransformerModel::mlm_logits(Tape& tape, Var hidden) const {
  return tape.add_rowvec(tape.matmul_nt(hidden, leaf(tape, "emb.tok")),
                         leaf(tape, "mlm.bias"));
}

Var TransformerModel::decoder_layer(Tape& tape, Var x, Var memory, int layer, bool training,
                                    std::mt19937_64* rng) const {
  std::string p = "dec" + std::to_string(layer);
  Var self = attention(tape, x, x, p + ".self", true, nullptr, training, rng);
  x = tape.layer_norm(tape.add(x, self), leaf(tape, p + ".ln1.g"), leaf(tape, p + ".ln1.b"));
  Var cross = attention(tape, x, memory, p + ".cross", false, nullptr, training, rng);
  x = tape.layer_norm(tape.add(x, cross), leaf(tape, p + ".ln2.g"), leaf(tape, p + ".ln2.b"));
  Var ff = tape.add_rowvec(tape.matmul(x, leaf(tape, p + ".ffn1.w")), leaf(tape, p + ".ffn1.b"));
  ff = tape.gelu(ff);
  ff = tape.add_rowvec(tape.matmul(ff, leaf(tape, p + ".ffn2.w")), leaf(tape, p + ".ffn2.b"));
  if (training && rng) ff = tape.dropout(ff, cfg_.dropout, *rng);
  return tape.layer_norm(tape.add(x, ff), leaf(tape, p + ".ln3.g"), leaf(tape, p + ".ln3.b"));
}

Var TransformerModel::decode(Tape& tape, Var encoder_hidden,
                             const std::vector<int>& target_input_ids, bool training,
                             std::mt19937_64* rng) const {
  if (cfg_.decoder_layers == 0) throw InputError("model has no decoder layers");
  auto prepared = prepare_ids(target_input_ids);
  Var x = token_embeddings(tape, prepared);
  const Eigen::Index len = tape.value(x).rows();
  std::vector<int> positions(static_cast<size_t>(len));
  for (Eigen::Index i = 0; i < len; ++i) positions[static_cast<size_t>(i)] = static_cast<int>(i);
  if (len > 0) {
    x = tape.add(x, tape.gather_rows(leaf(tape, "emb.pos"), positions));
    x = tape.layer_norm(x, leaf(tape, "emb.ln.g"), leaf(tape, "emb.ln.b"));
    if (training && rng) x = tape.dropout(x, cfg_.dropout, *rng);
  }
  for (int i = 0; i < cfg_.decoder_layers; ++i) {
    x = decoder_layer(tape, x, encoder_hidden, i, training, rng);
  }
  return x;
}

Var TransformerModel::pos_logits(Tape& tape, Var hidden,
                                 const std::vector<std::pair<int, int>>& word_spans) const {
  const Eigen::Index len = tape.value(hidden).rows();
  std::vector<int> first_subword;
  first_subword.reserve(word_spans.size());
  for (const auto& [begin, end] : word_spans) {
    if (begin < 0 || begin >= end || end > len) throw InputError("word span out of range");
    first_subword.push_back(begin);
  }
  Var rows = tape.gather_rows(hidden, first_subword);
  return tape.add_rowvec(tape.matmul(rows, leaf(tape, "pos_head.w")),
                         leaf(tape, "pos_head.b"));
}

namespace {
constexpr char kCheckpointMagic[] = "SCALCKPT1\n";
}

void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const std::string& tokenizer_hash,
                     const std::vector<const Param*>& params) {
  nlohmann::json header;
  header["config"] = nlohmann::json::parse(model_config_to_json(cfg));
  header["tokenizer_hash"] = tokenizer_hash;
  auto& plist = header["params"] = nlohmann::json::array();
  for (const auto* p : params) {
    plist.push_back({{"name", p->name},
                     {"rows", p->value.rows()},
                     {"cols", p->value.cols()}});
  }
  std::string head = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic) - 1);
  std::uint64_t head_len = head.size();
  out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
  out.write(head.data(), static_cast<std::streamsize>(head.size()));
  for (const auto* p : params) {
    out.write(reinterpret_cast<const char*>(p->value.data()),
              static_cast<std::streamsize>(sizeof(double) * p->value.size()));
  }
}

Checkpoint load_checkpoint(const std::string& path, const std::string& expected_tokenizer_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open checkpoint: " + path);
  char magic[sizeof(kCheckpointMagic) - 1];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw InputError("not a checkpoint file: " + path);
  }
  std::uint64_t head_len = 0;
  in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
  std::string head(head_len, '\0');
  in.read(head.data(), static_cast<std::streamsize>(head_len));
  auto header = nlohmann::json::parse(head);

  Checkpoint ckpt;
  ckpt.config = model_config_from_json(header.at("config").dump());
  ckpt.tokenizer_hash = header.at("tokenizer_hash").get<std::string>();
  if (!expected_tokenizer_hash.empty() && ckpt.tokenizer_hash != expected_tokenizer_hash) {
    throw InputError("checkpoint tokenizer hash " + ckpt.tokenizer_hash +
                     " does not match tokenizer " + expected_tokenizer_hash);
  }
  for (const auto& meta : header.at("params")) {
    Eigen::Index rows = meta.at("rows").get<Eigen::Index>();
    Eigen::Index cols = meta.at("cols").get<Eigen::Index>();
    Matrix m(rows, cols);
    in.read(reinterpret_cast<char*>(m.data()),
            static_cast<std::streamsize>(sizeof(double) * m.size()));
    if (!in) throw InputError("checkpoint truncated: " + path);
    ckpt.tensors[meta.at("name").get<std::string>()] = std::move(m);
  }
  return ckpt;
}

}  // namespace scriptalign::nn
