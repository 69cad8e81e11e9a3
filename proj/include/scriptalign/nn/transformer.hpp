#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "scriptalign/nn/tape.hpp"

namespace scriptalign::nn {

struct ModelConfig {
  int encoder_layers = 2;
  int decoder_layers = 2;
  int hidden = 64;
  int heads = 4;
  int max_seq_len = 128;
  int vocab = 0;
  int ffn = 0;            // 0 => 4 * hidden
  double dropout = 0.1;
  int pos_labels = 17;    // UPOS inventory width
  enum class Overlength { Truncate, Reject };
  Overlength on_overlength = Overlength::Reject;

  int ffn_size() const { return ffn > 0 ? ffn : 4 * hidden; }
  void validate() const;

  static ModelConfig desk_scale(int vocab);
  static ModelConfig paper_scale(int vocab);
};

std::string model_config_to_json(const ModelConfig& cfg);
ModelConfig model_config_from_json(const std::string& json_text);

// Compact transformer encoder-decoder. One embedding matrix feeds the encoder
// input, the decoder input, and (transposed) the MLM/LM output projection.
class TransformerModel {
 public:
  TransformerModel(ModelConfig cfg, std::uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Truncates or rejects over-length sequences per config.
  std::vector<int> prepare_ids(const std::vector<int>& ids) const;

  Var token_embeddings(Tape& tape, const std::vector<int>& ids) const;

  // Adds learned positions, applies embedding LayerNorm + dropout, then the
  // encoder stack. pad_mask (optional, per position, true = padding) removes
  // positions from attention.
  Var encode_from_embeddings(Tape& tape, Var token_emb, bool training, std::mt19937_64* rng,
                             const std::vector<bool>* pad_mask = nullptr) const;
  Var encode(Tape& tape, const std::vector<int>& ids, bool training = false,
             std::mt19937_64* rng = nullptr, const std::vector<bool>* pad_mask = nullptr) const;

  // Tied projection: logits = hidden * E^T + bias.
  Var mlm_logits(Tape& tape, Var hidden) const;

  // Causal decoder over the shifted target; cross-attends to encoder states.
  Var decode(Tape& tape, Var encoder_hidden, const std::vector<int>& target_input_ids,
             bool training = false, std::mt19937_64* rng = nullptr) const;
  Var lm_logits(Tape& tape, Var decoder_hidden) const { return mlm_logits(tape, decoder_hidden); }

  // One logit row per word (first-subword convention).
  Var pos_logits(Tape& tape, Var hidden, const std::vector<std::pair<int, int>>& word_spans) const;

  std::size_t encoder_passes() const { return encoder_passes_; }
  void reset_pass_counter() const { encoder_passes_ = 0; }

 private:
  Var attention(Tape& tape, Var queries_src, Var keys_values_src, const std::string& prefix,
                bool causal, const std::vector<bool>* pad_mask, bool training,
                std::mt19937_64* rng) const;
  Var encoder_layer(Tape& tape, Var x, int layer, const std::vector<bool>* pad_mask,
                    bool training, std::mt19937_64* rng) const;
  Var decoder_layer(Tape& tape, Var x, Var memory, int layer, bool training,
                    std::mt19937_64* rng) const;
  Var leaf(Tape& tape, const std::string& name) const;

  ModelConfig cfg_;
  mutable ParamStore params_;
  mutable std::size_t encoder_passes_ = 0;
};

// Checkpoint = config + tokenizer manifest hash + every named tensor.
void save_checkpoint(const std::string& path, const ModelConfig& cfg,
                     const std::string& tokenizer_hash, const std::vector<const Param*>& params);

struct Checkpoint {
  ModelConfig config;
  std::string tokenizer_hash;
  std::map<std::string, Matrix> tensors;
};

// Refuses to load when expected_tokenizer_hash is non-empty and differs.
Checkpoint load_checkpoint(const std::string& path, const std::string& expected_tokenizer_hash);

}  // namespace scriptalign::nn
