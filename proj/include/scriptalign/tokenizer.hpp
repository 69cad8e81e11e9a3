#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "scriptalign/corpus.hpp"
#include "scriptalign/lang.hpp"

namespace scriptalign {

// Subword sequence plus the word-index -> subword-span map used for label
// projection and word-embedding pooling. Spans cover only the sentence-word
// region of a composed input, never [CLS]/tags/[SEP].
struct TokenSeq {
  std::vector<int> ids;
  std::vector<std::string> strings;
  std::vector<std::pair<int, int>> word_spans;  // [begin, end) per word
};

struct FragmentationRow {
  std::string view;
  std::size_t token_len = 0;
  double expansion_ratio = 0.0;  // vs original view
  std::size_t fallback_tokens = 0;
};

struct FragmentationStats {
  std::vector<FragmentationRow> rows;  // rows[0] is the original view
};

enum class Task { Mlm, Tlm, Translation, Pos };

std::string task_name(Task t);
Task task_from_name(const std::string& name);

// Universal POS inventory used by the tagging head.
extern const std::vector<std::string> kUposTags;
int upos_index(const std::string& tag);

// Encoder input plus (for translation) the shifted decoder target and (for POS)
// per-word label ids.
struct TaskInput {
  TokenSeq encoder;
  TokenSeq decoder_target;      // translation only: <eng> words [SEP]
  std::vector<int> pos_labels;  // pos only: one label per word span
};

// Byte-level BPE over whitespace pre-segmented pieces. All 256 byte tokens are
// always present, so any input encodes without OOV failures; specials and
// language tags are atomic reserved entries that no merge can touch.
class Tokenizer {
 public:
  struct Config {
    int vocab_size = 32000;
    int min_freq = 2;
    std::vector<std::string> specials = {"[PAD]", "[UNK]", "[CLS]",
                                         "[SEP]", "[MASK]", "[gap]"};
    std::vector<std::string> language_tags = {"<hiero>", "<dem>", "<sah>",
                                              "<boh>", "<eng>"};
    static Config for_languages(const LanguageSet& langs, int vocab_size, int min_freq);
  };

  Tokenizer() = default;

  // Deterministic given identical line order and config.
  static Tokenizer train(const std::vector<std::string>& lines, const Config& cfg);

  TokenSeq encode(const std::string& text) const;
  std::string decode(const std::vector<int>& ids) const;

  int token_id(const std::string& token) const;  // specials/tags only; throws if absent
  const std::string& token(int id) const;
  int vocab_count() const { return static_cast<int>(vocab_.size()); }
  std::size_t merge_count() const { return merges_.size(); }

  bool is_special(int id) const;  // specials + language tags
  bool is_language_tag(int id) const;
  bool is_byte(int id) const;  // raw byte fallback token

  int pad_id() const { return token_id("[PAD]"); }
  int unk_id() const { return token_id("[UNK]"); }
  int cls_id() const { return token_id("[CLS]"); }
  int sep_id() const { return token_id("[SEP]"); }
  int mask_id() const { return token_id("[MASK]"); }
  int gap_id() const { return token_id(kGapToken); }

  int byte_base() const { return special_total_; }
  int merge_base() const { return special_total_ + 256; }

  void save(const std::string& dir) const;
  static Tokenizer load(const std::string& dir);
  std::string manifest_hash() const;

  // Encodes one sentence word so composed sequences keep 1:1 word spans.
  std::vector<int> encode_word(const std::string& word, bool first) const;

  const Config& config() const { return cfg_; }

 private:
  struct Piece {
    std::string bytes;
    int special_id = -1;  // >= 0 when the piece is an atomic special/tag
  };

  std::vector<Piece> pretokenize(const std::string& text) const;
  std::vector<int> encode_piece(const std::string& bytes) const;
  void rebuild_lookup();

  Config cfg_;
  int special_total_ = 0;
  std::vector<std::string> vocab_;
  std::vector<std::pair<int, int>> merges_;
  std::map<std::pair<int, int>, int> merge_rank_;
  std::unordered_map<std::string, int> special_lookup_;
};

// The corpus lines the shared tokenizer trains on: original scripts plus
// English translations. Normalized views are intentionally absent.
std::vector<std::string> bpe_training_lines(const Corpus& corpus);

TokenSeq build_mlm_input(const std::vector<std::string>& words, const std::string& lang,
                         const Tokenizer& tok, const LanguageSet& langs);

// view_words, when set, replace the sentence tokens for the MLM form (they must
// be index-aligned 1:1). TLM/translation/POS always read the original fields.
TaskInput build_task_input(Task task, const CleanSentence& sentence, const Tokenizer& tok,
                           const LanguageSet& langs,
                           const std::optional<std::vector<std::string>>& view_words =
                               std::nullopt);

FragmentationStats fragmentation_report(
    const TokenSeq& original,
    const std::vector<std::pair<std::string, TokenSeq>>& views, const Tokenizer& tok);

std::string format_fragmentation_tsv(const FragmentationStats& stats);

}  // namespace scriptalign
