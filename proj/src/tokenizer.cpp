#include "scriptalign/tokenizer.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <set>
#include <sstream>

#include <json.hpp>

#include "scriptalign/util.hpp"

namespace scriptalign {

namespace {

bool is_ws_byte(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::string escape_token(const std::string& bytes) {
  std::string out;
  for (unsigned char c : bytes) {
    if (c == '\\') {
      out += "\\\\";
    } else if (c >= 0x21 && c <= 0x7E) {
      out += static_cast<char>(c);
    } else {
      char buf[8];
      std::snprintf(buf, sizeof(buf), "\\x%02x", c);
      out += buf;
    }
  }
  return out;
}

std::string unescape_token(const std::string& text) {
  std::string out;
  size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '\\' && i + 1 < text.size()) {
      if (text[i + 1] == '\\') {
        out += '\\';
        i += 2;
        continue;
      }
      if (text[i + 1] == 'x' && i + 3 < text.size()) {
        out += static_cast<char>(std::stoi(text.substr(i + 2, 2), nullptr, 16));
        i += 4;
        continue;
      }
    }
    out += text[i++];
  }
  return out;
}

}  // namespace

std::string task_name(Task t) {
  switch (t) {
    case Task::Mlm: return "mlm";
    case Task::Tlm: return "tlm";
    case Task::Translation: return "trans";
    case Task::Pos: return "pos";
  }
  return "?";
}

Task task_from_name(const std::string& name) {
  if (name == "mlm") return Task::Mlm;
  if (name == "tlm") return Task::Tlm;
  if (name == "trans" || name == "translation") return Task::Translation;
  if (name == "pos") return Task::Pos;
  throw InputError("unknown task: " + name);
}

const std::vector<std::string> kUposTags = {
    "ADJ", "ADP", "ADV",  "AUX",  "CCONJ", "DET",  "INTJ", "NOUN", "NUM",
    "PART", "PRON", "PROPN", "PUNCT", "SCONJ", "SYM", "VERB", "X"};

int upos_index(const std::string& tag) {
  for (size_t i = 0; i < kUposTags.size(); ++i)
    if (kUposTags[i] == tag) return static_cast<int>(i);
  throw InputError("unknown UPOS tag: " + tag);
}

Tokenizer::Config Tokenizer::Config::for_languages(const LanguageSet& langs, int vocab_size,
                                                   int min_freq) {
  Config cfg;
  cfg.vocab_size = vocab_size;
  cfg.min_freq = min_freq;
  cfg.language_tags = langs.tags();
  return cfg;
}

void Tokenizer::rebuild_lookup() {
  special_lookup_.clear();
  special_total_ = static_cast<int>(cfg_.specials.size() + cfg_.language_tags.size());
  for (int i = 0; i < special_total_; ++i) special_lookup_[vocab_[i]] = i;
  merge_rank_.clear();
  for (size_t r = 0; r < merges_.size(); ++r) merge_rank_[merges_[r]] = static_cast<int>(r);
}

Tokenizer Tokenizer::train(const std::vector<std::string>& lines, const Config& cfg) {
  Tokenizer tok;
  tok.cfg_ = cfg;

  const int mandatory = static_cast<int>(cfg.specials.size() + cfg.language_tags.size()) + 256;
  if (cfg.vocab_size < mandatory) {
    throw InputError("vocab_size " + std::to_string(cfg.vocab_size) +
                     " below mandatory token count " + std::to_string(mandatory));
  }
  if (cfg.min_freq < 1) throw InputError("min_freq must be >= 1");

  for (const auto& s : cfg.specials) tok.vocab_.push_back(s);
  for (const auto& t : cfg.language_tags) tok.vocab_.push_back(t);
  for (int b = 0; b < 256; ++b) tok.vocab_.push_back(std::string(1, static_cast<char>(b)));
  tok.rebuild_lookup();

  // Piece inventory in first-seen order keeps training order-deterministic.
  std::unordered_map<std::string, size_t> piece_index;
  std::vector<std::pair<std::vector<int>, long long>> pieces;  // symbols, frequency
  for (const auto& line : lines) {
    for (const auto& piece : tok.pretokenize(line)) {
      if (piece.special_id >= 0) continue;  // atomic, never merged
      auto [it, fresh] = piece_index.try_emplace(piece.bytes, pieces.size());
      if (fresh) {
        std::vector<int> symbols;
        symbols.reserve(piece.bytes.size());
        for (unsigned char c : piece.bytes) symbols.push_back(tok.byte_base() + c);
        pieces.push_back({std::move(symbols), 0});
      }
      pieces[it->second].second += 1;
    }
  }

  using Pair = std::pair<int, int>;
  std::map<Pair, long long> pair_counts;
  std::map<Pair, std::set<size_t>> pair_pieces;
  auto add_piece_pairs = [&](size_t pi, long long sign) {
    const auto& [symbols, freq] = pieces[pi];
    for (size_t i = 0; i + 1 < symbols.size(); ++i) {
      Pair p{symbols[i], symbols[i + 1]};
      pair_counts[p] += sign * freq;
      if (sign > 0) {
        pair_pieces[p].insert(pi);
      }
    }
  };
  for (size_t pi = 0; pi < pieces.size(); ++pi) add_piece_pairs(pi, +1);

  const int merge_budget = cfg.vocab_size - mandatory;
  for (int step = 0; step < merge_budget; ++step) {
    // Highest count wins; ties break on the lexicographically smaller token pair.
    Pair best{-1, -1};
    long long best_count = 0;
    for (const auto& [p, count] : pair_counts) {
      if (count < cfg.min_freq) continue;
      if (count > best_count) {
        best = p;
        best_count = count;
      } else if (count == best_count && best.first >= 0) {
        auto key = std::make_pair(tok.vocab_[p.first], tok.vocab_[p.second]);
        auto best_key = std::make_pair(tok.vocab_[best.first], tok.vocab_[best.second]);
        if (key < best_key) best = p;
      }
    }
    if (best.first < 0) break;

    int new_id = static_cast<int>(tok.vocab_.size());
    tok.vocab_.push_back(tok.vocab_[best.first] + tok.vocab_[best.second]);
    tok.merges_.push_back(best);

    auto affected = pair_pieces[best];  // copy: mutation below edits the index
    for (size_t pi : affected) {
      auto& symbols = pieces[pi].first;
      bool contains = false;
      for (size_t i = 0; i + 1 < symbols.size(); ++i) {
        if (symbols[i] == best.first && symbols[i + 1] == best.second) {
          contains = true;
          break;
        }
      }
      if (!contains) continue;
      add_piece_pairs(pi, -1);
      std::vector<int> merged;
      merged.reserve(symbols.size());
      for (size_t i = 0; i < symbols.size();) {
        if (i + 1 < symbols.size() && symbols[i] == best.first &&
            symbols[i + 1] == best.second) {
          merged.push_back(new_id);
          i += 2;
        } else {
          merged.push_back(symbols[i]);
          ++i;
        }
      }
      symbols = std::move(merged);
      add_piece_pairs(pi, +1);
    }
    pair_counts.erase(best);
    pair_pieces.erase(best);
  }

  tok.rebuild_lookup();
  return tok;
}

std::vector<Tokenizer::Piece> Tokenizer::pretokenize(const std::string& text) const {
  std::vector<Piece> out;
  size_t i = 0;
  const size_t n = text.size();
  while (i < n) {
    size_t ws_end = i;
    while (ws_end < n && is_ws_byte(text[ws_end])) ++ws_end;
    size_t word_end = ws_end;
    while (word_end < n && !is_ws_byte(text[word_end])) ++word_end;

    if (word_end == ws_end) {  // trailing whitespace run
      out.push_back({text.substr(i, ws_end - i), -1});
      i = ws_end;
      continue;
    }
    std::string content = text.substr(ws_end, word_end - ws_end);
    auto it = special_lookup_.find(content);
    if (it != special_lookup_.end()) {
      if (ws_end > i) out.push_back({text.substr(i, ws_end - i), -1});
      out.push_back({content, it->second});
    } else {
      out.push_back({text.substr(i, word_end - i), -1});
    }
    i = word_end;
  }
  return out;
}

std::vector<int> Tokenizer::encode_piece(const std::string& bytes) const {
  std::vector<int> symbols;
  symbols.reserve(bytes.size());
  for (unsigned char c : bytes) symbols.push_back(byte_base() + c);

  while (symbols.size() > 1) {
    int best_rank = -1;
    std::pair<int, int> best{-1, -1};
    for (size_t i = 0; i + 1 < symbols.size(); ++i) {
      auto it = merge_rank_.find({symbols[i], symbols[i + 1]});
      if (it != merge_rank_.end() && (best_rank < 0 || it->second < best_rank)) {
        best_rank = it->second;
        best = it->first;
      }
    }
    if (best_rank < 0) break;
    int merged_id = merge_base() + best_rank;
    std::vector<int> next;
    next.reserve(symbols.size());
    for (size_t i = 0; i < symbols.size();) {
      if (i + 1 < symbols.size() && symbols[i] == best.first && symbols[i + 1] == best.second) {
        next.push_back(merged_id);
        i += 2;
      } else {
        next.push_back(symbols[i]);
        ++i;
      }
    }
    symbols = std::move(next);
  }
  return symbols;
}

TokenSeq Tokenizer::encode(const std::string& text) const {
  TokenSeq seq;
  for (const auto& piece : pretokenize(text)) {
    int begin = static_cast<int>(seq.ids.size());
    if (piece.special_id >= 0) {
      seq.ids.push_back(piece.special_id);
    } else {
      for (int id : encode_piece(piece.bytes)) seq.ids.push_back(id);
    }
    seq.word_spans.push_back({begin, static_cast<int>(seq.ids.size())});
  }
  seq.strings.reserve(seq.ids.size());
  for (int id : seq.ids) seq.strings.push_back(vocab_[id]);
  return seq;
}

std::string Tokenizer::decode(const std::vector<int>& ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= vocab_count()) throw InputError("decode: id out of range");
    out += vocab_[id];
  }
  return out;
}

int Tokenizer::token_id(const std::string& token) const {
  auto it = special_lookup_.find(token);
  if (it == special_lookup_.end()) throw InputError("not a reserved token: " + token);
  return it->second;
}

const std::string& Tokenizer::token(int id) const {
  if (id < 0 || id >= vocab_count()) throw InputError("token id out of range");
  return vocab_[id];
}

bool Tokenizer::is_special(int id) const { return id >= 0 && id < special_total_; }

bool Tokenizer::is_language_tag(int id) const {
  return id >= static_cast<int>(cfg_.specials.size()) && id < special_total_;
}

bool Tokenizer::is_byte(int id) const { return id >= byte_base() && id < merge_base(); }

void Tokenizer::save(const std::string& dir) const {
  std::string vocab_blob;
  for (const auto& t : vocab_) {
    vocab_blob += escape_token(t);
    vocab_blob += "\n";
  }
  std::string merges_blob;
  for (const auto& [a, b] : merges_) {
    merges_blob += escape_token(vocab_[a]) + " " + escape_token(vocab_[b]) + "\n";
  }
  nlohmann::json manifest;
  manifest["specials"] = cfg_.specials;
  manifest["language_tags"] = cfg_.language_tags;
  manifest["vocab_size"] = cfg_.vocab_size;
  manifest["min_freq"] = cfg_.min_freq;
  manifest["merge_count"] = merges_.size();

  write_file(dir + "/vocab.txt", vocab_blob);
  write_file(dir + "/merges.txt", merges_blob);
  write_file(dir + "/manifest.json", manifest.dump(2) + "\n");
}

Tokenizer Tokenizer::load(const std::string& dir) {
  Tokenizer tok;
  auto manifest = nlohmann::json::parse(read_file(dir + "/manifest.json"));
  tok.cfg_.specials = manifest.at("specials").get<std::vector<std::string>>();
  tok.cfg_.language_tags = manifest.at("language_tags").get<std::vector<std::string>>();
  tok.cfg_.vocab_size = manifest.at("vocab_size").get<int>();
  tok.cfg_.min_freq = manifest.at("min_freq").get<int>();

  for (const auto& line : read_lines(dir + "/vocab.txt")) {
    if (!line.empty()) tok.vocab_.push_back(unescape_token(line));
  }
  tok.special_total_ = static_cast<int>(tok.cfg_.specials.size() + tok.cfg_.language_tags.size());
  const int expected_min = tok.special_total_ + 256;
  if (static_cast<int>(tok.vocab_.size()) < expected_min) {
    throw InputError("vocab.txt too small for manifest configuration");
  }
  std::unordered_map<std::string, int> by_string;
  for (size_t i = 0; i < tok.vocab_.size(); ++i) by_string[tok.vocab_[i]] = static_cast<int>(i);
  for (const auto& line : read_lines(dir + "/merges.txt")) {
    if (line.empty()) continue;
    auto parts = split_ws(line);
    if (parts.size() != 2) throw InputError("bad merges line: " + line);
    tok.merges_.push_back({by_string.at(unescape_token(parts[0])),
                           by_string.at(unescape_token(parts[1]))});
  }
  tok.rebuild_lookup();
  return tok;
}

std::string Tokenizer::manifest_hash() const {
  std::uint64_t h = fnv1a64("tokenizer-v1");
  for (const auto& t : vocab_) h = fnv1a64(t, fnv1a64("\x1f", h));
  for (const auto& [a, b] : merges_) {
    h = mix_seed(h, static_cast<std::uint64_t>(a), static_cast<std::uint64_t>(b));
  }
  for (const auto& s : cfg_.specials) h = fnv1a64(s, h);
  for (const auto& t : cfg_.language_tags) h = fnv1a64(t, h);
  return hex64(h);
}

std::vector<int> Tokenizer::encode_word(const std::string& word, bool first) const {
  auto it = special_lookup_.find(word);
  if (it != special_lookup_.end()) return {it->second};
  return encode_piece(first ? word : " " + word);
}

std::vector<std::string> bpe_training_lines(const Corpus& corpus) {
  std::vector<std::string> lines;
  lines.reserve(corpus.size() * 2);
  for (const auto& s : corpus) {
    lines.push_back(s.text());
    if (!s.translation.empty()) lines.push_back(s.translation_text());
  }
  return lines;
}

namespace {

void append_words(TokenSeq& seq, const std::vector<std::string>& words, const Tokenizer& tok,
                  bool record_spans) {
  for (size_t w = 0; w < words.size(); ++w) {
    int begin = static_cast<int>(seq.ids.size());
    for (int id : tok.encode_word(words[w], w == 0)) seq.ids.push_back(id);
    if (record_spans) seq.word_spans.push_back({begin, static_cast<int>(seq.ids.size())});
  }
}

void finish_strings(TokenSeq& seq, const Tokenizer& tok) {
  seq.strings.clear();
  seq.strings.reserve(seq.ids.size());
  for (int id : seq.ids) seq.strings.push_back(tok.token(id));
}

}  // namespace

TokenSeq build_mlm_input(const std::vector<std::string>& words, const std::string& lang,
                         const Tokenizer& tok, const LanguageSet& langs) {
  TokenSeq seq;
  seq.ids.push_back(tok.cls_id());
  seq.ids.push_back(tok.token_id(langs.get(lang).tag));
  append_words(seq, words, tok, true);
  seq.ids.push_back(tok.sep_id());
  finish_strings(seq, tok);
  return seq;
}

TaskInput build_task_input(Task task, const CleanSentence& sentence, const Tokenizer& tok,
                           const LanguageSet& langs,
                           const std::optional<std::vector<std::string>>& view_words) {
  if (view_words && view_words->size() != sentence.tokens.size()) {
    throw InputError("view words not aligned with sentence tokens (doc " + sentence.doc_id +
                     ")");
  }
  const std::vector<std::string>& mlm_words = view_words ? *view_words : sentence.tokens;

  TaskInput out;
  switch (task) {
    case Task::Mlm:
      out.encoder = build_mlm_input(mlm_words, sentence.lang, tok, langs);
      break;
    case Task::Tlm: {
      if (sentence.translation.empty()) {
        throw InputError("tlm requires a translation (doc " + sentence.doc_id + ")");
      }
      out.encoder = build_mlm_input(sentence.tokens, sentence.lang, tok, langs);
      out.encoder.strings.clear();
      out.encoder.ids.push_back(tok.token_id(langs.get("english").tag));
      append_words(out.encoder, sentence.translation, tok, false);
      out.encoder.ids.push_back(tok.sep_id());
      finish_strings(out.encoder, tok);
      break;
    }
    case Task::Translation: {
      if (sentence.translation.empty()) {
        throw InputError("translation requires a translation (doc " + sentence.doc_id + ")");
      }
      out.encoder = build_mlm_input(sentence.tokens, sentence.lang, tok, langs);
      out.decoder_target.ids.push_back(tok.token_id(langs.get("english").tag));
      append_words(out.decoder_target, sentence.translation, tok, false);
      out.decoder_target.ids.push_back(tok.sep_id());
      finish_strings(out.decoder_target, tok);
      break;
    }
    case Task::Pos: {
      if (!sentence.upos) {
        throw InputError("pos requires upos tags (doc " + sentence.doc_id + ")");
      }
      out.encoder = build_mlm_input(sentence.tokens, sentence.lang, tok, langs);
      for (const auto& tag : *sentence.upos) out.pos_labels.push_back(upos_index(tag));
      break;
    }
  }
  return out;
}

FragmentationStats fragmentation_report(
    const TokenSeq& original, const std::vector<std::pair<std::string, TokenSeq>>& views,
    const Tokenizer& tok) {
  FragmentationStats stats;
  auto fallback_count = [&](const TokenSeq& seq) {
    std::size_t n = 0;
    for (int id : seq.ids)
      if (tok.is_byte(id)) ++n;
    return n;
  };
  const double base = original.ids.empty() ? 1.0 : static_cast<double>(original.ids.size());
  stats.rows.push_back({"original", original.ids.size(), 1.0, fallback_count(original)});
  for (const auto& [name, seq] : views) {
    stats.rows.push_back({name, seq.ids.size(), static_cast<double>(seq.ids.size()) / base,
                          fallback_count(seq)});
  }
  return stats;
}

std::string format_fragmentation_tsv(const FragmentationStats& stats) {
  std::ostringstream out;
  out << "view\ttokens\texpansion\tfallback\n";
  for (const auto& r : stats.rows) {
    out << r.view << "\t" << r.token_len << "\t" << format_fixed(r.expansion_ratio, 3) << "\t"
        << r.fallback_tokens << "\n";
  }
  return out.str();
}

}  // namespace scriptalign
