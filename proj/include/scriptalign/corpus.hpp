#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "scriptalign/lang.hpp"

namespace scriptalign {

class Tokenizer;

// One attested sentence after cleaning. Tokens are surface word tokens with
// linguistic separators (".", "⸗", "-") kept in place; lacunae appear only as
// the canonical "[gap]" token.
struct CleanSentence {
  std::string lang;
  std::vector<std::string> tokens;
  std::vector<std::string> translation;  // English word tokens, may be empty
  std::optional<std::vector<std::string>> upos;
  std::string doc_id;

  std::string text() const;              // tokens joined by single spaces
  std::string translation_text() const;  // translation joined by single spaces
};

using Corpus = std::vector<CleanSentence>;

inline constexpr const char* kGapToken = "[gap]";

struct RecordError {
  std::size_t line_no = 0;  // 1-based
  std::string message;
  std::string raw;
};

struct LoadResult {
  Corpus sentences;
  std::vector<RecordError> errors;
};

struct SplitResult {
  Corpus train;
  Corpus val;
  Corpus test;
};

struct LanguageStats {
  std::string lang;
  std::size_t sentences = 0;
  double sentence_pct = 0.0;
  std::size_t tokens = 0;
  double token_pct = 0.0;
};

struct CorpusStats {
  std::vector<LanguageStats> rows;  // one per configured stage, in order
  LanguageStats total;
};

// Standardizes lacuna markers ("---", "...", "<gap>") into one "[gap]" token
// per marker occurrence and whitespace-tokenizes the rest. Throws InputError
// on unknown language, empty text, or a upos/token length mismatch.
CleanSentence clean_sentence(const std::string& raw_text, const std::string& lang,
                             const std::string& translation,
                             const std::optional<std::vector<std::string>>& upos,
                             const LanguageSet& langs, const std::string& doc_id = "");

// Reads the line-delimited record format {lang, text, translation, upos?, doc_id?}.
// Malformed lines land in the error report, valid lines are cleaned. Throws if
// the file is unreadable or contains zero valid records.
LoadResult load_corpus(const std::string& path, const LanguageSet& langs);

Corpus parse_records(const std::vector<std::string>& lines, const LanguageSet& langs,
                     std::vector<RecordError>& errors);

std::string to_record_line(const CleanSentence& s);
void write_corpus(const std::string& path, const Corpus& corpus);

// Deterministic per-language stratified split. Ratios must be positive and sum
// to 1; every language needs at least 3 sentences.
SplitResult split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios,
                         std::uint64_t seed);

// Token counts use the shared tokenizer and exclude special and language-tag ids.
CorpusStats corpus_stats(const Corpus& corpus, const Tokenizer& tokenizer,
                         const LanguageSet& langs);

std::string format_stats_tsv(const CorpusStats& stats);

}  // namespace scriptalign
