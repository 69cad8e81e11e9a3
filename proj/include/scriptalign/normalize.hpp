#pragma once

#include <map>
#include <string>
#include <vector>

#include "scriptalign/corpus.hpp"

namespace scriptalign {

enum class Scheme { Latin, Ipa };

std::string scheme_name(Scheme s);
Scheme scheme_from_name(const std::string& name);

// Ordered grapheme rewrite rules; the first applicable rule wins. The file
// format is one rule per row: scheme <TAB> lang <TAB> pattern <TAB> context
// <TAB> replacement, with '#' comment lines. A pattern of "@epenthesis" is a
// per-language directive: insert its replacement between adjacent consonants
// after vocalization (the pre-Coptic vowel-restoration step).
class RuleTable {
 public:
  enum class Context { Any, BetweenConsonants, WordBoundary };

  struct Rule {
    std::string pattern;
    Context context = Context::Any;
    std::string replacement;
  };

  static RuleTable parse(const std::string& content, Scheme scheme);
  static RuleTable load(const std::string& path, Scheme scheme);

  Scheme scheme() const { return scheme_; }
  const std::vector<Rule>& rules_for(const std::string& lang) const;
  bool has_language(const std::string& lang) const;
  const std::string& epenthesis_for(const std::string& lang) const;  // empty if none

 private:
  Scheme scheme_ = Scheme::Latin;
  std::map<std::string, std::vector<Rule>> rules_;
  std::map<std::string, std::string> epenthesis_;
  static const std::vector<Rule> kNoRules;
  static const std::string kNoEpenthesis;
};

// Word-aligned normalized rendering of one sentence.
struct NormalizedView {
  Scheme scheme = Scheme::Latin;
  std::vector<std::string> words;  // 1:1 with the source tokens
};

// Latin transliteration of one word. Output is restricted to basic Latin
// letters, digits and the preserved separators "." "-" "=".
std::string normalize_latin(const std::string& word, const std::string& lang,
                            const RuleTable& table);

// Approximate phonemic rendering: weak consonants become vowels, w between two
// consonants becomes u, and (where the table directs) an epenthetic vowel fills
// remaining consonant clusters.
std::string normalize_ipa(const std::string& word, const std::string& lang,
                          const RuleTable& table);

// Word-count preserving; "[gap]" and pure-separator tokens pass through
// unchanged. English text is never normalized (identity view).
NormalizedView normalize_sentence(const CleanSentence& sentence, Scheme scheme,
                                  const RuleTable& table);

}  // namespace scriptalign
