#include "scriptalign/normalize.hpp"

#include <algorithm>
#include <cctype>

#include "scriptalign/util.hpp"

namespace scriptalign {

const std::vector<RuleTable::Rule> RuleTable::kNoRules{};
const std::string RuleTable::kNoEpenthesis{};

std::string scheme_name(Scheme s) { return s == Scheme::Latin ? "latin" : "ipa"; }

Scheme scheme_from_name(const std::string& name) {
  if (name == "latin") return Scheme::Latin;
  if (name == "ipa") return Scheme::Ipa;
  throw InputError("unknown scheme: " + name);
}

namespace {

RuleTable::Context context_from_name(const std::string& name) {
  if (name == "any") return RuleTable::Context::Any;
  if (name == "between-consonants") return RuleTable::Context::BetweenConsonants;
  if (name == "word-boundary") return RuleTable::Context::WordBoundary;
  throw InputError("unknown rule context: " + name);
}

bool is_separator_char(const std::string& ch) {
  return ch == "." || ch == "-" || ch == "=" || ch == "⸗";
}

bool is_pass_through(const std::string& ch) {
  if (ch.size() == 1) {
    unsigned char c = static_cast<unsigned char>(ch[0]);
    if (std::isalnum(c)) return true;
  }
  return is_separator_char(ch);
}

enum class UnitKind { Vowel, Consonant, Separator };

// A unit is a vowel iff its rendering starts with a vowel letter; this is how
// the weak-consonant outputs (aa, a, i, u) enter vowel context.
UnitKind classify_output(const std::string& out) {
  if (out.empty()) return UnitKind::Separator;
  auto chars = utf8_chars(out);
  const std::string& head = chars.front();
  if (is_separator_char(head)) return UnitKind::Separator;
  static const std::vector<std::string> kVowelHeads = {"a", "e", "i", "o", "u", "ə"};
  if (std::find(kVowelHeads.begin(), kVowelHeads.end(), head) != kVowelHeads.end()) {
    return UnitKind::Vowel;
  }
  return UnitKind::Consonant;
}

struct Unit {
  std::vector<const RuleTable::Rule*> candidates;  // empty => pass-through char
  std::string pass_char;
  std::string output;
  UnitKind kind = UnitKind::Consonant;
  bool first = false;
  bool last = false;
};

std::vector<Unit> segment_word(const std::string& word, const std::string& lang,
                               const RuleTable& table) {
  const auto& rules = table.rules_for(lang);
  if (rules.empty()) throw InputError("no " + scheme_name(table.scheme()) +
                                      " rules for language: " + lang);
  std::vector<Unit> units;
  size_t pos = 0;
  size_t char_index = 0;
  auto chars = utf8_chars(word);
  // byte offsets per char for pattern matching
  std::vector<size_t> offsets;
  size_t off = 0;
  for (const auto& c : chars) {
    offsets.push_back(off);
    off += c.size();
  }
  offsets.push_back(off);

  while (char_index < chars.size()) {
    pos = offsets[char_index];
    const RuleTable::Rule* matched = nullptr;
    for (const auto& r : rules) {
      if (word.compare(pos, r.pattern.size(), r.pattern) == 0) {
        matched = &r;
        break;
      }
    }
    Unit u;
    if (matched) {
      for (const auto& r : rules) {
        if (r.pattern == matched->pattern) u.candidates.push_back(&r);
      }
      size_t consumed = matched->pattern.size();
      while (char_index < chars.size() && offsets[char_index] < pos + consumed) ++char_index;
      if (offsets[char_index] != pos + consumed) {
        throw InputError("rule pattern '" + matched->pattern +
                         "' splits a codepoint in word '" + word + "'");
      }
    } else if (is_pass_through(chars[char_index])) {
      u.pass_char = chars[char_index];
      ++char_index;
    } else {
      throw InputError("no rule for grapheme '" + chars[char_index] + "' at position " +
                       std::to_string(char_index) + " in word '" + word + "'");
    }
    units.push_back(std::move(u));
  }
  if (!units.empty()) {
    units.front().first = true;
    units.back().last = true;
  }
  return units;
}

// Provisional classes come from each unit's context-free rendering; this is the
// post-weak-consonant string the between-consonants context is defined on.
void resolve_units(std::vector<Unit>& units) {
  std::vector<UnitKind> provisional(units.size());
  for (size_t i = 0; i < units.size(); ++i) {
    std::string out;
    if (units[i].candidates.empty()) {
      out = units[i].pass_char == "⸗" ? "=" : units[i].pass_char;
    } else {
      out = units[i].candidates.front()->replacement;
      for (const auto* r : units[i].candidates) {
        if (r->context == RuleTable::Context::Any) {
          out = r->replacement;
          break;
        }
      }
    }
    provisional[i] = classify_output(out);
  }

  auto neighbor_is_consonant = [&](size_t i, int delta) {
    size_t j = i + static_cast<size_t>(delta);
    if (delta < 0 && i == 0) return false;
    if (j >= units.size()) return false;
    return provisional[j] == UnitKind::Consonant;
  };

  for (size_t i = 0; i < units.size(); ++i) {
    Unit& u = units[i];
    if (u.candidates.empty()) {
      u.output = u.pass_char == "⸗" ? "=" : u.pass_char;
      u.kind = classify_output(u.output);
      continue;
    }
    const RuleTable::Rule* chosen = nullptr;
    for (const auto* r : u.candidates) {
      bool ok = false;
      switch (r->context) {
        case RuleTable::Context::Any: ok = true; break;
        case RuleTable::Context::BetweenConsonants:
          ok = neighbor_is_consonant(i, -1) && neighbor_is_consonant(i, +1);
          break;
        case RuleTable::Context::WordBoundary: ok = u.first || u.last; break;
      }
      if (ok) {
        chosen = r;
        break;
      }
    }
    if (!chosen) {
      throw InputError("no applicable rule for pattern '" + u.candidates.front()->pattern +
                       "' (all contexts unsatisfied)");
    }
    u.output = chosen->replacement;
    u.kind = classify_output(u.output);
  }
}

std::string render(const std::vector<Unit>& units, const std::string& epenthesis) {
  std::string out;
  for (size_t i = 0; i < units.size(); ++i) {
    if (!epenthesis.empty() && i > 0 && units[i - 1].kind == UnitKind::Consonant &&
        units[i].kind == UnitKind::Consonant) {
      out += epenthesis;
    }
    out += units[i].output;
  }
  return out;
}

std::string apply_table(const std::string& word, const std::string& lang,
                        const RuleTable& table, bool epenthesize) {
  auto units = segment_word(word, lang, table);
  resolve_units(units);
  return render(units, epenthesize ? table.epenthesis_for(lang) : std::string());
}

bool latin_output_ok(const std::string& out) {
  for (unsigned char c : out) {
    if (std::isalnum(c) || c == '.' || c == '-' || c == '=') continue;
    return false;
  }
  return true;
}

bool pure_separator_token(const std::string& token) {
  auto chars = utf8_chars(token);
  if (chars.empty()) return false;
  for (const auto& c : chars)
    if (!is_separator_char(c)) return false;
  return true;
}

}  // namespace

RuleTable RuleTable::parse(const std::string& content, Scheme scheme) {
  RuleTable table;
  table.scheme_ = scheme;
  size_t line_no = 0;
  for (const auto& raw : split_on(content, '\n')) {
    ++line_no;
    std::string line = raw;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty() || line[0] == '#') continue;
    auto cols = split_on(line, '\t');
    if (cols.size() != 5) {
      throw InputError("rule table line " + std::to_string(line_no) + ": expected 5 columns");
    }
    if (scheme_from_name(cols[0]) != scheme) continue;  // file may hold both schemes
    const std::string& lang = cols[1];
    if (cols[2] == "@epenthesis") {
      table.epenthesis_[lang] = cols[4];
      continue;
    }
    table.rules_[lang].push_back({cols[2], context_from_name(cols[3]), cols[4]});
  }
  return table;
}

RuleTable RuleTable::load(const std::string& path, Scheme scheme) {
  return parse(read_file(path), scheme);
}

const std::vector<RuleTable::Rule>& RuleTable::rules_for(const std::string& lang) const {
  auto it = rules_.find(lang);
  return it == rules_.end() ? kNoRules : it->second;
}

bool RuleTable::has_language(const std::string& lang) const {
  return rules_.count(lang) > 0;
}

const std::string& RuleTable::epenthesis_for(const std::string& lang) const {
  auto it = epenthesis_.find(lang);
  return it == epenthesis_.end() ? kNoEpenthesis : it->second;
}

std::string normalize_latin(const std::string& word, const std::string& lang,
                            const RuleTable& table) {
  if (table.scheme() != Scheme::Latin) throw InputError("normalize_latin needs a latin table");
  std::string out = apply_table(word, lang, table, false);
  if (!latin_output_ok(out)) {
    throw InputError("latin normalization of '" + word + "' produced non-Latin output '" +
                     out + "'");
  }
  return out;
}

std::string normalize_ipa(const std::string& word, const std::string& lang,
                          const RuleTable& table) {
  if (table.scheme() != Scheme::Ipa) throw InputError("normalize_ipa needs an ipa table");
  return apply_table(word, lang, table, true);
}

NormalizedView normalize_sentence(const CleanSentence& sentence, Scheme scheme,
                                  const RuleTable& table) {
  if (table.scheme() != scheme) throw InputError("rule table scheme mismatch");
  NormalizedView view;
  view.scheme = scheme;
  view.words.reserve(sentence.tokens.size());
  if (sentence.lang == "english") {  // English is never normalized
    view.words = sentence.tokens;
    return view;
  }
  for (size_t i = 0; i < sentence.tokens.size(); ++i) {
    const std::string& token = sentence.tokens[i];
    if (token == kGapToken || pure_separator_token(token)) {
      view.words.push_back(token);
      continue;
    }
    try {
      view.words.push_back(scheme == Scheme::Latin
                               ? normalize_latin(token, sentence.lang, table)
                               : normalize_ipa(token, sentence.lang, table));
    } catch (const InputError& e) {
      throw InputError("word " + std::to_string(i) + ": " + e.what());
    }
  }
  return view;
}

}  // namespace scriptalign
