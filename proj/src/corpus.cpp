#include "scriptalign/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <random>
#include <sstream>

#include <json.hpp>

#include "scriptalign/tokenizer.hpp"
#include "scriptalign/util.hpp"

namespace scriptalign {

namespace {

// Longest marker first so "<gap>" wins over a bare "..." scan at the same spot.
const std::vector<std::string> kLacunaMarkers = {"<gap>", "---", "..."};

std::string replace_lacunae(const std::string& text) {
  std::string out;
  size_t i = 0;
  while (i < text.size()) {
    bool matched = false;
    for (const auto& m : kLacunaMarkers) {
      if (text.compare(i, m.size(), m) == 0) {
        out += " ";
        out += kGapToken;
        out += " ";
        i += m.size();
        matched = true;
        break;
      }
    }
    if (!matched) {
      out += text[i];
      ++i;
    }
  }
  return out;
}

}  // namespace

std::string CleanSentence::text() const { return join(tokens, " "); }
std::string CleanSentence::translation_text() const { return join(translation, " "); }

CleanSentence clean_sentence(const std::string& raw_text, const std::string& lang,
                             const std::string& translation,
                             const std::optional<std::vector<std::string>>& upos,
                             const LanguageSet& langs, const std::string& doc_id) {
  if (!langs.contains(lang)) throw InputError("unknown language id: " + lang);
  std::string trimmed = trim(raw_text);
  if (trimmed.empty()) throw InputError("empty sentence text (doc " + doc_id + ")");

  CleanSentence s;
  s.lang = lang;
  s.doc_id = doc_id;
  s.tokens = split_ws(replace_lacunae(trimmed));
  s.translation = split_ws(translation);
  if (upos) {
    if (upos->size() != s.tokens.size()) {
      throw InputError("upos length " + std::to_string(upos->size()) + " != token count " +
                       std::to_string(s.tokens.size()) + " (doc " + doc_id + ")");
    }
    s.upos = upos;
  }
  return s;
}

Corpus parse_records(const std::vector<std::string>& lines, const LanguageSet& langs,
                     std::vector<RecordError>& errors) {
  Corpus corpus;
  for (size_t i = 0; i < lines.size(); ++i) {
    const std::string& line = lines[i];
    if (trim(line).empty()) continue;
    try {
      auto j = nlohmann::json::parse(line);
      std::string lang = j.at("lang").get<std::string>();
      std::string text = j.at("text").get<std::string>();
      std::string translation = j.value("translation", std::string());
      std::string doc_id = j.value("doc_id", std::string());
      std::optional<std::vector<std::string>> upos;
      if (j.contains("upos") && !j["upos"].is_null()) {
        upos = j["upos"].get<std::vector<std::string>>();
      }
      corpus.push_back(clean_sentence(text, lang, translation, upos, langs, doc_id));
    } catch (const std::exception& e) {
      errors.push_back({i + 1, e.what(), line});
    }
  }
  return corpus;
}

LoadResult load_corpus(const std::string& path, const LanguageSet& langs) {
  LoadResult result;
  auto lines = read_lines(path);
  result.sentences = parse_records(lines, langs, result.errors);
  if (result.sentences.empty()) {
    throw InputError("no valid records in " + path + " (" +
                     std::to_string(result.errors.size()) + " malformed lines)");
  }
  return result;
}

std::string to_record_line(const CleanSentence& s) {
  nlohmann::json j;
  j["lang"] = s.lang;
  j["text"] = s.text();
  j["translation"] = s.translation_text();
  if (s.upos) j["upos"] = *s.upos;
  if (!s.doc_id.empty()) j["doc_id"] = s.doc_id;
  return j.dump();
}

void write_corpus(const std::string& path, const Corpus& corpus) {
  std::string blob;
  for (const auto& s : corpus) {
    blob += to_record_line(s);
    blob += "\n";
  }
  write_file(path, blob);
}

SplitResult split_corpus(const Corpus& corpus, const std::array<double, 3>& ratios,
                         std::uint64_t seed) {
  double ratio_sum = ratios[0] + ratios[1] + ratios[2];
  if (ratios[0] <= 0 || ratios[1] <= 0 || ratios[2] <= 0 || std::abs(ratio_sum - 1.0) > 1e-9) {
    throw InputError("split ratios must be positive and sum to 1");
  }

  // Stable key = (lang, original index); shuffle happens per language bucket so
  // the result is independent of any outer parallelism over records.
  std::map<std::string, std::vector<size_t>> buckets;
  for (size_t i = 0; i < corpus.size(); ++i) buckets[corpus[i].lang].push_back(i);

  for (const auto& [lang, idx] : buckets) {
    if (idx.size() < 3) {
      throw InputError("language " + lang + " has only " + std::to_string(idx.size()) +
                       " sentences; need at least 3 to split");
    }
  }

  std::vector<int> assignment(corpus.size(), 0);
  for (auto& [lang, idx] : buckets) {
    std::mt19937_64 rng(mix_seed(seed, fnv1a64(lang)));
    std::shuffle(idx.begin(), idx.end(), rng);

    // Largest-remainder allocation keeps each split within one sentence of its quota.
    const size_t n = idx.size();
    std::array<double, 3> quota{};
    std::array<size_t, 3> count{};
    size_t assigned = 0;
    for (int k = 0; k < 3; ++k) {
      quota[k] = ratios[k] * static_cast<double>(n);
      count[k] = static_cast<size_t>(std::floor(quota[k]));
      assigned += count[k];
    }
    std::array<int, 3> order{0, 1, 2};
    std::sort(order.begin(), order.end(), [&](int a, int b) {
      double ra = quota[a] - std::floor(quota[a]);
      double rb = quota[b] - std::floor(quota[b]);
      if (ra != rb) return ra > rb;
      return a < b;
    });
    for (size_t r = 0; assigned < n; ++r, ++assigned) count[order[r % 3]]++;

    size_t cursor = 0;
    for (int k = 0; k < 3; ++k) {
      for (size_t c = 0; c < count[k]; ++c) assignment[idx[cursor++]] = k;
    }
  }

  SplitResult out;
  for (size_t i = 0; i < corpus.size(); ++i) {
    switch (assignment[i]) {
      case 0: out.train.push_back(corpus[i]); break;
      case 1: out.val.push_back(corpus[i]); break;
      default: out.test.push_back(corpus[i]); break;
    }
  }
  return out;
}

CorpusStats corpus_stats(const Corpus& corpus, const Tokenizer& tokenizer,
                         const LanguageSet& langs) {
  if (corpus.empty()) throw InputError("corpus_stats: empty corpus");

  std::map<std::string, LanguageStats> per_lang;
  for (const auto& id : langs.stage_ids()) per_lang[id] = {id, 0, 0.0, 0, 0.0};

  CorpusStats stats;
  stats.total = {"TOTAL", 0, 100.0, 0, 100.0};
  for (const auto& s : corpus) {
    auto it = per_lang.find(s.lang);
    if (it == per_lang.end()) continue;  // pivot-only records do not get a row
    TokenSeq seq = tokenizer.encode(s.text());
    size_t n = 0;
    for (int id : seq.ids)
      if (!tokenizer.is_special(id)) ++n;
    it->second.sentences += 1;
    it->second.tokens += n;
    stats.total.sentences += 1;
    stats.total.tokens += n;
  }

  for (const auto& id : langs.stage_ids()) {
    LanguageStats row = per_lang[id];
    row.sentence_pct = stats.total.sentences
                           ? 100.0 * static_cast<double>(row.sentences) /
                                 static_cast<double>(stats.total.sentences)
                           : 0.0;
    row.token_pct = stats.total.tokens ? 100.0 * static_cast<double>(row.tokens) /
                                             static_cast<double>(stats.total.tokens)
                                       : 0.0;
    stats.rows.push_back(row);
  }
  return stats;
}

std::string format_stats_tsv(const CorpusStats& stats) {
  std::ostringstream out;
  out << "lang\tsentences\tsent_pct\ttokens\ttok_pct\n";
  auto emit = [&](const LanguageStats& r) {
    out << r.lang << "\t" << r.sentences << "\t" << format_fixed(r.sentence_pct, 1) << "\t"
        << r.tokens << "\t" << format_fixed(r.token_pct, 1) << "\n";
  };
  for (const auto& r : stats.rows) emit(r);
  emit(stats.total);
  return out.str();
}

}  // namespace scriptalign
