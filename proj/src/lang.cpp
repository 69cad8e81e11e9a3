#include "scriptalign/lang.hpp"

#include "scriptalign/util.hpp"

namespace scriptalign {

LanguageSet::LanguageSet(std::vector<Language> langs) : langs_(std::move(langs)) {
  for (const auto& l : langs_) {
    if (l.id.empty() || l.tag.empty()) throw InputError("language id/tag must be non-empty");
  }
}

LanguageSet LanguageSet::default_set() {
  return LanguageSet({
      {"hieroglyphic", "<hiero>", "pre-coptic"},
      {"demotic", "<dem>", "pre-coptic"},
      {"sahidic", "<sah>", "coptic"},
      {"bohairic", "<boh>", "coptic"},
      {"english", "<eng>", kPivotBranch},
  });
}

bool LanguageSet::contains(const std::string& id) const {
  for (const auto& l : langs_)
    if (l.id == id) return true;
  return false;
}

const Language& LanguageSet::get(const std::string& id) const {
  for (const auto& l : langs_)
    if (l.id == id) return l;
  throw InputError("unknown language id: " + id);
}

std::optional<Language> LanguageSet::find_by_tag(const std::string& tag) const {
  for (const auto& l : langs_)
    if (l.tag == tag) return l;
  return std::nullopt;
}

std::vector<std::string> LanguageSet::stage_ids() const {
  std::vector<std::string> out;
  for (const auto& l : langs_)
    if (l.branch != kPivotBranch) out.push_back(l.id);
  return out;
}

std::vector<std::string> LanguageSet::tags() const {
  std::vector<std::string> out;
  for (const auto& l : langs_) out.push_back(l.tag);
  return out;
}

bool LanguageSet::same_branch(const std::string& a, const std::string& b) const {
  return get(a).branch == get(b).branch;
}

}  // namespace scriptalign
