#pragma once

#include <optional>
#include <string>
#include <vector>

namespace scriptalign {

// One historical language stage (or the pivot language) known to a run.
struct Language {
  std::string id;      // e.g. "hieroglyphic"
  std::string tag;     // sequence tag, e.g. "<hiero>"
  std::string branch;  // e.g. "pre-coptic" / "coptic" / "pivot"
};

// The configured set of language stages. All modules resolve ids and tags
// through this instead of hard-coding the default four-stage setup.
class LanguageSet {
 public:
  LanguageSet() = default;
  explicit LanguageSet(std::vector<Language> langs);

  // Hieroglyphic/Demotic (pre-coptic) + Sahidic/Bohairic (coptic) + English pivot.
  static LanguageSet default_set();

  bool contains(const std::string& id) const;
  const Language& get(const std::string& id) const;
  std::optional<Language> find_by_tag(const std::string& tag) const;
  const std::vector<Language>& all() const { return langs_; }

  // Non-pivot stages, in configured order.
  std::vector<std::string> stage_ids() const;
  std::vector<std::string> tags() const;
  bool same_branch(const std::string& a, const std::string& b) const;

  static constexpr const char* kPivotBranch = "pivot";

 private:
  std::vector<Language> langs_;
};

}  // namespace scriptalign
